//! Analytic ground truth and stand-in predictors for end-to-end checks
//! without trained weights.

mod predictors;
mod shape;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use predictors::{head_for_radii, OraclePredictor, ToyPredictor};
pub use shape::{
    case_from_text, case_to_text, gen_case, AlphaSpec, Boundary, Corruption, Harmonic, PlacedShape, SyntheticCase,
    SyntheticShapeSpec, ALPHA_RANGE, BACKGROUND_INTENSITY, CUP_INTENSITY, DISC_INTENSITY, DISC_RADIUS_RANGE,
    MAX_HARMONIC_ORDER,
};

use crate::error::{Error, Result};
use crate::geometry::PolarGridSpec;
use crate::io::{fmt_sig, profiles_to_csv, write_mask, write_ppm, write_text};
use crate::tta::axis_offsets;

pub const IMAGE_FILE: &str = "image.ppm";
pub const DISC_GT_FILE: &str = "disc_gt.pgm";
pub const CUP_GT_FILE: &str = "cup_gt.pgm";
pub const DISC_PRED_FILE: &str = "disc_pred.pgm";
pub const CUP_PRED_FILE: &str = "cup_pred.pgm";
pub const RADII_FILE: &str = "radii.csv";
pub const CASE_FILE: &str = "case.cfg";

/// How a seeded suite draws its shapes and corruptions.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub count: usize,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    /// Offset magnitudes; each case picks one of the axis-aligned offsets they span.
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
    pub noise_sigma: f64,
}

impl SuiteConfig {
    pub fn clean(count: usize, seed: u64) -> Self {
        Self { count, seed, height: 256, width: 256, offsets: vec![0.0], scales: vec![1.0], noise_sigma: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub name: String,
    pub spec: SyntheticShapeSpec,
    pub corruption: Corruption,
}

/// Deterministic per-case specs and corruptions for a suite.
pub fn suite_entries(cfg: &SuiteConfig) -> Result<Vec<SuiteEntry>> {
    let offsets = axis_offsets(&cfg.offsets)?;
    if cfg.scales.is_empty() || cfg.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter("corruption scales must be a non-empty list of positives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.count)
        .map(|k| {
            let case_seed: u64 = rng.random();
            let (dx, dy) = offsets[rng.random_range(0..offsets.len())];
            let scale = cfg.scales[rng.random_range(0..cfg.scales.len())];
            Ok(SuiteEntry {
                name: format!("case_{k:04}"),
                spec: SyntheticShapeSpec::random(case_seed),
                corruption: Corruption { dx, dy, scale, noise_sigma: cfg.noise_sigma },
            })
        })
        .collect()
}

pub fn manifest_header() -> &'static str {
    "case,seed,r0,harmonics,alpha_mean,dx,dy,scale,noise\n"
}

pub fn manifest_row(e: &SuiteEntry) -> String {
    let alpha = match &e.spec.alpha {
        AlphaSpec::Constant(a) | AlphaSpec::Fourier { mean: a, .. } => *a,
    };
    format!(
        "{},{},{},{},{},{},{},{},{}\n",
        e.name,
        e.spec.seed,
        fmt_sig(e.spec.r0),
        e.spec.harmonics.len(),
        fmt_sig(alpha),
        fmt_sig(e.corruption.dx),
        fmt_sig(e.corruption.dy),
        fmt_sig(e.corruption.scale),
        fmt_sig(e.corruption.noise_sigma)
    )
}

/// Write the on-disk layout of one case into `dir` (created if needed).
pub fn write_case(dir: &Path, case: &SyntheticCase) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_ppm(&dir.join(IMAGE_FILE), &case.image)?;
    write_mask(&dir.join(DISC_GT_FILE), &case.disc_mask)?;
    write_mask(&dir.join(CUP_GT_FILE), &case.cup_mask)?;
    let n = case.disc_radius.len();
    let frame = PolarGridSpec::for_crop(case.height(), case.width(), 2, n)?;
    let csv = profiles_to_csv(
        &frame.thetas(),
        &[("r_disc", &case.disc_radius), ("r_cup", &case.cup_radius), ("rim", &case.rim)],
    )?;
    write_text(&dir.join(RADII_FILE), &csv)?;
    write_text(&dir.join(CASE_FILE), &case_to_text(case.spec(), &case.corruption, case.height(), case.width()))
}

/// Regenerate the synthetic case described by `dir/case.cfg`.
pub fn load_case(dir: &Path) -> Result<SyntheticCase> {
    let text = std::fs::read_to_string(dir.join(CASE_FILE))?;
    let (spec, corruption, (h, w)) = case_from_text(&text)?;
    gen_case(&spec, corruption, h, w)
}
