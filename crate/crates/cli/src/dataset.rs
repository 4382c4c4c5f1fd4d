//! One-directory-per-case dataset layout and per-case prediction.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::warn;
use polarshape::io::{read_image, read_mask};
use polarshape::pipeline::{predict_in_frame, render_masks, Decoded};
use polarshape::synth::{
    load_case, OraclePredictor, ToyPredictor, CUP_GT_FILE, CUP_PRED_FILE, DISC_GT_FILE, DISC_PRED_FILE, IMAGE_FILE,
};
use polarshape::{BinaryMask, CartesianImage, PolarGridSpec, Predictor, RunConfig};
use rayon::prelude::*;

use crate::{PredictorKind, UsageError};

/// Case subdirectories in name order. An empty or unreadable dataset is an error.
pub fn case_dirs(dataset: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dataset).with_context(|| format!("reading dataset {}", dataset.display()))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        bail!("dataset {} contains no case directories", dataset.display());
    }
    Ok(dirs)
}

pub fn case_name(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string())
}

/// Image and ground truth of one case plus its base polar frame.
pub struct CaseInputs {
    pub dir: PathBuf,
    pub image: CartesianImage,
    pub disc_gt: BinaryMask,
    pub cup_gt: BinaryMask,
    pub frame: PolarGridSpec,
}

impl CaseInputs {
    pub fn load(dir: &Path, config: &RunConfig) -> Result<Self> {
        let image = read_image(&dir.join(IMAGE_FILE)).with_context(|| format!("reading {IMAGE_FILE}"))?;
        let disc_gt = read_mask(&dir.join(DISC_GT_FILE)).with_context(|| format!("reading {DISC_GT_FILE}"))?;
        let cup_gt = read_mask(&dir.join(CUP_GT_FILE)).with_context(|| format!("reading {CUP_GT_FILE}"))?;
        for (name, m) in [(DISC_GT_FILE, &disc_gt), (CUP_GT_FILE, &cup_gt)] {
            if (m.height(), m.width()) != (image.height(), image.width()) {
                bail!("{name} is {}x{} but the image is {}x{}", m.height(), m.width(), image.height(), image.width());
            }
        }
        let frame = config.frame(image.height(), image.width())?;
        Ok(Self { dir: dir.to_path_buf(), image, disc_gt, cup_gt, frame })
    }

    pub fn predicted_masks(&self) -> Result<(BinaryMask, BinaryMask)> {
        let disc = read_mask(&self.dir.join(DISC_PRED_FILE)).with_context(|| format!("reading {DISC_PRED_FILE}"))?;
        let cup = read_mask(&self.dir.join(CUP_PRED_FILE)).with_context(|| format!("reading {CUP_PRED_FILE}"))?;
        Ok((disc, cup))
    }

    pub fn decode(&self, predictor: &dyn Predictor, config: &RunConfig) -> Result<Decoded> {
        Ok(predict_in_frame(&self.image, predictor, &self.frame, &config.decode)?)
    }

    /// Disc and cup masks from `kind`, rendered in the base frame for model predictors.
    pub fn masks(&self, kind: PredictorKind, config: &RunConfig) -> Result<(BinaryMask, BinaryMask)> {
        match model_predictor(kind, &self.dir, config)? {
            None => self.predicted_masks(),
            Some(p) => {
                let d = self.decode(p.as_ref(), config)?;
                Ok(render_masks(&d.nested, &self.frame, config.mask_threshold))
            }
        }
    }
}

/// The predictor behind `kind`, or `None` for precomputed masks.
pub fn model_predictor(kind: PredictorKind, dir: &Path, config: &RunConfig) -> Result<Option<Box<dyn Predictor>>> {
    Ok(match kind {
        PredictorKind::Masks => None,
        PredictorKind::Toy => Some(Box::new(ToyPredictor::default())),
        PredictorKind::Oracle => {
            let case = load_case(dir).context("oracle needs the case description")?;
            let seed = case.spec().seed;
            let mut oracle = OraclePredictor::new(&case);
            if config.oracle_field_noise > 0.0 {
                oracle = oracle.with_field_noise(config.oracle_field_noise, seed);
            }
            Some(Box::new(oracle))
        }
    })
}

pub fn require_model(kind: PredictorKind, command: &str) -> Result<()> {
    if kind == PredictorKind::Masks {
        return Err(UsageError(format!("{command} needs a model predictor (oracle or toy), not masks")).into());
    }
    Ok(())
}

/// Run `work` on every case in parallel, keeping name order. Failed cases are
/// logged and counted; having none succeed is an error.
pub fn for_each_case<T: Send>(
    dirs: &[PathBuf],
    work: impl Fn(&Path) -> Result<T> + Sync,
) -> Result<(Vec<(String, T)>, usize)> {
    let results: Vec<(String, Result<T>)> = dirs.par_iter().map(|d| (case_name(d), work(d))).collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for (name, r) in results {
        match r {
            Ok(v) => ok.push((name, v)),
            Err(e) => {
                warn!("skipping {name}: {e:#}");
                skipped += 1;
            }
        }
    }
    if ok.is_empty() {
        bail!("no case could be processed ({skipped} skipped)");
    }
    Ok((ok, skipped))
}
