use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::shape::{Boundary, PlacedShape, SyntheticCase};
use crate::decoder::{softplus_inv, HeadFields};
use crate::error::{Error, Result};
use crate::geometry::{PolarField, PolarGridSpec};
use crate::pipeline::{Prediction, Predictor};

/// Lowest raw decrement emitted; `softplus(-50)` is about `2e-22`.
const RAW_FLOOR: f64 = -50.0;

/// Monotone head whose decoded radius at angle `i` is close to `radii[i]`.
///
/// Logits ramp linearly, `(r + 0.5 / n - rho) * n / width`, clamped to
/// `[-k, k]`. The sum of a logistic over the bin lattice equals its integral
/// up to terms of order `exp(-2 pi^2 / width)`, so the bin mean lands on `r`.
pub fn head_for_radii(radii: &[f64], n_rho: usize, k: f64, width: f64) -> Result<HeadFields> {
    if !(k > 0.0 && width > 0.0) {
        return Err(Error::InvalidParameter(format!("need k > 0 and width > 0, got {k}, {width}")));
    }
    let n = n_rho as f64;
    let nt = radii.len();
    let mut raw = PolarField::filled(n_rho, nt, RAW_FLOOR);
    for (i, &r) in radii.iter().enumerate() {
        let centre = r + 0.5 / n;
        let mut prev = k;
        for j in 0..n_rho {
            let rho = (j + 1) as f64 / n;
            let l = ((centre - rho) * n / width).clamp(-k, k);
            raw.set(j, i, softplus_inv(prev - l).max(RAW_FLOOR));
            prev = l;
        }
    }
    HeadFields::new(vec![k; nt], raw)
}

/// Bounded Gaussian bump, `peak * exp(-z^2 / 2)` with `z = (rho - centre) / width`;
/// zero away from the bump, as a network's bounded logits would be.
fn bump_logits(field: &mut PolarField, i: usize, centre: f64, width: f64, peak: f64) {
    let n = field.n_rho() as f64;
    for j in 0..field.n_rho() {
        let rho = (j + 1) as f64 / n;
        let z = (rho - centre) / width;
        field.set(j, i, peak * (-0.5 * z * z).exp());
    }
}

/// Stand-in for a network trained on well-centred crops.
///
/// It always emits the case's canonical boundary, expressed in whatever frame
/// it is handed, so a misaligned frame yields a misplaced segmentation. Its
/// prior logits peak at the canonical radii and widen with the mismatch
/// between that boundary and the one actually visible along each ray from the
/// frame's anchor; confidence therefore peaks when the frame matches the
/// true centre and scale.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    truth: PlacedShape,
    /// Logit magnitude inside and outside each boundary.
    pub sharpness: f64,
    /// Transition width of the dense heads, in radial bins.
    pub edge_width: f64,
    /// Prior bump height in logits.
    pub prior_peak: f64,
    /// Prior bump std at perfect alignment, in radial bins.
    pub prior_width: f64,
    /// Extra prior std per unit of observed radial mismatch.
    pub mismatch_gain: f64,
    pub field_noise: f64,
    pub noise_seed: u64,
}

impl OraclePredictor {
    pub fn new(case: &SyntheticCase) -> Self {
        Self::from_shape(case.shape.clone())
    }

    pub fn from_shape(truth: PlacedShape) -> Self {
        Self {
            truth,
            sharpness: 10.0,
            edge_width: 0.25,
            prior_peak: 8.0,
            prior_width: 1.0,
            mismatch_gain: 1.0,
            field_noise: 0.0,
            noise_seed: 0,
        }
    }

    /// Add `N(0, sigma^2)` noise to both prior logit fields.
    pub fn with_field_noise(mut self, sigma: f64, seed: u64) -> Self {
        self.field_noise = sigma;
        self.noise_seed = seed;
        self
    }

    fn noise_rng(&self, frame: &PolarGridSpec) -> ChaCha8Rng {
        // Same frame, same noise: keeps predictions a pure function of input.
        let mut s = self.noise_seed;
        for v in [frame.cx, frame.cy, frame.radius] {
            s = s.rotate_left(17) ^ v.to_bits();
        }
        ChaCha8Rng::seed_from_u64(s)
    }
}

impl Predictor for OraclePredictor {
    fn name(&self) -> &str {
        "oracle"
    }

    fn predict(&self, polar: &PolarField, frame: &PolarGridSpec) -> Result<Prediction> {
        let (nr, nt) = (frame.n_rho, frame.n_theta);
        if polar.n_rho() != nr || polar.n_theta() != nt {
            return Err(Error::ShapeMismatch("polar image does not match its frame".into()));
        }
        let spec = &self.truth.spec;
        let thetas = frame.thetas();
        let disc: Vec<f64> = thetas.iter().map(|&t| spec.disc_radius(t)).collect();
        let alpha: Vec<f64> = thetas.iter().map(|&t| spec.alpha(t)).collect();
        let cup: Vec<f64> = disc.iter().zip(&alpha).map(|(d, a)| d * a).collect();

        let mut prior_disc = PolarField::filled(nr, nt, 0.0);
        let mut prior_alpha = PolarField::filled(nr, nt, 0.0);
        for (i, &t) in thetas.iter().enumerate() {
            let seen = self.truth.ray_exit(Boundary::Disc, frame.cx, frame.cy, t) / frame.radius;
            let width = self.prior_width / nr as f64 + self.mismatch_gain * (seen - disc[i]).abs();
            bump_logits(&mut prior_disc, i, disc[i], width, self.prior_peak);
            bump_logits(&mut prior_alpha, i, alpha[i], width, self.prior_peak);
        }
        if self.field_noise > 0.0 {
            let normal = Normal::new(0.0, self.field_noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut rng = self.noise_rng(frame);
            for f in [&mut prior_disc, &mut prior_alpha] {
                f.data_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
            }
        }
        Ok(Prediction {
            disc: head_for_radii(&disc, nr, self.sharpness, self.edge_width)?,
            gate: head_for_radii(&cup, nr, self.sharpness, self.edge_width)?,
            prior_disc_logits: prior_disc,
            prior_alpha_logits: prior_alpha,
        })
    }
}

/// Image-driven heuristic: disc decrements follow the outward intensity drop,
/// gate decrements the outward rise at the cup edge, and the prior peaks
/// where the wide-baseline edge contrast is strongest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyPredictor {
    pub disc_gain: f64,
    pub disc_bias: f64,
    pub gate_gain: f64,
    pub gate_bias: f64,
    /// Decrement added everywhere so the softplus inverse stays finite.
    pub floor: f64,
    pub prior_gain: f64,
    /// Half-width, in bins, of the radial box smoothing.
    pub smoothing: usize,
    /// Half-baseline, in bins, of the prior's edge contrast.
    pub baseline: usize,
}

impl Default for ToyPredictor {
    fn default() -> Self {
        Self {
            disc_gain: 20.0,
            disc_bias: 7.0,
            gate_gain: 40.0,
            gate_bias: 6.0,
            floor: 1e-3,
            prior_gain: 6.0,
            smoothing: 3,
            baseline: 6,
        }
    }
}

fn smooth_column(col: &[f64], h: usize) -> Vec<f64> {
    let n = col.len();
    (0..n)
        .map(|j| {
            let (lo, hi) = (j.saturating_sub(h), (j + h).min(n - 1));
            col[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

impl Predictor for ToyPredictor {
    fn name(&self) -> &str {
        "toy"
    }

    fn predict(&self, polar: &PolarField, _frame: &PolarGridSpec) -> Result<Prediction> {
        let gray = polar.mean_channels();
        let (nr, nt) = (gray.n_rho(), gray.n_theta());
        let mut disc_raw = PolarField::filled(nr, nt, 0.0);
        let mut gate_raw = PolarField::filled(nr, nt, 0.0);
        let mut prior_disc = PolarField::filled(nr, nt, 0.0);
        let mut prior_alpha = PolarField::filled(nr, nt, 0.0);
        let b = self.baseline;
        for i in 0..nt {
            let g = smooth_column(&gray.column(i), self.smoothing);
            let at = |j: isize| g[j.clamp(0, nr as isize - 1) as usize];
            for j in 0..nr {
                let step = if j == 0 { 0.0 } else { g[j] - g[j - 1] };
                disc_raw.set(j, i, softplus_inv(self.disc_gain * (-step).max(0.0) + self.floor));
                gate_raw.set(j, i, softplus_inv(self.gate_gain * step.max(0.0) + self.floor));
            }
            let contrast = |j: usize| at(j as isize - b as isize) - at((j + b) as isize);
            let mut edge = 0;
            for j in 0..nr {
                let c = contrast(j).max(0.0);
                prior_disc.set(j, i, self.prior_gain * c);
                if c > contrast(edge) {
                    edge = j;
                }
            }
            // Ratio bin k looks for the cup rise at radius rho_k * r_edge.
            for k in 0..nr {
                let rho = (k + 1) as f64 / nr as f64;
                let j = ((rho * (edge + 1) as f64).round() as usize).clamp(1, nr) - 1;
                prior_alpha.set(k, i, self.prior_gain * (-contrast(j)).max(0.0));
            }
        }
        Ok(Prediction {
            disc: HeadFields::new(vec![self.disc_bias; nt], disc_raw)?,
            gate: HeadFields::new(vec![self.gate_bias; nt], gate_raw)?,
            prior_disc_logits: prior_disc,
            prior_alpha_logits: prior_alpha,
        })
    }
}
