//! The frozen-model abstraction and the decode path shared by evaluation and TTA.

use crate::decoder::{decode_nested, monotone_logits, HeadFields, NestedOccupancy};
use crate::error::{Error, Result};
use crate::geometry::{warp_to_cartesian, warp_to_polar, AngularProfile, CartesianImage, PolarField, PolarGridSpec};
use crate::metrics::BinaryMask;
use crate::prior::{evaluate_prior, fuse, ShapePriorOutput, DEFAULT_LAMBDA_C, DEFAULT_TAU, DEFAULT_TEMPERATURE};

/// Raw network outputs for one polar image.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub disc: HeadFields,
    pub gate: HeadFields,
    pub prior_disc_logits: PolarField,
    pub prior_alpha_logits: PolarField,
}

impl Prediction {
    pub fn validate(&self) -> Result<()> {
        self.disc.validate()?;
        self.gate.validate()?;
        let grid = &self.disc.decrement_raw;
        for (name, f) in [
            ("gate", &self.gate.decrement_raw),
            ("prior disc logits", &self.prior_disc_logits),
            ("prior ratio logits", &self.prior_alpha_logits),
        ] {
            if !f.same_grid(grid) {
                return Err(Error::ShapeMismatch(format!("{name} grid differs from disc head")));
            }
        }
        Ok(())
    }
}

/// A frozen predictor. Implementations must be deterministic for a fixed
/// input; `frame` describes where the polar image was sampled from.
pub trait Predictor: Send + Sync {
    fn name(&self) -> &str;

    fn predict(&self, polar: &PolarField, frame: &PolarGridSpec) -> Result<Prediction>;

    /// Whether `predict` may be called from several threads at once.
    fn is_concurrent_safe(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeParams {
    pub temperature: f64,
    pub tau: f64,
    pub lambda_c: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self { temperature: DEFAULT_TEMPERATURE, tau: DEFAULT_TAU, lambda_c: DEFAULT_LAMBDA_C }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub nested: NestedOccupancy,
    pub prior: ShapePriorOutput,
}

impl Decoded {
    /// Disc-side confidence used for hypothesis scoring.
    pub fn gamma_disc(&self) -> &AngularProfile {
        &self.prior.gamma_disc
    }
}

/// Prior branch, gate fusion and nested decode.
pub fn decode_prediction(pred: &Prediction, params: &DecodeParams) -> Result<Decoded> {
    pred.validate()?;
    let (prior, _, _) = evaluate_prior(
        &pred.prior_disc_logits,
        &pred.prior_alpha_logits,
        params.temperature,
        params.tau,
        params.lambda_c,
    )?;
    let gate_logits = monotone_logits(&pred.gate)?;
    let fused = fuse(&gate_logits, &prior.gamma, &prior.cup_mask, prior.lambda_c)?;
    let nested = decode_nested(&pred.disc, &pred.gate, Some(&fused))?;
    Ok(Decoded { nested, prior })
}

/// Warp `image` into `frame`, run the predictor and decode.
pub fn predict_in_frame(
    image: &CartesianImage,
    predictor: &dyn Predictor,
    frame: &PolarGridSpec,
    params: &DecodeParams,
) -> Result<Decoded> {
    let polar = warp_to_polar(image, frame)?;
    let pred = predictor.predict(&polar, frame)?;
    if pred.disc.n_rho() != frame.n_rho || pred.disc.n_theta() != frame.n_theta {
        return Err(Error::Predictor(format!(
            "{} returned a {}x{} grid for a {}x{} frame",
            predictor.name(),
            pred.disc.n_rho(),
            pred.disc.n_theta(),
            frame.n_rho,
            frame.n_theta
        )));
    }
    decode_prediction(&pred, params)
}

/// Threshold a polar occupancy after warping it back onto the image lattice.
pub fn render_mask(occupancy: &PolarField, frame: &PolarGridSpec, threshold: f64) -> BinaryMask {
    BinaryMask::from_image(&warp_to_cartesian(occupancy, frame), threshold)
}

/// Disc and cup masks of a decoded prediction.
pub fn render_masks(nested: &NestedOccupancy, frame: &PolarGridSpec, threshold: f64) -> (BinaryMask, BinaryMask) {
    (render_mask(&nested.disc, frame, threshold), render_mask(&nested.cup, frame, threshold))
}
