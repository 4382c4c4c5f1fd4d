//! Training-free test-time search over anchor offsets and radius scales.

use rayon::prelude::*;

use crate::decoder::NestedOccupancy;
use crate::error::{Error, Result};
use crate::geometry::{resample_between_frames, AngularProfile, CartesianImage, PolarField, PolarGridSpec};
use crate::metrics::{compactness, BinaryMask};
use crate::pipeline::{predict_in_frame, render_mask, DecodeParams, Predictor};

pub const OCCUPANCY_WEIGHT: f64 = 0.4;
pub const CONFIDENCE_WEIGHT: f64 = 0.4;
pub const COMPACTNESS_WEIGHT: f64 = 0.2;
pub const DEFAULT_OFFSETS: [f64; 3] = [0.0, 8.0, 16.0];
pub const DEFAULT_SCALES: [f64; 3] = [0.85, 1.0, 1.15];
pub const DEFAULT_TOP_K: usize = 3;

/// Anchor offset in pixels and radius scale relative to a base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
}

impl Hypothesis {
    pub const IDENTITY: Hypothesis = Hypothesis { dx: 0.0, dy: 0.0, scale: 1.0 };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn frame(&self, base: &PolarGridSpec) -> Result<PolarGridSpec> {
        base.perturbed(self.dx, self.dy, self.scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtaConfig {
    /// Offset magnitudes in pixels; `0` contributes the unshifted anchor.
    pub offsets: Vec<f64>,
    pub scales: Vec<f64>,
    /// Use every `(dx, dy)` pair instead of axis-aligned offsets only.
    pub full_grid: bool,
    pub top_k: usize,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self { offsets: DEFAULT_OFFSETS.to_vec(), scales: DEFAULT_SCALES.to_vec(), full_grid: false, top_k: DEFAULT_TOP_K }
    }
}

fn magnitudes(values: &[f64]) -> Result<(bool, Vec<f64>)> {
    let mut out: Vec<f64> = Vec::new();
    let mut zero = false;
    for &m in values {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::InvalidParameter(format!("offset magnitudes must be finite and >= 0, got {m}")));
        }
        if m == 0.0 {
            zero = true;
        } else if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok((zero, out))
}

/// `(0, 0)` if requested, then `(+-m, 0)` and `(0, +-m)` for each magnitude.
pub fn axis_offsets(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let (zero, ms) = magnitudes(values)?;
    let mut out = Vec::new();
    if zero {
        out.push((0.0, 0.0));
    }
    out.extend(ms.iter().flat_map(|&m| [(m, 0.0), (-m, 0.0)]));
    out.extend(ms.iter().flat_map(|&m| [(0.0, m), (0.0, -m)]));
    if out.is_empty() {
        return Err(Error::InvalidParameter("offset list is empty".into()));
    }
    Ok(out)
}

fn full_offsets(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    let (zero, ms) = magnitudes(values)?;
    let mut axis: Vec<f64> = if zero { vec![0.0] } else { Vec::new() };
    axis.extend(ms.iter().flat_map(|&m| [m, -m]));
    if axis.is_empty() {
        return Err(Error::InvalidParameter("offset list is empty".into()));
    }
    Ok(axis.iter().flat_map(|&dy| axis.iter().map(move |&dx| (dx, dy))).collect())
}

/// Offsets in the outer loop, scales in the inner one.
pub fn hypothesis_grid(cfg: &TtaConfig) -> Result<Vec<Hypothesis>> {
    if cfg.scales.is_empty() || cfg.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter("scales must be a non-empty list of positive numbers".into()));
    }
    let offsets = if cfg.full_grid { full_offsets(&cfg.offsets)? } else { axis_offsets(&cfg.offsets)? };
    Ok(offsets
        .into_iter()
        .flat_map(|(dx, dy)| cfg.scales.iter().map(move |&scale| Hypothesis { dx, dy, scale }))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisScore {
    pub mean_disc_occupancy: f64,
    pub mean_gate_confidence: f64,
    pub compactness: f64,
    pub score: f64,
}

impl HypothesisScore {
    pub fn new(occupancy: f64, confidence: f64, compactness: f64) -> Self {
        Self {
            mean_disc_occupancy: occupancy,
            mean_gate_confidence: confidence,
            compactness,
            score: OCCUPANCY_WEIGHT * occupancy + CONFIDENCE_WEIGHT * confidence + COMPACTNESS_WEIGHT * compactness,
        }
    }
}

/// An empty rendered disc scores zero compactness instead of failing.
pub fn score_hypothesis(nested: &NestedOccupancy, gamma_disc: &AngularProfile, rendered_disc: &BinaryMask) -> HypothesisScore {
    let comp = if rendered_disc.is_empty() { 0.0 } else { compactness(rendered_disc).unwrap_or(0.0) };
    HypothesisScore::new(nested.disc.mean(), gamma_disc.mean(), comp)
}

/// A scored hypothesis with its fields already resampled into the base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub hypothesis: Hypothesis,
    pub score: HypothesisScore,
    pub disc: PolarField,
    pub gate: PolarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blend {
    pub nested: NestedOccupancy,
    /// Indices into the candidate list, best first.
    pub chosen: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Clamp every bin to the smallest value inward of it along the same ray.
fn running_min_along_rho(field: &mut PolarField) {
    let (nr, nt) = (field.n_rho(), field.n_theta());
    let d = field.data_mut();
    for j in 1..nr {
        for i in 0..nt {
            let prev = d[(j - 1) * nt + i];
            if d[j * nt + i] > prev {
                d[j * nt + i] = prev;
            }
        }
    }
}

/// Softmax-weighted average of the `k` best candidates' disc and gate
/// fields, made radially non-increasing again before the cup is rebuilt.
pub fn blend_top_k(candidates: &[Candidate], k: usize) -> Result<Blend> {
    if candidates.is_empty() {
        return Err(Error::InsufficientData("no candidates to blend".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("top_k must be >= 1".into()));
    }
    for c in &candidates[1..] {
        candidates[0].disc.ensure_same_grid(&c.disc, "blend")?;
        candidates[0].disc.ensure_same_grid(&c.gate, "blend")?;
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // Stable: equal scores keep grid order.
    order.sort_by(|&a, &b| candidates[b].score.score.total_cmp(&candidates[a].score.score));
    order.truncate(k);

    let top = candidates[order[0]].score.score;
    let exp: Vec<f64> = order.iter().map(|&i| (candidates[i].score.score - top).exp()).collect();
    let z: f64 = exp.iter().sum();
    let weights: Vec<f64> = exp.iter().map(|e| e / z).collect();

    let (mut disc, mut gate) = if order.len() == 1 {
        (candidates[order[0]].disc.clone(), candidates[order[0]].gate.clone())
    } else {
        let mut disc = PolarField::filled(candidates[0].disc.n_rho(), candidates[0].disc.n_theta(), 0.0);
        let mut gate = disc.clone();
        for (&i, &w) in order.iter().zip(&weights) {
            for (o, v) in disc.data_mut().iter_mut().zip(candidates[i].disc.data()) {
                *o += w * v;
            }
            for (o, v) in gate.data_mut().iter_mut().zip(candidates[i].gate.data()) {
                *o += w * v;
            }
        }
        (disc, gate)
    };
    for f in [&mut disc, &mut gate] {
        running_min_along_rho(f);
        f.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    Ok(Blend { nested: NestedOccupancy::from_disc_and_gate(disc, gate)?, chosen: order, weights })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtaOutcome {
    /// Blended result in the base frame.
    pub nested: NestedOccupancy,
    /// Every hypothesis in grid order, with `None` where the predictor failed.
    pub scores: Vec<(Hypothesis, Option<HypothesisScore>)>,
    /// Blended hypotheses, best first, with their weights.
    pub chosen: Vec<(Hypothesis, f64)>,
    pub dropped: usize,
}

impl TtaOutcome {
    pub fn best(&self) -> (Hypothesis, HypothesisScore) {
        let (h, _) = self.chosen[0];
        let s = self.scores.iter().find(|(g, _)| *g == h).and_then(|(_, s)| *s).expect("chosen hypotheses were scored");
        (h, s)
    }
}

fn evaluate_hypothesis(
    image: &CartesianImage,
    predictor: &dyn Predictor,
    base: &PolarGridSpec,
    params: &DecodeParams,
    threshold: f64,
    h: Hypothesis,
) -> Result<Candidate> {
    let frame = h.frame(base)?;
    let decoded = predict_in_frame(image, predictor, &frame, params)?;
    let rendered = render_mask(&decoded.nested.disc, &frame, threshold);
    let score = score_hypothesis(&decoded.nested, decoded.gamma_disc(), &rendered);
    let (disc, gate) = if frame == *base {
        (decoded.nested.disc, decoded.nested.gate)
    } else {
        (
            resample_between_frames(&decoded.nested.disc, &frame, base),
            resample_between_frames(&decoded.nested.gate, &frame, base),
        )
    };
    Ok(Candidate { hypothesis: h, score, disc, gate })
}

/// Score every hypothesis of `cfg` around `base` and blend the best.
/// Hypotheses whose prediction fails are dropped and counted.
pub fn run_tta(
    image: &CartesianImage,
    predictor: &dyn Predictor,
    base: &PolarGridSpec,
    params: &DecodeParams,
    cfg: &TtaConfig,
    threshold: f64,
) -> Result<TtaOutcome> {
    let grid = hypothesis_grid(cfg)?;
    let eval = |&h: &Hypothesis| evaluate_hypothesis(image, predictor, base, params, threshold, h);
    let results: Vec<Result<Candidate>> = if predictor.is_concurrent_safe() {
        grid.par_iter().map(eval).collect()
    } else {
        grid.iter().map(eval).collect()
    };

    let mut scores = Vec::with_capacity(grid.len());
    let mut candidates = Vec::with_capacity(grid.len());
    let mut first_error = None;
    for (h, r) in grid.iter().zip(results) {
        match r {
            Ok(c) => {
                scores.push((*h, Some(c.score)));
                candidates.push(c);
            }
            Err(e) => {
                scores.push((*h, None));
                first_error.get_or_insert(e);
            }
        }
    }
    let dropped = grid.len() - candidates.len();
    if candidates.is_empty() {
        let why = first_error.map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Predictor(format!("all {} hypotheses failed: {why}", grid.len())));
    }
    let blend = blend_top_k(&candidates, cfg.top_k)?;
    let chosen = blend.chosen.iter().zip(&blend.weights).map(|(&i, &w)| (candidates[i].hypothesis, w)).collect();
    Ok(TtaOutcome { nested: blend.nested, scores, chosen, dropped })
}
