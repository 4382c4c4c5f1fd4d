//! Forward loss terms, the staged weighting schedule and gradient checking.

mod grad;
mod schedule;

pub use grad::{
    grad_check, rim_loss_decode_gradient, softargmax_gradient, GradCheck, RimChainGradient,
};
pub use schedule::{schedule_weights, LossReport, LossSchedule, LossTerm, TermSchedule};

use crate::error::{ensure_same_len, Error, Result};
use crate::geometry::{AngularProfile, PolarField};
use crate::prior::{entropy_gate, RadialPmf};

pub const SOFT_DICE_EPS: f64 = 1e-6;
pub const BCE_CLAMP: f64 = 1e-7;
/// Transition point between the quadratic and linear SmoothL1 branches.
pub const SMOOTH_L1_BETA: f64 = 1.0;
const CE_FLOOR: f64 = 1e-12;

#[inline]
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < SMOOTH_L1_BETA {
        0.5 * a * a / SMOOTH_L1_BETA
    } else {
        a - 0.5 * SMOOTH_L1_BETA
    }
}

#[inline]
pub(crate) fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < SMOOTH_L1_BETA {
        x / SMOOTH_L1_BETA
    } else {
        x.signum()
    }
}

fn mean_smooth_l1(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| smooth_l1(p - t)).sum::<f64>() / pred.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiceBce {
    pub soft_dice: f64,
    pub bce: f64,
}

impl DiceBce {
    pub fn total(&self) -> f64 {
        self.soft_dice + self.bce
    }
}

/// Soft Dice loss plus mean binary cross-entropy of a probability map.
pub fn dice_bce_loss(pred: &[f64], target: &[f64]) -> Result<DiceBce> {
    ensure_same_len("dice+bce", pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(Error::InsufficientData("empty prediction".into()));
    }
    if let Some(p) = pred.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::OutOfRange(format!("probability {p} outside [0, 1]")));
    }
    let (mut pt, mut sp, mut st, mut bce) = (0.0, 0.0, 0.0, 0.0);
    for (&p, &t) in pred.iter().zip(target) {
        pt += p * t;
        sp += p;
        st += t;
        let q = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        bce -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
    }
    // Both maps empty is agreement, as for hard Dice.
    let soft_dice = if sp + st == 0.0 { 0.0 } else { 1.0 - 2.0 * pt / (sp + st + SOFT_DICE_EPS) };
    Ok(DiceBce {
        soft_dice,
        bce: bce / pred.len() as f64,
    })
}

/// Dice + BCE on polar fields.
pub fn dice_bce_polar(pred: &PolarField, target: &PolarField) -> Result<DiceBce> {
    pred.ensure_same_grid(target, "dice+bce")?;
    dice_bce_loss(pred.data(), target.data())
}

/// SmoothL1 between predicted and ground-truth rim thickness, averaged over angle.
pub fn rim_loss(
    disc_pred: &AngularProfile,
    cup_pred: &AngularProfile,
    disc_gt: &AngularProfile,
    cup_gt: &AngularProfile,
) -> Result<f64> {
    let n = disc_pred.len();
    for (what, len) in [("cup prediction", cup_pred.len()), ("disc gt", disc_gt.len()), ("cup gt", cup_gt.len())] {
        ensure_same_len(what, n, len)?;
    }
    let total: f64 = (0..n)
        .map(|i| {
            let pred = disc_pred.values[i] - cup_pred.values[i];
            let gt = disc_gt.values[i] - cup_gt.values[i];
            smooth_l1(pred - gt)
        })
        .sum();
    Ok(total / n as f64)
}

/// Nearest radial sample index for a radius on the `rho_j = j / n_rho` grid.
pub fn nearest_bin(radius: f64, n_rho: usize) -> usize {
    ((radius * n_rho as f64).round() as usize).clamp(1, n_rho) - 1
}

fn cross_entropy(pmf: &RadialPmf, target: &[f64]) -> Result<f64> {
    ensure_same_len("cross-entropy targets", pmf.n_theta(), target.len())?;
    let nr = pmf.n_rho();
    let total: f64 = target
        .iter()
        .enumerate()
        .map(|(i, &r)| -pmf.probs().get(nearest_bin(r, nr), i).max(CE_FLOOR).ln())
        .sum();
    Ok(total / target.len() as f64)
}

fn circular_smoothness(r: &[f64]) -> f64 {
    let n = r.len();
    (0..n).map(|i| smooth_l1(r[(i + 1) % n] - r[i])).sum::<f64>() / n as f64
}

/// Inputs to the shape-prior loss terms.
#[derive(Debug, Clone)]
pub struct PriorLossInputs<'a> {
    pub disc_pmf: &'a RadialPmf,
    pub alpha_pmf: &'a RadialPmf,
    pub disc_prior: &'a AngularProfile,
    pub cup_prior: &'a AngularProfile,
    pub disc_dense: &'a AngularProfile,
    pub cup_dense: &'a AngularProfile,
    pub disc_gt: &'a AngularProfile,
    pub cup_gt: &'a AngularProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorLosses {
    pub distribution_ce: f64,
    pub radii: f64,
    pub smoothness: f64,
    pub consistency: f64,
}

/// Cross-entropy on the two prior distributions, SmoothL1 on prior radii,
/// circular smoothness of prior radii, and gate-weighted dense/prior consistency.
pub fn prior_losses(inputs: &PriorLossInputs<'_>) -> Result<PriorLosses> {
    let n = inputs.disc_gt.len();
    for p in [inputs.disc_prior, inputs.cup_prior, inputs.disc_dense, inputs.cup_dense, inputs.cup_gt] {
        ensure_same_len("prior loss profile", n, p.len())?;
    }
    let alpha_gt: Vec<f64> = inputs
        .cup_gt
        .values
        .iter()
        .zip(&inputs.disc_gt.values)
        .map(|(c, d)| if *d > 0.0 { (c / d).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let distribution_ce =
        cross_entropy(inputs.disc_pmf, &inputs.disc_gt.values)? + cross_entropy(inputs.alpha_pmf, &alpha_gt)?;
    let radii = mean_smooth_l1(&inputs.disc_prior.values, &inputs.disc_gt.values)
        + mean_smooth_l1(&inputs.cup_prior.values, &inputs.cup_gt.values);
    let smoothness = circular_smoothness(&inputs.disc_prior.values) + circular_smoothness(&inputs.cup_prior.values);

    let gamma_d = entropy_gate(inputs.disc_pmf);
    let gamma_c = entropy_gate(inputs.alpha_pmf);
    let weighted = |gamma: &AngularProfile, dense: &AngularProfile, prior: &AngularProfile| {
        (0..n)
            .map(|i| gamma.values[i] * smooth_l1(dense.values[i] - prior.values[i]))
            .sum::<f64>()
            / n as f64
    };
    let consistency = weighted(&gamma_d, inputs.disc_dense, inputs.disc_prior)
        + weighted(&gamma_c, inputs.cup_dense, inputs.cup_prior);
    Ok(PriorLosses { distribution_ce, radii, smoothness, consistency })
}
