//! Central-difference gradient checking and the analytic gradients it verifies.

use rayon::prelude::*;

use super::{rim_loss, smooth_l1_grad};
use crate::decoder::{decode_nested, monotone_logits, occupancy_from_logits, sigmoid, HeadFields};
use crate::error::{ensure_same_len, Error, Result};
use crate::geometry::{AngularProfile, PolarField};
use crate::prior::{soft_argmax, temperature_softmax};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
    pub coordinates: usize,
}

/// Compare `analytic` with central differences of `f` at `point`.
///
/// Relative error per coordinate is `|fd - an| / max(1e-8, |fd| + |an|)`; the
/// maximum over `coords` (all coordinates when `None`) is returned.
pub fn grad_check<F>(
    f: F,
    point: &[f64],
    analytic: &[f64],
    step: f64,
    coords: Option<&[usize]>,
) -> Result<GradCheck>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    ensure_same_len("gradient", point.len(), analytic.len())?;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {step}")));
    }
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..point.len()).collect();
            &all
        }
    };
    let errors: Vec<Result<f64>> = coords
        .par_iter()
        .map(|&k| {
            let mut x = point.to_vec();
            x[k] = point[k] + step;
            let plus = f(&x);
            x[k] = point[k] - step;
            let minus = f(&x);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("function value at coordinate {k}")));
            }
            let fd = (plus - minus) / (2.0 * step);
            Ok((fd - analytic[k]).abs() / (fd.abs() + analytic[k].abs()).max(1e-8))
        })
        .collect();
    let mut worst = GradCheck { max_rel_error: 0.0, worst_coordinate: 0, coordinates: coords.len() };
    for (e, &k) in errors.into_iter().zip(coords) {
        let e = e?;
        if e > worst.max_rel_error {
            worst.max_rel_error = e;
            worst.worst_coordinate = k;
        }
    }
    Ok(worst)
}

/// Value and gradient of `sum_i w_i * soft_argmax(softmax(logits / T))_i`
/// with respect to the logits (row-major, `n_rho x n_theta`).
pub fn softargmax_gradient(logits: &PolarField, temperature: f64, weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    ensure_same_len("soft-argmax weights", weights.len(), logits.n_theta())?;
    let pmf = temperature_softmax(logits, temperature)?;
    let r = soft_argmax(&pmf)?;
    let (nr, nt) = (logits.n_rho(), logits.n_theta());
    let mut grad = vec![0.0; nr * nt];
    for i in 0..nt {
        for j in 0..nr {
            let rho = (j + 1) as f64 / nr as f64;
            let p = pmf.probs().get(j, i);
            grad[j * nt + i] = weights[i] * p * (rho - r.values[i]) / temperature;
        }
    }
    let value = r.values.iter().zip(weights).map(|(v, w)| v * w).sum();
    Ok((value, grad))
}

/// Rim loss of an undecoded head pair and its gradient with respect to both heads.
#[derive(Debug, Clone, PartialEq)]
pub struct RimChainGradient {
    pub loss: f64,
    pub disc_bias: Vec<f64>,
    pub disc_decrement: PolarField,
    pub gate_bias: Vec<f64>,
    pub gate_decrement: PolarField,
}

/// Backward pass through `decode_nested -> radii -> rim_loss` (unfused gate).
pub fn rim_loss_decode_gradient(
    disc: &HeadFields,
    gate: &HeadFields,
    disc_gt: &AngularProfile,
    cup_gt: &AngularProfile,
) -> Result<RimChainGradient> {
    let nested = decode_nested(disc, gate, None)?;
    let loss = rim_loss(&nested.disc_radius, &nested.cup_radius, disc_gt, cup_gt)?;
    let (nr, nt) = (disc.n_rho(), disc.n_theta());
    let p = occupancy_from_logits(&monotone_logits(disc)?);
    let q = &nested.gate;

    let upstream: Vec<f64> = (0..nt)
        .map(|i| {
            let pred = nested.disc_radius.values[i] - nested.cup_radius.values[i];
            let gt = disc_gt.values[i] - cup_gt.values[i];
            smooth_l1_grad(pred - gt) / nt as f64
        })
        .collect();

    // d loss / d logits for both heads.
    let mut g_disc = PolarField::filled(nr, nt, 0.0);
    let mut g_gate = PolarField::filled(nr, nt, 0.0);
    for j in 0..nr {
        for i in 0..nt {
            let (pj, qj) = (p.get(j, i), q.get(j, i));
            let g = upstream[i] / nr as f64;
            g_disc.set(j, i, g * (1.0 - qj) * pj * (1.0 - pj));
            g_gate.set(j, i, -g * pj * qj * (1.0 - qj));
        }
    }

    let back = |head: &HeadFields, g_logits: &PolarField| {
        let mut bias = vec![0.0; nt];
        let mut dec = PolarField::filled(nr, nt, 0.0);
        for i in 0..nt {
            let mut tail = 0.0;
            for j in (0..nr).rev() {
                tail += g_logits.get(j, i);
                dec.set(j, i, -sigmoid(head.decrement_raw.get(j, i)) * tail);
            }
            bias[i] = tail;
        }
        (bias, dec)
    };
    let (disc_bias, disc_decrement) = back(disc, &g_disc);
    let (gate_bias, gate_decrement) = back(gate, &g_gate);
    Ok(RimChainGradient { loss, disc_bias, disc_decrement, gate_bias, gate_decrement })
}
