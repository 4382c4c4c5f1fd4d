//! Global shape prior: per-angle radial distributions, their soft-argmax
//! radii, soft prior masks and the entropy confidence gate that decides how
//! strongly the prior is fused into the dense cup logits.

use crate::decoder::{logit, sigmoid};
use crate::error::{ensure_same_len, Error, Result};
use crate::geometry::{AngularProfile, PolarField, ProfileKind};

/// Default softmax temperature of the prior branch.
pub const DEFAULT_TEMPERATURE: f64 = 0.5;
/// Default rendering temperature of the soft prior masks.
pub const DEFAULT_TAU: f64 = 0.03;
/// Default prior fusion weight.
pub const DEFAULT_LAMBDA_C: f64 = 0.1;

const FUSION_CLAMP: f64 = 1e-6;

/// One probability mass function over radial bins per angle.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPmf {
    probs: PolarField,
}

impl RadialPmf {
    /// Wrap a field whose columns must each sum to one within `1e-6`.
    pub fn new(probs: PolarField) -> Result<Self> {
        if let Some(v) = probs.data().iter().find(|v| **v < 0.0) {
            return Err(Error::OutOfRange(format!("negative probability {v}")));
        }
        check_columns(&probs, 1e-6)?;
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &PolarField {
        &self.probs
    }

    pub fn n_rho(&self) -> usize {
        self.probs.n_rho()
    }

    pub fn n_theta(&self) -> usize {
        self.probs.n_theta()
    }
}

fn check_columns(p: &PolarField, tol: f64) -> Result<()> {
    let (nr, nt) = (p.n_rho(), p.n_theta());
    for i in 0..nt {
        let s: f64 = (0..nr).map(|j| p.get(j, i)).sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::OutOfRange(format!("column {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Column-wise softmax of `logits / temperature`.
pub fn temperature_softmax(logits: &PolarField, temperature: f64) -> Result<RadialPmf> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter(format!("temperature must be > 0, got {temperature}")));
    }
    let (nr, nt) = (logits.n_rho(), logits.n_theta());
    let mut out = PolarField::filled(nr, nt, 0.0);
    for i in 0..nt {
        let max = (0..nr).map(|j| logits.get(j, i)).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for j in 0..nr {
            let e = ((logits.get(j, i) - max) / temperature).exp();
            out.set(j, i, e);
            total += e;
        }
        for j in 0..nr {
            out.set(j, i, out.get(j, i) / total);
        }
    }
    Ok(RadialPmf { probs: out })
}

/// Expected radius `sum_j rho_j p(rho_j | theta)` with `rho_j = j / n_rho`.
pub fn soft_argmax(pmf: &RadialPmf) -> Result<AngularProfile> {
    check_columns(&pmf.probs, 1e-4)?;
    let (nr, nt) = (pmf.n_rho(), pmf.n_theta());
    let values = (0..nt)
        .map(|i| (0..nr).map(|j| (j + 1) as f64 / nr as f64 * pmf.probs.get(j, i)).sum())
        .collect();
    Ok(AngularProfile::unchecked(ProfileKind::Radius, values))
}

/// Prior radii: disc, cup-to-disc ratio, and cup as their product.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeRadii {
    pub disc: AngularProfile,
    pub alpha: AngularProfile,
    pub cup: AngularProfile,
}

pub fn shape_radii(disc_pmf: &RadialPmf, alpha_pmf: &RadialPmf) -> Result<ShapeRadii> {
    ensure_same_len("prior pmf angles", disc_pmf.n_theta(), alpha_pmf.n_theta())?;
    let disc = soft_argmax(disc_pmf)?;
    let mut alpha = soft_argmax(alpha_pmf)?;
    alpha.kind = ProfileKind::Alpha;
    let cup = disc.values.iter().zip(&alpha.values).map(|(r, a)| a * r).collect();
    Ok(ShapeRadii { disc, alpha, cup: AngularProfile::unchecked(ProfileKind::Radius, cup) })
}

/// Soft occupancy `S[j, i] = sigmoid((r_i - rho_j) / tau)`.
pub fn render_prior_mask(radius: &AngularProfile, n_rho: usize, tau: f64) -> Result<PolarField> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    if let Some(r) = radius.values.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::OutOfRange(format!("prior radius {r} outside [0, 1]")));
    }
    let nt = radius.len();
    Ok(PolarField::from_fn(n_rho, nt, |j, i| {
        let rho = (j + 1) as f64 / n_rho as f64;
        sigmoid((radius.values[i] - rho) / tau)
    }))
}

/// `1 + sum_j p log p / log n_rho` per angle, with `0 log 0 = 0`.
pub fn entropy_gate(pmf: &RadialPmf) -> AngularProfile {
    let (nr, nt) = (pmf.n_rho(), pmf.n_theta());
    let norm = (nr as f64).ln();
    let values = (0..nt)
        .map(|i| {
            let plogp: f64 = (0..nr)
                .map(|j| pmf.probs.get(j, i))
                .filter(|&p| p > 0.0)
                .map(|p| p * p.ln())
                .sum();
            (1.0 + plogp / norm).clamp(0.0, 1.0)
        })
        .collect();
    AngularProfile::unchecked(ProfileKind::Gate, values)
}

/// `L_c = L_app + lambda_c * gamma(theta) * logit(S_c)`, with `S_c` clamped
/// into `[1e-6, 1 - 1e-6]` before the logit.
pub fn fuse(
    dense_logits: &PolarField,
    gamma: &AngularProfile,
    prior_mask: &PolarField,
    lambda_c: f64,
) -> Result<PolarField> {
    dense_logits.ensure_same_grid(prior_mask, "fusion")?;
    ensure_same_len("fusion gate", gamma.len(), dense_logits.n_theta())?;
    if !(lambda_c >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda_c must be >= 0, got {lambda_c}")));
    }
    let nt = dense_logits.n_theta();
    let mut out = dense_logits.clone();
    for (k, (o, s)) in out.data_mut().iter_mut().zip(prior_mask.data()).enumerate() {
        let g = gamma.values[k % nt];
        if g != 0.0 {
            *o += lambda_c * g * logit(s.clamp(FUSION_CLAMP, 1.0 - FUSION_CLAMP));
        }
    }
    Ok(out)
}

/// Everything the prior branch contributes for one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapePriorOutput {
    pub radii: ShapeRadii,
    pub disc_mask: PolarField,
    pub cup_mask: PolarField,
    /// Cup confidence, from the ratio distribution.
    pub gamma: AngularProfile,
    /// Disc confidence, from the disc boundary distribution.
    pub gamma_disc: AngularProfile,
    pub lambda_c: f64,
}

/// Run the prior branch from raw disc and ratio logits.
pub fn evaluate_prior(
    disc_logits: &PolarField,
    alpha_logits: &PolarField,
    temperature: f64,
    tau: f64,
    lambda_c: f64,
) -> Result<(ShapePriorOutput, RadialPmf, RadialPmf)> {
    disc_logits.ensure_same_grid(alpha_logits, "prior logits")?;
    let p_d = temperature_softmax(disc_logits, temperature)?;
    let p_a = temperature_softmax(alpha_logits, temperature)?;
    let radii = shape_radii(&p_d, &p_a)?;
    let n_rho = disc_logits.n_rho();
    let disc_mask = render_prior_mask(&radii.disc, n_rho, tau)?;
    let cup_mask = render_prior_mask(&radii.cup, n_rho, tau)?;
    let out = ShapePriorOutput {
        gamma: entropy_gate(&p_a),
        gamma_disc: entropy_gate(&p_d),
        radii,
        disc_mask,
        cup_mask,
        lambda_c,
    };
    Ok((out, p_d, p_a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::{decode_nested, monotone_logits, HeadFields};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot(n: usize, k: usize) -> RadialPmf {
        RadialPmf::new(PolarField::from_fn(n, 1, |j, _| if j == k { 1.0 } else { 0.0 })).unwrap()
    }

    fn column(values: &[f64]) -> RadialPmf {
        RadialPmf::new(PolarField::from_fn(values.len(), 1, |j, _| values[j])).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let p = temperature_softmax(&PolarField::filled(8, 3, 1.7), 0.5).unwrap();
        assert!(p.probs().data().iter().all(|&v| (v - 0.125).abs() < 1e-15));

        let p = temperature_softmax(&PolarField::from_fn(2, 1, |j, _| j as f64), 0.5).unwrap();
        assert_abs_diff_eq!(p.probs().get(0, 0), 0.11920292202211755, epsilon = 1e-12);
        assert_abs_diff_eq!(p.probs().get(1, 0), 0.8807970779778823, epsilon = 1e-12);

        let p = temperature_softmax(&PolarField::from_fn(2, 1, |j, _| j as f64 * 1e4), 0.5).unwrap();
        assert_eq!(p.probs().get(1, 0), 1.0);
        assert_eq!(p.probs().get(0, 0), 0.0);

        assert!(temperature_softmax(&PolarField::filled(2, 1, 0.0), 0.0).is_err());
        assert!(temperature_softmax(&PolarField::filled(2, 1, 0.0), -1.0).is_err());
    }

    #[test]
    fn soft_argmax_examples() {
        assert_abs_diff_eq!(soft_argmax(&one_hot(10, 4)).unwrap().values[0], 0.5);
        let n = 20;
        let uniform = column(&vec![1.0 / n as f64; n]);
        assert_abs_diff_eq!(
            soft_argmax(&uniform).unwrap().values[0],
            (n + 1) as f64 / (2 * n) as f64,
            epsilon = 1e-12
        );
        let mut two = vec![0.0; 10];
        two[2] = 0.5;
        two[6] = 0.5;
        assert_abs_diff_eq!(soft_argmax(&column(&two)).unwrap().values[0], 0.5, epsilon = 1e-15);

        let unnormalised = RadialPmf { probs: PolarField::filled(4, 1, 0.3) };
        assert!(soft_argmax(&unnormalised).is_err());
    }

    #[test]
    fn shape_radii_examples() {
        let r = shape_radii(&one_hot(10, 7), &one_hot(10, 4)).unwrap();
        assert_abs_diff_eq!(r.disc.values[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(r.alpha.values[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.cup.values[0], 0.4, epsilon = 1e-15);
        let r = shape_radii(&one_hot(10, 7), &one_hot(10, 9)).unwrap();
        assert_eq!(r.cup.values[0], r.disc.values[0]);
    }

    #[test]
    fn render_examples() {
        let n = 10;
        let r = AngularProfile::new(ProfileKind::Radius, vec![0.5, 0.6]).unwrap();
        let s = render_prior_mask(&r, n, 0.03).unwrap();
        assert_abs_diff_eq!(s.get(4, 0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(5, 1), 0.5, epsilon = 1e-12);
        let r = AngularProfile::new(ProfileKind::Radius, vec![0.5 + 0.1]).unwrap();
        let s = render_prior_mask(&r, n, 0.1).unwrap();
        assert_abs_diff_eq!(s.get(4, 0), 0.7310585786300049, epsilon = 1e-12);
        assert!(render_prior_mask(&r, n, 0.0).is_err());
    }

    #[test]
    fn entropy_gate_examples() {
        assert_eq!(entropy_gate(&one_hot(256, 17)).values[0], 1.0);
        let uniform = column(&vec![1.0 / 256.0; 256]);
        assert_abs_diff_eq!(entropy_gate(&uniform).values[0], 0.0, epsilon = 1e-12);
        let mut half = vec![0.0; 256];
        half[10] = 0.5;
        half[200] = 0.5;
        assert_abs_diff_eq!(entropy_gate(&column(&half)).values[0], 0.875, epsilon = 1e-9);
    }

    #[test]
    fn entropy_gate_decreases_under_mixing() {
        let n = 64;
        let mut last = f64::INFINITY;
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let col: Vec<f64> = (0..n)
                .map(|j| (1.0 - t) * if j == 5 { 1.0 } else { 0.0 } + t / n as f64)
                .collect();
            let g = entropy_gate(&column(&col)).values[0];
            assert!(g <= last);
            last = g;
        }
    }

    #[test]
    fn fuse_examples() {
        let dense = PolarField::from_fn(3, 2, |j, i| j as f64 - i as f64);
        let zero_gate = AngularProfile::constant(ProfileKind::Gate, 2, 0.0).unwrap();
        let mask = PolarField::filled(3, 2, 0.9);
        assert_eq!(fuse(&dense, &zero_gate, &mask, 0.1).unwrap(), dense);

        let one = AngularProfile::constant(ProfileKind::Gate, 2, 1.0).unwrap();
        let half = PolarField::filled(3, 2, 0.5);
        assert_eq!(fuse(&dense, &one, &half, 0.1).unwrap(), dense);

        let m = PolarField::filled(3, 2, sigmoid(2.0));
        let f = fuse(&dense, &one, &m, 0.1).unwrap();
        for (a, b) in f.data().iter().zip(dense.data()) {
            assert_abs_diff_eq!(a - b, 0.2, epsilon = 1e-12);
        }

        let hard = PolarField::filled(3, 2, 1.0);
        assert!(fuse(&dense, &one, &hard, 0.1).unwrap().data().iter().all(|v| v.is_finite()));
    }

    proptest! {
        #[test]
        fn cup_prior_stays_inside_disc_prior(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = PolarField::from_fn(32, 12, |_, _| rng.random_range(-5.0..5.0));
            let a = PolarField::from_fn(32, 12, |_, _| rng.random_range(-5.0..5.0));
            let (out, _, _) = evaluate_prior(&d, &a, 0.5, 0.03, 0.1).unwrap();
            for (c, r) in out.radii.cup.values.iter().zip(&out.radii.disc.values) {
                prop_assert!(c <= r);
            }
            for (c, dm) in out.cup_mask.data().iter().zip(out.disc_mask.data()) {
                prop_assert!(*c <= dm + 1e-6);
            }
            for g in out.gamma.values.iter().chain(&out.gamma_disc.values) {
                prop_assert!((0.0..=1.0).contains(g));
            }
        }

        #[test]
        fn soft_argmax_within_sample_range(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = PolarField::from_fn(16, 5, |_, _| rng.random_range(-30.0..30.0));
            let r = soft_argmax(&temperature_softmax(&l, 0.5).unwrap()).unwrap();
            for v in r.values {
                prop_assert!((1.0 / 16.0 - 1e-12..=1.0 + 1e-12).contains(&v));
            }
        }

        #[test]
        fn rendered_mask_is_radially_non_increasing(r in 0.0f64..1.0, tau in 0.001f64..0.5) {
            let p = AngularProfile::new(ProfileKind::Radius, vec![r]).unwrap();
            let s = render_prior_mask(&p, 64, tau).unwrap();
            for j in 1..64 {
                prop_assert!(s.get(j, 0) <= s.get(j - 1, 0));
            }
        }

        #[test]
        fn entropy_gate_is_permutation_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = PolarField::from_fn(12, 1, |_, _| rng.random_range(-3.0..3.0));
            let p = temperature_softmax(&l, 0.5).unwrap();
            let mut col = p.probs().column(0);
            let g = entropy_gate(&p).values[0];
            col.reverse();
            col.swap(0, 5);
            prop_assert!((entropy_gate(&column(&col)).values[0] - g).abs() < 1e-12);
        }

        #[test]
        fn fused_gate_keeps_nesting(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (nr, nt) = (24, 8);
            let mk = |rng: &mut ChaCha8Rng| HeadFields::new(
                (0..nt).map(|_| rng.random_range(-10.0..10.0)).collect(),
                PolarField::from_fn(nr, nt, |_, _| rng.random_range(-10.0..10.0)),
            ).unwrap();
            let disc = mk(&mut rng);
            let gate = mk(&mut rng);
            let d = PolarField::from_fn(nr, nt, |_, _| rng.random_range(-5.0..5.0));
            let a = PolarField::from_fn(nr, nt, |_, _| rng.random_range(-5.0..5.0));
            let (prior, _, _) = evaluate_prior(&d, &a, 0.5, 0.03, rng.random_range(0.0..2.0)).unwrap();
            let fused = fuse(&monotone_logits(&gate).unwrap(), &prior.gamma, &prior.cup_mask, prior.lambda_c).unwrap();
            let n = decode_nested(&disc, &gate, Some(&fused)).unwrap();
            prop_assert!(n.audit(1e-12).is_clean());
        }
    }

    #[test]
    fn rendering_approaches_step_as_tau_shrinks() {
        let n = 64;
        let r = AngularProfile::new(ProfileKind::Radius, vec![0.4]).unwrap();
        for tau in [0.05, 0.02, 0.01, 0.005] {
            let s = render_prior_mask(&r, n, tau).unwrap();
            let bound = sigmoid(-3.0 / n as f64 / tau);
            for j in 0..n {
                let rho = (j + 1) as f64 / n as f64;
                if (rho - 0.4).abs() > 3.0 / n as f64 {
                    let step = if rho <= 0.4 { 1.0 } else { 0.0 };
                    assert!((s.get(j, 0) - step).abs() <= bound + 1e-15);
                }
            }
        }
    }
}
