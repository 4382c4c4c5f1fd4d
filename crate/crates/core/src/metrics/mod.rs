//! Overlap, boundary and clinical-geometry metrics, structural validity
//! auditing and the paired signed-rank test.

mod distance;
mod mask;
mod stats;

pub use distance::{hd95, nearest_rank};
pub use mask::{compactness, dice, vcdr, BinaryMask};
pub use stats::{wilcoxon_signed_rank, PValueMethod, WilcoxonResult, EXACT_MAX_N};

use crate::decoder::radius_from_occupancy;
use crate::error::{ensure_same_len, Result};
use crate::geometry::{warp_to_polar, AngularProfile, PolarGridSpec, ProfileKind};

/// Grid used when auditing star-convexity of Cartesian masks.
pub const AUDIT_N_RHO: usize = 256;
pub const AUDIT_N_THETA: usize = 360;

/// `r_d - r_c` per angle.
pub fn rim_profile(disc: &AngularProfile, cup: &AngularProfile) -> Result<AngularProfile> {
    ensure_same_len("rim profile", disc.len(), cup.len())?;
    let values = disc.values.iter().zip(&cup.values).map(|(d, c)| d - c).collect();
    AngularProfile::new(ProfileKind::Rim, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RimAgreement {
    pub mae: f64,
    /// `None` when either profile has zero variance.
    pub pearson: Option<f64>,
}

pub fn rim_agreement(pred: &AngularProfile, gt: &AngularProfile) -> Result<RimAgreement> {
    ensure_same_len("rim agreement", pred.len(), gt.len())?;
    let n = pred.len() as f64;
    let mae = pred.values.iter().zip(&gt.values).map(|(p, g)| (p - g).abs()).sum::<f64>() / n;
    let (mp, mg) = (pred.mean(), gt.mean());
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, g) in pred.values.iter().zip(&gt.values) {
        let (dp, dg) = (p - mp, g - mg);
        sxy += dp * dg;
        sxx += dp * dp;
        syy += dg * dg;
    }
    // Summation noise leaves a tiny variance on constant profiles.
    let flat = |s: f64, m: f64| s <= n * (1e-12 * (1.0 + m.abs())).powi(2);
    let pearson = if !flat(sxx, mp) && !flat(syy, mg) {
        Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
    } else {
        None
    };
    Ok(RimAgreement { mae, pearson })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validity {
    pub nesting_violation: bool,
    /// Angular bins where either mask re-enters after leaving along the ray.
    pub star_convexity_violation_bins: usize,
}

fn column_reenters(column: impl Iterator<Item = f64>) -> bool {
    let mut low: Option<f64> = None;
    for v in column {
        match low {
            None if v < 0.5 => low = Some(v),
            None => {}
            Some(m) => {
                if v - m > 0.5 {
                    return true;
                }
                low = Some(m.min(v));
            }
        }
    }
    false
}

/// Cup-outside-disc pixels and star-convexity about the anchor of `spec`.
pub fn validity_check(cup: &BinaryMask, disc: &BinaryMask, spec: &PolarGridSpec) -> Result<Validity> {
    cup.ensure_same_dims(disc)?;
    let nesting_violation = cup.bits().iter().zip(disc.bits()).any(|(&c, &d)| c && !d);
    let audit = PolarGridSpec::new(
        spec.cx,
        spec.cy,
        spec.radius,
        AUDIT_N_RHO,
        AUDIT_N_THETA,
        disc.height(),
        disc.width(),
    )?;
    let cup_p = warp_to_polar(&cup.to_image(), &audit)?;
    let disc_p = warp_to_polar(&disc.to_image(), &audit)?;
    let bins = (0..AUDIT_N_THETA)
        .filter(|&i| {
            column_reenters((0..AUDIT_N_RHO).map(|j| disc_p.get(j, i)))
                || column_reenters((0..AUDIT_N_RHO).map(|j| cup_p.get(j, i)))
        })
        .count();
    Ok(Validity { nesting_violation, star_convexity_violation_bins: bins })
}

/// Boundary radius per angle of a star-shaped mask, by integrating its polar occupancy.
pub fn mask_radius_profile(mask: &BinaryMask, spec: &PolarGridSpec) -> Result<AngularProfile> {
    let polar = warp_to_polar(&mask.to_image(), spec)?;
    Ok(radius_from_occupancy(&polar))
}

/// Per-case evaluation of predicted against ground-truth cup and disc masks.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub dice_cup: f64,
    pub dice_disc: f64,
    pub hd95_cup: Option<f64>,
    pub hd95_disc: Option<f64>,
    pub vcdr_pred: Option<f64>,
    pub vcdr_gt: f64,
    pub vcdr_ae: Option<f64>,
    pub rim_mae: f64,
    pub rim_pearson: Option<f64>,
    pub nesting_violation: bool,
    pub star_convexity_violation_bins: usize,
}

impl MetricsReport {
    pub const COLUMNS: [&'static str; 11] = [
        "dice_cup",
        "dice_disc",
        "hd95_cup",
        "hd95_disc",
        "vcdr_pred",
        "vcdr_gt",
        "vcdr_ae",
        "rim_mae",
        "rim_pearson",
        "nesting_violation",
        "star_violation_bins",
    ];

    /// Values in [`Self::COLUMNS`] order; `None` marks an undefined metric.
    pub fn values(&self) -> [Option<f64>; 11] {
        [
            Some(self.dice_cup),
            Some(self.dice_disc),
            self.hd95_cup,
            self.hd95_disc,
            self.vcdr_pred,
            Some(self.vcdr_gt),
            self.vcdr_ae,
            Some(self.rim_mae),
            self.rim_pearson,
            Some(self.nesting_violation as u8 as f64),
            Some(self.star_convexity_violation_bins as f64),
        ]
    }
}

/// Evaluate predicted masks; `spec` anchors rim profiles and the validity audit.
pub fn evaluate(
    pred_cup: &BinaryMask,
    pred_disc: &BinaryMask,
    gt_cup: &BinaryMask,
    gt_disc: &BinaryMask,
    spec: &PolarGridSpec,
) -> Result<MetricsReport> {
    pred_cup.ensure_same_dims(gt_cup)?;
    pred_disc.ensure_same_dims(gt_disc)?;
    let vcdr_gt = vcdr(gt_cup, gt_disc)?;
    let vcdr_pred = vcdr(pred_cup, pred_disc).ok();
    let rim_pred = rim_profile(
        &mask_radius_profile(pred_disc, spec)?,
        &mask_radius_profile(pred_cup, spec)?,
    )?;
    let rim_gt = rim_profile(&mask_radius_profile(gt_disc, spec)?, &mask_radius_profile(gt_cup, spec)?)?;
    let rim = rim_agreement(&rim_pred, &rim_gt)?;
    let validity = validity_check(pred_cup, pred_disc, spec)?;
    Ok(MetricsReport {
        dice_cup: dice(pred_cup, gt_cup)?,
        dice_disc: dice(pred_disc, gt_disc)?,
        hd95_cup: hd95(pred_cup, gt_cup).ok(),
        hd95_disc: hd95(pred_disc, gt_disc).ok(),
        vcdr_pred,
        vcdr_gt,
        vcdr_ae: vcdr_pred.map(|p| (p - vcdr_gt).abs()),
        rim_mae: rim.mae,
        rim_pearson: rim.pearson,
        nesting_violation: validity.nesting_violation,
        star_convexity_violation_bins: validity.star_convexity_violation_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::geometry::to_polar_coords;

    fn profile(kind: ProfileKind, v: Vec<f64>) -> AngularProfile {
        AngularProfile::new(kind, v).unwrap()
    }

    #[test]
    fn rim_profile_examples() {
        let d = AngularProfile::constant(ProfileKind::Radius, 6, 0.8).unwrap();
        let c = AngularProfile::constant(ProfileKind::Radius, 6, 0.3).unwrap();
        assert!(rim_profile(&d, &c).unwrap().values.iter().all(|&r| (r - 0.5).abs() < 1e-15));
        assert!(rim_profile(&d, &d).unwrap().values.iter().all(|&r| r == 0.0));
        let short = AngularProfile::constant(ProfileKind::Radius, 5, 0.3).unwrap();
        assert!(rim_profile(&d, &short).is_err());
    }

    #[test]
    fn rim_agreement_examples() {
        let gt = profile(ProfileKind::Rim, (0..12).map(|i| 0.2 + 0.01 * (i as f64).sin()).collect());
        let same = rim_agreement(&gt, &gt).unwrap();
        assert_eq!(same.mae, 0.0);
        assert_abs_diff_eq!(same.pearson.unwrap(), 1.0, epsilon = 1e-12);

        let flipped = profile(ProfileKind::Rim, gt.values.iter().map(|g| 0.5 - g).collect());
        assert_abs_diff_eq!(rim_agreement(&flipped, &gt).unwrap().pearson.unwrap(), -1.0, epsilon = 1e-12);

        let shifted = profile(ProfileKind::Rim, gt.values.iter().map(|g| g + 0.1).collect());
        let a = rim_agreement(&shifted, &gt).unwrap();
        assert_abs_diff_eq!(a.mae, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(a.pearson.unwrap(), 1.0, epsilon = 1e-12);

        let flat = AngularProfile::constant(ProfileKind::Rim, 12, 0.2).unwrap();
        assert_eq!(rim_agreement(&flat, &gt).unwrap().pearson, None);
    }

    fn disk(spec: &PolarGridSpec, r: f64, dx: f64) -> BinaryMask {
        BinaryMask::from_fn(spec.height, spec.width, |x, y| {
            (x as f64 - spec.cx - dx).hypot(y as f64 - spec.cy) <= r
        })
    }

    #[test]
    fn concentric_disks_are_valid() {
        let spec = PolarGridSpec::for_crop(128, 128, 64, 90).unwrap();
        let v = validity_check(&disk(&spec, 20.0, 0.0), &disk(&spec, 40.0, 0.0), &spec).unwrap();
        assert_eq!(v, Validity { nesting_violation: false, star_convexity_violation_bins: 0 });
    }

    #[test]
    fn protruding_cup_is_flagged() {
        let spec = PolarGridSpec::for_crop(128, 128, 64, 90).unwrap();
        let v = validity_check(&disk(&spec, 20.0, 25.0), &disk(&spec, 40.0, 0.0), &spec).unwrap();
        assert!(v.nesting_violation);
    }

    #[test]
    fn fragmented_disc_violates_star_convexity() {
        let spec = PolarGridSpec::for_crop(256, 256, 64, 90).unwrap();
        // Central blob plus a detached blob further out along +x.
        let disc = BinaryMask::from_fn(256, 256, |x, y| {
            let (px, py) = (x as f64 - spec.cx, y as f64 - spec.cy);
            px.hypot(py) <= 30.0 || (px - 80.0).hypot(py) <= 15.0
        });
        let v = validity_check(&BinaryMask::empty(256, 256), &disc, &spec).unwrap();

        // Ray-march oracle on the audit grid: count bins that leave and re-enter.
        let audit = PolarGridSpec::new(spec.cx, spec.cy, spec.radius, 256, 360, 256, 256).unwrap();
        let oracle = (0..360)
            .filter(|&i| {
                let theta = audit.theta_at(i);
                let mut left = false;
                for j in 0..256 {
                    let rho = audit.rho_at(j);
                    let (x, y) = crate::geometry::from_polar_coords(rho, theta, &audit);
                    let (xi, yi) = (x.round() as i64, y.round() as i64);
                    let inside = xi >= 0 && yi >= 0 && xi < 256 && yi < 256 && disc.get(xi as usize, yi as usize);
                    if !inside {
                        left = true;
                    } else if left {
                        return true;
                    }
                }
                false
            })
            .count();
        assert!(oracle > 0);
        assert!(v.star_convexity_violation_bins > 0);
        assert!((v.star_convexity_violation_bins as i64 - oracle as i64).abs() <= 2);
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let spec = PolarGridSpec::for_crop(128, 128, 64, 120).unwrap();
        let disc = BinaryMask::from_fn(128, 128, |x, y| {
            let (rho, theta) = to_polar_coords(x as f64, y as f64, &spec);
            rho <= 0.6 + 0.05 * (2.0 * theta).cos()
        });
        let cup = BinaryMask::from_fn(128, 128, |x, y| {
            let (rho, theta) = to_polar_coords(x as f64, y as f64, &spec);
            rho <= 0.3 + 0.05 * theta.sin()
        });
        let r = evaluate(&cup, &disc, &cup, &disc, &spec).unwrap();
        assert_eq!((r.dice_cup, r.dice_disc), (1.0, 1.0));
        assert_eq!((r.hd95_cup, r.hd95_disc), (Some(0.0), Some(0.0)));
        assert_eq!(r.rim_mae, 0.0);
        assert_eq!(r.vcdr_ae, Some(0.0));
        assert!(!r.nesting_violation);
        assert_eq!(r.star_convexity_violation_bins, 0);
    }
}
