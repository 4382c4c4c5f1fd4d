//! Monotone occupancy heads and factorised cup nesting.
//!
//! A head produces a per-angle bias and a raw per-bin decrement field. The
//! logits are the bias minus the running sum of softplus decrements along the
//! radius, so they strictly decrease outward for every angle. The cup is the
//! disc occupancy times a second monotone head's gate, so it can never leave
//! the disc.

use crate::error::{ensure_same_len, Error, Result};
use crate::geometry::{AngularProfile, PolarField, ProfileKind};

/// `max(x, 0) + ln(1 + e^-|x|)`, finite for any finite `x`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for `y > 0`.
#[inline]
pub fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(p / (1 - p))`.
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Raw outputs of one monotone head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadFields {
    /// Per-angle bias, `n_theta` entries.
    pub bias: Vec<f64>,
    /// Pre-softplus decrements, `n_rho x n_theta`.
    pub decrement_raw: PolarField,
}

impl HeadFields {
    pub fn new(bias: Vec<f64>, decrement_raw: PolarField) -> Result<Self> {
        let h = Self { bias, decrement_raw };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_same_len("head bias vs decrement columns", self.bias.len(), self.decrement_raw.n_theta())?;
        if self.decrement_raw.channels() != 1 {
            return Err(Error::ShapeMismatch("decrement field must have one channel".into()));
        }
        if let Some(v) = self.bias.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("head bias {v}")));
        }
        Ok(())
    }

    pub fn n_rho(&self) -> usize {
        self.decrement_raw.n_rho()
    }

    pub fn n_theta(&self) -> usize {
        self.decrement_raw.n_theta()
    }
}

/// `L[j, i] = bias[i] - sum_{m <= j} softplus(decrement_raw[m, i])`.
pub fn monotone_logits(head: &HeadFields) -> Result<PolarField> {
    head.validate()?;
    let (nr, nt) = (head.n_rho(), head.n_theta());
    let mut out = PolarField::filled(nr, nt, 0.0);
    let mut running = head.bias.clone();
    let raw = head.decrement_raw.data();
    let data = out.data_mut();
    for j in 0..nr {
        let row = j * nt;
        for i in 0..nt {
            running[i] -= softplus(raw[row + i]);
            data[row + i] = running[i];
        }
    }
    Ok(out)
}

pub fn occupancy_from_logits(logits: &PolarField) -> PolarField {
    logits.map(sigmoid)
}

/// `r(theta_i) = mean_j P[j, i]`.
pub fn radius_from_occupancy(occ: &PolarField) -> AngularProfile {
    let (nr, nt) = (occ.n_rho(), occ.n_theta());
    let mut sums = vec![0.0; nt];
    let data = occ.data();
    for j in 0..nr {
        for (s, v) in sums.iter_mut().zip(&data[j * nt..(j + 1) * nt]) {
            *s += v;
        }
    }
    let values = sums.into_iter().map(|s| s / nr as f64).collect();
    AngularProfile::unchecked(ProfileKind::Radius, values)
}

fn ensure_unit_interval(f: &PolarField, what: &str) -> Result<()> {
    match f.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::OutOfRange(format!("{what} value {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Cup occupancy `P_c = P_d * Q`.
pub fn nest(disc: &PolarField, gate: &PolarField) -> Result<PolarField> {
    disc.ensure_same_grid(gate, "nest")?;
    ensure_unit_interval(disc, "disc occupancy")?;
    ensure_unit_interval(gate, "cup gate")?;
    disc.zip_map(gate, |p, q| p * q)
}

/// Disc occupancy, cup gate and cup occupancy with their dense radii.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedOccupancy {
    pub disc: PolarField,
    pub gate: PolarField,
    pub cup: PolarField,
    pub disc_radius: AngularProfile,
    pub cup_radius: AngularProfile,
}

/// Structural violations found by [`NestedOccupancy::audit`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StructureAudit {
    pub nesting_violations: usize,
    pub monotonicity_violations: usize,
    pub radius_violations: usize,
}

impl StructureAudit {
    pub fn is_clean(&self) -> bool {
        *self == Self::default()
    }
}

impl NestedOccupancy {
    /// Build from disc occupancy and cup gate, deriving the cup and both radii.
    pub fn from_disc_and_gate(disc: PolarField, gate: PolarField) -> Result<Self> {
        let cup = nest(&disc, &gate)?;
        let disc_radius = radius_from_occupancy(&disc);
        let cup_radius = radius_from_occupancy(&cup);
        Ok(Self { disc, gate, cup, disc_radius, cup_radius })
    }

    /// Count bins breaking nesting, radial non-increase (with `slack`) or radius ordering.
    pub fn audit(&self, slack: f64) -> StructureAudit {
        let (nr, nt) = (self.disc.n_rho(), self.disc.n_theta());
        let mut audit = StructureAudit::default();
        for (pc, pd) in self.cup.data().iter().zip(self.disc.data()) {
            if pc > pd {
                audit.nesting_violations += 1;
            }
        }
        for field in [&self.disc, &self.cup] {
            let d = field.data();
            for j in 1..nr {
                for i in 0..nt {
                    if d[j * nt + i] > d[(j - 1) * nt + i] + slack {
                        audit.monotonicity_violations += 1;
                    }
                }
            }
        }
        for (rc, rd) in self.cup_radius.values.iter().zip(&self.disc_radius.values) {
            if rc > rd || !(0.0..=1.0).contains(rc) || !(0.0..=1.0).contains(rd) {
                audit.radius_violations += 1;
            }
        }
        audit
    }
}

/// Decode both heads into a nested occupancy.
///
/// `fused_gate_logits`, when present, replaces the gate head's monotone logits
/// (see [`crate::prior::fuse`]).
pub fn decode_nested(
    disc: &HeadFields,
    gate: &HeadFields,
    fused_gate_logits: Option<&PolarField>,
) -> Result<NestedOccupancy> {
    if disc.n_rho() != gate.n_rho() || disc.n_theta() != gate.n_theta() {
        return Err(Error::ShapeMismatch("disc and gate heads differ in grid".into()));
    }
    let disc_occ = occupancy_from_logits(&monotone_logits(disc)?);
    let gate_occ = match fused_gate_logits {
        Some(l) => {
            if !l.same_grid(&disc.decrement_raw) {
                return Err(Error::ShapeMismatch("fused gate logits differ in grid".into()));
            }
            occupancy_from_logits(l)
        }
        None => occupancy_from_logits(&monotone_logits(gate)?),
    };
    NestedOccupancy::from_disc_and_gate(disc_occ, gate_occ)
}

/// Threshold an occupancy at `threshold` (inclusive).
pub fn binarize(field: &PolarField, threshold: f64) -> PolarField {
    field.map(|v| if v >= threshold { 1.0 } else { 0.0 })
}
