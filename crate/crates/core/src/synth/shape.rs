use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{AngularProfile, CartesianImage, PolarGridSpec, ProfileKind};
use crate::metrics::{BinaryMask, AUDIT_N_THETA};

pub const DISC_RADIUS_RANGE: (f64, f64) = (0.15, 0.95);
pub const ALPHA_RANGE: (f64, f64) = (0.05, 0.95);
pub const MAX_HARMONIC_ORDER: u32 = 4;

pub const DISC_INTENSITY: f64 = 0.9;
pub const CUP_INTENSITY: f64 = 0.6;
pub const BACKGROUND_INTENSITY: f64 = 0.2;
const BLUR_SIGMA: f64 = 1.5;
const BLUR_RADIUS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Harmonic {
    pub order: u32,
    pub amplitude: f64,
    pub phase: f64,
}

impl Harmonic {
    fn eval(&self, theta: f64) -> f64 {
        self.amplitude * (self.order as f64 * theta + self.phase).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec {
    Constant(f64),
    Fourier { mean: f64, harmonics: Vec<Harmonic> },
}

/// Analytic nested star-convex shape in normalised polar units.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticShapeSpec {
    pub r0: f64,
    pub harmonics: Vec<Harmonic>,
    pub alpha: AlphaSpec,
    pub seed: u64,
}

fn check_harmonics(hs: &[Harmonic], what: &str) -> Result<()> {
    for h in hs {
        if h.order == 0 || h.order > MAX_HARMONIC_ORDER {
            return Err(Error::InvalidParameter(format!("{what} harmonic order {} not in 1..=4", h.order)));
        }
        if !(h.amplitude.is_finite() && h.phase.is_finite()) {
            return Err(Error::NonFinite(format!("{what} harmonic")));
        }
    }
    Ok(())
}

impl SyntheticShapeSpec {
    pub fn circle(r0: f64, alpha: f64, seed: u64) -> Self {
        Self { r0, harmonics: Vec::new(), alpha: AlphaSpec::Constant(alpha), seed }
    }

    /// Near-circular shape with low-order wobble; mildly convex so it stays
    /// star-shaped from anchors a few pixels off centre.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r0 = rng.random_range(0.45..0.6);
        let n = rng.random_range(0..=2);
        let harmonics = (0..n)
            .map(|_| {
                let order = rng.random_range(2..=MAX_HARMONIC_ORDER);
                let cap = 0.3 * r0 / (order * order) as f64;
                Harmonic { order, amplitude: rng.random_range(0.0..cap), phase: rng.random_range(0.0..TAU) }
            })
            .collect();
        let alpha = if rng.random_bool(0.5) {
            AlphaSpec::Constant(rng.random_range(0.3..0.65))
        } else {
            AlphaSpec::Fourier {
                mean: rng.random_range(0.3..0.6),
                harmonics: vec![Harmonic {
                    order: rng.random_range(1..=2),
                    amplitude: rng.random_range(0.0..0.04),
                    phase: rng.random_range(0.0..TAU),
                }],
            }
        };
        Self { r0, harmonics, alpha, seed }
    }

    fn raw_disc(&self, theta: f64) -> f64 {
        self.r0 + self.harmonics.iter().map(|h| h.eval(theta)).sum::<f64>()
    }

    fn raw_alpha(&self, theta: f64) -> f64 {
        match &self.alpha {
            AlphaSpec::Constant(a) => *a,
            AlphaSpec::Fourier { mean, harmonics } => mean + harmonics.iter().map(|h| h.eval(theta)).sum::<f64>(),
        }
    }

    pub fn disc_radius(&self, theta: f64) -> f64 {
        self.raw_disc(theta).clamp(DISC_RADIUS_RANGE.0, DISC_RADIUS_RANGE.1)
    }

    pub fn alpha(&self, theta: f64) -> f64 {
        self.raw_alpha(theta).clamp(ALPHA_RANGE.0, ALPHA_RANGE.1)
    }

    pub fn cup_radius(&self, theta: f64) -> f64 {
        self.alpha(theta) * self.disc_radius(theta)
    }

    /// Rejects specs whose clamped radii would be pinned to a bound at every angle.
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(Error::InvalidParameter(format!("r0 must lie in (0, 1), got {}", self.r0)));
        }
        check_harmonics(&self.harmonics, "disc")?;
        match &self.alpha {
            AlphaSpec::Constant(a) | AlphaSpec::Fourier { mean: a, .. } if !(*a > 0.0 && *a < 1.0) => {
                return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {a}")));
            }
            AlphaSpec::Fourier { harmonics, .. } => check_harmonics(harmonics, "alpha")?,
            AlphaSpec::Constant(_) => {}
        }
        let probe = |f: &dyn Fn(f64) -> f64, (lo, hi): (f64, f64)| {
            (0..720).any(|k| {
                let v = f(k as f64 * TAU / 720.0);
                v >= lo && v <= hi
            })
        };
        if !probe(&|t| self.raw_disc(t), DISC_RADIUS_RANGE) {
            return Err(Error::InvalidParameter("disc radius is outside [0.15, 0.95] at every angle".into()));
        }
        if !probe(&|t| self.raw_alpha(t), ALPHA_RANGE) {
            return Err(Error::InvalidParameter("cup ratio is outside [0.05, 0.95] at every angle".into()));
        }
        Ok(())
    }

    pub fn profiles(&self, thetas: &[f64]) -> (AngularProfile, AngularProfile, AngularProfile) {
        let d: Vec<f64> = thetas.iter().map(|&t| self.disc_radius(t)).collect();
        let c: Vec<f64> = thetas.iter().map(|&t| self.cup_radius(t)).collect();
        let rim = d.iter().zip(&c).map(|(d, c)| d - c).collect();
        (
            AngularProfile::unchecked(ProfileKind::Radius, d),
            AngularProfile::unchecked(ProfileKind::Radius, c),
            AngularProfile::unchecked(ProfileKind::Rim, rim),
        )
    }
}

/// Frame misalignment and pixel noise applied when rendering a case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corruption {
    pub dx: f64,
    pub dy: f64,
    pub scale: f64,
    pub noise_sigma: f64,
}

impl Default for Corruption {
    fn default() -> Self {
        Self { dx: 0.0, dy: 0.0, scale: 1.0, noise_sigma: 0.0 }
    }
}

impl Corruption {
    pub fn shift(dx: f64, dy: f64, scale: f64) -> Self {
        Self { dx, dy, scale, noise_sigma: 0.0 }
    }

    pub fn is_identity(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0 && self.scale == 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Disc,
    Cup,
}

/// A shape placed in pixel space: centre `(cx, cy)` and unit radius `radius` px.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedShape {
    pub spec: SyntheticShapeSpec,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl PlacedShape {
    pub fn contains(&self, boundary: Boundary, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let d = dx.hypot(dy);
        if d == 0.0 {
            return true;
        }
        let theta = dy.atan2(dx);
        let r = match boundary {
            Boundary::Disc => self.spec.disc_radius(theta),
            Boundary::Cup => self.spec.cup_radius(theta),
        };
        d <= r * self.radius
    }

    /// Distance in pixels from `(ax, ay)` along `theta` to the first exit of
    /// `boundary`; zero when the start point is already outside.
    pub fn ray_exit(&self, boundary: Boundary, ax: f64, ay: f64, theta: f64) -> f64 {
        if !self.contains(boundary, ax, ay) {
            return 0.0;
        }
        let (c, s) = (theta.cos(), theta.sin());
        let inside = |t: f64| self.contains(boundary, ax + t * c, ay + t * s);
        let step = 0.25;
        let limit = 4.0 * self.radius + (ax - self.cx).hypot(ay - self.cy);
        let mut lo = 0.0;
        while lo < limit && inside(lo + step) {
            lo += step;
        }
        let mut hi = lo + step;
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A rendered synthetic fundus crop with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub shape: PlacedShape,
    pub corruption: Corruption,
    pub image: CartesianImage,
    pub disc_mask: BinaryMask,
    pub cup_mask: BinaryMask,
    /// Ground-truth profiles about the true centre at the audit angles.
    pub disc_radius: AngularProfile,
    pub cup_radius: AngularProfile,
    pub rim: AngularProfile,
}

impl SyntheticCase {
    pub fn spec(&self) -> &SyntheticShapeSpec {
        &self.shape.spec
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    /// The frame whose anchor and radius match the rendered shape.
    pub fn true_frame(&self, n_rho: usize, n_theta: usize) -> Result<PolarGridSpec> {
        PolarGridSpec::new(self.shape.cx, self.shape.cy, self.shape.radius, n_rho, n_theta, self.height(), self.width())
    }
}

fn blur_kernel() -> Vec<f64> {
    let w: Vec<f64> = (-(BLUR_RADIUS as i64)..=BLUR_RADIUS as i64)
        .map(|k| (-(k * k) as f64 / (2.0 * BLUR_SIGMA * BLUR_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with edge replication.
fn blur(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k = blur_kernel();
    let r = BLUR_RADIUS as i64;
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (t, kv) in k.iter().enumerate() {
                    let o = t as i64 - r;
                    let (sx, sy) = if horizontal {
                        ((x as i64 + o).clamp(0, w as i64 - 1) as usize, y)
                    } else {
                        (x, (y as i64 + o).clamp(0, h as i64 - 1) as usize)
                    };
                    acc += kv * src[sy * w + sx];
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    pass(&pass(plane, true), false)
}

/// Render a case: the shape is centred at `(W/2 + dx, H/2 + dy)` with unit
/// radius `scale * min(H, W) / 2`.
pub fn gen_case(spec: &SyntheticShapeSpec, corruption: Corruption, height: usize, width: usize) -> Result<SyntheticCase> {
    spec.validate()?;
    if height < 8 || width < 8 {
        return Err(Error::InvalidParameter(format!("image must be at least 8x8, got {height}x{width}")));
    }
    let Corruption { dx, dy, scale, noise_sigma } = corruption;
    if !(scale > 0.0 && scale.is_finite() && dx.is_finite() && dy.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad corruption {corruption:?}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let shape = PlacedShape {
        spec: spec.clone(),
        cx: width as f64 / 2.0 + dx,
        cy: height as f64 / 2.0 + dy,
        radius: scale * height.min(width) as f64 / 2.0,
    };
    let disc_mask = BinaryMask::from_fn(height, width, |x, y| shape.contains(Boundary::Disc, x as f64, y as f64));
    let cup_mask = BinaryMask::from_fn(height, width, |x, y| shape.contains(Boundary::Cup, x as f64, y as f64));

    let sharp: Vec<f64> = (0..height * width)
        .map(|k| {
            let (x, y) = (k % width, k / width);
            if cup_mask.get(x, y) {
                CUP_INTENSITY
            } else if disc_mask.get(x, y) {
                DISC_INTENSITY
            } else {
                BACKGROUND_INTENSITY
            }
        })
        .collect();
    let mut plane = blur(&sharp, height, width);
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9E37_79B9_7F4A_7C15);
        let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in &mut plane {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    let image = CartesianImage::from_fn(3, height, width, |_, x, y| plane[y * width + x]);

    let thetas: Vec<f64> = (0..AUDIT_N_THETA).map(|i| -PI + (i as f64 + 0.5) * TAU / AUDIT_N_THETA as f64).collect();
    let (disc_radius, cup_radius, rim) = spec.profiles(&thetas);
    Ok(SyntheticCase { shape, corruption, image, disc_mask, cup_mask, disc_radius, cup_radius, rim })
}

fn fmt_harmonics(hs: &[Harmonic]) -> String {
    hs.iter().map(|h| format!("{}:{:?}:{:?}", h.order, h.amplitude, h.phase)).collect::<Vec<_>>().join(",")
}

fn parse_harmonics(v: &str) -> Result<Vec<Harmonic>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let parts: Vec<&str> = s.split(':').collect();
            let bad = || Error::Format(format!("bad harmonic '{s}', expected order:amplitude:phase"));
            if parts.len() != 3 {
                return Err(bad());
            }
            Ok(Harmonic {
                order: parts[0].parse().map_err(|_| bad())?,
                amplitude: parts[1].parse().map_err(|_| bad())?,
                phase: parts[2].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// `key = value` description of a case, exact enough to regenerate it bit for bit.
pub fn case_to_text(spec: &SyntheticShapeSpec, corruption: &Corruption, height: usize, width: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed = {}", spec.seed);
    let _ = writeln!(s, "height = {height}");
    let _ = writeln!(s, "width = {width}");
    let _ = writeln!(s, "r0 = {:?}", spec.r0);
    let _ = writeln!(s, "harmonics = {}", fmt_harmonics(&spec.harmonics));
    match &spec.alpha {
        AlphaSpec::Constant(a) => {
            let _ = writeln!(s, "alpha = {a:?}");
        }
        AlphaSpec::Fourier { mean, harmonics } => {
            let _ = writeln!(s, "alpha = {mean:?}");
            let _ = writeln!(s, "alpha_harmonics = {}", fmt_harmonics(harmonics));
        }
    }
    let _ = writeln!(s, "dx = {:?}", corruption.dx);
    let _ = writeln!(s, "dy = {:?}", corruption.dy);
    let _ = writeln!(s, "scale = {:?}", corruption.scale);
    let _ = writeln!(s, "noise = {:?}", corruption.noise_sigma);
    s
}

/// Inverse of [`case_to_text`]; returns the shape parameters, corruption and `(height, width)`.
pub fn case_from_text(text: &str) -> Result<(SyntheticShapeSpec, Corruption, (usize, usize))> {
    let mut kv = std::collections::BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected key = value", n + 1)))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    const KNOWN: [&str; 11] =
        ["seed", "height", "width", "r0", "harmonics", "alpha", "alpha_harmonics", "dx", "dy", "scale", "noise"];
    if let Some(k) = kv.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(Error::Format(format!("unknown case key '{k}'")));
    }
    fn get<T: std::str::FromStr>(kv: &std::collections::BTreeMap<String, String>, k: &str) -> Result<T> {
        kv.get(k)
            .ok_or_else(|| Error::Format(format!("missing case key '{k}'")))?
            .parse()
            .map_err(|_| Error::Format(format!("bad value for case key '{k}'")))
    }
    let alpha_mean: f64 = get(&kv, "alpha")?;
    let alpha = match kv.get("alpha_harmonics") {
        Some(h) => AlphaSpec::Fourier { mean: alpha_mean, harmonics: parse_harmonics(h)? },
        None => AlphaSpec::Constant(alpha_mean),
    };
    let spec = SyntheticShapeSpec {
        r0: get(&kv, "r0")?,
        harmonics: parse_harmonics(kv.get("harmonics").map(String::as_str).unwrap_or(""))?,
        alpha,
        seed: get(&kv, "seed")?,
    };
    let corruption =
        Corruption { dx: get(&kv, "dx")?, dy: get(&kv, "dy")?, scale: get(&kv, "scale")?, noise_sigma: get(&kv, "noise")? };
    Ok((spec, corruption, (get(&kv, "height")?, get(&kv, "width")?)))
}
