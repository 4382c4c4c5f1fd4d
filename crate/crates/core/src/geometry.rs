//! Disc-centred polar frame, bilinear warping in both directions and the
//! circular-padding convolution used by polar feature stacks.
//!
//! Index conventions, fixed crate-wide:
//! - radial sample `k` (0-based) sits at `rho = (k + 1) / n_rho`, so there is
//!   no sample at the anchor and the last sample is exactly `rho = 1`;
//! - angular sample `k` sits at the bin centre `theta = -pi + (k + 0.5) * 2pi / n_theta`;
//! - Cartesian pixel `(x, y)` is the integer lattice point, `y` pointing down.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// The normalised polar frame anchored inside a fundus crop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGridSpec {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub n_rho: usize,
    pub n_theta: usize,
    pub height: usize,
    pub width: usize,
}

impl PolarGridSpec {
    pub fn new(
        cx: f64,
        cy: f64,
        radius: f64,
        n_rho: usize,
        n_theta: usize,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be > 0, got {radius}")));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidParameter("anchor must be finite".into()));
        }
        if n_rho < 2 {
            return Err(Error::InvalidParameter(format!("n_rho must be >= 2, got {n_rho}")));
        }
        if n_theta < 4 {
            return Err(Error::InvalidParameter(format!("n_theta must be >= 4, got {n_theta}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter("image dimensions must be >= 1".into()));
        }
        Ok(Self { cx, cy, radius, n_rho, n_theta, height, width })
    }

    /// Anchor at the crop centre, radius half the shorter side.
    pub fn for_crop(height: usize, width: usize, n_rho: usize, n_theta: usize) -> Result<Self> {
        let radius = height.min(width) as f64 / 2.0;
        Self::new(width as f64 / 2.0, height as f64 / 2.0, radius, n_rho, n_theta, height, width)
    }

    /// Same grid with the anchor moved by `(dx, dy)` pixels and the radius scaled by `scale`.
    pub fn perturbed(&self, dx: f64, dy: f64, scale: f64) -> Result<Self> {
        Self::new(
            self.cx + dx,
            self.cy + dy,
            self.radius * scale,
            self.n_rho,
            self.n_theta,
            self.height,
            self.width,
        )
    }

    #[inline]
    pub fn rho_at(&self, k: usize) -> f64 {
        (k + 1) as f64 / self.n_rho as f64
    }

    #[inline]
    pub fn theta_step(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    #[inline]
    pub fn theta_at(&self, k: usize) -> f64 {
        -PI + (k as f64 + 0.5) * self.theta_step()
    }

    pub fn rhos(&self) -> Vec<f64> {
        (0..self.n_rho).map(|k| self.rho_at(k)).collect()
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|k| self.theta_at(k)).collect()
    }
}

/// Cartesian pixel position to `(rho, theta)` with `theta` in `(-pi, pi]`.
pub fn to_polar_coords(x: f64, y: f64, spec: &PolarGridSpec) -> (f64, f64) {
    let dx = x - spec.cx;
    let dy = y - spec.cy;
    let rho = dx.hypot(dy) / spec.radius;
    // atan2(0, 0) is 0; -pi only shows up for a negative-zero dy.
    let mut theta = dy.atan2(dx);
    if theta <= -PI {
        theta = PI;
    }
    (rho, theta)
}

pub fn from_polar_coords(rho: f64, theta: f64, spec: &PolarGridSpec) -> (f64, f64) {
    let r = rho * spec.radius;
    (spec.cx + r * theta.cos(), spec.cy + r * theta.sin())
}

/// Multi-channel image with values in `[0, 1]`, stored channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianImage {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl CartesianImage {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "image data has {} values, expected {}",
                data.len(),
                channels * height * width
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("image value {v}")));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self { channels, height, width, data: vec![value; channels * height * width] }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self { channels, height, width, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn channel_plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Channel-averaged copy.
    pub fn to_gray(&self) -> Self {
        let n = self.height * self.width;
        let mut out = vec![0.0; n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.channel_plane(c)) {
                *o += v;
            }
        }
        let k = self.channels as f64;
        out.iter_mut().for_each(|v| *v /= k);
        Self { channels: 1, height: self.height, width: self.width, data: out }
    }

    #[inline]
    fn pixel_or_zero(&self, c: usize, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            0.0
        } else {
            self.get(c, x as usize, y as usize)
        }
    }

    #[inline]
    fn sample_channel(&self, c: usize, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let v00 = self.pixel_or_zero(c, x0, y0);
        let v10 = self.pixel_or_zero(c, x0 + 1, y0);
        let v01 = self.pixel_or_zero(c, x0, y0 + 1);
        let v11 = self.pixel_or_zero(c, x0 + 1, y0 + 1);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }
}

/// Bilinear interpolation with zero padding outside the image, one value per channel.
pub fn bilinear_sample(image: &CartesianImage, x: f64, y: f64) -> Vec<f64> {
    (0..image.channels).map(|c| image.sample_channel(c, x, y)).collect()
}

/// Scalar field on the `n_rho x n_theta` grid, possibly multi-channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    channels: usize,
    n_rho: usize,
    n_theta: usize,
    data: Vec<f64>,
}

impl PolarField {
    pub fn new(channels: usize, n_rho: usize, n_theta: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || n_rho == 0 || n_theta == 0 {
            return Err(Error::InvalidParameter("field dimensions must be positive".into()));
        }
        if data.len() != channels * n_rho * n_theta {
            return Err(Error::ShapeMismatch(format!(
                "field data has {} values, expected {}",
                data.len(),
                channels * n_rho * n_theta
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value {v}")));
        }
        Ok(Self { channels, n_rho, n_theta, data })
    }

    pub fn filled(n_rho: usize, n_theta: usize, value: f64) -> Self {
        Self { channels: 1, n_rho, n_theta, data: vec![value; n_rho * n_theta] }
    }

    /// Single-channel field from `f(j, i)` with `j` the radial and `i` the angular index.
    pub fn from_fn(n_rho: usize, n_theta: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_rho * n_theta);
        for j in 0..n_rho {
            for i in 0..n_theta {
                data.push(f(j, i));
            }
        }
        Self { channels: 1, n_rho, n_theta, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.n_rho == other.n_rho && self.n_theta == other.n_theta
    }

    pub(crate) fn ensure_same_grid(&self, other: &Self, what: &str) -> Result<()> {
        if !self.same_grid(other) || self.channels != other.channels {
            return Err(Error::ShapeMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.channels, self.n_rho, self.n_theta, other.channels, other.n_rho, other.n_theta
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[j * self.n_theta + i]
    }

    #[inline]
    pub fn get_c(&self, c: usize, j: usize, i: usize) -> f64 {
        self.data[(c * self.n_rho + j) * self.n_theta + i]
    }

    #[inline]
    pub fn set(&mut self, j: usize, i: usize, v: f64) {
        self.data[j * self.n_theta + i] = v;
    }

    pub fn channel(&self, c: usize) -> Self {
        let n = self.n_rho * self.n_theta;
        Self {
            channels: 1,
            n_rho: self.n_rho,
            n_theta: self.n_theta,
            data: self.data[c * n..(c + 1) * n].to_vec(),
        }
    }

    /// Channel-averaged copy.
    pub fn mean_channels(&self) -> Self {
        let n = self.n_rho * self.n_theta;
        let mut out = vec![0.0; n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(&self.data[c * n..(c + 1) * n]) {
                *o += v;
            }
        }
        let k = self.channels as f64;
        out.iter_mut().for_each(|v| *v /= k);
        Self { channels: 1, n_rho: self.n_rho, n_theta: self.n_theta, data: out }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            channels: self.channels,
            n_rho: self.n_rho,
            n_theta: self.n_theta,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_grid(other, "zip_map")?;
        Ok(Self {
            channels: self.channels,
            n_rho: self.n_rho,
            n_theta: self.n_theta,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Column `i` of the first channel, ordered by increasing radius.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.n_rho).map(|j| self.get(j, i)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Circularly shift the angular axis so that `out[.., i] = self[.., i - shift]`.
    pub fn roll_theta(&self, shift: isize) -> Self {
        let nt = self.n_theta as isize;
        let mut out = self.clone();
        for c in 0..self.channels {
            for j in 0..self.n_rho {
                for i in 0..self.n_theta {
                    let src = (i as isize - shift).rem_euclid(nt) as usize;
                    out.data[(c * self.n_rho + j) * self.n_theta + i] = self.get_c(c, j, src);
                }
            }
        }
        out
    }

    /// Bilinear lookup at continuous `(rho, theta)`: angular interpolation wraps
    /// across +-pi, radii beyond 1 read zero, radii inside the first sample read
    /// the first sample.
    pub fn sample(&self, c: usize, rho: f64, theta: f64) -> f64 {
        if rho > 1.0 {
            return 0.0;
        }
        let n_rho = self.n_rho as f64;
        let fr = (rho * n_rho - 1.0).clamp(0.0, n_rho - 1.0);
        let j0 = fr.floor() as usize;
        let j1 = (j0 + 1).min(self.n_rho - 1);
        let wr = fr - j0 as f64;

        let step = 2.0 * PI / self.n_theta as f64;
        let ft = (theta + PI) / step - 0.5;
        let i0f = ft.floor();
        let wt = ft - i0f;
        let nt = self.n_theta as i64;
        let i0 = (i0f as i64).rem_euclid(nt) as usize;
        let i1 = (i0 + 1) % self.n_theta;

        let v0 = (1.0 - wt) * self.get_c(c, j0, i0) + wt * self.get_c(c, j0, i1);
        let v1 = (1.0 - wt) * self.get_c(c, j1, i0) + wt * self.get_c(c, j1, i1);
        (1.0 - wr) * v0 + wr * v1
    }
}

/// What an angular profile measures; fixes its admissible range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Radius,
    Gate,
    Rim,
    Alpha,
}

/// One value per angular bin.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularProfile {
    pub kind: ProfileKind,
    pub values: Vec<f64>,
}

impl AngularProfile {
    pub fn new(kind: ProfileKind, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("profile value {v}")));
        }
        if kind != ProfileKind::Rim {
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::OutOfRange(format!("{kind:?} profile value {v} outside [0, 1]")));
            }
        }
        Ok(Self { kind, values })
    }

    pub(crate) fn unchecked(kind: ProfileKind, values: Vec<f64>) -> Self {
        Self { kind, values }
    }

    pub fn constant(kind: ProfileKind, n_theta: usize, value: f64) -> Result<Self> {
        Self::new(kind, vec![value; n_theta])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Pull an image into the polar frame: `out[c, j, i] = image(from_polar(rho_j, theta_i))`.
pub fn warp_to_polar(image: &CartesianImage, spec: &PolarGridSpec) -> Result<PolarField> {
    if image.height != spec.height || image.width != spec.width {
        return Err(Error::ShapeMismatch(format!(
            "image is {}x{}, grid expects {}x{}",
            image.height, image.width, spec.height, spec.width
        )));
    }
    let rhos = spec.rhos();
    let trig: Vec<(f64, f64)> = spec.thetas().iter().map(|t| (t.cos(), t.sin())).collect();
    let mut data = Vec::with_capacity(image.channels * spec.n_rho * spec.n_theta);
    for c in 0..image.channels {
        for &rho in &rhos {
            let r = rho * spec.radius;
            for &(cos, sin) in &trig {
                data.push(image.sample_channel(c, spec.cx + r * cos, spec.cy + r * sin));
            }
        }
    }
    Ok(PolarField { channels: image.channels, n_rho: spec.n_rho, n_theta: spec.n_theta, data })
}

/// Push a polar field back onto the image lattice of `spec`.
pub fn warp_to_cartesian(field: &PolarField, spec: &PolarGridSpec) -> CartesianImage {
    let (h, w) = (spec.height, spec.width);
    let mut data = vec![0.0; field.channels * h * w];
    for c in 0..field.channels {
        data[c * h * w..(c + 1) * h * w]
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(y, row)| {
                for (x, out) in row.iter_mut().enumerate() {
                    let (rho, theta) = to_polar_coords(x as f64, y as f64, spec);
                    *out = field.sample(c, rho, theta);
                }
            });
    }
    CartesianImage { channels: field.channels, height: h, width: w, data }
}

/// Re-express a field sampled in frame `from` on the grid of frame `to`.
pub fn resample_between_frames(
    field: &PolarField,
    from: &PolarGridSpec,
    to: &PolarGridSpec,
) -> PolarField {
    let mut out = PolarField {
        channels: field.channels,
        n_rho: to.n_rho,
        n_theta: to.n_theta,
        data: Vec::with_capacity(field.channels * to.n_rho * to.n_theta),
    };
    for c in 0..field.channels {
        for j in 0..to.n_rho {
            for i in 0..to.n_theta {
                let (x, y) = from_polar_coords(to.rho_at(j), to.theta_at(i), to);
                let (rho, theta) = to_polar_coords(x, y, from);
                out.data.push(field.sample(c, rho, theta));
            }
        }
    }
    out
}

/// Dense kernel for [`circular_pad_conv2d`], row-major over `(k_rho, k_theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    pub k_rho: usize,
    pub k_theta: usize,
    pub weights: Vec<f64>,
}

impl Kernel2d {
    pub fn new(k_rho: usize, k_theta: usize, weights: Vec<f64>) -> Result<Self> {
        if k_rho % 2 == 0 || k_theta % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel dimensions must be odd, got {k_rho}x{k_theta}"
            )));
        }
        if weights.len() != k_rho * k_theta {
            return Err(Error::ShapeMismatch(format!(
                "kernel has {} weights, expected {}",
                weights.len(),
                k_rho * k_theta
            )));
        }
        Ok(Self { k_rho, k_theta, weights })
    }

    #[inline]
    fn at(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.k_theta + b]
    }
}

/// Same-size cross-correlation, wrapping along theta and zero-padding along rho.
/// Multi-channel fields are filtered channel by channel.
pub fn circular_pad_conv2d(field: &PolarField, kernel: &Kernel2d, bias: f64) -> Result<PolarField> {
    if kernel.k_rho % 2 == 0 || kernel.k_theta % 2 == 0 {
        return Err(Error::InvalidParameter("kernel dimensions must be odd".into()));
    }
    let (nr, nt) = (field.n_rho as isize, field.n_theta as isize);
    let (pr, pt) = ((kernel.k_rho / 2) as isize, (kernel.k_theta / 2) as isize);
    let mut out = field.clone();
    for c in 0..field.channels {
        for j in 0..nr {
            for i in 0..nt {
                let mut acc = bias;
                for a in 0..kernel.k_rho {
                    let jj = j + a as isize - pr;
                    if jj < 0 || jj >= nr {
                        continue;
                    }
                    for b in 0..kernel.k_theta {
                        let ii = (i + b as isize - pt).rem_euclid(nt);
                        acc += kernel.at(a, b) * field.get_c(c, jj as usize, ii as usize);
                    }
                }
                out.data[((c * field.n_rho) + j as usize) * field.n_theta + i as usize] = acc;
            }
        }
    }
    Ok(out)
}
