use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::CartesianImage;

/// Strictly binary foreground mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter("mask dimensions must be positive".into()));
        }
        if bits.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} pixels, expected {}",
                bits.len(),
                height * width
            )));
        }
        Ok(Self { height, width, bits })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, bits: vec![false; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { height, width, bits }
    }

    /// Foreground where channel 0 is `>= threshold`.
    pub fn from_image(image: &CartesianImage, threshold: f64) -> Self {
        Self {
            height: image.height(),
            width: image.width(),
            bits: image.channel_plane(0).iter().map(|&v| v >= threshold).collect(),
        }
    }

    pub fn to_image(&self) -> CartesianImage {
        CartesianImage::from_fn(1, self.height, self.width, |_, x, y| {
            if self.get(x, y) { 1.0 } else { 0.0 }
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    #[inline]
    fn get_or_bg(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 && self.get(x as usize, y as usize)
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub(crate) fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::ShapeMismatch(format!(
                "masks are {}x{} and {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// Foreground pixels with a 4-neighbour that is background or off-image.
    pub fn boundary(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                let (xi, yi) = (x as i64, y as i64);
                let inner = self.get_or_bg(xi - 1, yi)
                    && self.get_or_bg(xi + 1, yi)
                    && self.get_or_bg(xi, yi - 1)
                    && self.get_or_bg(xi, yi + 1);
                if !inner {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Number of foreground/background 4-adjacent edges, off-image counting as background.
    pub fn perimeter(&self) -> usize {
        let mut edges = 0;
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                let (xi, yi) = (x as i64, y as i64);
                for (nx, ny) in [(xi - 1, yi), (xi + 1, yi), (xi, yi - 1), (xi, yi + 1)] {
                    if !self.get_or_bg(nx, ny) {
                        edges += 1;
                    }
                }
            }
        }
        edges
    }

    /// First and last foreground rows.
    pub fn row_extent(&self) -> Option<(usize, usize)> {
        let rows: Vec<usize> = (0..self.height)
            .filter(|&y| self.bits[y * self.width..(y + 1) * self.width].iter().any(|&b| b))
            .collect();
        Some((*rows.first()?, *rows.last()?))
    }

    /// Copy translated by `(dx, dy)`; pixels shifted off the canvas are dropped.
    pub fn shifted(&self, dx: i64, dy: i64) -> Self {
        Self::from_fn(self.height, self.width, |x, y| self.get_or_bg(x as i64 - dx, y as i64 - dy))
    }
}

/// `2|A n B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&p, &q) in a.bits.iter().zip(&b.bits) {
        na += p as usize;
        nb += q as usize;
        inter += (p && q) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Vertical cup extent over vertical disc extent; an empty cup gives 0.
pub fn vcdr(cup: &BinaryMask, disc: &BinaryMask) -> Result<f64> {
    cup.ensure_same_dims(disc)?;
    let (d0, d1) = disc.row_extent().ok_or(Error::EmptyMask("vertical disc extent"))?;
    let Some((c0, c1)) = cup.row_extent() else {
        return Ok(0.0);
    };
    Ok((c1 - c0 + 1) as f64 / (d1 - d0 + 1) as f64)
}

/// `4 pi area / perimeter^2`, clamped to `[0, 1]`.
pub fn compactness(mask: &BinaryMask) -> Result<f64> {
    let area = mask.area();
    if area == 0 {
        return Err(Error::EmptyMask("compactness"));
    }
    let p = mask.perimeter() as f64;
    Ok((4.0 * PI * area as f64 / (p * p)).clamp(0.0, 1.0))
}
