//! Boundary distances via an exact squared Euclidean distance transform.

use super::mask::BinaryMask;
use crate::error::{Error, Result};

const FAR: f64 = 1e18;

/// 1-D lower envelope of parabolas (Felzenszwalb & Huttenlocher). All inputs
/// are integers or `FAR`, so every output that is not `FAR`-derived is exact.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: the new parabola dominates everything so far.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance from every pixel to the nearest site.
pub(crate) fn squared_distance_map(height: usize, width: usize, sites: &[(usize, usize)]) -> Vec<f64> {
    let mut grid = vec![FAR; height * width];
    for &(x, y) in sites {
        grid[y * width + x] = 0.0;
    }
    let n = height.max(width);
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        f[..width].copy_from_slice(&grid[y * width..(y + 1) * width]);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        grid[y * width..(y + 1) * width].copy_from_slice(&out[..width]);
    }
    grid
}

/// Nearest-rank percentile (`pct` in percent) of a non-empty list.
pub fn nearest_rank(values: &mut [f64], pct: usize) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = (pct * n).div_ceil(100).max(1);
    values[rank - 1]
}

fn directed(from: &[(usize, usize)], to_map: &[f64], width: usize) -> Vec<f64> {
    from.iter().map(|&(x, y)| to_map[y * width + x].sqrt()).collect()
}

/// Symmetric 95th-percentile Hausdorff distance between mask boundaries, in pixels.
pub fn hd95(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.ensure_same_dims(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMask("boundary distance"));
    }
    let (h, w) = (a.height(), a.width());
    let (ba, bb) = (a.boundary(), b.boundary());
    let map_a = squared_distance_map(h, w, &ba);
    let map_b = squared_distance_map(h, w, &bb);
    let mut ab = directed(&ba, &map_b, w);
    let mut ba_d = directed(&bb, &map_a, w);
    Ok(nearest_rank(&mut ab, 95).max(nearest_rank(&mut ba_d, 95)))
}
