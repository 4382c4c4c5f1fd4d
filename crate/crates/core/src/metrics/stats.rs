use statrs::function::erf::erfc;

use crate::error::{ensure_same_len, Error, Result};

/// Largest sample size that uses the exact null distribution.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// Rank sum of positive differences `y - x`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub p_two_sided: f64,
    pub method: PValueMethod,
}

/// Average ranks of `values` (1-based), doubled so ties stay integral.
pub(crate) fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Ranks start+1..=end averaged, times two.
        let doubled = (start + 1 + end) as u64;
        for &k in &order[start..end] {
            ranks[k] = doubled;
        }
        start = end;
    }
    ranks
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        out.push(end - start);
        start = end;
    }
    out
}

/// Two-sided exact p-value by counting sign assignments per doubled rank sum.
fn exact_p(doubled: &[u64], observed: u64) -> f64 {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let all = (1u64 << doubled.len()) as f64;
    let obs = observed as usize;
    let lower: u64 = counts[..=obs].iter().sum();
    let upper: u64 = counts[obs..].iter().sum();
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

/// Paired two-sided Wilcoxon signed-rank test on `y - x`.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    ensure_same_len("paired samples", x.len(), y.len())?;
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("wilcoxon sample".into()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::NoSignal);
    }
    let n = diffs.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!("{n} non-zero differences, need at least 5")));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let doubled = doubled_ranks(&abs);
    let plus2: u64 = diffs.iter().zip(&doubled).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total2: u64 = doubled.iter().sum();
    let w_plus = plus2 as f64 / 2.0;
    let w_minus = (total2 - plus2) as f64 / 2.0;

    let (p, method) = if n <= EXACT_MAX_N {
        (exact_p(&doubled, plus2), PValueMethod::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let ties: f64 = tie_sizes(&abs).iter().map(|&t| (t * t * t - t) as f64).sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        let p = if var <= 0.0 {
            1.0
        } else {
            let dev = w_plus - mean;
            let corrected = (dev.abs() - 0.5).max(0.0);
            erfc(corrected / var.sqrt() / std::f64::consts::SQRT_2).min(1.0)
        };
        (p, PValueMethod::Normal)
    };
    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        n,
        p_two_sided: p,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Enumerate all `2^n` sign flips of the averaged ranks.
    fn enumerate_p(diffs: &[f64]) -> f64 {
        let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let n = abs.len();
        let ranks: Vec<f64> = (0..n)
            .map(|i| {
                let less = abs.iter().filter(|&&v| v < abs[i]).count() as f64;
                let equal = abs.iter().filter(|&&v| v == abs[i]).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect();
        let observed: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            let s: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
            if s <= observed + 1e-9 {
                le += 1;
            }
            if s >= observed - 1e-9 {
                ge += 1;
            }
        }
        (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn constant_shift_gives_extreme_statistic() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.37).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.5).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.w_minus, 0.0);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.method, PValueMethod::Exact);
        assert_abs_diff_eq!(r.p_two_sided, 2.0 / 1024.0, epsilon = 1e-15);
    }

    #[test]
    fn identical_samples_have_no_signal() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(wilcoxon_signed_rank(&x, &x), Err(Error::NoSignal)));
        assert!(wilcoxon_signed_rank(&x, &[1.0, 2.0]).is_err());
        assert!(matches!(
            wilcoxon_signed_rank(&x, &[1.0, 2.0, 3.0, 4.5, 5.5]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn antisymmetric_differences_give_p_one() {
        let x = [0.0; 8];
        let y = [1.0, -1.0, 2.5, -2.5, 0.3, -0.3, 4.0, -4.0];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.w_plus, r.w_minus);
        assert_eq!(r.p_two_sided, 1.0);
        let x = vec![0.0; 40];
        let y: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { (i / 2 + 1) as f64 } else { -((i / 2 + 1) as f64) }).collect();
        assert_eq!(wilcoxon_signed_rank(&x, &y).unwrap().p_two_sided, 1.0);
    }

    #[test]
    fn exact_p_matches_enumeration_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let n = rng.random_range(5..=12);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64 + 0.5 * rng.random_range(0..2) as f64).collect();
            let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - a).filter(|d| *d != 0.0).collect();
            if diffs.len() < 5 {
                continue;
            }
            let r = wilcoxon_signed_rank(&x, &y).unwrap();
            assert!((r.p_two_sided - enumerate_p(&diffs)).abs() <= 1e-12);
        }
    }

    #[test]
    fn normal_approximation_for_large_n() {
        // n = 20, all differences positive and distinct: W- = 0.
        let x = vec![0.0; 20];
        let y: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.method, PValueMethod::Normal);
        assert_eq!(r.w_plus, 210.0);
        // z = (210 - 105 - 0.5) / sqrt(717.5)
        let z: f64 = 104.5 / 717.5f64.sqrt();
        assert_abs_diff_eq!(r.p_two_sided, erfc(z / std::f64::consts::SQRT_2), epsilon = 1e-15);
        assert!(r.p_two_sided < 1e-4);
    }

    #[test]
    fn doubled_ranks_average_ties() {
        assert_eq!(doubled_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![7, 2, 7, 4]);
    }
}
