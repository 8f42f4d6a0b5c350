use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Largest number of nonzero differences handled by the exact null.
pub const EXACT_MAX_N: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of positive differences `x - y`.
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Nonzero differences that entered the test.
    pub n: usize,
    pub exact: bool,
}

/// Two-sided paired signed-rank test. Zero differences are dropped and tied
/// magnitudes share their average rank.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alpha: f64) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult { statistic: 0.0, p_value: 1.0, significant: false, n: 0, exact: true });
    }
    let (ranks, tie_sizes) = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    let (p_value, exact) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus), true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let p = if var <= 0.0 {
            1.0
        } else {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            (2.0 * (1.0 - normal.cdf(z))).min(1.0)
        };
        (p, false)
    };
    Ok(WilcoxonResult { statistic: w_plus, p_value, significant: p_value < alpha, n, exact })
}

/// 1-based average ranks plus the size of every tie group.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// P(|W - mu| >= |w - mu|) under the sign-flip null. Average ranks are
/// multiples of 1/2, so the null is tallied on doubled integer ranks.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let observed = (w_plus * 2.0).round() as i64;
    let dev = (2 * observed - total as i64).abs();
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| (2 * s as i64 - total as i64).abs() >= dev)
        .map(|(_, &c)| c)
        .sum();
    extreme as f64 / (1u64 << ranks.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct walk over all 2^n sign assignments.
    fn enumerate_p(x: &[f64], y: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
        let n = d.len();
        if n == 0 {
            return 1.0;
        }
        let mut ranks = vec![0.0; n];
        for i in 0..n {
            let less = d.iter().filter(|v| v.abs() < d[i].abs()).count();
            let equal = d.iter().filter(|v| v.abs() == d[i].abs()).count();
            ranks[i] = less as f64 + (equal as f64 + 1.0) / 2.0;
        }
        let total: f64 = ranks.iter().sum();
        let w: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
        let dev = (w - total / 2.0).abs();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if (s - total / 2.0).abs() >= dev - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn equal_samples() {
        let x = [0.1, 0.2, 0.3];
        let r = wilcoxon_signed_rank(&x, &x, 0.05).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn six_positive() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [0.0; 6];
        let r = wilcoxon_signed_rank(&x, &y, 0.05).unwrap();
        assert_eq!(r.p_value, 0.03125);
        assert_eq!(r.statistic, 21.0);
    }

    #[test]
    fn swapping_reflects_statistic() {
        let x = [0.3, 0.1, 0.5, 0.9, 0.2, 0.4, 0.45];
        let y = [0.2, 0.3, 0.1, 0.1, 0.2, 0.6, 0.0];
        let a = wilcoxon_signed_rank(&x, &y, 0.05).unwrap();
        let b = wilcoxon_signed_rank(&y, &x, 0.05).unwrap();
        assert_eq!(a.p_value, b.p_value);
        let total = (a.n * (a.n + 1)) as f64 / 2.0;
        assert!((a.statistic + b.statistic - total).abs() < 1e-12);
    }

    #[test]
    fn exact_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.gen_range(1..=12);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64).collect();
            let p = wilcoxon_signed_rank(&x, &y, 0.05).unwrap().p_value;
            assert!((p - enumerate_p(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn dominating_large_sample_is_significant() {
        let x: Vec<f64> = (0..30).map(|i| 0.7 + 0.001 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v - 0.2).collect();
        let r = wilcoxon_signed_rank(&x, &y, 0.01 / 3.0).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 1e-4);
        assert!(r.significant);
    }
}
