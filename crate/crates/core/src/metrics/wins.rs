use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::wilcoxon::wilcoxon_signed_rank;
use crate::{Error, Result};

/// Baselines a method must beat to win a cell.
pub const SSL_BASELINES: [&str; 3] = ["st", "ls", "hco"];

/// One scored run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub dataset: String,
    pub lf: f64,
    pub seed: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinCell {
    pub method: String,
    pub dataset: String,
    pub lf: f64,
    pub win: bool,
    /// `(baseline, p_value, method_median - baseline_median)`.
    pub comparisons: Vec<(String, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinCount {
    pub method: String,
    pub lf: f64,
    pub wins: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WinTable {
    pub cells: Vec<WinCell>,
    pub counts: Vec<WinCount>,
}

impl WinTable {
    pub fn is_win(&self, method: &str, dataset: &str, lf: f64) -> bool {
        self.cells
            .iter()
            .any(|c| c.win && c.method == method && c.dataset == dataset && c.lf == lf)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}


/// Win table for every non-baseline method against `baselines`.
///
/// A cell is won when each paired test rejects at `alpha / n_comparisons`
/// and the method median exceeds the baseline median.
pub fn count_wins(
    results: &[CellResult],
    baselines: &[&str],
    alpha: f64,
    n_comparisons: usize,
) -> Result<WinTable> {
    // (dataset, lf bits) -> method -> seed -> score
    let mut grid: BTreeMap<(String, u64), BTreeMap<String, BTreeMap<u64, f64>>> = BTreeMap::new();
    for r in results {
        let seeds = grid
            .entry((r.dataset.clone(), r.lf.to_bits()))
            .or_default()
            .entry(r.method.clone())
            .or_default();
        if seeds.insert(r.seed, r.score).is_some() {
            return Err(Error::Unpaired(format!(
                "duplicate result for {} on {} lf={} seed={}",
                r.method, r.dataset, r.lf, r.seed
            )));
        }
    }
    let level = alpha / n_comparisons.max(1) as f64;
    let mut table = WinTable::default();
    let mut counts: BTreeMap<(String, u64), (usize, usize)> = BTreeMap::new();
    for ((dataset, lf_bits), methods) in &grid {
        let lf = f64::from_bits(*lf_bits);
        for (method, scores) in methods {
            if baselines.contains(&method.as_str()) {
                continue;
            }
            let mut comparisons = Vec::new();
            let mut win = true;
            for &base in baselines {
                let Some(base_scores) = methods.get(base) else {
                    return Err(Error::Unpaired(format!("baseline {base} missing on {dataset} lf={lf}")));
                };
                let (x, y) = paired(scores, base_scores).map_err(|(side, seed)| {
                    let who = if side == 0 { base } else { method.as_str() };
                    Error::Unpaired(format!("{who} lacks seed {seed} on {dataset} lf={lf}"))
                })?;
                let test = wilcoxon_signed_rank(&x, &y, level)?;
                let gap = median(&x) - median(&y);
                win &= test.significant && gap > 0.0;
                comparisons.push((base.to_string(), test.p_value, gap));
            }
            let entry = counts.entry((method.clone(), *lf_bits)).or_default();
            entry.0 += win as usize;
            entry.1 += 1;
            table.cells.push(WinCell { method: method.clone(), dataset: dataset.clone(), lf, win, comparisons });
        }
    }
    table.counts = counts
        .into_iter()
        .map(|((method, lf), (wins, cells))| WinCount { method, lf: f64::from_bits(lf), wins, cells })
        .collect();
    Ok(table)
}

/// Scores aligned by seed; on a gap returns which side misses which seed.
fn paired(a: &BTreeMap<u64, f64>, b: &BTreeMap<u64, f64>) -> std::result::Result<(Vec<f64>, Vec<f64>), (usize, u64)> {
    let seeds: BTreeSet<u64> = a.keys().chain(b.keys()).copied().collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in seeds {
        match (a.get(&s), b.get(&s)) {
            (Some(&u), Some(&v)) => {
                x.push(u);
                y.push(v);
            }
            (Some(_), None) => return Err((0, s)),
            (None, _) => return Err((1, s)),
        }
    }
    Ok((x, y))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn rows(method: &str, base: f64, n: u64) -> Vec<CellResult> {
        (0..n)
            .map(|s| CellResult {
                method: method.into(),
                dataset: "d".into(),
                lf: 0.01,
                seed: s,
                score: base + 0.001 * s as f64,
            })
            .collect()
    }

    #[test]
    fn identical_method_never_wins() {
        let mut r = rows("st", 0.5, 30);
        r.extend(rows("ls", 0.3, 30));
        r.extend(rows("hco", 0.3, 30));
        r.extend(rows("ccssl", 0.5, 30));
        let t = count_wins(&r, &SSL_BASELINES, 0.01, 3).unwrap();
        assert!(!t.is_win("ccssl", "d", 0.01));
        assert_eq!(t.counts[0].wins, 0);
    }

    #[test]
    fn dominating_method_wins() {
        let mut r = rows("st", 0.5, 30);
        r.extend(rows("ls", 0.4, 30));
        r.extend(rows("hco", 0.45, 30));
        r.extend(rows("ccssl", 0.7, 30));
        let t = count_wins(&r, &SSL_BASELINES, 0.01, 3).unwrap();
        assert!(t.is_win("ccssl", "d", 0.01));
        assert_eq!(t.counts, vec![WinCount { method: "ccssl".into(), lf: 0.01, wins: 1, cells: 1 }]);
    }

    #[test]
    fn unpaired_seed_is_named() {
        let mut r = rows("st", 0.5, 5);
        r.extend(rows("ls", 0.4, 5));
        r.extend(rows("hco", 0.45, 5));
        r.extend(rows("ccssl", 0.7, 4));
        let err = count_wins(&r, &SSL_BASELINES, 0.01, 3).unwrap_err().to_string();
        assert!(err.contains("seed 4"), "{err}");
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
