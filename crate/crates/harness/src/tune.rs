//! `evossl tune`: the three staged sensitivity grids on the development set.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use evossl_core::evolution::{FitnessWeights, OperatorProbs, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSpec, ExperimentConfig, Method};
use crate::run::run_experiment;
use crate::summary::read_summaries;

/// Population sizes and generation counts with matched evaluation budgets.
pub const STAGE1_SIZES: [(usize, usize, usize); 3] = [(6, 6, 50), (8, 8, 38), (10, 10, 30)];
pub const STAGE2_PA_CX: [f64; 3] = [0.70, 0.85, 0.95];
pub const STAGE2_PA_MUT: [f64; 3] = [0.25, 0.45, 0.65];
pub const STAGE2_PB_CX: [f64; 3] = [0.70, 0.85, 0.95];
pub const STAGE2_PB_MUT: [f64; 3] = [0.35, 0.55, 0.75];
pub const STAGE3_STD: [f64; 3] = [0.0, 0.2, 0.4];
pub const STAGE3_BIAS: [f64; 3] = [0.3, 0.7, 1.1];
pub const STAGE3_ADD: [f64; 3] = [0.0, 0.0002, 0.0005];

/// Candidate search settings for `stage`, derived from `base`.
pub fn stage_grid(stage: u8, base: &SearchConfig) -> Result<Vec<SearchConfig>> {
    let mut out = Vec::new();
    match stage {
        1 => {
            for (n_a, n_b, g) in STAGE1_SIZES {
                out.push(SearchConfig { n_a, n_b, generations: g, ..base.clone() });
            }
        }
        2 => {
            for pa_cx in STAGE2_PA_CX {
                for pa_mut in STAGE2_PA_MUT {
                    for pb_cx in STAGE2_PB_CX {
                        for pb_mut in STAGE2_PB_MUT {
                            let operators = OperatorProbs { pa_cx, pa_mut, pb_cx, pb_mut };
                            out.push(SearchConfig { operators, ..base.clone() });
                        }
                    }
                }
            }
        }
        3 => {
            for lambda_std in STAGE3_STD {
                for lambda_bias in STAGE3_BIAS {
                    for lambda_add in STAGE3_ADD {
                        let weights = FitnessWeights { lambda_std, lambda_bias, lambda_add };
                        out.push(SearchConfig { weights, ..base.clone() });
                    }
                }
            }
        }
        other => bail!("unknown tuning stage {other}; expected 1, 2 or 3"),
    }
    Ok(out)
}

/// Datasets outside the configured development set.
pub fn non_dev_datasets(cfg: &ExperimentConfig) -> Vec<String> {
    cfg.datasets
        .iter()
        .filter(|d| !matches!(d, DatasetSpec::Openml { id } if cfg.tune.dev_openml_ids.contains(id)))
        .map(|d| d.label())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: usize,
    pub search: SearchConfig,
    pub mean_macro_f1: f64,
    pub std_macro_f1: f64,
    pub mean_ttt: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub stage: u8,
    pub forced: bool,
    pub non_dev_datasets: Vec<String>,
    pub selected: CandidateScore,
}

/// Descending mean MacroF1, then ascending dispersion, then ascending TTT.
pub fn rank(scores: &mut [CandidateScore]) {
    scores.sort_by(|a, b| {
        b.mean_macro_f1
            .total_cmp(&a.mean_macro_f1)
            .then(a.std_macro_f1.total_cmp(&b.std_macro_f1))
            .then(a.mean_ttt.total_cmp(&b.mean_ttt))
            .then(a.candidate.cmp(&b.candidate))
    });
}

fn selection_path(out: &Path, stage: u8) -> PathBuf {
    out.join(format!("selection_stage{stage}.json"))
}

/// Base settings for `stage`: the config's search block with earlier stage
/// selections applied when present.
fn stage_base(cfg: &ExperimentConfig, stage: u8) -> Result<SearchConfig> {
    let mut base = cfg.search.clone();
    for earlier in 1..stage {
        let p = selection_path(&cfg.output_dir, earlier);
        if p.exists() {
            let sel: Selection = serde_json::from_str(&fs::read_to_string(&p)?)?;
            let s = sel.selected.search;
            match earlier {
                1 => {
                    base.n_a = s.n_a;
                    base.n_b = s.n_b;
                    base.generations = s.generations;
                }
                _ => base.operators = s.operators,
            }
        }
    }
    Ok(base)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Runs every grid point of `stage` with CC-SSL and writes the ranked CSV,
/// a top-3 extract and the selection JSON into the output directory.
pub fn run_tuning(cfg: &ExperimentConfig, stage: u8, force: bool) -> Result<Selection> {
    let non_dev = non_dev_datasets(cfg);
    if !non_dev.is_empty() && !force {
        bail!(
            "tuning refused: {} not in the development set {:?}; pass --force to override",
            non_dev.join(", "),
            cfg.tune.dev_openml_ids
        );
    }
    let base = stage_base(cfg, stage)?;
    let mut grid = stage_grid(stage, &base)?;
    if let Some(limit) = cfg.tune.limit {
        grid.truncate(limit);
    }
    let stage_dir = cfg.output_dir.join(format!("tune_stage{stage}"));
    let mut scores = Vec::new();
    for (i, search) in grid.into_iter().enumerate() {
        let sub = ExperimentConfig {
            methods: vec![Method::Ccssl],
            search: search.clone(),
            output_dir: stage_dir.join(format!("candidate_{i:03}")),
            log_evaluations: false,
            ..cfg.clone()
        };
        let report = run_experiment(&sub)?;
        if report.failed > 0 {
            bail!("candidate {i}: {} cells failed", report.failed);
        }
        let runs = read_summaries(&sub.output_dir.join("runs.jsonl"))?;
        let f1: Vec<f64> = runs.iter().filter_map(|r| r.test_macro_f1).collect();
        let ttt: Vec<f64> = runs.iter().filter_map(|r| r.ttt).collect();
        let (mean_macro_f1, std_macro_f1) = mean_std(&f1);
        scores.push(CandidateScore {
            candidate: i,
            search,
            mean_macro_f1,
            std_macro_f1,
            mean_ttt: mean_std(&ttt).0,
            n_runs: runs.len(),
        });
    }
    rank(&mut scores);
    write_ranked(&cfg.output_dir.join(format!("tune_stage{stage}.csv")), &scores)?;
    write_ranked(&cfg.output_dir.join(format!("tune_stage{stage}_top3.csv")), &scores[..scores.len().min(3)])?;
    let selection = Selection {
        stage,
        forced: force && !non_dev.is_empty(),
        non_dev_datasets: non_dev,
        selected: scores.first().cloned().ok_or_else(|| anyhow::anyhow!("empty grid"))?,
    };
    fs::write(selection_path(&cfg.output_dir, stage), serde_json::to_string_pretty(&selection)?)?;
    Ok(selection)
}

fn write_ranked(path: &Path, scores: &[CandidateScore]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "rank", "candidate", "n_a", "n_b", "generations", "pa_cx", "pa_mut", "pb_cx", "pb_mut", "lambda_std",
        "lambda_bias", "lambda_add", "mean_macro_f1", "std_macro_f1", "mean_ttt", "n_runs",
    ])?;
    for (r, s) in scores.iter().enumerate() {
        let c = &s.search;
        w.write_record([
            (r + 1).to_string(),
            s.candidate.to_string(),
            c.n_a.to_string(),
            c.n_b.to_string(),
            c.generations.to_string(),
            c.operators.pa_cx.to_string(),
            c.operators.pa_mut.to_string(),
            c.operators.pb_cx.to_string(),
            c.operators.pb_mut.to_string(),
            c.weights.lambda_std.to_string(),
            c.weights.lambda_bias.to_string(),
            c.weights.lambda_add.to_string(),
            s.mean_macro_f1.to_string(),
            s.std_macro_f1.to_string(),
            s.mean_ttt.to_string(),
            s.n_runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        let base = SearchConfig::frozen();
        assert_eq!(stage_grid(1, &base).unwrap().len(), 3);
        assert_eq!(stage_grid(2, &base).unwrap().len(), 81);
        assert_eq!(stage_grid(3, &base).unwrap().len(), 27);
        assert!(stage_grid(4, &base).is_err());
    }

    #[test]
    fn frozen_selection_is_in_every_grid() {
        let f = SearchConfig::frozen();
        for stage in 1..=3 {
            assert!(stage_grid(stage, &f).unwrap().contains(&f), "stage {stage}");
        }
    }

    #[test]
    fn ranking_tie_breaks() {
        let mk = |candidate, m, s, t| CandidateScore {
            candidate,
            search: SearchConfig::default(),
            mean_macro_f1: m,
            std_macro_f1: s,
            mean_ttt: t,
            n_runs: 1,
        };
        let mut v = vec![mk(0, 0.8, 0.1, 5.0), mk(1, 0.9, 0.2, 9.0), mk(2, 0.8, 0.05, 7.0), mk(3, 0.8, 0.05, 3.0)];
        rank(&mut v);
        let order: Vec<usize> = v.iter().map(|c| c.candidate).collect();
        assert_eq!(order, vec![1, 3, 2, 0]);
    }
}
