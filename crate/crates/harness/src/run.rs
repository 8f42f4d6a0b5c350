//! `evossl run`: the methods x datasets x lfs x seeds cross product.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use evossl_core::baselines::run_baseline;
use evossl_core::data::{
    fetch_openml, load_csv, make_split_with, resample_labeled, two_gaussians, Dataset, FetchMode, SplitPlan,
};
use evossl_core::evolution::{run_ccssl, run_eassl, EvalContext, SearchOutcome};
use evossl_core::exec::Executor;
use evossl_core::metrics::{cost_to_target, val_optimism};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{DatasetSpec, ExperimentConfig, Method};
use crate::summary::{read_summaries, CellStatus, RunSummary};

/// One (dataset, lf, seed, method) job.
#[derive(Debug, Clone)]
pub struct Cell {
    pub dataset: usize,
    pub lf: f64,
    pub seed: u64,
    pub method: Method,
    pub hash: String,
    pub run_id: String,
}

#[derive(Serialize)]
struct CellKey<'a> {
    dataset: &'a DatasetSpec,
    lf: f64,
    seed: u64,
    method: Method,
    split: &'a evossl_core::data::SplitProportions,
    settings: serde_json::Value,
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Every cell in canonical order: dataset, lf, seed, method.
pub fn plan_cells(cfg: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for (di, spec) in cfg.datasets.iter().enumerate() {
        for &lf in &cfg.lfs {
            for &seed in &cfg.seeds {
                for &method in &cfg.methods {
                    let settings = if method.is_search() {
                        let mut s = cfg.search.clone();
                        s.seed = seed;
                        serde_json::to_value(s)?
                    } else {
                        let mut b = cfg.baselines.clone();
                        b.seed = seed;
                        serde_json::to_value(b)?
                    };
                    let key = CellKey { dataset: spec, lf, seed, method, split: &cfg.split, settings };
                    let hash = sha_hex(&serde_json::to_vec(&key)?);
                    let run_id = format!("{}-{}-lf{}-s{}-{}", method.tag(), spec.label(), lf, seed, &hash[..12]);
                    cells.push(Cell { dataset: di, lf, seed, method, hash, run_id });
                }
            }
        }
    }
    Ok(cells)
}

pub fn load_dataset(spec: &DatasetSpec, cache_dir: &Path, offline: bool) -> evossl_core::Result<Dataset> {
    match spec {
        DatasetSpec::Csv { path, label } => load_csv(path, label),
        DatasetSpec::Openml { id } => {
            let mode = if offline { FetchMode::Offline } else { FetchMode::Online };
            fetch_openml(*id, cache_dir, mode)
        }
        DatasetSpec::Synthetic(s) => two_gaussians(s),
    }
}

/// Split for one cell, with features re-standardized on the rows the
/// learners may see (pool and validation).
pub fn prepare(ds: &Dataset, cfg: &ExperimentConfig, lf: f64, seed: u64) -> evossl_core::Result<(Dataset, SplitPlan)> {
    let plan = make_split_with(ds, lf, seed, &cfg.split)?;
    Ok((ds.restandardized(&plan.fit_rows()), plan))
}

/// Files written next to a summary.
#[derive(Default)]
struct Artifacts {
    trajectory: Option<String>,
    evaluations: Option<String>,
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it)?);
        out.push('\n');
    }
    Ok(out)
}

fn run_search(
    method: Method,
    ds: &Dataset,
    plan: &SplitPlan,
    cfg: &ExperimentConfig,
    seed: u64,
    exec: &Executor,
) -> Result<(SearchOutcome, evossl_core::evolution::FinalEval)> {
    let mut scfg = cfg.search.clone();
    scfg.seed = seed;
    let ctx = EvalContext::new(ds, plan, scfg.k, scfg.policy_domain, scfg.weights)?;
    let out = match method {
        Method::Ccssl => run_ccssl(&ctx, &scfg, exec, cfg.log_evaluations)?,
        _ => run_eassl(&ctx, &scfg, exec, cfg.log_evaluations)?,
    };
    let fe = ctx.final_eval(&out.best.a, &out.best.b)?;
    Ok((out, fe))
}

fn execute_cell(cell: &Cell, ds: &Dataset, cfg: &ExperimentConfig, exec: &Executor) -> Result<(RunSummary, Artifacts)> {
    let start = Instant::now();
    let (ds, plan) = prepare(ds, cfg, cell.lf, cell.seed)?;
    let mut s = RunSummary::failed(
        cell.run_id.clone(),
        cell.hash.clone(),
        cell.method.tag(),
        &ds.name,
        cell.lf,
        cell.seed,
        String::new(),
    );
    s.status = CellStatus::Ok;
    s.error = None;
    s.n_classes = Some(ds.n_classes);
    s.split_hash = Some(plan.split_hash());
    let mut artifacts = Artifacts::default();
    if cell.method.is_search() {
        let (out, fe) = run_search(cell.method, &ds, &plan, cfg, cell.seed, exec)?;
        let best: Vec<f64> = out.log.iter().map(|g| g.best_so_far_f).collect();
        let wall: Vec<f64> = out.log.iter().map(|g| g.wall_clock_cum).collect();
        let target = cost_to_target(&best, &wall)?;
        s.test_macro_f1 = Some(fe.test.macro_f1);
        s.test_accuracy = Some(fe.test.accuracy);
        s.val_macro_f1 = Some(fe.val_macro_f1);
        s.probe_drop = Some(fe.probe_drop);
        s.pseudo_added = Some(fe.pseudo_added);
        s.optimism = Some(val_optimism(fe.val_macro_f1, fe.test.macro_f1));
        s.gtt = Some(target.gtt);
        s.ttt = Some(target.ttt);
        s.best_fitness = Some(out.best.f);
        s.init_calls = Some(out.init_calls);
        s.search_calls = Some(out.search_calls);
        artifacts.trajectory = Some(jsonl(&out.log)?);
        if cfg.log_evaluations {
            artifacts.evaluations = Some(jsonl(&out.records)?);
        }
    } else {
        let method = cell.method.baseline().expect("baseline method");
        let rs = resample_labeled(&plan, &ds, 0);
        let mut bcfg = cfg.baselines.clone();
        bcfg.seed = cell.seed;
        let r = run_baseline(method, &ds, &plan, &rs, &bcfg)?;
        s.test_macro_f1 = Some(r.test.macro_f1);
        s.test_accuracy = Some(r.test.accuracy);
        s.val_macro_f1 = Some(r.val_macro_f1);
        s.probe_drop = r.probe_drop;
        s.pseudo_added = Some(r.pseudo_added);
        s.optimism = Some(val_optimism(r.val_macro_f1, r.test.macro_f1));
        s.warning = r.warning;
    }
    s.duration_s = start.elapsed().as_secs_f64();
    Ok((s, artifacts))
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Outcome counts of one `run` invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunReport {
    pub total: usize,
    pub skipped: usize,
    pub computed: usize,
    pub failed: usize,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failed > 0 {
            1
        } else {
            0
        }
    }
}

/// Executes all pending cells. Completed cells (same content hash, status
/// ok) are skipped; the final `runs.jsonl` is rewritten in canonical cell
/// order so its content does not depend on worker count or interruptions.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let out_dir = &cfg.output_dir;
    let traj_dir = out_dir.join("trajectories");
    let eval_dir = out_dir.join("evaluations");
    fs::create_dir_all(&traj_dir).with_context(|| format!("creating {}", traj_dir.display()))?;
    if cfg.log_evaluations {
        fs::create_dir_all(&eval_dir)?;
    }
    let runs_path = out_dir.join("runs.jsonl");
    let cells = plan_cells(cfg)?;

    let mut done: HashMap<String, RunSummary> = read_summaries(&runs_path)?
        .into_iter()
        .filter(|s| s.is_ok())
        .map(|s| (s.cell_hash.clone(), s))
        .collect();
    let wanted: std::collections::HashSet<&str> = cells.iter().map(|c| c.hash.as_str()).collect();
    done.retain(|h, _| wanted.contains(h.as_str()));
    let mut report = RunReport { total: cells.len(), skipped: done.len(), ..Default::default() };
    let mut lines: Vec<RunSummary> = cells.iter().filter_map(|c| done.get(&c.hash).cloned()).collect();
    write_atomic(&runs_path, &jsonl(&lines)?)?;

    let pending: Vec<&Cell> = cells.iter().filter(|c| !done.contains_key(&c.hash)).collect();
    let cache = cfg.cache_dir();
    let mut datasets: BTreeMap<usize, Result<Dataset, String>> = BTreeMap::new();
    for c in &pending {
        datasets
            .entry(c.dataset)
            .or_insert_with(|| load_dataset(&cfg.datasets[c.dataset], &cache, cfg.offline).map_err(|e| e.to_string()));
    }

    let outer = Executor::with_workers(cfg.workers);
    let mut appender = OpenOptions::new().append(true).open(&runs_path)?;
    for chunk in pending.chunks(cfg.workers.max(1)) {
        let inner = if chunk.len() == 1 { Executor::with_workers(cfg.workers) } else { Executor::Sequential };
        let results: Vec<(RunSummary, Artifacts)> = outer.map(chunk, |cell| {
            let failed = |e: String| {
                let name = cfg.datasets[cell.dataset].label();
                (
                    RunSummary::failed(cell.run_id.clone(), cell.hash.clone(), cell.method.tag(), &name, cell.lf, cell.seed, e),
                    Artifacts::default(),
                )
            };
            match &datasets[&cell.dataset] {
                Err(e) => failed(format!("dataset load failed: {e}")),
                Ok(ds) => match execute_cell(cell, ds, cfg, &inner) {
                    Ok(r) => r,
                    Err(e) => failed(format!("{e:#}")),
                },
            }
        });
        for (cell, (summary, artifacts)) in chunk.iter().zip(results) {
            if let Some(t) = artifacts.trajectory {
                write_atomic(&traj_dir.join(format!("{}.jsonl", cell.run_id)), &t)?;
            }
            if let Some(e) = artifacts.evaluations {
                write_atomic(&eval_dir.join(format!("{}.jsonl", cell.run_id)), &e)?;
            }
            if summary.is_ok() {
                report.computed += 1;
            } else {
                report.failed += 1;
                eprintln!("cell {} failed: {}", cell.run_id, summary.error.as_deref().unwrap_or(""));
            }
            writeln!(appender, "{}", serde_json::to_string(&summary)?)?;
            appender.flush()?;
            done.insert(cell.hash.clone(), summary);
        }
    }
    lines = cells.iter().filter_map(|c| done.get(&c.hash).cloned()).collect();
    write_atomic(&runs_path, &jsonl(&lines)?)?;
    Ok(report)
}

/// Path of a run's trajectory file.
pub fn trajectory_path(out_dir: &Path, run_id: &str) -> PathBuf {
    out_dir.join("trajectories").join(format!("{run_id}.jsonl"))
}
