//! `evossl report`: descriptive tables, win counts, per-dataset tables and
//! static plots from a run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use evossl_core::evolution::GenerationLog;
use evossl_core::metrics::{count_wins, median, CellResult, WinTable, SSL_BASELINES};
use plotters::prelude::*;
use serde::Serialize;

use crate::run::trajectory_path;
use crate::summary::{read_summaries, RunSummary};

pub const ALPHA: f64 = 0.01;
pub const N_COMPARISONS: usize = 3;
const REFERENCE_METHODS: [&str; 2] = ["lr_ref", "svm_ref"];

/// Linear-interpolation quantile of a non-empty sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn group_of(n_classes: usize) -> &'static str {
    if n_classes == 2 {
        "binary"
    } else {
        "multiclass"
    }
}

fn lf_key(lf: f64) -> String {
    format!("{lf}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptiveRow {
    pub group: String,
    pub method: String,
    pub lf: f64,
    pub n_datasets: usize,
    pub min: f64,
    pub median: f64,
    pub iqr: f64,
    pub max: f64,
    /// Empty for the baselines themselves and when a baseline is missing.
    pub wins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetRow {
    pub group: String,
    pub dataset: String,
    pub lf: f64,
    pub method: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub shaded: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Tables {
    pub descriptive: Vec<DescriptiveRow>,
    pub per_dataset: Vec<DatasetRow>,
    pub wins: BTreeMap<String, WinTable>,
}

/// Win table per dataset group, over search methods against the SSL
/// baselines. `None` when a baseline is absent from the group.
fn group_wins(runs: &[&RunSummary]) -> Result<Option<WinTable>> {
    let present = |m: &str| runs.iter().any(|r| r.method == m);
    if !SSL_BASELINES.iter().all(|b| present(b)) {
        return Ok(None);
    }
    let cells: Vec<CellResult> = runs
        .iter()
        .filter(|r| !REFERENCE_METHODS.contains(&r.method.as_str()))
        .map(|r| CellResult {
            method: r.method.clone(),
            dataset: r.dataset.clone(),
            lf: r.lf,
            seed: r.seed,
            score: r.test_macro_f1.unwrap_or(f64::NAN),
        })
        .collect();
    Ok(Some(count_wins(&cells, &SSL_BASELINES, ALPHA, N_COMPARISONS)?))
}

/// Builds every table from successful runs.
pub fn build_tables(runs: &[RunSummary]) -> Result<Tables> {
    let ok: Vec<&RunSummary> = runs.iter().filter(|r| r.is_ok() && r.test_macro_f1.is_some()).collect();
    let mut by_group: BTreeMap<&'static str, Vec<&RunSummary>> = BTreeMap::new();
    for r in &ok {
        by_group.entry(group_of(r.n_classes.unwrap_or(2))).or_default().push(r);
    }
    let mut tables = Tables::default();
    for (group, runs) in &by_group {
        let wins = group_wins(runs)?;
        // (method, lf) -> dataset -> scores
        let mut cells: BTreeMap<(String, String), BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        let mut lf_of: BTreeMap<String, f64> = BTreeMap::new();
        for r in runs {
            lf_of.insert(lf_key(r.lf), r.lf);
            cells
                .entry((r.method.clone(), lf_key(r.lf)))
                .or_default()
                .entry(r.dataset.clone())
                .or_default()
                .push(r.test_macro_f1.expect("filtered"));
        }
        for ((method, lfk), per_ds) in &cells {
            let lf = lf_of[lfk];
            let medians: Vec<f64> = per_ds.values().map(|s| median(s)).collect();
            let is_candidate = !SSL_BASELINES.contains(&method.as_str()) && !REFERENCE_METHODS.contains(&method.as_str());
            let win_count = match (&wins, is_candidate) {
                (Some(t), true) => Some(
                    t.counts
                        .iter()
                        .find(|c| c.method == *method && c.lf == lf)
                        .map_or(0, |c| c.wins),
                ),
                _ => None,
            };
            tables.descriptive.push(DescriptiveRow {
                group: group.to_string(),
                method: method.clone(),
                lf,
                n_datasets: medians.len(),
                min: medians.iter().copied().fold(f64::INFINITY, f64::min),
                median: median(&medians),
                iqr: quantile(&medians, 0.75) - quantile(&medians, 0.25),
                max: medians.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                wins: win_count,
            });
            for (dataset, scores) in per_ds {
                let (q1, q3) = (quantile(scores, 0.25), quantile(scores, 0.75));
                tables.per_dataset.push(DatasetRow {
                    group: group.to_string(),
                    dataset: dataset.clone(),
                    lf,
                    method: method.clone(),
                    n: scores.len(),
                    median: median(scores),
                    q1,
                    q3,
                    iqr: q3 - q1,
                    shaded: wins.as_ref().is_some_and(|t| t.is_win(method, dataset, lf)),
                });
            }
        }
        if let Some(t) = wins {
            tables.wins.insert(group.to_string(), t);
        }
    }
    tables.per_dataset.sort_by(|a, b| {
        (&a.group, &a.dataset, a.lf.to_bits(), &a.method).cmp(&(&b.group, &b.dataset, b.lf.to_bits(), &b.method))
    });
    Ok(tables)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CurvePoint {
    method: String,
    lf: f64,
    gen: usize,
    runs: usize,
    median_best_so_far: f64,
    median_mask_jaccard: f64,
    median_policy_numeric: f64,
    median_policy_boolean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct DiagnosticRow {
    method: String,
    dataset: String,
    lf: f64,
    seed: u64,
    ttt: Option<f64>,
    gtt: Option<usize>,
    pseudo_added: Option<usize>,
    optimism: Option<f64>,
    probe_drop: Option<f64>,
}

fn read_trajectory(path: &Path) -> Result<Vec<GenerationLog>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines().map(|l| Ok(serde_json::from_str(l)?)).collect()
}

fn curves(dir: &Path, runs: &[RunSummary]) -> Result<Vec<CurvePoint>> {
    // (method, lf) -> gen -> values per run
    let mut acc: BTreeMap<(String, String), (f64, BTreeMap<usize, Vec<[f64; 4]>>)> = BTreeMap::new();
    for r in runs.iter().filter(|r| r.is_ok() && r.gtt.is_some()) {
        let path = trajectory_path(dir, &r.run_id);
        if !path.exists() {
            continue;
        }
        let entry = acc.entry((r.method.clone(), lf_key(r.lf))).or_insert((r.lf, BTreeMap::new()));
        for g in read_trajectory(&path)? {
            entry.1.entry(g.gen).or_default().push([
                g.best_so_far_f,
                g.diversity.mask_jaccard,
                g.diversity.policy_numeric,
                g.diversity.policy_boolean,
            ]);
        }
    }
    let mut out = Vec::new();
    for ((method, _), (lf, gens)) in acc {
        for (gen, vals) in gens {
            let col = |i: usize| median(&vals.iter().map(|v| v[i]).collect::<Vec<_>>());
            out.push(CurvePoint {
                method: method.clone(),
                lf,
                gen,
                runs: vals.len(),
                median_best_so_far: col(0),
                median_mask_jaccard: col(1),
                median_policy_numeric: col(2),
                median_policy_boolean: col(3),
            });
        }
    }
    Ok(out)
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

fn line_plot(path: &Path, title: &str, points: &[CurvePoint], value: impl Fn(&CurvePoint) -> f64) -> Result<()> {
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        series
            .entry(format!("{} lf={}", p.method, p.lf))
            .or_default()
            .push((p.gen as f64, value(p)));
    }
    let max_gen = points.iter().map(|p| p.gen).max().unwrap_or(1).max(1) as f64;
    let (y0, y1) = finite_range(points.iter().map(&value));
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(0f64..max_gen, y0..y1)?;
    chart.configure_mesh().x_desc("generation").draw()?;
    for (i, (name, pts)) in series.into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}

/// Box-and-whisker plot (min, Q1, median, Q3, max) per method and lf.
fn box_plot(path: &Path, title: &str, rows: &[DiagnosticRow], value: impl Fn(&DiagnosticRow) -> Option<f64>) -> Result<()> {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(v) = value(r).filter(|v| v.is_finite()) {
            groups.entry((r.method.clone(), lf_key(r.lf))).or_default().push(v);
        }
    }
    let (y0, y1) = finite_range(groups.values().flatten().copied());
    let n = groups.len().max(1) as f64;
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE)?;
    let labels: Vec<String> = groups.keys().map(|(m, lf)| format!("{m} {lf}")).collect();
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(45)
        .y_label_area_size(55)
        .build_cartesian_2d(0f64..n, y0..y1)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(labels.len().max(1))
        .x_label_formatter(&|x| {
            let i = (x - 0.5).round();
            if i >= 0.0 && (i as usize) < labels.len() && (x - 0.5 - i).abs() < 1e-6 {
                labels[i as usize].clone()
            } else {
                String::new()
            }
        })
        .draw()?;
    for (i, vals) in groups.values().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let x = i as f64 + 0.5;
        let (mn, q1, md, q3, mx) = (
            quantile(vals, 0.0),
            quantile(vals, 0.25),
            quantile(vals, 0.5),
            quantile(vals, 0.75),
            quantile(vals, 1.0),
        );
        chart.draw_series(std::iter::once(Rectangle::new([(x - 0.3, q1), (x + 0.3, q3)], color.stroke_width(2))))?;
        chart.draw_series(std::iter::once(PathElement::new(vec![(x - 0.3, md), (x + 0.3, md)], BLACK.stroke_width(2))))?;
        chart.draw_series(std::iter::once(PathElement::new(vec![(x, mn), (x, q1)], color)))?;
        chart.draw_series(std::iter::once(PathElement::new(vec![(x, q3), (x, mx)], color)))?;
    }
    root.present()?;
    Ok(())
}

#[derive(Serialize)]
struct ReportMeta<'a> {
    runs: usize,
    failed_runs: usize,
    alpha: f64,
    bonferroni_divisor: usize,
    baselines: &'a [&'a str],
    iqr_definition: &'a str,
    quantile_method: &'a str,
}

/// Writes all report artifacts into `<dir>/report`. Errors when there are no
/// successful runs.
pub fn write_report(dir: &Path) -> Result<Tables> {
    let runs = read_summaries(&dir.join("runs.jsonl"))?;
    let ok_runs: Vec<RunSummary> = runs.iter().filter(|r| r.is_ok()).cloned().collect();
    if ok_runs.is_empty() {
        bail!("no successful runs in {}", dir.join("runs.jsonl").display());
    }
    let out = dir.join("report");
    fs::create_dir_all(&out)?;
    let tables = build_tables(&ok_runs)?;
    write_csv(&out.join("descriptive.csv"), &tables.descriptive)?;
    write_csv(&out.join("per_dataset.csv"), &tables.per_dataset)?;
    let mut win_rows = Vec::new();
    for (group, t) in &tables.wins {
        for c in &t.counts {
            win_rows.push((group.clone(), c.method.clone(), c.lf, c.wins, c.cells));
        }
    }
    let mut w = csv::Writer::from_path(out.join("wins.csv"))?;
    w.write_record(["group", "method", "lf", "wins", "cells"])?;
    for r in &win_rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let points = curves(dir, &ok_runs)?;
    write_csv(&out.join("trajectories.csv"), &points)?;
    if !points.is_empty() {
        line_plot(&out.join("fitness_per_generation.svg"), "Median best-so-far fitness", &points, |p| p.median_best_so_far)?;
        line_plot(&out.join("diversity_mask_jaccard.svg"), "View mask diversity", &points, |p| p.median_mask_jaccard)?;
        line_plot(&out.join("diversity_policy_numeric.svg"), "Policy numeric diversity", &points, |p| p.median_policy_numeric)?;
        line_plot(&out.join("diversity_policy_boolean.svg"), "Policy boolean diversity", &points, |p| p.median_policy_boolean)?;
    }

    let diag: Vec<DiagnosticRow> = ok_runs
        .iter()
        .map(|r| DiagnosticRow {
            method: r.method.clone(),
            dataset: r.dataset.clone(),
            lf: r.lf,
            seed: r.seed,
            ttt: r.ttt,
            gtt: r.gtt,
            pseudo_added: r.pseudo_added,
            optimism: r.optimism,
            probe_drop: r.probe_drop,
        })
        .collect();
    write_csv(&out.join("diagnostics.csv"), &diag)?;
    box_plot(&out.join("box_ttt.svg"), "Time to target (s)", &diag, |r| r.ttt)?;
    box_plot(&out.join("box_gtt.svg"), "Generations to target", &diag, |r| r.gtt.map(|g| g as f64))?;
    box_plot(&out.join("box_pseudo_added.svg"), "Pseudo-labels added", &diag, |r| r.pseudo_added.map(|p| p as f64))?;
    box_plot(&out.join("box_optimism.svg"), "Validation optimism", &diag, |r| r.optimism)?;

    let meta = ReportMeta {
        runs: ok_runs.len(),
        failed_runs: runs.len() - ok_runs.len(),
        alpha: ALPHA,
        bonferroni_divisor: N_COMPARISONS,
        baselines: &SSL_BASELINES,
        iqr_definition: "Q3-Q1 of per-dataset medians over seeds (descriptive); Q3-Q1 over seeds (per-dataset)",
        quantile_method: "linear interpolation between order statistics",
    };
    fs::write(out.join("report_meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
