use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use super::self_training::run_self_training;
use super::{BaselineConfig, BaselineResult};
use crate::data::{Dataset, LabeledResample, SplitPlan};
use crate::linear::{fit_logistic, LinearClassifier};
use crate::metrics::{macro_f1, probe_drop};
use crate::seed::SeedBuilder;
use crate::ssl::fused_posteriors;
use crate::linear::argmax_rows;
use crate::Result;

/// Seeded random partition of `0..d` into sorted halves of sizes
/// `ceil(d/2)` and `floor(d/2)`.
pub fn feature_halves(d: usize, plan: &SplitPlan, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = SeedBuilder::new("hco-halves")
        .u64(seed)
        .str(&plan.dataset)
        .f64(plan.lf)
        .u64(plan.seed)
        .rng();
    let mut cols: Vec<usize> = (0..d).collect();
    cols.shuffle(&mut rng);
    let split = d.div_ceil(2);
    let mut first = cols[..split].to_vec();
    let mut second = cols[split..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

struct Teacher<'a> {
    view: &'a Array2<f64>,
    labeled: Vec<(usize, usize)>,
}

impl Teacher<'_> {
    fn fit(&self, n_classes: usize, cfg: &BaselineConfig) -> Result<LinearClassifier> {
        let rows: Vec<usize> = self.labeled.iter().map(|p| p.0).collect();
        let y: Vec<usize> = self.labeled.iter().map(|p| p.1).collect();
        fit_logistic(self.view.select(Axis(0), &rows).view(), &y, n_classes, &cfg.learner)
    }
}

/// Two-view co-training on random feature halves: each view's confident
/// predictions extend the other view's training set. Falls back to
/// self-training when there is a single feature.
pub fn run_cotraining(
    ds: &Dataset,
    plan: &SplitPlan,
    rs: &LabeledResample,
    cfg: &BaselineConfig,
) -> Result<BaselineResult> {
    let d = ds.n_features();
    if d < 2 {
        let mut r = run_self_training(ds, plan, rs, cfg)?;
        r.warning = Some("single feature: co-training degenerated to self-training".into());
        return Ok(r);
    }
    let (h1, h2) = feature_halves(d, plan, cfg.seed);
    let views = [ds.features.select(Axis(1), &h1), ds.features.select(Axis(1), &h2)];
    let l0: Vec<(usize, usize)> = rs.l0_idx.iter().map(|&i| (i, ds.labels[i])).collect();
    let mut teachers = [
        Teacher { view: &views[0], labeled: l0.clone() },
        Teacher { view: &views[1], labeled: l0 },
    ];
    let mut unlabeled = rs.u0_idx.clone();
    let c = ds.n_classes;
    let fused = |models: &[LinearClassifier], rows: &[usize]| -> Result<Vec<usize>> {
        let vs: Vec<_> = views.iter().map(|v| v.view()).collect();
        Ok(argmax_rows(&fused_posteriors(models, &vs, rows)?))
    };
    let probe_score = |models: &[LinearClassifier]| -> Result<f64> {
        if plan.probe_idx.is_empty() {
            return Ok(0.0);
        }
        Ok(macro_f1(&ds.labels_of(&plan.probe_idx), &fused(models, &plan.probe_idx)?, c)?.macro_f1)
    };

    let mut models = vec![teachers[0].fit(c, cfg)?, teachers[1].fit(c, cfg)?];
    let probe_before = probe_score(&models)?;
    let mut stale = false;
    for t in 0..cfg.max_iters {
        if t > 0 {
            models = vec![teachers[0].fit(c, cfg)?, teachers[1].fit(c, cfg)?];
            stale = false;
        }
        if unlabeled.is_empty() {
            break;
        }
        let mut taught: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];
        for v in 0..2 {
            let probs = models[v].predict_proba(views[v].select(Axis(0), &unlabeled).view())?;
            let labels = argmax_rows(&probs);
            for (pos, &row) in unlabeled.iter().enumerate() {
                if probs[[pos, labels[pos]]] >= cfg.tau_fixed {
                    taught[1 - v].push((row, labels[pos]));
                }
            }
        }
        if taught.iter().all(|s| s.is_empty()) {
            break;
        }
        let taken: BTreeSet<usize> = taught.iter().flatten().map(|p| p.0).collect();
        unlabeled.retain(|i| !taken.contains(i));
        for v in 0..2 {
            teachers[v].labeled.extend(std::mem::take(&mut taught[v]));
        }
        stale = true;
    }
    if stale {
        models = vec![teachers[0].fit(c, cfg)?, teachers[1].fit(c, cfg)?];
    }
    let probe_after = probe_score(&models)?;
    let score = |rows: &[usize]| -> Result<_> { macro_f1(&ds.labels_of(rows), &fused(&models, rows)?, c) };
    Ok(BaselineResult {
        test: score(&plan.test_idx)?,
        val_macro_f1: score(&plan.val_idx)?.macro_f1,
        probe_drop: Some(probe_drop(probe_before, probe_after)),
        pseudo_added: rs.u0_idx.len() - unlabeled.len(),
        warning: None,
    })
}
