//! The two-view pseudo-labeling loop.
//!
//! Each iteration fits one model per view on the current labeled set, scores
//! the unlabeled pool, filters candidates by confidence, optional margin and
//! optional cross-view agreement, and admits up to a per-class cap of the most
//! confident ones. The loop ends after `max_iters` iterations, when nothing is
//! admitted, or when the pool runs dry.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::linear::{argmax_rows, fit_logistic, fit_logistic_calibrated, LinearClassifier, LogisticParams};
use crate::metrics::macro_f1;
use crate::policy::threshold_at;
use crate::views::ViewTransform;
use crate::{Error, Result};

/// Runtime form of a pseudo-labeling policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptancePolicy {
    pub tau0: f64,
    pub delta_tau: f64,
    pub tau_min: f64,
    /// Margin filter is active when positive.
    pub gamma: f64,
    pub veto: bool,
    /// `None` admits every candidate.
    pub per_class_cap: Option<usize>,
    pub max_iters: usize,
    pub learner: LogisticParams,
    pub calibrate: bool,
}

impl AcceptancePolicy {
    /// Constant threshold, no margin, no veto, no cap.
    pub fn fixed(tau: f64, max_iters: usize, learner: LogisticParams) -> Self {
        Self {
            tau0: tau,
            delta_tau: 0.0,
            tau_min: tau,
            gamma: 0.0,
            veto: false,
            per_class_cap: None,
            max_iters,
            learner,
            calibrate: false,
        }
    }

    pub fn threshold_at(&self, t: usize) -> f64 {
        threshold_at(self.tau0, self.delta_tau, self.tau_min, t)
    }
}

/// Pre-transformed view matrices over all dataset rows plus the labels.
#[derive(Debug, Clone, Copy)]
pub struct SslData<'a> {
    pub views: &'a [Array2<f64>],
    pub labels: &'a [usize],
    pub n_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    NoAcceptance,
    PoolExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub t: usize,
    pub tau_t: f64,
    /// Candidate counts: unlabeled pool, after confidence, after margin,
    /// after veto.
    pub candidates_after_each_filter: Vec<usize>,
    pub accepted_per_class: Vec<usize>,
    /// Admitted `(row, pseudo_label)` pairs in admission order.
    pub accepted: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SslOutcome {
    pub final_models: Vec<LinearClassifier>,
    /// Final labeled set as `(row, label)`; initial labels come first.
    pub labeled: Vec<(usize, usize)>,
    pub l_final_size: usize,
    pub pseudo_added: usize,
    pub per_iter_added: Vec<usize>,
    pub probe_before: f64,
    pub probe_after: f64,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    pub log: Vec<IterationLog>,
}

fn fit_view(
    view: &Array2<f64>,
    labeled: &[(usize, usize)],
    n_classes: usize,
    policy: &AcceptancePolicy,
) -> Result<LinearClassifier> {
    let rows: Vec<usize> = labeled.iter().map(|&(i, _)| i).collect();
    let y: Vec<usize> = labeled.iter().map(|&(_, c)| c).collect();
    let x = view.select(Axis(0), &rows);
    if policy.calibrate {
        fit_logistic_calibrated(x.view(), &y, n_classes, &policy.learner)
    } else {
        fit_logistic(x.view(), &y, n_classes, &policy.learner)
    }
}

/// Mean of the per-view posteriors on the selected rows.
pub fn fused_posteriors(
    models: &[LinearClassifier],
    views: &[ArrayView2<f64>],
    rows: &[usize],
) -> Result<Array2<f64>> {
    if models.len() != views.len() || models.is_empty() {
        return Err(Error::LengthMismatch(models.len(), views.len()));
    }
    let mut acc: Option<Array2<f64>> = None;
    for (m, v) in models.iter().zip(views) {
        let p = m.predict_proba(v.select(Axis(0), rows).view())?;
        acc = Some(match acc {
            None => p,
            Some(a) => a + p,
        });
    }
    let mut acc = acc.expect("at least one model");
    acc /= models.len() as f64;
    Ok(acc)
}

fn fused_labels(models: &[LinearClassifier], views: &[Array2<f64>], rows: &[usize]) -> Result<Vec<usize>> {
    let views: Vec<ArrayView2<f64>> = views.iter().map(|v| v.view()).collect();
    Ok(argmax_rows(&fused_posteriors(models, &views, rows)?))
}

fn probe_score(models: &[LinearClassifier], data: &SslData, probe: &[usize]) -> Result<f64> {
    if probe.is_empty() {
        return Ok(0.0);
    }
    let pred = fused_labels(models, data.views, probe)?;
    let truth: Vec<usize> = probe.iter().map(|&i| data.labels[i]).collect();
    Ok(macro_f1(&truth, &pred, data.n_classes)?.macro_f1)
}

/// Top-1 class, its probability and the top-1 minus top-2 gap for one row.
fn summarize(row: ndarray::ArrayView1<f64>) -> (usize, f64, f64) {
    let mut best = 0;
    for c in 1..row.len() {
        if row[c] > row[best] {
            best = c;
        }
    }
    let second = row
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != best)
        .map(|(_, &v)| v)
        .fold(0.0f64, f64::max);
    (best, row[best], row[best] - second)
}

pub fn run_ssl(
    data: &SslData,
    l0: &[usize],
    u0: &[usize],
    probe: &[usize],
    policy: &AcceptancePolicy,
) -> Result<SslOutcome> {
    if data.views.is_empty() {
        return Err(Error::Config("no views supplied".into()));
    }
    let probe_set: BTreeSet<usize> = probe.iter().copied().collect();
    if l0.iter().chain(u0).any(|i| probe_set.contains(i)) {
        return Err(Error::Validation("probe rows overlap the SSL pool".into()));
    }

    let mut labeled: Vec<(usize, usize)> = l0.iter().map(|&i| (i, data.labels[i])).collect();
    let mut unlabeled: Vec<usize> = u0.to_vec();
    let mut per_iter_added = Vec::new();
    let mut log = Vec::new();
    let mut probe_before = None;
    let mut models: Vec<LinearClassifier>;
    let mut iterations_run = 0;
    let mut stop_reason = StopReason::MaxIters;
    let mut models_current = false;

    let fit_all = |labeled: &[(usize, usize)]| -> Result<Vec<LinearClassifier>> {
        data.views
            .iter()
            .map(|v| fit_view(v, labeled, data.n_classes, policy))
            .collect()
    };

    models = fit_all(&labeled)?;
    for t in 0..policy.max_iters {
        if t > 0 {
            models = fit_all(&labeled)?;
        }
        models_current = true;
        if probe_before.is_none() {
            probe_before = Some(probe_score(&models, data, probe)?);
        }
        iterations_run = t + 1;
        let tau_t = policy.threshold_at(t);

        // (row, label, confidence) for candidates surviving every filter.
        let mut counts = vec![unlabeled.len(), 0, 0, 0];
        let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
        if !unlabeled.is_empty() {
            let posts: Vec<Array2<f64>> = models
                .iter()
                .zip(data.views)
                .map(|(m, v)| m.predict_proba(v.select(Axis(0), &unlabeled).view()))
                .collect::<Result<_>>()?;
            for (pos, &row) in unlabeled.iter().enumerate() {
                let summaries: Vec<(usize, f64, f64)> =
                    posts.iter().map(|p| summarize(p.row(pos))).collect();
                let mut best_view = 0;
                for (v, s) in summaries.iter().enumerate() {
                    if s.1 > summaries[best_view].1 {
                        best_view = v;
                    }
                }
                let confidence = summaries[best_view].1;
                if confidence < tau_t {
                    continue;
                }
                counts[1] += 1;
                if policy.gamma > 0.0 {
                    let margin = summaries.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
                    if margin < policy.gamma {
                        continue;
                    }
                }
                counts[2] += 1;
                if policy.veto && summaries.iter().any(|s| s.0 != summaries[0].0) {
                    continue;
                }
                counts[3] += 1;
                candidates.push((row, summaries[best_view].0, confidence));
            }
        }

        let mut by_class: Vec<Vec<(usize, f64)>> = vec![Vec::new(); data.n_classes];
        for &(row, label, conf) in &candidates {
            by_class[label].push((row, conf));
        }
        let mut accepted = Vec::new();
        let mut accepted_per_class = vec![0; data.n_classes];
        for (label, mut members) in by_class.into_iter().enumerate() {
            members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let cap = policy.per_class_cap.unwrap_or(usize::MAX);
            for &(row, _) in members.iter().take(cap) {
                accepted.push((row, label));
                accepted_per_class[label] += 1;
            }
        }

        per_iter_added.push(accepted.len());
        log.push(IterationLog {
            t,
            tau_t,
            candidates_after_each_filter: counts,
            accepted_per_class,
            accepted: accepted.clone(),
        });
        if accepted.is_empty() {
            stop_reason = StopReason::NoAcceptance;
            break;
        }
        let taken: BTreeSet<usize> = accepted.iter().map(|&(i, _)| i).collect();
        unlabeled.retain(|i| !taken.contains(i));
        labeled.extend(accepted);
        models_current = false;
        if unlabeled.is_empty() {
            stop_reason = StopReason::PoolExhausted;
            break;
        }
    }

    if !models_current {
        models = fit_all(&labeled)?;
    }
    let probe_before = match probe_before {
        Some(p) => p,
        None => probe_score(&models, data, probe)?,
    };
    let probe_after = probe_score(&models, data, probe)?;
    let pseudo_added: usize = per_iter_added.iter().sum();
    Ok(SslOutcome {
        final_models: models,
        l_final_size: labeled.len(),
        labeled,
        pseudo_added,
        per_iter_added,
        probe_before,
        probe_after,
        iterations_run,
        stop_reason,
        log,
    })
}

impl SslOutcome {
    /// Posterior-averaged prediction on already-transformed view matrices.
    pub fn predict_rows(&self, views: &[Array2<f64>], rows: &[usize]) -> Result<Vec<usize>> {
        fused_labels(&self.final_models, views, rows)
    }

    /// Posterior-averaged prediction on raw features.
    pub fn predict(&self, transforms: &[ViewTransform], x: ArrayView2<f64>) -> Result<Vec<usize>> {
        predict_final(&self.final_models, transforms, x)
    }
}

/// Argmax of the mean view posterior; ties go to the lower class index.
pub fn predict_final(
    models: &[LinearClassifier],
    transforms: &[ViewTransform],
    x: ArrayView2<f64>,
) -> Result<Vec<usize>> {
    let views: Vec<Array2<f64>> = transforms
        .iter()
        .map(|t| t.apply(x))
        .collect::<Result<_>>()?;
    let rows: Vec<usize> = (0..x.nrows()).collect();
    fused_labels(models, &views, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(n: usize, seed: u64, gap: f64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            rng.gen_range(-1.0..1.0) + if j == 0 { if y[i] == 1 { gap } else { -gap } } else { 0.0 }
        });
        (x, y)
    }

    fn policy() -> AcceptancePolicy {
        AcceptancePolicy {
            tau0: 0.8,
            delta_tau: 0.05,
            tau_min: 0.6,
            gamma: 0.0,
            veto: false,
            per_class_cap: Some(5),
            max_iters: 6,
            learner: LogisticParams::default(),
            calibrate: false,
        }
    }

    #[test]
    fn empty_pool_is_supervised() {
        let (x, y) = blobs(20, 0, 1.5);
        let views = vec![x.clone(), x];
        let data = SslData { views: &views, labels: &y, n_classes: 2 };
        let out = run_ssl(&data, &[0, 1, 2, 3], &[], &[10, 11], &policy()).unwrap();
        assert_eq!(out.pseudo_added, 0);
        assert_eq!(out.stop_reason, StopReason::NoAcceptance);
        assert_eq!(out.iterations_run, 1);
        assert_eq!(out.probe_before, out.probe_after);
        let sup = fit_logistic(views[0].select(Axis(0), &[0, 1, 2, 3]).view(), &[0, 1, 0, 1], 2, &LogisticParams::default()).unwrap();
        assert_eq!(out.final_models[0], sup);
    }

    #[test]
    fn identical_views_never_veto() {
        let (x, y) = blobs(80, 1, 1.0);
        let views = vec![x.clone(), x];
        let data = SslData { views: &views, labels: &y, n_classes: 2 };
        let mut p = policy();
        p.veto = true;
        p.tau0 = 0.5;
        p.tau_min = 0.5;
        let u0: Vec<usize> = (10..70).collect();
        let out = run_ssl(&data, &(0..10).collect::<Vec<_>>(), &u0, &[75, 76, 77, 78], &p).unwrap();
        for it in &out.log {
            assert_eq!(it.candidates_after_each_filter[2], it.candidates_after_each_filter[3]);
        }
    }

    #[test]
    fn near_uniform_posteriors_block_acceptance() {
        let (x, y) = blobs(60, 2, 1.0);
        let views = vec![x.clone(), x.clone()];
        let data = SslData { views: &views, labels: &y, n_classes: 2 };
        let mut p = policy();
        p.tau0 = 0.999;
        p.delta_tau = 0.0;
        p.tau_min = 0.999;
        p.learner.l2 = 1e6;
        let l0: Vec<usize> = (0..6).collect();
        let u0: Vec<usize> = (6..50).collect();
        // Oracle: every confidence of the t=0 models is below the threshold.
        let m = fit_logistic(x.select(Axis(0), &l0).view(), &y[..6], 2, &p.learner).unwrap();
        let probs = m.predict_proba(x.select(Axis(0), &u0).view()).unwrap();
        assert!(probs.iter().all(|&v| v < 0.999));
        let out = run_ssl(&data, &l0, &u0, &[55, 56], &p).unwrap();
        assert_eq!(out.pseudo_added, 0);
    }

    #[test]
    fn bookkeeping_invariants_hold() {
        let (x, y) = blobs(200, 3, 1.2);
        let x2 = x.mapv(|v| v * 0.5 + 0.1);
        let views = vec![x, x2];
        let data = SslData { views: &views, labels: &y, n_classes: 2 };
        let mut p = policy();
        p.gamma = 0.2;
        let l0: Vec<usize> = (0..8).collect();
        let u0: Vec<usize> = (8..180).collect();
        let probe: Vec<usize> = (180..200).collect();
        let out = run_ssl(&data, &l0, &u0, &probe, &p).unwrap();
        assert_eq!(out.pseudo_added, out.per_iter_added.iter().sum::<usize>());
        assert_eq!(out.pseudo_added, out.l_final_size - l0.len());
        assert!(out.pseudo_added <= u0.len());
        assert!(out.iterations_run <= p.max_iters);
        for it in &out.log {
            assert!(it.accepted_per_class.iter().all(|&c| c <= 5));
            let c = &it.candidates_after_each_filter;
            assert!(c.windows(2).all(|w| w[1] <= w[0]));
        }
        let rows: BTreeSet<usize> = out.labeled.iter().map(|&(i, _)| i).collect();
        assert_eq!(rows.len(), out.labeled.len());
        assert!(probe.iter().all(|i| !rows.contains(i)));
    }

    #[test]
    fn probe_overlap_is_rejected() {
        let (x, y) = blobs(20, 4, 1.0);
        let views = vec![x];
        let data = SslData { views: &views, labels: &y, n_classes: 2 };
        assert!(run_ssl(&data, &[0, 1], &[2, 3], &[3], &policy()).is_err());
    }

    #[test]
    fn fusion_tie_breaks_to_lower_class() {
        let m1 = LinearClassifier {
            weights: array![[0.0], [0.0]],
            bias: vec![(0.6f64 / 0.4).ln(), 0.0],
            l2: 1.0,
            max_epochs: 1,
            tol: 0.0,
            temperature: 1.0,
            epochs_run: 0,
        };
        let mut m2 = m1.clone();
        m2.bias = vec![0.0, (0.6f64 / 0.4).ln()];
        let x = array![[1.0]];
        let t = ViewTransform { columns: vec![0], projection: None, bins: None };
        let pred = predict_final(&[m1, m2], &[t.clone(), t], x.view()).unwrap();
        assert_eq!(pred, vec![0]);
    }
}
