use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{resample_labeled, Dataset, LabeledResample, SplitPlan};
use crate::metrics::{macro_f1, probe_drop, ScoreReport};
use crate::policy::{PolicyDomain, PolicyGenotype};
use crate::ssl::{run_ssl, SslData, SslOutcome};
use crate::views::{build_views, ViewDomain, ViewGenotype};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub lambda_std: f64,
    pub lambda_bias: f64,
    pub lambda_add: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self { lambda_std: 0.4, lambda_bias: 0.7, lambda_add: 0.0 }
    }
}

/// Mean score penalized by dispersion, probe degradation and volume.
pub fn scalar_fitness(mu: f64, sigma: f64, probe_drop_mean: f64, n_add_mean: f64, w: &FitnessWeights) -> f64 {
    mu - w.lambda_std * sigma - w.lambda_bias * probe_drop_mean - w.lambda_add * n_add_mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub a: ViewGenotype,
    pub b: PolicyGenotype,
    pub scores: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub probe_drop_mean: f64,
    pub n_add_mean: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub eval_cost_calls: u64,
}

/// Test-time evaluation of one pair on the first labeled resample.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalEval {
    pub test: ScoreReport,
    pub val_macro_f1: f64,
    pub probe_drop: f64,
    pub pseudo_added: usize,
    pub outcome: SslOutcome,
}

/// Everything a joint evaluation needs, plus the shared call counter.
///
/// Evaluation is a pure function of the genotype pair, so results are
/// memoized; every request is still charged `K` fitness calls.
pub struct EvalContext<'a> {
    pub ds: &'a Dataset,
    pub plan: &'a SplitPlan,
    pub resamples: Vec<LabeledResample>,
    pub view_domain: ViewDomain,
    pub policy_domain: PolicyDomain,
    pub weights: FitnessWeights,
    x_fit: Array2<f64>,
    calls: AtomicU64,
    cache: Mutex<HashMap<String, EvalRecord>>,
}

impl<'a> EvalContext<'a> {
    pub fn new(
        ds: &'a Dataset,
        plan: &'a SplitPlan,
        k: usize,
        policy_domain: PolicyDomain,
        weights: FitnessWeights,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        let resamples = (0..k).map(|i| resample_labeled(plan, ds, i)).collect();
        Ok(Self {
            ds,
            plan,
            resamples,
            view_domain: ViewDomain::for_features(ds.n_features())?,
            policy_domain,
            weights,
            x_fit: ds.features.select(Axis(0), &plan.fit_rows()),
            calls: AtomicU64::new(0),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn k(&self) -> usize {
        self.resamples.len()
    }

    pub fn fitness_calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn view_matrices(&self, a: &ViewGenotype) -> Result<Vec<Array2<f64>>> {
        let (v1, v2) = build_views(a, self.x_fit.view())?;
        Ok(vec![v1.apply(self.ds.features.view())?, v2.apply(self.ds.features.view())?])
    }

    fn run_one(&self, views: &[Array2<f64>], b: &PolicyGenotype, rs: &LabeledResample) -> Result<SslOutcome> {
        let data = SslData { views, labels: &self.ds.labels, n_classes: self.ds.n_classes };
        run_ssl(&data, &rs.l0_idx, &rs.u0_idx, &self.plan.probe_idx, &b.acceptance_policy(&self.policy_domain))
    }

    fn score(&self, out: &SslOutcome, views: &[Array2<f64>], rows: &[usize]) -> Result<ScoreReport> {
        let pred = out.predict_rows(views, rows)?;
        let truth = self.ds.labels_of(rows);
        macro_f1(&truth, &pred, self.ds.n_classes)
    }

    /// Runs the SSL loop on all `K` resamples and scores on validation.
    pub fn evaluate_joint(&self, a: &ViewGenotype, b: &PolicyGenotype) -> Result<EvalRecord> {
        let k = self.k() as u64;
        self.calls.fetch_add(k, Ordering::SeqCst);
        let key = serde_json::to_string(&(a, b))?;
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let views = self.view_matrices(a)?;
        let mut scores = Vec::with_capacity(self.k());
        let mut drops = Vec::with_capacity(self.k());
        let mut added = Vec::with_capacity(self.k());
        for rs in &self.resamples {
            let out = self.run_one(&views, b, rs)?;
            scores.push(self.score(&out, &views, &self.plan.val_idx)?.macro_f1);
            drops.push(probe_drop(out.probe_before, out.probe_after));
            added.push(out.pseudo_added as f64);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mu = mean(&scores);
        let sigma = (scores.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / scores.len() as f64).sqrt();
        let probe_drop_mean = mean(&drops);
        let n_add_mean = mean(&added);
        let record = EvalRecord {
            a: a.clone(),
            b: b.clone(),
            f: scalar_fitness(mu, sigma, probe_drop_mean, n_add_mean, &self.weights),
            scores,
            mu,
            sigma,
            probe_drop_mean,
            n_add_mean,
            eval_cost_calls: k,
        };
        self.cache.lock().expect("cache lock").insert(key, record.clone());
        Ok(record)
    }

    /// Retrains the pair on resample 0 and scores it on the test rows.
    pub fn final_eval(&self, a: &ViewGenotype, b: &PolicyGenotype) -> Result<FinalEval> {
        let views = self.view_matrices(a)?;
        let out = self.run_one(&views, b, &self.resamples[0])?;
        let test = self.score(&out, &views, &self.plan.test_idx)?;
        let val = self.score(&out, &views, &self.plan.val_idx)?;
        Ok(FinalEval {
            test,
            val_macro_f1: val.macro_f1,
            probe_drop: probe_drop(out.probe_before, out.probe_after),
            pseudo_added: out.pseudo_added,
            outcome: out,
        })
    }
}
