//! Lightweight SSL baselines and the supervised linear references. All of
//! them consume the same split and labeled resample as the search methods.

mod cotraining;
mod label_spreading;
mod self_training;
mod supervised;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabeledResample, SplitPlan};
use crate::linear::{LogisticParams, SvmParams};
use crate::metrics::ScoreReport;
use crate::Result;

pub use cotraining::{feature_halves, run_cotraining};
pub use label_spreading::{knn_graph, run_label_spreading, spread_labels, Graph, SpreadResult};
pub use self_training::run_self_training;
pub use supervised::{run_lr_ref, run_svm_ref};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    St,
    Hco,
    Ls,
    LrRef,
    SvmRef,
}

impl BaselineMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            BaselineMethod::St => "st",
            BaselineMethod::Hco => "hco",
            BaselineMethod::Ls => "ls",
            BaselineMethod::LrRef => "lr_ref",
            BaselineMethod::SvmRef => "svm_ref",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub tau_fixed: f64,
    pub max_iters: usize,
    pub ls_alpha: f64,
    pub ls_neighbors: usize,
    pub ls_max_iter: usize,
    /// Predict test rows by 1-NN to the transduced pool instead of placing
    /// them in the graph.
    pub ls_inductive_test: bool,
    pub learner: LogisticParams,
    pub svm: SvmParams,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            tau_fixed: 0.9,
            max_iters: 10,
            ls_alpha: 0.9,
            ls_neighbors: 7,
            ls_max_iter: 1000,
            ls_inductive_test: false,
            learner: LogisticParams::default(),
            svm: SvmParams::default(),
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::Error;
        if !(self.ls_alpha > 0.0 && self.ls_alpha < 1.0) {
            return Err(Error::Config(format!("ls_alpha = {} outside (0, 1)", self.ls_alpha)));
        }
        if self.ls_neighbors == 0 || self.ls_max_iter == 0 || self.max_iters == 0 {
            return Err(Error::Config("ls_neighbors, ls_max_iter and max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Scores of one baseline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub test: ScoreReport,
    pub val_macro_f1: f64,
    /// `None` when the method has no probe-monitored pseudo-labeling loop.
    pub probe_drop: Option<f64>,
    pub pseudo_added: usize,
    pub warning: Option<String>,
}

pub fn run_baseline(
    method: BaselineMethod,
    ds: &Dataset,
    plan: &SplitPlan,
    rs: &LabeledResample,
    cfg: &BaselineConfig,
) -> Result<BaselineResult> {
    match method {
        BaselineMethod::St => run_self_training(ds, plan, rs, cfg),
        BaselineMethod::Hco => run_cotraining(ds, plan, rs, cfg),
        BaselineMethod::Ls => run_label_spreading(ds, plan, rs, cfg),
        BaselineMethod::LrRef => run_lr_ref(ds, plan, rs, cfg),
        BaselineMethod::SvmRef => run_svm_ref(ds, plan, rs, cfg),
    }
}
