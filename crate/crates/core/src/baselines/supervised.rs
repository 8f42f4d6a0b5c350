use ndarray::Axis;

use super::{BaselineConfig, BaselineResult};
use crate::data::{Dataset, LabeledResample, SplitPlan};
use crate::linear::{fit_linear_svm_reference, fit_logistic, LinearClassifier};
use crate::metrics::macro_f1;
use crate::Result;

fn score_model(ds: &Dataset, plan: &SplitPlan, model: &LinearClassifier) -> Result<BaselineResult> {
    let score = |rows: &[usize]| -> Result<_> {
        let pred = model.predict(ds.features.select(Axis(0), rows).view())?;
        macro_f1(&ds.labels_of(rows), &pred, ds.n_classes)
    };
    Ok(BaselineResult {
        test: score(&plan.test_idx)?,
        val_macro_f1: score(&plan.val_idx)?.macro_f1,
        probe_drop: None,
        pseudo_added: 0,
        warning: None,
    })
}

/// Logistic regression fitted on the labeled resample only.
pub fn run_lr_ref(ds: &Dataset, plan: &SplitPlan, rs: &LabeledResample, cfg: &BaselineConfig) -> Result<BaselineResult> {
    let x = ds.features.select(Axis(0), &rs.l0_idx);
    let model = fit_logistic(x.view(), &ds.labels_of(&rs.l0_idx), ds.n_classes, &cfg.learner)?;
    score_model(ds, plan, &model)
}

/// Linear SVM fitted on the labeled resample only.
pub fn run_svm_ref(ds: &Dataset, plan: &SplitPlan, rs: &LabeledResample, cfg: &BaselineConfig) -> Result<BaselineResult> {
    let x = ds.features.select(Axis(0), &rs.l0_idx);
    let model = fit_linear_svm_reference(x.view(), &ds.labels_of(&rs.l0_idx), ds.n_classes, &cfg.svm, cfg.seed)?;
    score_model(ds, plan, &model)
}
