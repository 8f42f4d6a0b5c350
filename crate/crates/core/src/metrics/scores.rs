use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: Vec<f64>,
}

/// One-vs-rest F1 per class averaged uniformly over all `n_classes`.
/// Classes never predicted and never present score 0.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ScoreReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if n_classes == 0 {
        return Err(Error::Validation("n_classes must be positive".into()));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    let mut correct = 0;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::Validation(format!("label out of range for {n_classes} classes")));
        }
        if t == p {
            tp[t] += 1;
            correct += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let per_class_f1: Vec<f64> = (0..n_classes)
        .map(|c| ratio(2 * tp[c], 2 * tp[c] + fp[c] + fn_[c]))
        .collect();
    let macro_f1 = per_class_f1.iter().sum::<f64>() / n_classes as f64;
    let accuracy = if y_true.is_empty() { 0.0 } else { correct as f64 / y_true.len() as f64 };
    Ok(ScoreReport { macro_f1, accuracy, per_class_f1 })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Positive means the probe score degraded during pseudo-labeling.
pub fn probe_drop(s_before: f64, s_after: f64) -> f64 {
    s_before - s_after
}

/// Positive means validation overstated test performance.
pub fn val_optimism(s_val: f64, s_test: f64) -> f64 {
    s_val - s_test
}
