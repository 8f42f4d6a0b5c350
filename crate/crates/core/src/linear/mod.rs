//! Linear base learners: regularized multinomial logistic regression (the
//! learner used inside the pseudo-labeling loop) and a one-vs-rest linear SVM
//! used only as a supervised reference.

mod logistic;
mod svm;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use logistic::{fit_logistic, fit_logistic_calibrated, objective, LogisticParams, Objective};
pub use svm::{fit_linear_svm_reference, SvmParams};

/// A fitted linear model `softmax((W x + b) / temperature)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    /// `n_classes x n_features`, row-major.
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
    pub l2: f64,
    pub max_epochs: usize,
    pub tol: f64,
    pub temperature: f64,
    pub epochs_run: usize,
}

impl LinearClassifier {
    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    pub fn decision_function(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        let mut z = x.dot(&self.weights.t()).as_standard_layout().into_owned();
        for mut row in z.rows_mut() {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(z)
    }

    /// Row-wise class posteriors; each row sums to one.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = self.decision_function(x)?;
        let inv_t = 1.0 / self.temperature;
        for mut row in z.rows_mut() {
            let row = row.as_slice_mut().expect("owned array is contiguous");
            for v in row.iter_mut() {
                *v *= inv_t;
            }
            softmax_in_place(row);
        }
        Ok(z)
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_proba(x)?))
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest entry per row; ties go to the lower index.
pub fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}
