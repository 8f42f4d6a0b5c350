//! Dataset ingestion, preprocessing and deterministic partitioning.

mod arff;
mod csv_source;
pub mod openml;
mod split;
mod synthetic;
mod table;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use arff::{load_arff, parse_arff};
pub use csv_source::{load_csv, parse_csv};
pub use openml::{fetch_openml, FetchMode, OpenmlMeta};
pub use split::{make_split, make_split_with, resample_labeled, LabeledResample, SplitPlan, SplitProportions};
pub use synthetic::{two_gaussians, TwoGaussians};

/// A preprocessed tabular classification dataset.
///
/// Features are finite, labels are contiguous in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub feature_names: Vec<String>,
    /// Original label values, indexed by encoded class.
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::Validation("dataset has no rows".into()));
        }
        if d == 0 {
            return Err(Error::Validation("dataset has no feature columns".into()));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch(labels.len(), n));
        }
        if n_classes < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 classes, found {n_classes}"
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::Validation(format!(
                "label {bad} outside 0..{n_classes}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature value".into()));
        }
        if feature_names.len() != d {
            return Err(Error::LengthMismatch(feature_names.len(), d));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            n_classes,
            feature_names,
            class_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Returns a copy whose features are z-scored with statistics taken
    /// from `rows` only.
    pub fn restandardized(&self, rows: &[usize]) -> Dataset {
        let scaler = Standardizer::fit(&self.features, rows);
        Dataset {
            features: scaler.transform(&self.features),
            ..self.clone()
        }
    }

    pub fn labels_of(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Per-column z-score statistics. Zero-variance columns map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const ZERO_VARIANCE: f64 = 1e-12;

impl Standardizer {
    /// Population (ddof = 0) statistics over the given rows; an empty row
    /// list means all rows.
    pub fn fit(x: &Array2<f64>, rows: &[usize]) -> Self {
        let sub;
        let view = if rows.is_empty() {
            x.view()
        } else {
            sub = x.select(Axis(0), rows);
            sub.view()
        };
        let n = view.nrows() as f64;
        let mut mean = Vec::with_capacity(view.ncols());
        let mut std = Vec::with_capacity(view.ncols());
        for col in view.columns() {
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            std.push(var.sqrt());
        }
        Self { mean, std }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            if s <= ZERO_VARIANCE * m.abs().max(1.0) {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - m) / s);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardization_is_idempotent() {
        let x = array![[1.0, 5.0, 2.0], [2.0, 5.0, -1.0], [4.0, 5.0, 0.5], [7.5, 5.0, 3.0]];
        let once = Standardizer::fit(&x, &[]).transform(&x);
        let twice = Standardizer::fit(&once, &[]).transform(&once);
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(once.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_single_class() {
        let err = Dataset::new(
            "x",
            array![[1.0], [2.0]],
            vec![0, 0],
            1,
            vec!["a".into()],
            vec!["k".into()],
        );
        assert!(matches!(err, Err(Error::Validation(_))));
    }
}
