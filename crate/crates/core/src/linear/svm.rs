use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::LinearClassifier;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Inverse regularization strength, as in the usual `C` of a linear SVM.
    pub c_reg: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c_reg: 1.0,
            epochs: 1000,
        }
    }
}

/// One-vs-rest hinge-loss linear SVM trained by full-batch projected
/// subgradient descent (Pegasos step schedule, bias as an extra regularized
/// coordinate). Scores become pseudo-posteriors through the softmax in
/// [`LinearClassifier::predict_proba`].
///
/// Training is deterministic; `seed` is accepted for interface symmetry with
/// the other learners.
pub fn fit_linear_svm_reference(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    params: &SvmParams,
    _seed: u64,
) -> Result<LinearClassifier> {
    if y.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch(x.nrows(), y.len()));
    }
    if !(params.c_reg > 0.0) {
        return Err(Error::Training(format!("c_reg must be positive, got {}", params.c_reg)));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::Training("training labels contain a single class".into()));
    }
    let (n, d) = x.dim();
    let lambda = 1.0 / (params.c_reg * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut weights = Array2::<f64>::zeros((n_classes, d));
    let mut bias = vec![0.0; n_classes];

    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut sub = vec![0.0; d + 1];
    for class in 0..n_classes {
        if !y.contains(&class) {
            continue;
        }
        w.fill(0.0);
        avg.fill(0.0);
        let mut averaged = 0usize;
        for t in 1..=params.epochs {
            sub.fill(0.0);
            for (i, xi) in x.rows().into_iter().enumerate() {
                let target = if y[i] == class { 1.0 } else { -1.0 };
                let score: f64 =
                    xi.iter().zip(&w[..d]).map(|(a, b)| a * b).sum::<f64>() + w[d];
                if target * score < 1.0 {
                    for (s, v) in sub[..d].iter_mut().zip(xi) {
                        *s += target * v;
                    }
                    sub[d] += target;
                }
            }
            let eta = 1.0 / (lambda * t as f64);
            let shrink = 1.0 - eta * lambda;
            for (wj, sj) in w.iter_mut().zip(&sub) {
                *wj = shrink * *wj + eta * sj / n as f64;
            }
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                let f = radius / norm;
                w.iter_mut().for_each(|v| *v *= f);
            }
            if t > params.epochs / 2 {
                averaged += 1;
                for (a, v) in avg.iter_mut().zip(&w) {
                    *a += v;
                }
            }
        }
        for j in 0..d {
            weights[[class, j]] = avg[j] / averaged as f64;
        }
        bias[class] = avg[d] / averaged as f64;
    }

    Ok(LinearClassifier {
        weights,
        bias,
        l2: lambda,
        max_epochs: params.epochs,
        tol: 0.0,
        temperature: 1.0,
        epochs_run: params.epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{fit_logistic, LogisticParams};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_pair_has_correct_sign() {
        let x = array![[-1.0], [1.0]];
        let m = fit_linear_svm_reference(x.view(), &[0, 1], 2, &SvmParams::default(), 0).unwrap();
        let scores = m.decision_function(array![[1.0], [-1.0]].view()).unwrap();
        assert!(scores[[0, 1]] > scores[[0, 0]]);
        assert!(scores[[1, 0]] > scores[[1, 1]]);
    }

    #[test]
    fn vanishing_c_shrinks_weights() {
        let x = array![[-1.0, 0.5], [1.0, -0.5], [2.0, 1.0], [-2.0, 0.0]];
        let y = [0, 1, 1, 0];
        let m = fit_linear_svm_reference(
            x.view(),
            &y,
            2,
            &SvmParams {
                c_reg: 1e-9,
                epochs: 200,
            },
            0,
        )
        .unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn agrees_with_logistic_on_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((50, 2), |(i, _)| {
            rng.gen_range(-0.5..0.5) + if y[i] == 1 { 2.0 } else { -2.0 }
        });
        let svm = fit_linear_svm_reference(x.view(), &y, 2, &SvmParams::default(), 0).unwrap();
        let lr = fit_logistic(x.view(), &y, 2, &LogisticParams::default()).unwrap();
        let a = svm.predict(x.view()).unwrap();
        let b = lr.predict(x.view()).unwrap();
        let agree = a.iter().zip(&b).filter(|(u, v)| u == v).count();
        assert!(agree as f64 / 50.0 >= 0.95);
    }

    #[test]
    fn deterministic() {
        let x = array![[-1.0, 0.2], [1.0, 0.1], [0.5, -0.3], [-0.7, 0.9]];
        let y = [0, 1, 1, 0];
        let a = fit_linear_svm_reference(x.view(), &y, 2, &SvmParams::default(), 1).unwrap();
        let b = fit_linear_svm_reference(x.view(), &y, 2, &SvmParams::default(), 1).unwrap();
        assert_eq!(a, b);
    }
}
