use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, LinearClassifier};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop once the gradient norm drops below this value.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 0.01,
            max_epochs: 500,
            tol: 1e-5,
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;

/// Mean cross-entropy plus `(l2/2) * ||W||^2` and its gradient.
///
/// Parameters are flattened as `W` (row-major, `n_classes x d`) followed by
/// `b`. Classes absent from `y` are frozen: their gradient entries are zero.
pub struct Objective<'a> {
    x: &'a [f64],
    y: &'a [usize],
    n: usize,
    d: usize,
    c: usize,
    l2: f64,
    active: Vec<bool>,
    probs: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(x: &'a [f64], y: &'a [usize], d: usize, c: usize, l2: f64) -> Self {
        let n = y.len();
        let mut active = vec![false; c];
        for &label in y {
            active[label] = true;
        }
        Self {
            x,
            y,
            n,
            d,
            c,
            l2,
            active,
            probs: vec![0.0; n * c],
        }
    }

    pub fn n_params(&self) -> usize {
        self.c * (self.d + 1)
    }

    /// Loss at `theta`; leaves the posteriors cached for [`Self::gradient`].
    pub fn loss(&mut self, theta: &[f64]) -> f64 {
        let (d, c) = (self.d, self.c);
        let (w, b) = theta.split_at(c * d);
        let mut nll = 0.0;
        for i in 0..self.n {
            let xi = &self.x[i * d..(i + 1) * d];
            let row = &mut self.probs[i * c..(i + 1) * c];
            for k in 0..c {
                let wk = &w[k * d..(k + 1) * d];
                row[k] = b[k] + wk.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let shifted_true = row[self.y[i]] - max;
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            nll += sum.ln() - shifted_true;
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let reg: f64 = w.iter().map(|v| v * v).sum();
        nll / self.n as f64 + 0.5 * self.l2 * reg
    }

    /// Gradient at the `theta` most recently passed to [`Self::loss`].
    pub fn gradient(&self, theta: &[f64], grad: &mut [f64]) {
        let (d, c) = (self.d, self.c);
        grad.fill(0.0);
        let (gw, gb) = grad.split_at_mut(c * d);
        let inv_n = 1.0 / self.n as f64;
        for i in 0..self.n {
            let xi = &self.x[i * d..(i + 1) * d];
            let row = &self.probs[i * c..(i + 1) * c];
            for k in 0..c {
                let r = (row[k] - if self.y[i] == k { 1.0 } else { 0.0 }) * inv_n;
                gb[k] += r;
                let gk = &mut gw[k * d..(k + 1) * d];
                for (g, x) in gk.iter_mut().zip(xi) {
                    *g += r * x;
                }
            }
        }
        let w = &theta[..c * d];
        for k in 0..c {
            if !self.active[k] {
                gw[k * d..(k + 1) * d].fill(0.0);
                gb[k] = 0.0;
                continue;
            }
            for (g, wv) in gw[k * d..(k + 1) * d].iter_mut().zip(&w[k * d..(k + 1) * d]) {
                *g += self.l2 * wv;
            }
        }
    }
}

/// Loss and gradient of the logistic objective at given parameters.
pub fn objective(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    l2: f64,
    theta: &[f64],
) -> (f64, Vec<f64>) {
    let x = x.as_standard_layout();
    let flat = x.as_slice().expect("standard layout");
    let mut obj = Objective::new(flat, y, x.ncols(), n_classes, l2);
    let loss = obj.loss(theta);
    let mut grad = vec![0.0; obj.n_params()];
    obj.gradient(theta, &mut grad);
    (loss, grad)
}

fn check_training_set(x: &ArrayView2<f64>, y: &[usize], n_classes: usize) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch(x.nrows(), y.len()));
    }
    if let Some(bad) = y.iter().find(|&&v| v >= n_classes) {
        return Err(Error::Training(format!("label {bad} outside 0..{n_classes}")));
    }
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        return Err(Error::Training("training labels contain a single class".into()));
    }
    Ok(())
}

/// Full-batch gradient descent with Armijo backtracking from a zero start.
pub fn fit_logistic(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    params: &LogisticParams,
) -> Result<LinearClassifier> {
    if !(params.l2 > 0.0) {
        return Err(Error::Training(format!("l2 must be positive, got {}", params.l2)));
    }
    check_training_set(&x, y, n_classes)?;
    let d = x.ncols();
    // Rows are visited in a canonical order so the floating-point sums, and
    // therefore the fit, do not depend on how the caller ordered them.
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(y[a].cmp(&y[b]))
    });
    let flat: Vec<f64> = order.iter().flat_map(|&i| x.row(i).to_vec()).collect();
    let ys: Vec<usize> = order.iter().map(|&i| y[i]).collect();
    let mut obj = Objective::new(&flat, &ys, d, n_classes, params.l2);

    let p = obj.n_params();
    let mut theta = vec![0.0; p];
    let mut trial = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut loss = obj.loss(&theta);
    obj.gradient(&theta, &mut grad);
    let mut step = 1.0;
    let mut epochs = 0;

    while epochs < params.max_epochs {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < params.tol {
            break;
        }
        epochs += 1;
        let accepted = loop {
            for ((t, th), g) in trial.iter_mut().zip(&theta).zip(&grad) {
                *t = th - step * g;
            }
            let trial_loss = obj.loss(&trial);
            if trial_loss <= loss - ARMIJO_C * step * gnorm2 {
                break Some(trial_loss);
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(new_loss) = accepted else {
            break;
        };
        std::mem::swap(&mut theta, &mut trial);
        loss = new_loss;
        obj.gradient(&theta, &mut grad);
        step *= 2.0;
    }

    let weights = Array2::from_shape_vec((n_classes, d), theta[..n_classes * d].to_vec())
        .expect("shape matches parameter count");
    Ok(LinearClassifier {
        weights,
        bias: theta[n_classes * d..].to_vec(),
        l2: params.l2,
        max_epochs: params.max_epochs,
        tol: params.tol,
        temperature: 1.0,
        epochs_run: epochs,
    })
}

fn mean_nll(logits: &Array2<f64>, y: &[usize], temperature: f64) -> f64 {
    let mut total = 0.0;
    let mut buf = vec![0.0; logits.ncols()];
    for (row, &yi) in logits.rows().into_iter().zip(y) {
        for (b, z) in buf.iter_mut().zip(row) {
            *b = z / temperature;
        }
        softmax_in_place(&mut buf);
        total -= buf[yi].max(1e-300).ln();
    }
    total / y.len() as f64
}

/// Logistic fit with temperature scaling: the temperature is fitted on every
/// fifth sample held out from a first fit, then the model is refit on all
/// samples. Falls back to an uncalibrated fit when the split is degenerate.
pub fn fit_logistic_calibrated(
    x: ArrayView2<f64>,
    y: &[usize],
    n_classes: usize,
    params: &LogisticParams,
) -> Result<LinearClassifier> {
    let hold: Vec<usize> = (0..y.len()).filter(|i| i % 5 == 4).collect();
    let train: Vec<usize> = (0..y.len()).filter(|i| i % 5 != 4).collect();
    let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let distinct = |v: &[usize]| v.iter().any(|&c| c != v[0]);
    if hold.len() < 2 || y_train.is_empty() || !distinct(&y_train) {
        return fit_logistic(x, y, n_classes, params);
    }
    let x_train = x.select(ndarray::Axis(0), &train);
    let first = fit_logistic(x_train.view(), &y_train, n_classes, params)?;
    let x_hold = x.select(ndarray::Axis(0), &hold);
    let y_hold: Vec<usize> = hold.iter().map(|&i| y[i]).collect();
    let logits = first.decision_function(x_hold.view())?;

    // Golden-section search over log-temperature.
    let f = |log_t: f64| mean_nll(&logits, &y_hold, log_t.exp());
    let (mut lo, mut hi) = ((0.05f64).ln(), (20.0f64).ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..60 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = f(b);
        }
    }
    let temperature = (0.5 * (lo + hi)).exp();

    let mut model = fit_logistic(x, y, n_classes, params)?;
    model.temperature = temperature;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, n: usize, d: usize, c: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-2.0..2.0));
        let y = (0..n).map(|i| i % c).collect();
        (x, y)
    }

    #[test]
    fn separable_pair_orders_posteriors() {
        let x = array![[-1.0], [1.0]];
        let m = fit_logistic(x.view(), &[0, 1], 2, &LogisticParams::default()).unwrap();
        let p = m.predict_proba(array![[1.0]].view()).unwrap();
        assert!(p[[0, 1]] > 0.5);
    }

    #[test]
    fn single_class_and_empty_error() {
        let x = array![[0.0], [1.0]];
        assert!(fit_logistic(x.view(), &[1, 1], 2, &LogisticParams::default()).is_err());
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(fit_logistic(empty.view(), &[], 2, &LogisticParams::default()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = random_problem(1, 5, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = objective(x.view(), &y, 3, 0.3, &theta);
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (objective(x.view(), &y, 3, 0.3, &plus).0
                - objective(x.view(), &y, 3, 0.3, &minus).0)
                / (2.0 * h);
            let rel = (fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(1e-8);
            assert!(rel < 1e-5, "param {j}: fd {fd} analytic {}", grad[j]);
        }
    }

    #[test]
    fn absent_class_rows_stay_at_zero() {
        let (x, _) = random_problem(3, 20, 2, 2);
        let y: Vec<usize> = (0..20).map(|i| if i % 2 == 0 { 0 } else { 2 }).collect();
        let m = fit_logistic(x.view(), &y, 3, &LogisticParams::default()).unwrap();
        assert!(m.weights.row(1).iter().all(|&w| w == 0.0));
        assert_eq!(m.bias[1], 0.0);
        let p = m.predict_proba(x.view()).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn row_permutation_does_not_change_fit() {
        let (x, y) = random_problem(4, 40, 3, 2);
        let params = LogisticParams {
            l2: 0.1,
            max_epochs: 300,
            tol: 1e-8,
        };
        let a = fit_logistic(x.view(), &y, 2, &params).unwrap();
        let perm: Vec<usize> = (0..40).rev().collect();
        let xp = x.select(ndarray::Axis(0), &perm);
        let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
        let b = fit_logistic(xp.view(), &yp, 2, &params).unwrap();
        for (u, v) in a.weights.iter().zip(b.weights.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn loss_never_increases() {
        let (x, y) = random_problem(5, 30, 4, 3);
        let params = LogisticParams {
            l2: 0.01,
            max_epochs: 1,
            tol: 0.0,
        };
        let mut prev = f64::INFINITY;
        for epochs in 1..40 {
            let m = fit_logistic(x.view(), &y, 3, &LogisticParams { max_epochs: epochs, ..params }).unwrap();
            let mut theta: Vec<f64> = m.weights.iter().copied().collect();
            theta.extend(&m.bias);
            let (loss, _) = objective(x.view(), &y, 3, 0.01, &theta);
            assert!(loss <= prev + 1e-15);
            prev = loss;
        }
    }

    #[test]
    fn feature_scaling_is_absorbed_by_weights() {
        // Overlapping classes so the unregularized optimum is finite.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 60;
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            rng.gen_range(-1.0..1.0) + if y[i] == 1 { 0.4 } else { -0.4 }
        });
        let params = LogisticParams {
            l2: 1e-12,
            max_epochs: 200_000,
            tol: 1e-11,
        };
        let scale = 2.0;
        let a = fit_logistic(x.view(), &y, 2, &params).unwrap();
        let xs = x.mapv(|v| v * scale);
        let mut b = fit_logistic(xs.view(), &y, 2, &params).unwrap();
        b.weights.mapv_inplace(|w| w * scale);
        let pa = a.predict_proba(x.view()).unwrap();
        let pb = b.predict_proba(x.view()).unwrap();
        for (u, v) in pa.iter().zip(pb.iter()) {
            assert!((u - v).abs() < 1e-8, "{u} vs {v}");
        }
    }

    #[test]
    fn calibrated_fit_produces_normalized_posteriors() {
        let (x, y) = random_problem(7, 50, 3, 2);
        let m = fit_logistic_calibrated(x.view(), &y, 2, &LogisticParams::default()).unwrap();
        assert!(m.temperature > 0.0);
        let p = m.predict_proba(x.view()).unwrap();
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }
}
