use ndarray::{Array2, ArrayView2, Axis};

use super::{BaselineConfig, BaselineResult};
use crate::data::{Dataset, LabeledResample, SplitPlan};
use crate::linear::argmax_rows;
use crate::metrics::{macro_f1, median};
use crate::{Error, Result};

/// Symmetric weighted adjacency lists.
pub type Graph = Vec<Vec<(usize, f64)>>;

fn sq_dist(x: &ArrayView2<f64>, i: usize, j: usize) -> f64 {
    x.row(i).iter().zip(x.row(j).iter()).map(|(a, b)| (a - b).powi(2)).sum()
}

/// Symmetrized kNN graph with RBF weights. Neighbors tied with the k-th
/// distance are all kept; the bandwidth is the median kNN distance.
pub fn knn_graph(x: ArrayView2<f64>, k: usize) -> Graph {
    let n = x.nrows();
    let mut directed: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut d: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, sq_dist(&x, i, j).sqrt())).collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if d.len() > k && k > 0 {
            let cutoff = d[k - 1].1;
            let keep = d.iter().take_while(|p| p.1 <= cutoff).count();
            d.truncate(keep);
        } else if k == 0 {
            d.clear();
        }
        directed.push(d);
    }
    let all: Vec<f64> = directed.iter().flatten().map(|p| p.1).collect();
    let sigma = if all.is_empty() { 0.0 } else { median(&all) };
    let weight = |dist: f64| {
        if sigma > 0.0 {
            (-dist * dist / (2.0 * sigma * sigma)).exp()
        } else if dist == 0.0 {
            1.0
        } else {
            0.0
        }
    };
    let mut w: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
    for (i, nbrs) in directed.iter().enumerate() {
        for &(j, dist) in nbrs {
            let v = weight(dist);
            if v > 0.0 {
                w[i].insert(j, v);
                w[j].insert(i, v);
            }
        }
    }
    w.into_iter().map(|m| m.into_iter().collect()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadResult {
    /// Row-normalized label scores; unreachable rows are uniform.
    pub distribution: Array2<f64>,
    pub labels: Vec<usize>,
    /// Rows with no path to a labeled node.
    pub unreached: Vec<usize>,
    pub iterations: usize,
}

/// Iterates `F <- alpha S F + (1 - alpha) Y` with `S = D^-1/2 W D^-1/2`.
pub fn spread_labels(
    graph: &Graph,
    seeds: &[(usize, usize)],
    n_classes: usize,
    alpha: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SpreadResult> {
    if seeds.is_empty() {
        return Err(Error::Validation("label spreading needs at least one labeled node".into()));
    }
    let n = graph.len();
    let degree: Vec<f64> = graph.iter().map(|nb| nb.iter().map(|p| p.1).sum()).collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }).collect();
    let mut y = Array2::<f64>::zeros((n, n_classes));
    for &(i, c) in seeds {
        y[[i, c]] = 1.0;
    }
    let mut f = y.clone();
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let mut next = Array2::<f64>::zeros((n, n_classes));
        for i in 0..n {
            for &(j, wij) in &graph[i] {
                let s = wij * inv_sqrt[i] * inv_sqrt[j];
                for c in 0..n_classes {
                    next[[i, c]] += alpha * s * f[[j, c]];
                }
            }
            for c in 0..n_classes {
                next[[i, c]] += (1.0 - alpha) * y[[i, c]];
            }
        }
        let change = (&next - &f).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        f = next;
        if change < tol {
            break;
        }
    }
    let mut unreached = Vec::new();
    for (i, mut row) in f.axis_iter_mut(Axis(0)).enumerate() {
        let total: f64 = row.sum();
        if total > 0.0 {
            row /= total;
        } else {
            row.fill(1.0 / n_classes as f64);
            unreached.push(i);
        }
    }
    Ok(SpreadResult { labels: argmax_rows(&f), distribution: f, unreached, iterations })
}

/// 1-NN assignment of `query` rows to labels of `reference` rows.
fn nearest_labels(x: &Array2<f64>, query: &[usize], reference: &[usize], labels: &[usize]) -> Vec<usize> {
    let xv = x.view();
    query
        .iter()
        .map(|&q| {
            let mut best = (f64::INFINITY, 0usize);
            for (pos, &r) in reference.iter().enumerate() {
                let d = sq_dist(&xv, q, r);
                if d < best.0 {
                    best = (d, labels[pos]);
                }
            }
            best.1
        })
        .collect()
}

/// Transductive label spreading over the labeled, unlabeled and test rows.
/// Validation rows, and test rows when `ls_inductive_test` is set, take the
/// label of their nearest transduced neighbor.
pub fn run_label_spreading(
    ds: &Dataset,
    plan: &SplitPlan,
    rs: &LabeledResample,
    cfg: &BaselineConfig,
) -> Result<BaselineResult> {
    let mut nodes: Vec<usize> = rs.l0_idx.iter().chain(&rs.u0_idx).copied().collect();
    let pool_len = nodes.len();
    if !cfg.ls_inductive_test {
        nodes.extend(&plan.test_idx);
    }
    let x = ds.features.select(Axis(0), &nodes);
    let graph = knn_graph(x.view(), cfg.ls_neighbors);
    let seeds: Vec<(usize, usize)> = (0..rs.l0_idx.len()).map(|i| (i, ds.labels[rs.l0_idx[i]])).collect();
    let spread = spread_labels(&graph, &seeds, ds.n_classes, cfg.ls_alpha, cfg.ls_max_iter, 1e-6)?;

    let pool_rows = &nodes[..pool_len];
    let pool_labels = &spread.labels[..pool_len];
    let test_pred = if cfg.ls_inductive_test {
        nearest_labels(&ds.features, &plan.test_idx, pool_rows, pool_labels)
    } else {
        spread.labels[pool_len..].to_vec()
    };
    let val_pred = nearest_labels(&ds.features, &plan.val_idx, pool_rows, pool_labels);
    let warning = (!spread.unreached.is_empty())
        .then(|| format!("{} nodes unreachable from labeled data", spread.unreached.len()));
    Ok(BaselineResult {
        test: macro_f1(&ds.labels_of(&plan.test_idx), &test_pred, ds.n_classes)?,
        val_macro_f1: macro_f1(&ds.labels_of(&plan.val_idx), &val_pred, ds.n_classes)?.macro_f1,
        probe_drop: None,
        pseudo_added: rs.u0_idx.len(),
        warning,
    })
}
