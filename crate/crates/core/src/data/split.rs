//! Stratified test/validation/probe/pool partitioning and labeled resampling.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Dataset;
use crate::seed::SeedBuilder;
use crate::{Error, Result};

/// Fractions of rows assigned to test, validation and probe; the pool gets
/// the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitProportions {
    pub test: f64,
    pub val: f64,
    pub probe: f64,
}

impl Default for SplitProportions {
    fn default() -> Self {
        Self {
            test: 0.20,
            val: 0.16,
            probe: 0.08,
        }
    }
}

impl SplitProportions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.test, self.val, self.probe];
        if parts.iter().any(|p| !(*p > 0.0 && *p < 1.0)) || parts.iter().sum::<f64>() >= 1.0 {
            return Err(Error::Config(format!(
                "split proportions must be in (0,1) and leave a nonempty pool: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub dataset: String,
    pub test_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub probe_idx: Vec<usize>,
    pub pool_idx: Vec<usize>,
    pub lf: f64,
    pub seed: u64,
}

impl SplitPlan {
    /// Hex digest of the four index lists and the labeled fraction; equal
    /// across methods that share a (dataset, lf, seed) cell.
    pub fn split_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.dataset.as_bytes());
        h.update(self.lf.to_bits().to_le_bytes());
        h.update(self.seed.to_le_bytes());
        for list in [&self.test_idx, &self.val_idx, &self.probe_idx, &self.pool_idx] {
            h.update((list.len() as u64).to_le_bytes());
            for &i in list.iter() {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Rows whose statistics feed standardization (pool and validation).
    pub fn fit_rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.pool_idx.iter().chain(&self.val_idx).copied().collect();
        rows.sort_unstable();
        rows
    }

    pub fn labeled_quota(&self, n_classes: usize) -> usize {
        let target = (self.lf * self.pool_idx.len() as f64).round() as usize;
        target.max(n_classes).min(self.pool_idx.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledResample {
    pub l0_idx: Vec<usize>,
    pub u0_idx: Vec<usize>,
    pub k: usize,
}

pub fn make_split(ds: &Dataset, lf: f64, seed: u64) -> Result<SplitPlan> {
    make_split_with(ds, lf, seed, &SplitProportions::default())
}

/// Largest-remainder allocation of `total` units over classes with ideal
/// shares `ideal`, a floor of one per class and per-class caps.
fn allocate(ideal: &[f64], total: usize, caps: &[usize]) -> Vec<usize> {
    let mut alloc: Vec<usize> = ideal
        .iter()
        .zip(caps)
        .map(|(x, &cap)| (x.floor() as usize).max(1).min(cap))
        .collect();
    let frac = |c: usize| ideal[c] - ideal[c].floor();
    let mut order: Vec<usize> = (0..ideal.len()).collect();
    let assigned: usize = alloc.iter().sum();
    if assigned < total {
        order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
        let mut need = total - assigned;
        while need > 0 {
            let before = need;
            for &c in &order {
                if need > 0 && alloc[c] < caps[c] {
                    alloc[c] += 1;
                    need -= 1;
                }
            }
            if need == before {
                break;
            }
        }
    } else if assigned > total {
        order.sort_by(|&a, &b| frac(a).total_cmp(&frac(b)).then(a.cmp(&b)));
        let mut excess = assigned - total;
        while excess > 0 {
            let before = excess;
            for &c in &order {
                if excess > 0 && alloc[c] > 1 {
                    alloc[c] -= 1;
                    excess -= 1;
                }
            }
            if excess == before {
                break;
            }
        }
    }
    alloc
}

pub fn make_split_with(
    ds: &Dataset,
    lf: f64,
    seed: u64,
    props: &SplitProportions,
) -> Result<SplitPlan> {
    if !(lf > 0.0 && lf <= 1.0) {
        return Err(Error::Config(format!("labeled fraction {lf} outside (0, 1]")));
    }
    props.validate()?;
    let counts = ds.class_counts();
    for (class, &count) in counts.iter().enumerate() {
        if count > 0 && count < 4 {
            return Err(Error::StratificationInfeasible {
                class,
                count,
                required: 4,
            });
        }
    }

    let mut rng = SeedBuilder::new("split")
        .u64(seed)
        .str(&ds.name)
        .f64(lf)
        .rng();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes];
    for (i, &y) in ds.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
    }

    let present: Vec<usize> = (0..ds.n_classes).filter(|&c| counts[c] > 0).collect();
    let n = ds.n_rows() as f64;
    let mut taken = vec![0usize; ds.n_classes];
    let mut roles: Vec<Vec<usize>> = Vec::new();
    let fractions = [props.test, props.val, props.probe];
    for (r, &p) in fractions.iter().enumerate() {
        let later_roles = fractions.len() - r - 1;
        let ideal: Vec<f64> = present.iter().map(|&c| p * counts[c] as f64).collect();
        let caps: Vec<usize> = present
            .iter()
            .map(|&c| counts[c] - taken[c] - later_roles - 1)
            .collect();
        let total = (p * n).round() as usize;
        let alloc = allocate(&ideal, total, &caps);
        let mut idx = Vec::new();
        for (pos, &c) in present.iter().enumerate() {
            idx.extend_from_slice(&by_class[c][taken[c]..taken[c] + alloc[pos]]);
            taken[c] += alloc[pos];
        }
        idx.sort_unstable();
        roles.push(idx);
    }
    let mut pool: Vec<usize> = present
        .iter()
        .flat_map(|&c| by_class[c][taken[c]..].iter().copied())
        .collect();
    pool.sort_unstable();

    let probe_idx = roles.pop().unwrap();
    let val_idx = roles.pop().unwrap();
    let test_idx = roles.pop().unwrap();
    Ok(SplitPlan {
        dataset: ds.name.clone(),
        test_idx,
        val_idx,
        probe_idx,
        pool_idx: pool,
        lf,
        seed,
    })
}

/// Draws the initial labeled set for resample `k`: one sample of every
/// pool-present class first, then the rest of the quota proportionally.
pub fn resample_labeled(plan: &SplitPlan, ds: &Dataset, k: usize) -> LabeledResample {
    let mut rng = SeedBuilder::new("resample")
        .u64(plan.seed)
        .str(&plan.dataset)
        .f64(plan.lf)
        .u64(k as u64)
        .rng();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes];
    for &i in &plan.pool_idx {
        by_class[ds.labels[i]].push(i);
    }
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
    }
    let present: Vec<usize> = (0..ds.n_classes).filter(|&c| !by_class[c].is_empty()).collect();
    let quota = plan.labeled_quota(ds.n_classes).max(present.len());

    let extra = quota - present.len();
    let spare: Vec<usize> = present.iter().map(|&c| by_class[c].len() - 1).collect();
    let spare_total: usize = spare.iter().sum();
    let mut take: Vec<usize> = vec![1; present.len()];
    if extra > 0 && spare_total > 0 {
        let ideal: Vec<f64> = spare
            .iter()
            .map(|&s| extra as f64 * s as f64 / spare_total as f64)
            .collect();
        let mut add: Vec<usize> = ideal.iter().map(|x| x.floor() as usize).collect();
        let mut left = extra - add.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..present.len()).collect();
        order.sort_by(|&a, &b| {
            (ideal[b] - ideal[b].floor())
                .total_cmp(&(ideal[a] - ideal[a].floor()))
                .then(a.cmp(&b))
        });
        while left > 0 {
            let before = left;
            for &p in &order {
                if left > 0 && add[p] < spare[p] {
                    add[p] += 1;
                    left -= 1;
                }
            }
            if left == before {
                break;
            }
        }
        for (t, a) in take.iter_mut().zip(add) {
            *t += a;
        }
    }

    let mut l0: Vec<usize> = present
        .iter()
        .zip(&take)
        .flat_map(|(&c, &t)| by_class[c][..t].iter().copied())
        .collect();
    l0.sort_unstable();
    let mut u0: Vec<usize> = plan
        .pool_idx
        .iter()
        .copied()
        .filter(|i| l0.binary_search(i).is_err())
        .collect();
    u0.sort_unstable();
    LabeledResample {
        l0_idx: l0,
        u0_idx: u0,
        k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy(counts: &[usize]) -> Dataset {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat(c).take(n))
            .collect();
        let n = labels.len();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 3 + j) as f64);
        Dataset::new(
            "toy",
            x,
            labels,
            counts.len(),
            vec!["a".into(), "b".into()],
            (0..counts.len()).map(|c| c.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn proportions_on_1000_rows() {
        let ds = toy(&[500, 500]);
        let plan = make_split(&ds, 0.05, 3).unwrap();
        assert_eq!(plan.test_idx.len(), 200);
        assert_eq!(plan.val_idx.len(), 160);
        assert_eq!(plan.probe_idx.len(), 80);
        assert_eq!(plan.pool_idx.len(), 560);
    }

    #[test]
    fn unbalanced_proportions_hold() {
        let ds = toy(&[713, 200, 87]);
        let plan = make_split(&ds, 0.05, 9).unwrap();
        assert_eq!(plan.test_idx.len(), 200);
        assert_eq!(plan.val_idx.len(), 160);
        assert_eq!(plan.probe_idx.len(), 80);
        assert_eq!(plan.pool_idx.len(), 560);
    }

    #[test]
    fn split_is_deterministic() {
        let ds = toy(&[30, 20]);
        assert_eq!(make_split(&ds, 0.1, 5).unwrap(), make_split(&ds, 0.1, 5).unwrap());
        assert_ne!(
            make_split(&ds, 0.1, 5).unwrap().test_idx,
            make_split(&ds, 0.1, 6).unwrap().test_idx
        );
    }

    #[test]
    fn labeled_quota_formula() {
        let ds = toy(&[500, 500]);
        let plan = make_split(&ds, 0.01, 1).unwrap();
        // max(2, round(0.01 * 560)) = 6
        assert_eq!(plan.labeled_quota(2), 6);
        assert_eq!(resample_labeled(&plan, &ds, 0).l0_idx.len(), 6);
    }

    #[test]
    fn tiny_class_is_infeasible() {
        let ds = toy(&[30, 3]);
        match make_split(&ds, 0.1, 1) {
            Err(Error::StratificationInfeasible { class, count, .. }) => {
                assert_eq!((class, count), (1, 3))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn every_held_out_split_has_every_class() {
        let ds = toy(&[4, 50, 9]);
        let plan = make_split(&ds, 0.1, 2).unwrap();
        for idx in [&plan.test_idx, &plan.val_idx, &plan.probe_idx, &plan.pool_idx] {
            let classes: std::collections::BTreeSet<usize> =
                idx.iter().map(|&i| ds.labels[i]).collect();
            assert_eq!(classes.len(), 3);
        }
    }

    #[test]
    fn resample_streams() {
        let ds = toy(&[300, 300]);
        let plan = make_split(&ds, 0.05, 11).unwrap();
        let a = resample_labeled(&plan, &ds, 0);
        assert_eq!(a, resample_labeled(&plan, &ds, 0));
        let b = resample_labeled(&plan, &ds, 1);
        assert_ne!(a.l0_idx, b.l0_idx);
        assert_eq!(a.l0_idx.len(), b.l0_idx.len());
    }

    #[test]
    fn minority_class_always_labeled() {
        // Pool class counts (500, 60) via 900/108 rows and 0.01 labeling.
        let ds = toy(&[893, 108]);
        for seed in 0..100 {
            let plan = make_split(&ds, 0.01, seed).unwrap();
            let rs = resample_labeled(&plan, &ds, 0);
            assert!(rs.l0_idx.iter().any(|&i| ds.labels[i] == 1), "seed {seed}");
            assert!(rs.l0_idx.iter().any(|&i| ds.labels[i] == 0), "seed {seed}");
        }
    }
}
