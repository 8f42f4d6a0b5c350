//! View-builder genotype, its feature-space transforms, and the variation
//! and repair operators of the view population.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed::SeedBuilder;
use crate::{Error, Result};

/// Gene domains for view builders over a `d`-column feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewDomain {
    pub d: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub b_max: usize,
}

impl ViewDomain {
    /// Defaults: at least two selected columns, projections of 2..=min(16, d)
    /// dimensions, up to 10 bins.
    pub fn for_features(d: usize) -> Result<Self> {
        Self::new(d, 2, d.min(16), 10)
    }

    pub fn new(d: usize, k_min: usize, k_max: usize, b_max: usize) -> Result<Self> {
        if k_min > d {
            return Err(Error::Config(format!(
                "minimum mask size {k_min} exceeds feature count {d}"
            )));
        }
        if k_max < 2 {
            return Err(Error::Config(format!("projection dimension bound {k_max} < 2")));
        }
        Ok(Self { d, k_min, k_max, b_max })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewGenotype {
    pub m1: Vec<bool>,
    pub m2: Vec<bool>,
    pub p1: bool,
    pub p2: bool,
    pub k1: usize,
    pub k2: usize,
    #[serde(rename = "B1")]
    pub b1: usize,
    #[serde(rename = "B2")]
    pub b2: usize,
    pub proj_seed: u64,
}

impl ViewGenotype {
    /// Both views select every column, no projection, no binning.
    pub fn identity(domain: &ViewDomain) -> Self {
        Self {
            m1: vec![true; domain.d],
            m2: vec![true; domain.d],
            p1: false,
            p2: false,
            k1: 2,
            k2: 2,
            b1: 0,
            b2: 0,
            proj_seed: 0,
        }
    }

    /// Bernoulli(0.5) masks, uniform integer genes, fair-coin flags, then repair.
    pub fn random<R: Rng + ?Sized>(domain: &ViewDomain, rng: &mut R) -> Self {
        let g = Self {
            m1: (0..domain.d).map(|_| rng.gen_bool(0.5)).collect(),
            m2: (0..domain.d).map(|_| rng.gen_bool(0.5)).collect(),
            p1: rng.gen_bool(0.5),
            p2: rng.gen_bool(0.5),
            k1: rng.gen_range(2..=domain.k_max),
            k2: rng.gen_range(2..=domain.k_max),
            b1: rng.gen_range(0..=domain.b_max),
            b2: rng.gen_range(0..=domain.b_max),
            proj_seed: rng.gen(),
        };
        repair_view(g, domain, rng)
    }

    pub fn is_feasible(&self, domain: &ViewDomain) -> bool {
        let ok_mask = |m: &[bool]| m.len() == domain.d && popcount(m) >= domain.k_min;
        ok_mask(&self.m1)
            && ok_mask(&self.m2)
            && (2..=domain.k_max).contains(&self.k1)
            && (2..=domain.k_max).contains(&self.k2)
            && self.b1 <= domain.b_max
            && self.b2 <= domain.b_max
    }
}

pub(crate) fn popcount(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

/// One view's fitted transform: column selection, optional random
/// projection, optional equal-width discretization to bin midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTransform {
    pub columns: Vec<usize>,
    /// `k x columns.len()`.
    pub projection: Option<Array2<f64>>,
    /// Per output column `(min, max)` and bin count.
    pub bins: Option<(Vec<(f64, f64)>, usize)>,
}

impl ViewTransform {
    pub fn output_dim(&self) -> usize {
        match &self.projection {
            Some(p) => p.nrows(),
            None => self.columns.len(),
        }
    }

    fn project(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let selected = x.select(Axis(1), &self.columns);
        match &self.projection {
            Some(p) => selected.dot(&p.t()),
            None => selected,
        }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if let Some(&max_col) = self.columns.iter().max() {
            if max_col >= x.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: max_col + 1,
                    got: x.ncols(),
                });
            }
        }
        let mut out = self.project(x);
        if let Some((ranges, n_bins)) = &self.bins {
            for (mut col, &(lo, hi)) in out.columns_mut().into_iter().zip(ranges) {
                let width = (hi - lo) / *n_bins as f64;
                col.mapv_inplace(|v| bin_midpoint(v, lo, width, *n_bins));
            }
        }
        Ok(out)
    }
}

fn bin_midpoint(v: f64, lo: f64, width: f64, n_bins: usize) -> f64 {
    if width <= 0.0 {
        return lo;
    }
    let idx = ((v - lo) / width).floor();
    let idx = idx.clamp(0.0, (n_bins - 1) as f64);
    lo + (idx + 0.5) * width
}

fn build_one(
    mask: &[bool],
    project: bool,
    k: usize,
    bins: usize,
    proj_seed: u64,
    view: u64,
    x_fit: ArrayView2<f64>,
) -> ViewTransform {
    let columns: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter_map(|(j, &on)| on.then_some(j))
        .collect();
    let projection = project.then(|| {
        let mut rng = SeedBuilder::new("projection").u64(proj_seed).u64(view).rng();
        let scale = 1.0 / (k as f64).sqrt();
        Array2::from_shape_simple_fn((k, columns.len()), || {
            let z: f64 = rng.sample(StandardNormal);
            z * scale
        })
    });
    let mut t = ViewTransform {
        columns,
        projection,
        bins: None,
    };
    if bins >= 2 {
        let fitted = t.project(x_fit);
        let ranges = fitted
            .columns()
            .into_iter()
            .map(|c| {
                c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
            })
            .collect();
        t.bins = Some((ranges, bins));
    }
    t
}

/// Builds both view transforms; bin ranges are fitted on `x_fit`.
pub fn build_views(g: &ViewGenotype, x_fit: ArrayView2<f64>) -> Result<(ViewTransform, ViewTransform)> {
    if x_fit.nrows() == 0 {
        return Err(Error::Validation("empty fit matrix for view construction".into()));
    }
    if g.m1.len() != x_fit.ncols() || g.m2.len() != x_fit.ncols() {
        return Err(Error::DimensionMismatch {
            expected: g.m1.len(),
            got: x_fit.ncols(),
        });
    }
    if popcount(&g.m1) == 0 || popcount(&g.m2) == 0 {
        return Err(Error::Config("empty view mask; genotype must be repaired first".into()));
    }
    Ok((
        build_one(&g.m1, g.p1, g.k1, g.b1, g.proj_seed, 1, x_fit),
        build_one(&g.m2, g.p2, g.k2, g.b2, g.proj_seed, 2, x_fit),
    ))
}

fn step_integer<R: Rng + ?Sized>(v: usize, lo: usize, hi: usize, rng: &mut R) -> usize {
    let stepped = if rng.gen_bool(0.5) {
        v.saturating_add(1)
    } else {
        v.saturating_sub(1)
    };
    stepped.clamp(lo, hi)
}

/// Bit-flip mask mutation at `p_bit`, ±1 integer steps and boolean flips at
/// `p_flip`, followed by repair.
pub fn mutate_view<R: Rng + ?Sized>(
    g: &ViewGenotype,
    p_bit: f64,
    p_flip: f64,
    domain: &ViewDomain,
    rng: &mut R,
) -> ViewGenotype {
    let mut out = g.clone();
    for mask in [&mut out.m1, &mut out.m2] {
        for bit in mask.iter_mut() {
            if p_bit > 0.0 && rng.gen_bool(p_bit) {
                *bit = !*bit;
            }
        }
    }
    let hit = |rng: &mut R| p_flip > 0.0 && rng.gen_bool(p_flip);
    if hit(rng) {
        out.p1 = !out.p1;
    }
    if hit(rng) {
        out.p2 = !out.p2;
    }
    if hit(rng) {
        out.k1 = step_integer(out.k1, 2, domain.k_max, rng);
    }
    if hit(rng) {
        out.k2 = step_integer(out.k2, 2, domain.k_max, rng);
    }
    if hit(rng) {
        out.b1 = step_integer(out.b1, 0, domain.b_max, rng);
    }
    if hit(rng) {
        out.b2 = step_integer(out.b2, 0, domain.b_max, rng);
    }
    repair_view(out, domain, rng)
}

/// Uniform crossover: every mask bit and every scalar gene is swapped
/// between the children with probability 0.5.
pub fn crossover_view<R: Rng + ?Sized>(
    g1: &ViewGenotype,
    g2: &ViewGenotype,
    domain: &ViewDomain,
    rng: &mut R,
) -> (ViewGenotype, ViewGenotype) {
    let mut a = g1.clone();
    let mut b = g2.clone();
    for (ma, mb) in [(&mut a.m1, &mut b.m1), (&mut a.m2, &mut b.m2)] {
        for (x, y) in ma.iter_mut().zip(mb.iter_mut()) {
            if rng.gen_bool(0.5) {
                std::mem::swap(x, y);
            }
        }
    }
    macro_rules! swap_gene {
        ($($field:ident),*) => {$(
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut a.$field, &mut b.$field);
            }
        )*};
    }
    swap_gene!(p1, p2, k1, k2, b1, b2, proj_seed);
    (repair_view(a, domain, rng), repair_view(b, domain, rng))
}

/// Activates random zero bits until each mask holds `k_min` ones and clamps
/// the integer genes. Feasible input is returned unchanged.
pub fn repair_view<R: Rng + ?Sized>(mut g: ViewGenotype, domain: &ViewDomain, rng: &mut R) -> ViewGenotype {
    for mask in [&mut g.m1, &mut g.m2] {
        mask.resize(domain.d, false);
        let mut ones = popcount(mask);
        while ones < domain.k_min {
            let zeros: Vec<usize> = mask
                .iter()
                .enumerate()
                .filter_map(|(j, &on)| (!on).then_some(j))
                .collect();
            let pick = zeros[rng.gen_range(0..zeros.len())];
            mask[pick] = true;
            ones += 1;
        }
    }
    g.k1 = g.k1.clamp(2, domain.k_max);
    g.k2 = g.k2.clamp(2, domain.k_max);
    g.b1 = g.b1.min(domain.b_max);
    g.b2 = g.b2.min(domain.b_max);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn domain(d: usize) -> ViewDomain {
        ViewDomain::for_features(d).unwrap()
    }

    #[test]
    fn identity_view_selects_columns() {
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let g = ViewGenotype::identity(&domain(3));
        let (v1, _) = build_views(&g, x.view()).unwrap();
        assert_eq!(v1.apply(x.view()).unwrap(), x);
    }

    #[test]
    fn projection_has_k_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_shape_fn((5, 10), |(i, j)| (i + j) as f64);
        let mut g = ViewGenotype::identity(&domain(10));
        g.p1 = true;
        g.k1 = 2;
        let (v1, v2) = build_views(&g, x.view()).unwrap();
        assert_eq!(v1.apply(x.view()).unwrap().ncols(), 2);
        assert_eq!(v2.apply(x.view()).unwrap().ncols(), 10);
        let _ = &mut rng;
    }

    #[test]
    fn two_bins_map_to_midpoints() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0]];
        let mut g = ViewGenotype::identity(&domain(2));
        g.b1 = 2;
        let (v1, _) = build_views(&g, x.view()).unwrap();
        let out = v1.apply(x.view()).unwrap();
        let col: Vec<f64> = out.column(0).to_vec();
        assert_eq!(col, vec![1.0, 1.0, 3.0, 3.0, 3.0]);
        // Constant column collapses to its value.
        assert!(out.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_rates_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = domain(8);
        let g = ViewGenotype::random(&d, &mut rng);
        assert_eq!(mutate_view(&g, 0.0, 0.0, &d, &mut rng), g);
    }

    #[test]
    fn full_bit_flip_inverts_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = ViewDomain::new(4, 0, 4, 10).unwrap();
        let mut g = ViewGenotype::identity(&d);
        g.m1 = vec![true, false, true, false];
        let out = mutate_view(&g, 1.0, 0.0, &d, &mut rng);
        assert_eq!(out.m1, vec![false, true, false, true]);
    }

    #[test]
    fn k_at_upper_bound_stays_clamped() {
        let d = domain(5);
        let mut g = ViewGenotype::identity(&d);
        g.k1 = d.k_max;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = mutate_view(&g, 0.0, 1.0, &d, &mut rng);
            assert!(out.k1 <= d.k_max);
        }
    }

    #[test]
    fn repair_fills_empty_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = ViewDomain::new(10, 3, 10, 10).unwrap();
        let mut g = ViewGenotype::identity(&d);
        g.m1 = vec![false; 10];
        g.k1 = d.k_max + 5;
        let out = repair_view(g, &d, &mut rng);
        assert_eq!(popcount(&out.m1), 3);
        assert_eq!(out.k1, d.k_max);
    }

    #[test]
    fn k_min_above_d_is_config_error() {
        assert!(ViewDomain::new(3, 4, 3, 10).is_err());
    }

    #[test]
    fn crossover_of_equal_parents_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = domain(6);
        let g = ViewGenotype::random(&d, &mut rng);
        let (a, b) = crossover_view(&g, &g, &d, &mut rng);
        assert_eq!(a, g);
        assert_eq!(b, g);
    }

    #[test]
    fn crossover_swap_frequency_is_one_half() {
        let d = ViewDomain::new(4, 0, 4, 10).unwrap();
        let mut g1 = ViewGenotype::identity(&d);
        let mut g2 = ViewGenotype::identity(&d);
        g1.m1 = vec![true; 4];
        g2.m1 = vec![false; 4];
        g1.k1 = 2;
        g2.k1 = 4;
        g1.p1 = false;
        g2.p1 = true;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 10_000;
        let (mut bit_swaps, mut k_swaps, mut p_swaps) = (0, 0, 0);
        for _ in 0..trials {
            let (a, _) = crossover_view(&g1, &g2, &d, &mut rng);
            bit_swaps += usize::from(!a.m1[0]);
            k_swaps += usize::from(a.k1 == 4);
            p_swaps += usize::from(a.p1);
        }
        for count in [bit_swaps, k_swaps, p_swaps] {
            let freq = count as f64 / trials as f64;
            assert!((freq - 0.5).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn projection_roughly_preserves_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Array2::from_shape_simple_fn((1000, 12), || rng.sample::<f64, _>(StandardNormal));
        let mut g = ViewGenotype::identity(&domain(12));
        g.p1 = true;
        g.k1 = 12;
        g.proj_seed = 77;
        let (v1, _) = build_views(&g, x.view()).unwrap();
        let y = v1.apply(x.view()).unwrap();
        let msq = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.dot(&r)).sum::<f64>() / m.nrows() as f64;
        let ratio = msq(&y) / msq(&x);
        assert!((ratio - 1.0).abs() < 0.25, "ratio {ratio}");
    }

    #[test]
    fn genotype_json_field_names() {
        let g = ViewGenotype::identity(&domain(2));
        let v = serde_json::to_value(&g).unwrap();
        for key in ["m1", "m2", "p1", "p2", "k1", "k2", "B1", "B2", "proj_seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    proptest! {
        #[test]
        fn operators_preserve_feasibility(seed in any::<u64>(), d in 2usize..24, p_bit in 0.0f64..1.0, p_flip in 0.0f64..1.0) {
            let dom = domain(d);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = ViewGenotype::random(&dom, &mut rng);
            let b = ViewGenotype::random(&dom, &mut rng);
            prop_assert!(a.is_feasible(&dom));
            let m = mutate_view(&a, p_bit, p_flip, &dom, &mut rng);
            prop_assert!(m.is_feasible(&dom));
            let (c1, c2) = crossover_view(&a, &b, &dom, &mut rng);
            prop_assert!(c1.is_feasible(&dom) && c2.is_feasible(&dom));
        }

        #[test]
        fn build_views_is_deterministic(seed in any::<u64>()) {
            let dom = domain(6);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = ViewGenotype::random(&dom, &mut rng);
            let x = Array2::from_shape_simple_fn((20, 6), || rng.gen_range(-1.0..1.0));
            let (a1, a2) = build_views(&g, x.view()).unwrap();
            let (b1, b2) = build_views(&g, x.view()).unwrap();
            prop_assert_eq!(a1.apply(x.view()).unwrap(), b1.apply(x.view()).unwrap());
            prop_assert_eq!(a2.apply(x.view()).unwrap(), b2.apply(x.view()).unwrap());
        }
    }
}
