use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiversitySnapshot {
    pub mask_jaccard: f64,
    pub numeric_dispersion: f64,
    pub boolean_disagreement: f64,
}

/// Jaccard distance between two bit vectors of equal length.
pub fn jaccard_distance(a: &[bool], b: &[bool]) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    assert!(union > 0, "Jaccard distance of two empty masks");
    1.0 - inter as f64 / union as f64
}

/// Population diversity from per-individual masks, min-max normalized
/// numeric genes and boolean genes.
pub fn diversity(masks: &[Vec<bool>], numeric: &[Vec<f64>], booleans: &[Vec<bool>]) -> DiversitySnapshot {
    DiversitySnapshot {
        mask_jaccard: mean_pairwise(masks, |a, b| jaccard_distance(a, b)),
        numeric_dispersion: centroid_dispersion(numeric),
        boolean_disagreement: mean_pairwise(booleans, |a, b| {
            if a.is_empty() {
                0.0
            } else {
                a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
            }
        }),
    }
}

fn mean_pairwise<T>(items: &[T], dist: impl Fn(&T, &T) -> f64) -> f64 {
    let n = items.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += dist(&items[i], &items[j]);
        }
    }
    total / (n * (n - 1) / 2) as f64
}

fn centroid_dispersion(points: &[Vec<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let dim = points[0].len();
    let mut centroid = vec![0.0; dim];
    for p in points {
        for (c, v) in centroid.iter_mut().zip(p) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= points.len() as f64);
    points
        .iter()
        .map(|p| p.iter().zip(&centroid).map(|(v, c)| (v - c).powi(2)).sum::<f64>().sqrt())
        .sum::<f64>()
        / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_population_is_zero() {
        let m = vec![vec![true, false, true]; 4];
        let x = vec![vec![0.2, 0.7]; 4];
        let b = vec![vec![true, false]; 4];
        assert_eq!(diversity(&m, &x, &b), DiversitySnapshot::default());
    }

    #[test]
    fn disjoint_masks() {
        let m = vec![vec![true, false], vec![false, true]];
        assert_eq!(diversity(&m, &[], &[]).mask_jaccard, 1.0);
    }

    #[test]
    fn corner_points_dispersion() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let d = diversity(&[], &x, &[]).numeric_dispersion;
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn singleton_is_zero() {
        let d = diversity(&[vec![true]], &[vec![0.3]], &[vec![true]]);
        assert_eq!(d, DiversitySnapshot::default());
    }

    proptest! {
        #[test]
        fn bounded(pop in prop::collection::vec((prop::collection::vec(any::<bool>(), 6), prop::collection::vec(0.0f64..=1.0, 3), prop::collection::vec(any::<bool>(), 2)), 2..10)) {
            let masks: Vec<Vec<bool>> = pop.iter().map(|p| { let mut m = p.0.clone(); m[0] = true; m }).collect();
            let num: Vec<Vec<f64>> = pop.iter().map(|p| p.1.clone()).collect();
            let bools: Vec<Vec<bool>> = pop.iter().map(|p| p.2.clone()).collect();
            let d = diversity(&masks, &num, &bools);
            prop_assert!((0.0..=1.0).contains(&d.mask_jaccard));
            prop_assert!((0.0..=1.0).contains(&d.boolean_disagreement));
            prop_assert!(d.numeric_dispersion >= 0.0 && d.numeric_dispersion <= 3f64.sqrt());
        }
    }
}
