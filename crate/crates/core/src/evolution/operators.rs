use rand::seq::index::sample;
use rand::Rng;

/// Draws `size` distinct individuals uniformly and returns the index of the
/// fittest; ties go to the earliest draw.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], size: usize, rng: &mut R) -> usize {
    assert!(size >= 1 && size <= fitness.len(), "tournament size out of range");
    let mut best: Option<usize> = None;
    for i in sample(rng, fitness.len(), size).into_iter() {
        match best {
            Some(b) if fitness[i] <= fitness[b] => {}
            _ => best = Some(i),
        }
    }
    best.expect("nonempty tournament")
}

/// Indices of the `e` fittest individuals, best first; equal fitness values
/// are ordered by a random key.
pub fn elite_indices<R: Rng + ?Sized>(fitness: &[f64], e: usize, rng: &mut R) -> Vec<usize> {
    let keys: Vec<u64> = (0..fitness.len()).map(|_| rng.gen()).collect();
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(keys[a].cmp(&keys[b])));
    order.truncate(e);
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_tournament_returns_best() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = [0.3, 0.9, 0.1, 0.5];
        for _ in 0..50 {
            assert_eq!(tournament_select(&f, 4, &mut rng), 1);
        }
    }

    #[test]
    fn binary_tournament_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = [1.0, 2.0, 3.0, 4.0];
        let mut hits = [0usize; 4];
        let draws = 10_000;
        for _ in 0..draws {
            hits[tournament_select(&f, 2, &mut rng)] += 1;
        }
        // Without replacement the i-th ranked individual wins with
        // probability (i - 1) / 6.
        for (i, &h) in hits.iter().enumerate() {
            let expected = i as f64 / 6.0;
            assert!((h as f64 / draws as f64 - expected).abs() < 0.02, "{hits:?}");
        }
        assert!(hits.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn singleton_tournament_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = [5.0, 1.0, 3.0];
        let mut hits = [0usize; 3];
        for _ in 0..9000 {
            hits[tournament_select(&f, 1, &mut rng)] += 1;
        }
        assert!(hits.iter().all(|&h| (h as i64 - 3000).abs() < 250), "{hits:?}");
    }

    #[test]
    fn elites_are_top_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(elite_indices(&[0.2, 0.8, 0.5, 0.8], 3, &mut rng).len(), 3);
        let e = elite_indices(&[0.2, 0.8, 0.5, 0.1], 2, &mut rng);
        assert_eq!(e, vec![1, 2]);
    }
}
