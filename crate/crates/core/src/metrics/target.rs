use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetCost {
    pub f_star: f64,
    pub target: f64,
    pub gtt: usize,
    pub ttt: f64,
}

/// First generation whose best-so-far fitness reaches 99% of the final value.
///
/// The target is `F* - 0.01|F*|`, which equals `0.99 F*` for non-negative
/// `F*` and stays below `F*` when it is negative.
pub fn cost_to_target(best_so_far: &[f64], wall_clock_cum: &[f64]) -> Result<TargetCost> {
    if best_so_far.is_empty() {
        return Err(Error::Validation("empty trajectory".into()));
    }
    if best_so_far.len() != wall_clock_cum.len() {
        return Err(Error::LengthMismatch(best_so_far.len(), wall_clock_cum.len()));
    }
    let f_star = *best_so_far.last().expect("nonempty");
    let target = f_star - 0.01 * f_star.abs();
    let gtt = best_so_far
        .iter()
        .position(|&f| f >= target)
        .expect("final value reaches its own target");
    Ok(TargetCost { f_star, target, gtt, ttt: wall_clock_cum[gtt] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_scan_example() {
        let f = [0.5, 0.7, 0.9, 0.905, 0.91];
        let w = [1.0, 2.0, 3.0, 4.0, 5.0];
        let t = cost_to_target(&f, &w).unwrap();
        assert_eq!(t.f_star, 0.91);
        assert!((t.target - 0.9009).abs() < 1e-12);
        assert_eq!(t.gtt, 3);
        assert_eq!(t.ttt, 4.0);
    }

    #[test]
    fn constant_and_single() {
        assert_eq!(cost_to_target(&[0.4; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap().gtt, 0);
        let t = cost_to_target(&[0.3], &[7.5]).unwrap();
        assert_eq!((t.gtt, t.ttt), (0, 7.5));
    }

    #[test]
    fn negative_fitness() {
        let t = cost_to_target(&[-0.5, -0.21, -0.2005, -0.199], &[0.0; 4]).unwrap();
        assert_eq!(t.gtt, 2);
    }

    #[test]
    fn empty_errors() {
        assert!(cost_to_target(&[], &[]).is_err());
    }
}
