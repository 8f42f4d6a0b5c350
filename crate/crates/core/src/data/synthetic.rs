use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Standardizer};
use crate::seed::SeedBuilder;
use crate::Result;

/// Balanced binary mixture of two isotropic Gaussians whose means differ only
/// on the first `informative` coordinates (by `+shift` / `-shift`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoGaussians {
    pub n: usize,
    pub d: usize,
    pub informative: usize,
    pub shift: f64,
    pub seed: u64,
}

impl Default for TwoGaussians {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 10,
            informative: 4,
            shift: 0.5,
            seed: 0,
        }
    }
}

impl TwoGaussians {
    pub fn name(&self) -> String {
        format!(
            "two_gaussians_n{}_d{}_i{}_s{}_seed{}",
            self.n, self.d, self.informative, self.shift, self.seed
        )
    }
}

pub fn two_gaussians(spec: &TwoGaussians) -> Result<Dataset> {
    let mut rng = SeedBuilder::new("two_gaussians").u64(spec.seed).rng();
    let labels: Vec<usize> = (0..spec.n).map(|i| i % 2).collect();
    let mut x = Array2::<f64>::zeros((spec.n, spec.d));
    for (i, &y) in labels.iter().enumerate() {
        let sign = if y == 1 { 1.0 } else { -1.0 };
        for j in 0..spec.d {
            let noise: f64 = rng.sample(StandardNormal);
            x[[i, j]] = noise + if j < spec.informative { sign * spec.shift } else { 0.0 };
        }
    }
    let x = Standardizer::fit(&x, &[]).transform(&x);
    Dataset::new(
        spec.name(),
        x,
        labels,
        2,
        (0..spec.d).map(|j| format!("x{j}")).collect(),
        vec!["0".into(), "1".into()],
    )
}
