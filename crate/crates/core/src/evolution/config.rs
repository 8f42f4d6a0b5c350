use serde::{Deserialize, Serialize};

use super::fitness::FitnessWeights;
use crate::policy::PolicyDomain;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorProbs {
    pub pa_cx: f64,
    pub pa_mut: f64,
    pub pb_cx: f64,
    pub pb_mut: f64,
}

impl OperatorProbs {
    fn check(&self, what: &str) -> Result<()> {
        for (name, p) in [("pa_cx", self.pa_cx), ("pa_mut", self.pa_mut), ("pb_cx", self.pb_cx), ("pb_mut", self.pb_mut)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{what}.{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Settings for both search drivers. CC-SSL reads `n_a`, `n_b`, `r` and
/// `operators`; EA-SSL reads `n_mono` and `mono_operators`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub n_mono: usize,
    pub generations: usize,
    /// Random collaborators per individual, on top of the elitist partner.
    pub r: usize,
    /// Labeled resamples per joint evaluation.
    pub k: usize,
    pub elites: usize,
    pub tournament_size: usize,
    pub operators: OperatorProbs,
    pub mono_operators: OperatorProbs,
    pub weights: FitnessWeights,
    pub policy_domain: PolicyDomain,
    /// Draw one blend weight per policy gene instead of a shared one.
    pub per_gene_alpha: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_a: 6,
            n_b: 6,
            n_mono: 36,
            generations: 50,
            r: 2,
            k: 3,
            elites: 1,
            tournament_size: 2,
            operators: OperatorProbs { pa_cx: 0.85, pa_mut: 0.45, pb_cx: 0.85, pb_mut: 0.35 },
            mono_operators: OperatorProbs { pa_cx: 0.85, pa_mut: 0.35, pb_cx: 0.85, pb_mut: 0.35 },
            weights: FitnessWeights::default(),
            policy_domain: PolicyDomain::default(),
            per_gene_alpha: false,
            seed: 0,
        }
    }
}

impl SearchConfig {
    /// Frozen settings selected by the staged tuning protocol.
    pub fn frozen() -> Self {
        Self::default()
    }

    /// Elite count and tournament size are checked against each driver's
    /// population size when the driver starts.
    pub fn validate_population(&self, name: &str, n: usize) -> Result<()> {
        if self.elites > n {
            return Err(Error::Config(format!("elites = {} exceeds {name} = {n}", self.elites)));
        }
        if self.tournament_size > n {
            return Err(Error::Config(format!("tournament_size = {} exceeds {name} = {n}", self.tournament_size)));
        }
        Ok(())
    }

    /// Collaborations per individual: the elitist partner plus `r`.
    pub fn teams_per_individual(&self) -> usize {
        self.r + 1
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_a", self.n_a),
            ("n_b", self.n_b),
            ("n_mono", self.n_mono),
            ("generations", self.generations),
            ("k", self.k),
            ("elites", self.elites),
            ("tournament_size", self.tournament_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        self.operators.check("operators")?;
        self.mono_operators.check("mono_operators")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_values() {
        let c = SearchConfig::frozen();
        assert_eq!((c.n_a, c.n_b, c.generations), (6, 6, 50));
        assert_eq!(c.teams_per_individual(), 3);
        assert_eq!(c.r, 2);
        assert_eq!(c.operators, OperatorProbs { pa_cx: 0.85, pa_mut: 0.45, pb_cx: 0.85, pb_mut: 0.35 });
        assert_eq!(c.n_mono, 36);
        assert_eq!(c.mono_operators, OperatorProbs { pa_cx: 0.85, pa_mut: 0.35, pb_cx: 0.85, pb_mut: 0.35 });
        assert_eq!(c.weights, FitnessWeights { lambda_std: 0.4, lambda_bias: 0.7, lambda_add: 0.0 });
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_probability() {
        let mut c = SearchConfig::default();
        c.operators.pb_mut = 1.5;
        assert!(c.validate().is_err());
    }
}
