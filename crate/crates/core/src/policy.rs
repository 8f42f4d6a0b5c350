//! Pseudo-labeling policy genotype, its threshold schedule, and the
//! variation and repair operators of the policy population.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linear::LogisticParams;
use crate::ssl::AcceptancePolicy;

/// Closed intervals for every policy gene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyDomain {
    pub l2: (f64, f64),
    pub max_epochs: (usize, usize),
    pub tau0: (f64, f64),
    pub delta_tau_max: f64,
    pub tau_min: (f64, f64),
    pub q_max: usize,
    pub gamma: (f64, f64),
    pub t_max: usize,
    /// When false the `calibrate` gene is pinned to `false`.
    pub evolve_calibrate: bool,
    /// Gradient-norm tolerance handed to the base learner.
    pub tol: f64,
}

impl Default for PolicyDomain {
    fn default() -> Self {
        Self {
            l2: (1e-4, 10.0),
            max_epochs: (50, 500),
            tau0: (0.5, 0.99),
            delta_tau_max: 0.1,
            tau_min: (0.5, 0.99),
            q_max: 50,
            gamma: (0.0, 0.5),
            t_max: 20,
            evolve_calibrate: false,
            tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierGenes {
    pub l2: f64,
    pub max_epochs: usize,
    pub calibrate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGenotype {
    pub theta_clf: ClassifierGenes,
    pub tau0: f64,
    pub delta_tau: f64,
    pub tau_min: f64,
    pub q: usize,
    pub gamma: f64,
    pub nu: bool,
    #[serde(rename = "T")]
    pub t: usize,
}

/// Linear decay from `tau0` by `delta_tau` per iteration, floored at `tau_min`.
pub fn threshold_at(tau0: f64, delta_tau: f64, tau_min: f64, t: usize) -> f64 {
    (tau0 - t as f64 * delta_tau).max(tau_min)
}

impl PolicyGenotype {
    pub fn threshold_at(&self, t: usize) -> f64 {
        threshold_at(self.tau0, self.delta_tau, self.tau_min, t)
    }

    pub fn random<R: Rng + ?Sized>(domain: &PolicyDomain, rng: &mut R) -> Self {
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        };
        let log_l2 = uniform(rng, (domain.l2.0.log10(), domain.l2.1.log10()));
        let b = Self {
            theta_clf: ClassifierGenes {
                l2: 10f64.powf(log_l2),
                max_epochs: rng.gen_range(domain.max_epochs.0..=domain.max_epochs.1),
                calibrate: domain.evolve_calibrate && rng.gen_bool(0.5),
            },
            tau0: uniform(rng, domain.tau0),
            delta_tau: uniform(rng, (0.0, domain.delta_tau_max)),
            tau_min: uniform(rng, domain.tau_min),
            q: rng.gen_range(1..=domain.q_max),
            gamma: uniform(rng, domain.gamma),
            nu: rng.gen_bool(0.5),
            t: rng.gen_range(1..=domain.t_max),
        };
        repair_policy(b, domain)
    }

    pub fn is_feasible(&self, domain: &PolicyDomain) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        within(self.theta_clf.l2, domain.l2)
            && (domain.max_epochs.0..=domain.max_epochs.1).contains(&self.theta_clf.max_epochs)
            && within(self.tau0, domain.tau0)
            && within(self.delta_tau, (0.0, domain.delta_tau_max))
            && within(self.tau_min, domain.tau_min)
            && self.tau_min <= self.tau0
            && (1..=domain.q_max).contains(&self.q)
            && within(self.gamma, domain.gamma)
            && (1..=domain.t_max).contains(&self.t)
            && (domain.evolve_calibrate || !self.theta_clf.calibrate)
    }

    pub fn acceptance_policy(&self, domain: &PolicyDomain) -> AcceptancePolicy {
        AcceptancePolicy {
            tau0: self.tau0,
            delta_tau: self.delta_tau,
            tau_min: self.tau_min,
            gamma: self.gamma,
            veto: self.nu,
            per_class_cap: Some(self.q),
            max_iters: self.t,
            learner: LogisticParams {
                l2: self.theta_clf.l2,
                max_epochs: self.theta_clf.max_epochs,
                tol: domain.tol,
            },
            calibrate: self.theta_clf.calibrate,
        }
    }

    /// Numeric genes min-max normalized by their domain (l2 on log scale).
    pub fn normalized_numeric(&self, domain: &PolicyDomain) -> Vec<f64> {
        let norm = |v: f64, (lo, hi): (f64, f64)| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
        vec![
            norm(self.theta_clf.l2.log10(), (domain.l2.0.log10(), domain.l2.1.log10())),
            norm(
                self.theta_clf.max_epochs as f64,
                (domain.max_epochs.0 as f64, domain.max_epochs.1 as f64),
            ),
            norm(self.tau0, domain.tau0),
            norm(self.delta_tau, (0.0, domain.delta_tau_max)),
            norm(self.tau_min, domain.tau_min),
            norm(self.q as f64, (1.0, domain.q_max as f64)),
            norm(self.gamma, domain.gamma),
            norm(self.t as f64, (1.0, domain.t_max as f64)),
        ]
    }

    /// The evolvable boolean genes.
    pub fn boolean_genes(&self, domain: &PolicyDomain) -> Vec<bool> {
        let mut out = vec![self.nu];
        if domain.evolve_calibrate {
            out.push(self.theta_clf.calibrate);
        }
        out
    }
}

/// Additive uniform noise of half-width 10% of the domain width on each
/// continuous gene with probability `p_mut`, ±1 steps on `q` and `T` with
/// probability `p_mut`, boolean flips at `p_flip`, then repair.
pub fn mutate_policy<R: Rng + ?Sized>(
    b: &PolicyGenotype,
    p_mut: f64,
    p_flip: f64,
    domain: &PolicyDomain,
    rng: &mut R,
) -> PolicyGenotype {
    let mut out = b.clone();
    let hit = |rng: &mut R, p: f64| p > 0.0 && rng.gen_bool(p);
    let noise = |rng: &mut R, width: f64| {
        let h = 0.1 * width;
        if h > 0.0 {
            rng.gen_range(-h..=h)
        } else {
            0.0
        }
    };

    if hit(rng, p_mut) {
        let (lo, hi) = (domain.l2.0.log10(), domain.l2.1.log10());
        let v = (out.theta_clf.l2.log10() + noise(rng, hi - lo)).clamp(lo, hi);
        out.theta_clf.l2 = 10f64.powf(v);
    }
    if hit(rng, p_mut) {
        let (lo, hi) = (domain.max_epochs.0 as f64, domain.max_epochs.1 as f64);
        let v = (out.theta_clf.max_epochs as f64 + noise(rng, hi - lo)).clamp(lo, hi);
        out.theta_clf.max_epochs = v.round() as usize;
    }
    if hit(rng, p_mut) {
        out.tau0 = (out.tau0 + noise(rng, domain.tau0.1 - domain.tau0.0)).clamp(domain.tau0.0, domain.tau0.1);
    }
    if hit(rng, p_mut) {
        out.delta_tau = (out.delta_tau + noise(rng, domain.delta_tau_max)).clamp(0.0, domain.delta_tau_max);
    }
    if hit(rng, p_mut) {
        out.tau_min = (out.tau_min + noise(rng, domain.tau_min.1 - domain.tau_min.0))
            .clamp(domain.tau_min.0, domain.tau_min.1);
    }
    if hit(rng, p_mut) {
        out.gamma = (out.gamma + noise(rng, domain.gamma.1 - domain.gamma.0)).clamp(domain.gamma.0, domain.gamma.1);
    }
    for (gene, max) in [(&mut out.q, domain.q_max), (&mut out.t, domain.t_max)] {
        if hit(rng, p_mut) {
            let stepped = if rng.gen_bool(0.5) { *gene + 1 } else { gene.saturating_sub(1) };
            *gene = stepped.clamp(1, max);
        }
    }
    if hit(rng, p_flip) {
        out.nu = !out.nu;
    }
    if domain.evolve_calibrate && hit(rng, p_flip) {
        out.theta_clf.calibrate = !out.theta_clf.calibrate;
    }
    repair_policy(out, domain)
}

fn blend(x1: f64, x2: f64, alpha: f64) -> (f64, f64) {
    if x1 == x2 {
        return (x1, x2);
    }
    let lo = x1.min(x2);
    let hi = x1.max(x2);
    (
        (alpha * x1 + (1.0 - alpha) * x2).clamp(lo, hi),
        ((1.0 - alpha) * x1 + alpha * x2).clamp(lo, hi),
    )
}

/// Arithmetic crossover on continuous genes with one shared `alpha`
/// (or a fresh one per gene when `per_gene_alpha`), 0.5 swaps on discrete
/// and boolean genes, then repair.
pub fn crossover_policy<R: Rng + ?Sized>(
    b1: &PolicyGenotype,
    b2: &PolicyGenotype,
    domain: &PolicyDomain,
    per_gene_alpha: bool,
    rng: &mut R,
) -> (PolicyGenotype, PolicyGenotype) {
    let shared: f64 = rng.gen();
    let mut alphas = [shared; 6];
    if per_gene_alpha {
        for a in alphas.iter_mut() {
            *a = rng.gen();
        }
    }
    let (mut c1, mut c2) = arithmetic_crossover(b1, b2, &alphas);
    for (g1, g2) in [(&mut c1.q, &mut c2.q), (&mut c1.t, &mut c2.t)] {
        if rng.gen_bool(0.5) {
            std::mem::swap(g1, g2);
        }
    }
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut c1.nu, &mut c2.nu);
    }
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut c1.theta_clf.calibrate, &mut c2.theta_clf.calibrate);
    }
    (repair_policy(c1, domain), repair_policy(c2, domain))
}

/// Blends the continuous genes with the given per-gene weights, in the order
/// `l2` (log scale), `max_epochs`, `tau0`, `delta_tau`, `tau_min`, `gamma`.
/// Discrete genes are copied from the respective parent.
pub fn arithmetic_crossover(
    b1: &PolicyGenotype,
    b2: &PolicyGenotype,
    alphas: &[f64; 6],
) -> (PolicyGenotype, PolicyGenotype) {
    let mut c1 = b1.clone();
    let mut c2 = b2.clone();
    if b1.theta_clf.l2 != b2.theta_clf.l2 {
        let (u, v) = blend(b1.theta_clf.l2.log10(), b2.theta_clf.l2.log10(), alphas[0]);
        c1.theta_clf.l2 = 10f64.powf(u);
        c2.theta_clf.l2 = 10f64.powf(v);
    }
    let (u, v) = blend(
        b1.theta_clf.max_epochs as f64,
        b2.theta_clf.max_epochs as f64,
        alphas[1],
    );
    c1.theta_clf.max_epochs = u.round() as usize;
    c2.theta_clf.max_epochs = v.round() as usize;
    (c1.tau0, c2.tau0) = blend(b1.tau0, b2.tau0, alphas[2]);
    (c1.delta_tau, c2.delta_tau) = blend(b1.delta_tau, b2.delta_tau, alphas[3]);
    (c1.tau_min, c2.tau_min) = blend(b1.tau_min, b2.tau_min, alphas[4]);
    (c1.gamma, c2.gamma) = blend(b1.gamma, b2.gamma, alphas[5]);
    (c1, c2)
}

/// Clamps every gene into its domain, then enforces `tau_min <= tau0` and
/// `delta_tau >= 0`. Idempotent.
pub fn repair_policy(mut b: PolicyGenotype, domain: &PolicyDomain) -> PolicyGenotype {
    b.theta_clf.l2 = b.theta_clf.l2.clamp(domain.l2.0, domain.l2.1);
    b.theta_clf.max_epochs = b.theta_clf.max_epochs.clamp(domain.max_epochs.0, domain.max_epochs.1);
    if !domain.evolve_calibrate {
        b.theta_clf.calibrate = false;
    }
    b.tau0 = b.tau0.clamp(domain.tau0.0, domain.tau0.1);
    b.delta_tau = b.delta_tau.clamp(0.0, domain.delta_tau_max);
    b.tau_min = b.tau_min.clamp(domain.tau_min.0, domain.tau_min.1).min(b.tau0);
    b.q = b.q.clamp(1, domain.q_max);
    b.gamma = b.gamma.clamp(domain.gamma.0, domain.gamma.1);
    b.t = b.t.clamp(1, domain.t_max);
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> PolicyGenotype {
        PolicyGenotype {
            theta_clf: ClassifierGenes {
                l2: 0.01,
                max_epochs: 200,
                calibrate: false,
            },
            tau0: 0.9,
            delta_tau: 0.1,
            tau_min: 0.6,
            q: 10,
            gamma: 0.1,
            nu: true,
            t: 5,
        }
    }

    #[test]
    fn schedule_examples() {
        let mut b = sample();
        assert!((b.threshold_at(5) - 0.6).abs() < 1e-15);
        assert_eq!(b.threshold_at(0), 0.9);
        b.delta_tau = 0.0;
        for t in 0..30 {
            assert_eq!(b.threshold_at(t), 0.9);
        }
    }

    #[test]
    fn zero_rates_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = sample();
        assert_eq!(mutate_policy(&b, 0.0, 0.0, &PolicyDomain::default(), &mut rng), b);
    }

    #[test]
    fn mutation_respects_upper_bound() {
        let dom = PolicyDomain::default();
        let mut b = sample();
        b.tau0 = 0.99;
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert!(mutate_policy(&b, 1.0, 1.0, &dom, &mut rng).tau0 <= dom.tau0.1);
        }
    }

    #[test]
    fn tau0_noise_is_centered() {
        let dom = PolicyDomain::default();
        let mut b = sample();
        b.tau0 = 0.745;
        b.tau_min = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let shift: f64 = (0..n)
            .map(|_| mutate_policy(&b, 1.0, 0.0, &dom, &mut rng).tau0 - b.tau0)
            .sum::<f64>()
            / n as f64;
        assert!(shift.abs() < 0.005, "mean shift {shift}");
    }

    #[test]
    fn crossover_of_equal_parents_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = sample();
        let (c1, c2) = crossover_policy(&b, &b, &PolicyDomain::default(), false, &mut rng);
        assert_eq!(c1, b);
        assert_eq!(c2, b);
    }

    #[test]
    fn forced_half_alpha_gives_midpoint() {
        let mut b1 = sample();
        let mut b2 = sample();
        b1.tau0 = 0.7;
        b2.tau0 = 0.9;
        let (c1, c2) = arithmetic_crossover(&b1, &b2, &[0.5; 6]);
        assert!((c1.tau0 - 0.8).abs() < 1e-15);
        assert!((c2.tau0 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn repair_examples() {
        let dom = PolicyDomain::default();
        let mut b = sample();
        b.tau_min = 0.8;
        b.tau0 = 0.6;
        assert_eq!(repair_policy(b.clone(), &dom).tau_min, 0.6);
        b.delta_tau = -0.05;
        assert_eq!(repair_policy(b, &dom).delta_tau, 0.0);
        assert_eq!(repair_policy(sample(), &dom), sample());
    }

    #[test]
    fn json_field_names() {
        let v = serde_json::to_value(sample()).unwrap();
        for key in ["theta_clf", "tau0", "delta_tau", "tau_min", "q", "gamma", "nu", "T"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    fn arb_policy() -> impl Strategy<Value = PolicyGenotype> {
        (
            -6.0f64..2.0,
            0usize..800,
            0.0f64..1.2,
            -0.2f64..0.3,
            0.0f64..1.2,
            0usize..80,
            -0.5f64..1.0,
            any::<bool>(),
            0usize..40,
        )
            .prop_map(|(l2, e, tau0, dt, tmin, q, gamma, nu, t)| PolicyGenotype {
                theta_clf: ClassifierGenes {
                    l2: 10f64.powf(l2),
                    max_epochs: e,
                    calibrate: false,
                },
                tau0,
                delta_tau: dt,
                tau_min: tmin,
                q,
                gamma,
                nu,
                t,
            })
    }

    proptest! {
        #[test]
        fn repair_is_idempotent_and_feasible(b in arb_policy()) {
            let dom = PolicyDomain::default();
            let once = repair_policy(b, &dom);
            prop_assert!(once.is_feasible(&dom));
            prop_assert_eq!(repair_policy(once.clone(), &dom), once);
        }

        #[test]
        fn schedule_is_nonincreasing_and_floored(b in arb_policy(), t in 0usize..50) {
            let b = repair_policy(b, &PolicyDomain::default());
            prop_assert!(b.threshold_at(t + 1) <= b.threshold_at(t));
            prop_assert!(b.threshold_at(t) >= b.tau_min);
        }

        #[test]
        fn crossover_children_stay_between_parents(seed in any::<u64>()) {
            let dom = PolicyDomain::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = PolicyGenotype::random(&dom, &mut rng);
            let b = PolicyGenotype::random(&dom, &mut rng);
            let (c1, c2) = crossover_policy(&a, &b, &dom, false, &mut rng);
            prop_assert!(c1.is_feasible(&dom) && c2.is_feasible(&dom));
            for c in [&c1, &c2] {
                prop_assert!(c.gamma >= a.gamma.min(b.gamma) && c.gamma <= a.gamma.max(b.gamma));
                prop_assert!(c.tau0 >= a.tau0.min(b.tau0) && c.tau0 <= a.tau0.max(b.tau0));
            }
            let m = mutate_policy(&a, 0.7, 0.7, &dom, &mut rng);
            prop_assert!(m.is_feasible(&dom));
        }
    }
}
