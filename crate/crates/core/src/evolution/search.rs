use std::collections::HashMap;
use std::time::Instant;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{OperatorProbs, SearchConfig};
use super::fitness::{EvalContext, EvalRecord};
use super::operators::{elite_indices, tournament_select};
use crate::exec::Executor;
use crate::metrics::diversity;
use crate::policy::{crossover_policy, mutate_policy, PolicyDomain, PolicyGenotype};
use crate::seed::SeedBuilder;
use crate::views::{crossover_view, mutate_view, ViewDomain, ViewGenotype};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchDiversity {
    #[serde(rename = "maskJaccard")]
    pub mask_jaccard: f64,
    #[serde(rename = "policyNumeric")]
    pub policy_numeric: f64,
    #[serde(rename = "policyBoolean")]
    pub policy_boolean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSnapshot {
    pub a: ViewGenotype,
    pub b: PolicyGenotype,
    #[serde(rename = "F")]
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub gen: usize,
    #[serde(rename = "best_so_far_F")]
    pub best_so_far_f: f64,
    /// Calls after initialization; generation 0 is the initial population.
    pub fitness_calls_cum: u64,
    pub wall_clock_cum: f64,
    pub diversity: SearchDiversity,
    pub best_pair: PairSnapshot,
}

/// An evaluated population. For EA-SSL the two genotype lists are the
/// segments of one joint population and share one fitness vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub gen: usize,
    pub views: Vec<ViewGenotype>,
    pub view_fitness: Vec<f64>,
    pub policies: Vec<PolicyGenotype>,
    pub policy_fitness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: EvalRecord,
    pub log: Vec<GenerationLog>,
    pub init_calls: u64,
    pub search_calls: u64,
    /// Filled only when history recording is requested.
    pub history: Vec<PopulationSnapshot>,
    pub records: Vec<EvalRecord>,
}

struct Tracker<'c, 'd> {
    ctx: &'c EvalContext<'d>,
    exec: &'c Executor,
    start: Instant,
    best: Option<EvalRecord>,
    log: Vec<GenerationLog>,
    calls_at_init: u64,
    keep_history: bool,
    history: Vec<PopulationSnapshot>,
    records: Vec<EvalRecord>,
}

impl<'c, 'd> Tracker<'c, 'd> {
    fn new(ctx: &'c EvalContext<'d>, exec: &'c Executor, keep_history: bool) -> Self {
        Self {
            ctx,
            exec,
            start: Instant::now(),
            best: None,
            log: Vec::new(),
            calls_at_init: 0,
            keep_history,
            history: Vec::new(),
            records: Vec::new(),
        }
    }

    /// Evaluates pairs concurrently; results come back in input order.
    /// Repeated pairs in one batch are computed once and charged each time.
    fn evaluate(&mut self, pairs: &[(ViewGenotype, PolicyGenotype)]) -> Result<Vec<EvalRecord>> {
        let mut first: HashMap<String, usize> = HashMap::new();
        let mut unique = Vec::new();
        let mut slot = Vec::with_capacity(pairs.len());
        for p in pairs {
            let key = serde_json::to_string(p)?;
            let next = unique.len();
            let idx = *first.entry(key).or_insert_with(|| {
                unique.push(p.clone());
                next
            });
            slot.push(idx);
        }
        let ctx = self.ctx;
        let computed: Vec<EvalRecord> = self
            .exec
            .map(&unique, |(a, b)| ctx.evaluate_joint(a, b))
            .into_iter()
            .collect::<Result<_>>()?;
        let mut seen = vec![false; unique.len()];
        let mut out = Vec::with_capacity(pairs.len());
        for (p, &idx) in pairs.iter().zip(&slot) {
            if seen[idx] {
                out.push(ctx.evaluate_joint(&p.0, &p.1)?);
            } else {
                seen[idx] = true;
                out.push(computed[idx].clone());
            }
        }
        for r in &out {
            if self.best.as_ref().map_or(true, |b| r.f > b.f) {
                self.best = Some(r.clone());
            }
        }
        if self.keep_history {
            self.records.extend(out.iter().cloned());
        }
        Ok(out)
    }

    fn mark_init_done(&mut self) {
        self.calls_at_init = self.ctx.fitness_calls();
    }

    fn record(&mut self, gen: usize, diversity: SearchDiversity, snapshot: PopulationSnapshot) {
        let best = self.best.as_ref().expect("population evaluated");
        self.log.push(GenerationLog {
            gen,
            best_so_far_f: best.f,
            fitness_calls_cum: self.ctx.fitness_calls() - self.calls_at_init,
            wall_clock_cum: self.start.elapsed().as_secs_f64(),
            diversity,
            best_pair: PairSnapshot { a: best.a.clone(), b: best.b.clone(), f: best.f },
        });
        if self.keep_history {
            self.history.push(snapshot);
        }
    }

    fn finish(self) -> SearchOutcome {
        let total = self.ctx.fitness_calls();
        SearchOutcome {
            best: self.best.expect("population evaluated"),
            log: self.log,
            init_calls: self.calls_at_init,
            search_calls: total - self.calls_at_init,
            history: self.history,
            records: self.records,
        }
    }
}

fn search_diversity(views: &[ViewGenotype], policies: &[PolicyGenotype], domain: &PolicyDomain) -> SearchDiversity {
    let masks: Vec<Vec<bool>> = views.iter().map(|g| g.m1.iter().chain(&g.m2).copied().collect()).collect();
    let numeric: Vec<Vec<f64>> = policies.iter().map(|b| b.normalized_numeric(domain)).collect();
    let booleans: Vec<Vec<bool>> = policies.iter().map(|b| b.boolean_genes(domain)).collect();
    let d = diversity(&masks, &numeric, &booleans);
    SearchDiversity {
        mask_jaccard: d.mask_jaccard,
        policy_numeric: d.numeric_dispersion,
        policy_boolean: d.boolean_disagreement,
    }
}

fn run_rng(tag: &str, ctx: &EvalContext, cfg: &SearchConfig) -> ChaCha8Rng {
    SeedBuilder::new(tag)
        .u64(cfg.seed)
        .str(&ctx.plan.dataset)
        .f64(ctx.plan.lf)
        .u64(ctx.plan.seed)
        .rng()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Elites first, then offspring of tournament-selected parents.
fn next_generation<G: Clone, R: Rng>(
    pop: &[G],
    fitness: &[f64],
    cfg: &SearchConfig,
    rng: &mut R,
    mut breed: impl FnMut(&G, &G, &mut R) -> (G, G),
) -> (Vec<G>, Vec<f64>) {
    let n = pop.len();
    let tsize = cfg.tournament_size.min(n);
    let mut next: Vec<G> = Vec::with_capacity(n);
    let mut next_fit = Vec::with_capacity(n);
    for i in elite_indices(fitness, cfg.elites.min(n), rng) {
        next.push(pop[i].clone());
        next_fit.push(fitness[i]);
    }
    while next.len() < n {
        let p1 = tournament_select(fitness, tsize, rng);
        let p2 = tournament_select(fitness, tsize, rng);
        let (c1, c2) = breed(&pop[p1], &pop[p2], rng);
        next.push(c1);
        next_fit.push(f64::NEG_INFINITY);
        if next.len() < n {
            next.push(c2);
            next_fit.push(f64::NEG_INFINITY);
        }
    }
    (next, next_fit)
}

fn breed_views<R: Rng>(
    g1: &ViewGenotype,
    g2: &ViewGenotype,
    ops: &OperatorProbs,
    domain: &ViewDomain,
    rng: &mut R,
) -> (ViewGenotype, ViewGenotype) {
    let (c1, c2) = if rng.gen_bool(ops.pa_cx) {
        crossover_view(g1, g2, domain, rng)
    } else {
        (g1.clone(), g2.clone())
    };
    let p_bit = ops.pa_mut / domain.d as f64;
    (
        mutate_view(&c1, p_bit, ops.pa_mut, domain, rng),
        mutate_view(&c2, p_bit, ops.pa_mut, domain, rng),
    )
}

fn breed_policies<R: Rng>(
    b1: &PolicyGenotype,
    b2: &PolicyGenotype,
    ops: &OperatorProbs,
    domain: &PolicyDomain,
    per_gene_alpha: bool,
    rng: &mut R,
) -> (PolicyGenotype, PolicyGenotype) {
    let (c1, c2) = if rng.gen_bool(ops.pb_cx) {
        crossover_policy(b1, b2, domain, per_gene_alpha, rng)
    } else {
        (b1.clone(), b2.clone())
    };
    (
        mutate_policy(&c1, ops.pb_mut, ops.pb_mut, domain, rng),
        mutate_policy(&c2, ops.pb_mut, ops.pb_mut, domain, rng),
    )
}

/// `r` distinct indices other than `exclude`, topped up with replacement
/// when the population is too small.
fn draw_partners<R: Rng>(n: usize, exclude: usize, r: usize, rng: &mut R) -> Vec<usize> {
    let others: Vec<usize> = (0..n).filter(|&i| i != exclude).collect();
    let take = r.min(others.len());
    let mut out: Vec<usize> = sample(rng, others.len(), take).into_iter().map(|i| others[i]).collect();
    while out.len() < r {
        out.push(rng.gen_range(0..n));
    }
    out
}

/// Cooperative coevolution of a view population and a policy population.
///
/// Each generation evaluates every individual with the opposite
/// population's current best plus `r` random partners, credits it with the
/// best joint fitness, then evolves both populations independently. The
/// fitness-call counter of `ctx` supplies the budget accounting.
pub fn run_ccssl(ctx: &EvalContext, cfg: &SearchConfig, exec: &Executor, keep_history: bool) -> Result<SearchOutcome> {
    cfg.validate()?;
    cfg.validate_population("n_a", cfg.n_a)?;
    cfg.validate_population("n_b", cfg.n_b)?;
    let mut rng = run_rng("ccssl", ctx, cfg);
    let vdom = ctx.view_domain;
    let pdom = ctx.policy_domain;
    let mut pop_a: Vec<ViewGenotype> = (0..cfg.n_a).map(|_| ViewGenotype::random(&vdom, &mut rng)).collect();
    let mut pop_b: Vec<PolicyGenotype> = (0..cfg.n_b).map(|_| PolicyGenotype::random(&pdom, &mut rng)).collect();
    let mut tracker = Tracker::new(ctx, exec, keep_history);

    let n_init = cfg.n_a.max(cfg.n_b);
    let init_pairs: Vec<_> = (0..n_init)
        .map(|i| (pop_a[i % cfg.n_a].clone(), pop_b[i % cfg.n_b].clone()))
        .collect();
    let init = tracker.evaluate(&init_pairs)?;
    let mut fit_a = vec![f64::NEG_INFINITY; cfg.n_a];
    let mut fit_b = vec![f64::NEG_INFINITY; cfg.n_b];
    for (i, r) in init.iter().enumerate() {
        fit_a[i % cfg.n_a] = fit_a[i % cfg.n_a].max(r.f);
        fit_b[i % cfg.n_b] = fit_b[i % cfg.n_b].max(r.f);
    }
    tracker.mark_init_done();
    let snapshot = |g, a: &[ViewGenotype], fa: &[f64], b: &[PolicyGenotype], fb: &[f64]| PopulationSnapshot {
        gen: g,
        views: a.to_vec(),
        view_fitness: fa.to_vec(),
        policies: b.to_vec(),
        policy_fitness: fb.to_vec(),
    };
    tracker.record(
        0,
        search_diversity(&pop_a, &pop_b, &pdom),
        snapshot(0, &pop_a, &fit_a, &pop_b, &fit_b),
    );

    for gen in 1..=cfg.generations {
        let best_b = argmax(&fit_b);
        let best_a = argmax(&fit_a);
        let teams = cfg.r + 1;
        let mut pairs = Vec::with_capacity((cfg.n_a + cfg.n_b) * teams);
        for a in &pop_a {
            let mut partners = vec![best_b];
            partners.extend(draw_partners(cfg.n_b, best_b, cfg.r, &mut rng));
            pairs.extend(partners.into_iter().map(|j| (a.clone(), pop_b[j].clone())));
        }
        for b in &pop_b {
            let mut partners = vec![best_a];
            partners.extend(draw_partners(cfg.n_a, best_a, cfg.r, &mut rng));
            pairs.extend(partners.into_iter().map(|i| (pop_a[i].clone(), b.clone())));
        }
        let records = tracker.evaluate(&pairs)?;
        let credit = |chunk: &[EvalRecord]| chunk.iter().map(|r| r.f).fold(f64::NEG_INFINITY, f64::max);
        let (rec_a, rec_b) = records.split_at(cfg.n_a * teams);
        fit_a = rec_a.chunks(teams).map(credit).collect();
        fit_b = rec_b.chunks(teams).map(credit).collect();
        tracker.record(
            gen,
            search_diversity(&pop_a, &pop_b, &pdom),
            snapshot(gen, &pop_a, &fit_a, &pop_b, &fit_b),
        );

        let ops = cfg.operators;
        let (next_a, next_fa) = next_generation(&pop_a, &fit_a, cfg, &mut rng, |g1, g2, rng| {
            breed_views(g1, g2, &ops, &vdom, rng)
        });
        let (next_b, next_fb) = next_generation(&pop_b, &fit_b, cfg, &mut rng, |b1, b2, rng| {
            breed_policies(b1, b2, &ops, &pdom, cfg.per_gene_alpha, rng)
        });
        pop_a = next_a;
        fit_a = next_fa;
        pop_b = next_b;
        fit_b = next_fb;
    }
    Ok(tracker.finish())
}

/// Single-population baseline over concatenated view and policy genotypes,
/// each individual evaluated on its own pair.
pub fn run_eassl(ctx: &EvalContext, cfg: &SearchConfig, exec: &Executor, keep_history: bool) -> Result<SearchOutcome> {
    cfg.validate()?;
    cfg.validate_population("n_mono", cfg.n_mono)?;
    let mut rng = run_rng("eassl", ctx, cfg);
    let vdom = ctx.view_domain;
    let pdom = ctx.policy_domain;
    let mut pop: Vec<(ViewGenotype, PolicyGenotype)> = (0..cfg.n_mono)
        .map(|_| (ViewGenotype::random(&vdom, &mut rng), PolicyGenotype::random(&pdom, &mut rng)))
        .collect();
    let mut tracker = Tracker::new(ctx, exec, keep_history);

    let mut fitness: Vec<f64> = tracker.evaluate(&pop)?.iter().map(|r| r.f).collect();
    tracker.mark_init_done();
    let observe = |tracker: &mut Tracker, gen, pop: &[(ViewGenotype, PolicyGenotype)], fitness: &[f64]| {
        let views: Vec<ViewGenotype> = pop.iter().map(|p| p.0.clone()).collect();
        let policies: Vec<PolicyGenotype> = pop.iter().map(|p| p.1.clone()).collect();
        let div = search_diversity(&views, &policies, &pdom);
        tracker.record(
            gen,
            div,
            PopulationSnapshot {
                gen,
                views,
                view_fitness: fitness.to_vec(),
                policies,
                policy_fitness: fitness.to_vec(),
            },
        );
    };
    observe(&mut tracker, 0, &pop, &fitness);

    let ops = cfg.mono_operators;
    for gen in 1..=cfg.generations {
        let (next, _) = next_generation(&pop, &fitness, cfg, &mut rng, |x, y, rng| {
            let (a1, a2) = breed_views(&x.0, &y.0, &ops, &vdom, rng);
            let (b1, b2) = breed_policies(&x.1, &y.1, &ops, &pdom, cfg.per_gene_alpha, rng);
            ((a1, b1), (a2, b2))
        });
        pop = next;
        fitness = tracker.evaluate(&pop)?.iter().map(|r| r.f).collect();
        observe(&mut tracker, gen, &pop, &fitness);
    }
    Ok(tracker.finish())
}
