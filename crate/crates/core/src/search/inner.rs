use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{derive_seed, run_ga, GAConfig, MEMORY_PENALTY};
use crate::accel::AcceleratorDesign;
use crate::evaluator::{evaluate_set, CostBreakdown, SetEnv};
use crate::par::Executor;
use crate::sharding::{enumerate_strategies, factor_pairs, memory_footprint, Dim, ParallelismStrategy};
use crate::topology::{AccSetCandidate, SystemTopology};
use crate::workload::ConvLayer;

/// Six ES priorities, six SS priorities, the SS switch and the factorization gene.
pub const INNER_GENES_PER_LAYER: usize = 14;

const SS_GENES: usize = 6;
const SS_SWITCH: usize = 12;
const FACTOR_GENE: usize = 13;

fn ranked(genes: &[f64]) -> [Dim; 6] {
    let mut dims = Dim::ALL;
    dims.sort_by(|a, b| genes[b.index()].total_cmp(&genes[a.index()]).then(a.cmp(b)));
    dims
}

/// Decodes one layer's genes into a strategy of degree `p` that fits `layer`.
///
/// The two highest-priority splittable dims take the ES factorization picked
/// by the factorization gene. When a dim cannot absorb its factor, the
/// nearest other factorization is tried, then lower-priority dim pairs.
/// SS is enabled when its switch exceeds 0.5 and uses the highest-priority
/// dim that still fits.
pub fn decode_inner(genes: &[f64], layer: &ConvLayer, p: u32) -> ParallelismStrategy {
    if p <= 1 {
        return ParallelismStrategy::none();
    }
    let order: Vec<Dim> = ranked(&genes[..6])
        .into_iter()
        .filter(|d| d.extent(layer) >= 2)
        .collect();
    let pairs = factor_pairs(p);
    let pick = ((genes[FACTOR_GENE] * pairs.len() as f64) as usize).min(pairs.len() - 1);
    let mut by_distance: Vec<usize> = (0..pairs.len()).collect();
    by_distance.sort_by_key(|&j| (j.abs_diff(pick), j));

    let mut es = None;
    'search: for i in 0..order.len() {
        for j in i + 1..=order.len() {
            for &k in &by_distance {
                let (fa, fb) = pairs[k];
                let splits = match order.get(j) {
                    Some(&b) => vec![(order[i], fa), (b, fb)],
                    None if fb == 1 => vec![(order[i], fa)],
                    None => continue,
                };
                if let Ok(s) = ParallelismStrategy::new(&splits, None) {
                    if s.fits(layer) {
                        es = Some(s);
                        break 'search;
                    }
                }
            }
        }
    }
    let Some(mut strategy) = es else {
        return ParallelismStrategy::new(&[(Dim::Cout, p)], None).expect("degree is positive");
    };
    if genes[SS_SWITCH] > 0.5 {
        for d in ranked(&genes[SS_GENES..SS_GENES + 6]) {
            strategy.ss = Some(d);
            if strategy.fits(layer) {
                return strategy;
            }
        }
        strategy.ss = None;
    }
    strategy
}

/// Best strategies found for one set and layer range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerResult {
    pub strategies: Vec<ParallelismStrategy>,
    /// Unpenalized latency, seconds.
    pub latency: f64,
    pub breakdown: CostBreakdown,
    pub memory_bytes: u64,
    pub valid: bool,
    /// Latency with the memory penalty applied.
    pub fitness: f64,
    pub history: Vec<f64>,
}

/// Scores strategies for a run of layers; infeasible splits score infinity.
pub(crate) fn score(env: &SetEnv<'_>, layers: &[ConvLayer], strategies: &[ParallelismStrategy], mem_limit: u64) -> (f64, CostBreakdown, u64, bool) {
    match evaluate_set(env, layers, strategies) {
        Ok((b, mem)) => {
            let latency = b.total();
            let valid = mem <= mem_limit;
            let fitness = if valid { latency } else { latency * MEMORY_PENALTY };
            (fitness, b, mem, valid)
        }
        Err(_) => (f64::INFINITY, CostBreakdown::default(), 0, false),
    }
}

fn decode_all(env: &SetEnv<'_>, layers: &[ConvLayer], genes: &[f64]) -> Vec<ParallelismStrategy> {
    layers
        .iter()
        .enumerate()
        .map(|(i, l)| decode_inner(&genes[i * INNER_GENES_PER_LAYER..(i + 1) * INNER_GENES_PER_LAYER], l, env.p))
        .collect()
}

/// Penalized latency of `strategies`, without building a breakdown.
fn strategies_fitness(env: &SetEnv<'_>, layers: &[ConvLayer], strategies: &[ParallelismStrategy], mem_limit: u64) -> f64 {
    let mut total = 0.0;
    for (i, (l, s)) in layers.iter().zip(strategies).enumerate() {
        match env.layer_cost(l, s) {
            Ok(c) => total += c.total(),
            Err(_) => return f64::INFINITY,
        }
        if i > 0 {
            match env.redistribution(&layers[i - 1], &strategies[i - 1], s) {
                Ok(r) => total += r,
                Err(_) => return f64::INFINITY,
            }
        }
    }
    let pairs: Vec<(ConvLayer, ParallelismStrategy)> = layers.iter().copied().zip(strategies.iter().cloned()).collect();
    match memory_footprint(&pairs, env.elem_bytes) {
        Ok(mem) if mem <= mem_limit => total,
        Ok(_) => total * MEMORY_PENALTY,
        Err(_) => f64::INFINITY,
    }
}

fn layer_total(env: &SetEnv<'_>, layer: &ConvLayer, s: &ParallelismStrategy) -> f64 {
    env.layer_cost(layer, s).map_or(f64::INFINITY, |c| c.total())
}

fn redist(env: &SetEnv<'_>, prev: &ConvLayer, a: &ParallelismStrategy, b: &ParallelismStrategy) -> f64 {
    env.redistribution(prev, a, b).unwrap_or(f64::INFINITY)
}

/// Local descent that gives a run of consecutive layers one shared strategy
/// (a run of one replaces a single layer). Candidate moves are priced
/// incrementally; memory is checked only for moves that would improve.
/// Stops when no move lowers the fitness.
fn polish(env: &SetEnv<'_>, layers: &[ConvLayer], mut strategies: Vec<ParallelismStrategy>, mem_limit: u64) -> Vec<ParallelismStrategy> {
    let n = layers.len();
    let options: Vec<Vec<ParallelismStrategy>> = layers.iter().map(|l| enumerate_strategies(l, env.p).unwrap_or_default()).collect();
    let mut best = strategies_fitness(env, layers, &strategies, mem_limit);
    if !best.is_finite() {
        return strategies;
    }
    let mut trial = strategies.clone();
    loop {
        let mut improved = false;
        for start in 0..n {
            let cost: Vec<f64> = layers.iter().zip(&strategies).map(|(l, s)| layer_total(env, l, s)).collect();
            let link: Vec<f64> = (0..n)
                .map(|i| if i == 0 { 0.0 } else { redist(env, &layers[i - 1], &strategies[i - 1], &strategies[i]) })
                .collect();
            let latency: f64 = cost.iter().sum::<f64>() + link.iter().sum::<f64>();
            'moves: for s in &options[start] {
                let mut delta = if start > 0 { redist(env, &layers[start - 1], &strategies[start - 1], s) - link[start] } else { 0.0 };
                for end in start + 1..=n {
                    let i = end - 1;
                    if i > start {
                        if !s.fits(&layers[i]) {
                            break;
                        }
                        delta += redist(env, &layers[i - 1], s, s) - link[i];
                    }
                    delta += layer_total(env, &layers[i], s) - cost[i];
                    if !delta.is_finite() {
                        break;
                    }
                    let right = if end < n { redist(env, &layers[i], s, &strategies[end]) - link[end] } else { 0.0 };
                    if latency + delta + right >= best {
                        continue;
                    }
                    trial.clone_from(&strategies);
                    trial[start..end].fill(s.clone());
                    let f = strategies_fitness(env, layers, &trial, mem_limit);
                    if f < best {
                        best = f;
                        std::mem::swap(&mut strategies, &mut trial);
                        improved = true;
                        break 'moves;
                    }
                }
            }
        }
        if !improved {
            return strategies;
        }
    }
}

/// Seed of the inner GA for one (set, design, range) subproblem.
pub(crate) fn inner_seed(cfg: &GAConfig, accset: &AccSetCandidate, design: usize, start: usize, end: usize) -> u64 {
    let mut words: Vec<u64> = accset.members.iter().map(|&m| m as u64).collect();
    words.extend([u64::MAX, design as u64, start as u64, end as u64]);
    derive_seed(cfg.seed, &words)
}

/// Optimizes per-layer strategies of `layers` on `accset` configured with
/// `design`: a GA over the encoding above, then local descent on its best
/// genome. `design_index` only feeds the seed derivation.
#[allow(clippy::too_many_arguments)]
pub fn run_inner_ga(
    accset: &AccSetCandidate,
    layers: &[ConvLayer],
    first_layer: usize,
    design: &AcceleratorDesign,
    design_index: usize,
    topo: &SystemTopology,
    cfg: &GAConfig,
    elem_bytes: u64,
) -> InnerResult {
    let env = SetEnv::new(topo, accset, design, elem_bytes);
    let mem_limit = topo.min_mem(&accset.members);
    let finish = |strategies: Vec<ParallelismStrategy>, history: Vec<f64>| {
        let (fitness, breakdown, memory_bytes, valid) = score(&env, layers, &strategies, mem_limit);
        InnerResult {
            latency: breakdown.total(),
            strategies,
            breakdown,
            memory_bytes,
            valid,
            fitness,
            history,
        }
    };
    if env.p == 1 {
        let strategies = vec![ParallelismStrategy::none(); layers.len()];
        let mut r = finish(strategies, Vec::new());
        r.history = vec![r.fitness];
        return r;
    }

    let seeded = GAConfig {
        seed: inner_seed(cfg, accset, design_index, first_layer, first_layer + layers.len()),
        ..cfg.clone()
    };
    let n_genes = layers.len() * INNER_GENES_PER_LAYER;
    let out = run_ga(
        n_genes,
        INNER_GENES_PER_LAYER,
        &seeded,
        |rng: &mut ChaCha8Rng, _| (0..n_genes).map(|_| rng.random::<f64>()).collect(),
        |g| strategies_fitness(&env, layers, &decode_all(&env, layers, g), mem_limit),
        Executor::Sequential,
    );
    let strategies = polish(&env, layers, decode_all(&env, layers, &out.best), mem_limit);
    finish(strategies, out.history)
}
