use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{derive_seed, GAConfig};
use crate::par::Executor;

/// Result of a GA run; lower fitness is better.
#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    /// Best fitness of each generation, the initial one included.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

fn rng_for(cfg: &GAConfig, generation: usize, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[generation as u64, index as u64]))
}

/// Generational GA over real genes in `[0, 1]` with size-2 tournaments,
/// uniform crossover, clipped Gaussian mutation and elitism.
///
/// Genes are grouped into consecutive blocks of `block` genes. Crossover
/// inherits whole blocks from either parent, and mutation selects blocks
/// with the mutation rate and perturbs every gene in a selected block.
/// With `block == 1` these are the plain per-gene operators.
///
/// `init(rng, index)` builds each first-generation genome. Every offspring
/// draws from its own RNG stream derived from `(seed, generation, index)`,
/// so the executor never affects the result.
pub fn run_ga<I, F>(n_genes: usize, block: usize, cfg: &GAConfig, init: I, fitness: F, exec: Executor) -> GaOutcome
where
    I: Fn(&mut ChaCha8Rng, usize) -> Vec<f64>,
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let block = block.max(1);
    let pop_size = cfg.population.max(1);
    let mut pop: Vec<Vec<f64>> = (0..pop_size)
        .map(|i| {
            let mut rng = rng_for(cfg, 0, i);
            let g = init(&mut rng, i);
            debug_assert_eq!(g.len(), n_genes);
            g
        })
        .collect();
    let mut fit: Vec<f64> = exec.map(&pop, |g| sanitize(fitness(g)));
    let mut evaluations = pop.len();

    let rank = |fit: &[f64]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..fit.len()).collect();
        idx.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)));
        idx
    };

    let mut order = rank(&fit);
    let mut history = vec![fit[order[0]]];
    let normal = Normal::new(0.0, cfg.mutation_sigma.max(0.0)).expect("sigma is finite");
    let elites = cfg.elites.min(pop_size);

    for gen in 1..=cfg.generations {
        let mut next: Vec<Vec<f64>> = order[..elites].iter().map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<f64> = order[..elites].iter().map(|&i| fit[i]).collect();
        let mut children = Vec::with_capacity(pop_size - elites);
        for slot in elites..pop_size {
            let mut rng = rng_for(cfg, gen, slot);
            let pick = |rng: &mut ChaCha8Rng| {
                let a = rng.random_range(0..pop_size);
                let b = rng.random_range(0..pop_size);
                if fit[b] < fit[a] || (fit[b] == fit[a] && b < a) {
                    b
                } else {
                    a
                }
            };
            let pa = pick(&mut rng);
            let pb = pick(&mut rng);
            let mut child = pop[pa].clone();
            if rng.random::<f64>() < cfg.crossover_rate {
                for (c, o) in child.chunks_mut(block).zip(pop[pb].chunks(block)) {
                    if rng.random::<bool>() {
                        c.copy_from_slice(o);
                    }
                }
            }
            for c in child.chunks_mut(block) {
                if rng.random::<f64>() < cfg.mutation_rate {
                    for g in c {
                        *g = (*g + normal.sample(&mut rng)).clamp(0.0, 1.0);
                    }
                }
            }
            children.push(child);
        }
        let child_fit = exec.map(&children, |g| sanitize(fitness(g)));
        evaluations += children.len();
        next.extend(children);
        next_fit.extend(child_fit);
        pop = next;
        fit = next_fit;
        order = rank(&fit);
        history.push(fit[order[0]]);
    }

    let best = order[0];
    GaOutcome {
        best: pop[best].clone(),
        best_fitness: fit[best],
        history,
        evaluations,
    }
}

fn sanitize(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(g: &[f64]) -> f64 {
        g.iter().map(|x| (x - 0.3) * (x - 0.3)).sum()
    }

    fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn improves_and_is_monotone() {
        let cfg = GAConfig::outer();
        let out = run_ga(8, 1, &cfg, |r, _| uniform(r, 8), sphere, Executor::Sequential);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.best_fitness < out.history[0]);
        assert_eq!(out.history.len(), cfg.generations + 1);
    }

    #[test]
    fn executor_does_not_change_result() {
        let cfg = GAConfig { seed: 9, ..GAConfig::inner() };
        let a = run_ga(5, 1, &cfg, |r, _| uniform(r, 5), sphere, Executor::Sequential);
        let b = run_ga(5, 1, &cfg, |r, _| uniform(r, 5), sphere, Executor::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn genes_stay_in_unit_interval() {
        let cfg = GAConfig {
            mutation_rate: 1.0,
            mutation_sigma: 5.0,
            ..GAConfig::inner()
        };
        let out = run_ga(4, 1, &cfg, |r, _| uniform(r, 4), |g| -g.iter().sum::<f64>(), Executor::Sequential);
        assert!(out.best.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
