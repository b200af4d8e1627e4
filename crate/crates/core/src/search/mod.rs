//! Two-level genetic search, the baseline mapper and the exhaustive oracle.

mod baseline;
mod ga;
mod inner;
mod oracle;
mod outer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baseline::{baseline_strategy, run_baseline};
pub use ga::{run_ga, GaOutcome};
pub use inner::{decode_inner, run_inner_ga, InnerResult, INNER_GENES_PER_LAYER};
pub use oracle::{exact_inner, run_oracle, OracleLimits};
pub use outer::{decode_outer, init_design_genes, run_outer_ga, search_candidates, OuterLayout, SearchOutcome, SetChoice};

/// Fitness multiplier for individuals whose footprint exceeds memory.
pub const MEMORY_PENALTY: f64 = 10.0;

/// Hyperparameters of one GA level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GAConfig {
    pub population: usize,
    pub generations: usize,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Standard deviation of the Gaussian mutation step.
    pub mutation_sigma: f64,
    pub crossover_rate: f64,
    pub elites: usize,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        GAConfig::outer()
    }
}

impl GAConfig {
    pub const DEFAULT_SEED: u64 = 2023;

    pub fn outer() -> Self {
        GAConfig {
            population: 32,
            generations: 50,
            mutation_rate: 0.1,
            mutation_sigma: 0.2,
            crossover_rate: 0.8,
            elites: 2,
            seed: Self::DEFAULT_SEED,
        }
    }

    pub fn inner() -> Self {
        GAConfig {
            population: 16,
            generations: 30,
            ..GAConfig::outer()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Validation(format!(
                "GA population must be at least 2, got {}",
                self.population
            )));
        }
        for (name, v) in [
            ("mutation_rate", self.mutation_rate),
            ("crossover_rate", self.crossover_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return Err(Error::Validation("mutation_sigma must be non-negative".into()));
        }
        if self.elites > self.population {
            return Err(Error::Validation(format!(
                "{} elites exceed the population of {}",
                self.elites, self.population
            )));
        }
        Ok(())
    }
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive combination of words into one seed.
pub fn derive_seed(root: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix64(root), |acc, &w| mix64(acc ^ mix64(w)))
}
