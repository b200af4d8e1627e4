//! Data-parallel map with a sequential fallback.
//!
//! `Executor::Parallel` uses rayon when the `parallel` feature is enabled and
//! degrades to a plain loop otherwise. Both produce results in input order,
//! so the choice never changes search outcomes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Executor {
    Sequential,
    Parallel,
}

impl Default for Executor {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Executor::Parallel
        } else {
            Executor::Sequential
        }
    }
}

impl Executor {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Executor::Sequential => items.iter().map(f).collect(),
            Executor::Parallel => parallel_map(items, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Executor::Sequential.map(&xs, |x| x * x);
        let b = Executor::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);
    }
}
