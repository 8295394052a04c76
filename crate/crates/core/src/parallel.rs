//! Replication-level parallelism. Replications share nothing mutable; with
//! the `parallel` feature off every helper runs sequentially.

use crate::model::mix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Order-preserving map.
pub fn map_in<T, R, F>(mode: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_in(Execution::default(), items, f)
}

/// Seed of replication r under a root seed.
pub fn replication_seed(root_seed: u64, r: usize) -> u64 {
    mix(root_seed, r as u64)
}

/// Run `f(r, seed_r)` for r = 0..count; results come back in replication
/// order whatever the execution mode.
pub fn replicate_in<R, F>(mode: Execution, root_seed: u64, count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, u64) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..count).collect();
    map_in(mode, &idx, |r| f(*r, replication_seed(root_seed, *r)))
}

pub fn replicate<R, F>(root_seed: u64, count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, u64) -> R + Sync + Send,
{
    replicate_in(Execution::default(), root_seed, count, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |r: usize, s: u64| s.wrapping_mul(r as u64 + 1);
        assert_eq!(
            replicate_in(Execution::Sequential, 9, 50, f),
            replicate_in(Execution::Parallel, 9, 50, f)
        );
    }
}
