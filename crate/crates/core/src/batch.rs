//! Independent runs fanned out over seeds.
//!
//! Each seed drives its own game instance, so sweeps parallelize without any
//! shared state. With the `parallel` feature (on by default) [`map_seeds`]
//! uses rayon; [`map_seeds_sequential`] is always available and gives the
//! same results in the same order.

/// Applies `f` to every seed; output order follows `seeds`.
#[cfg(feature = "parallel")]
pub fn map_seeds<T, F>(seeds: std::ops::Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    seeds.into_par_iter().map(f).collect()
}

/// Applies `f` to every seed; output order follows `seeds`.
#[cfg(not(feature = "parallel"))]
pub fn map_seeds<T, F>(seeds: std::ops::Range<u64>, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    map_seeds_sequential(seeds, f)
}

pub fn map_seeds_sequential<T, F>(seeds: std::ops::Range<u64>, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    seeds.map(f).collect()
}
