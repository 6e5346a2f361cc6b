//! Replicate execution: data-parallel with rayon under the default
//! `parallel` feature, sequential otherwise.
//!
//! Results are always collected in replicate-index order, so reductions over
//! them are bitwise identical for any worker count, including the sequential
//! build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map a closure over replicate indices 0..n, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_replicates<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_replicates<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential reference path, always available; the bench suite compares this
/// against `map_replicates`.
pub fn map_replicates_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
