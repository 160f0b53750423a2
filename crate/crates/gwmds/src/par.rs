//! Index-keyed parallel mapping with a sequential fallback.
//!
//! Every data-parallel loop in the crate (pairwise distance rows, per-source
//! shortest paths, per-view coupling updates, solver restarts, grid cells)
//! funnels through [`map_indices`]. Each slot is computed independently and
//! collected in index order, so the parallel and sequential builds produce
//! bit-identical results. Disable the `parallel` feature for the sequential
//! build.

#[cfg(feature = "parallel")]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Whether this build executes [`map_indices`] on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
