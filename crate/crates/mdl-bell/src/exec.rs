//! Execution strategy for the data-parallel kernels.
//!
//! Every parallel loop in this crate maps an index range through a pure
//! function whose randomness, if any, comes from a per-index seed. Results
//! are collected in index order, so the output is identical whether the body
//! runs on one thread or many.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `0..n` through `f`, preserving index order in the output.
///
/// Runs on the current rayon pool when the `parallel` feature is enabled,
/// sequentially otherwise.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Caps the global thread pool at `n` workers.
///
/// Effective only before the pool's first use and only with the `parallel`
/// feature; later calls and the sequential build are no-ops. Results never
/// depend on the cap, only throughput does.
pub fn set_thread_cap(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}
