//! Order-preserving map helpers over independent work items.
//!
//! With the `parallel` feature (default) the items are distributed over
//! the rayon pool; without it the same code runs sequentially. Both paths
//! preserve input order, and every item is computed independently, so
//! results are bit-identical regardless of the execution mode.

/// Cap the worker pool at `n` threads (effective once, before first use;
/// no-op without the `parallel` feature).
#[cfg(feature = "parallel")]
pub fn configure_workers(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

#[cfg(not(feature = "parallel"))]
pub fn configure_workers(_n: usize) {}

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(not(feature = "parallel"))]
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential map with the same signature as [`map_items`]; the baseline
/// the benchmark suite compares the parallel path against.
pub fn map_items_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
