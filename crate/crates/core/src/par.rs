//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) these dispatch onto the
//! current rayon pool; without it they are plain sequential iterators.
//! Every caller produces results indexed by position, so output never
//! depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Number of worker threads the helpers above will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Caps the global worker count. Only effective before the first parallel
/// call; later calls are ignored and return `false`.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}
