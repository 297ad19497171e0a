//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature the items are spread over a bounded rayon
//! pool; without it (or with `workers == 1`) they run in sequence. Results
//! always come back in input order, so downstream output does not depend on
//! scheduling.

use crate::error::Result;

/// Maps `f` over `items`, returning results in input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return map_serial(items, f);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| crate::Error::InvalidParam(format!("cannot build worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: &[T], _workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    map_serial(items, f)
}

pub fn map_serial<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    F: Fn(&T) -> Result<R>,
{
    items.iter().map(f).collect()
}

/// Whether this build can run work items concurrently.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
