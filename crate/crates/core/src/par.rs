//! Execution strategy for the data-parallel loops.
//!
//! Every parallel path splits work into fixed-size chunks and reduces the
//! chunk results in index order, so `Sequential` and `Parallel` produce
//! bitwise-identical output. Without the `parallel` feature, `Parallel`
//! runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this build can actually run work on multiple threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(i)` for `i in 0..n`, preserving order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Splits `0..n` into chunks of `chunk` items, maps each chunk range to a
/// partial result and folds the partials left-to-right with `merge`.
pub fn chunked_reduce<T, F, M>(exec: Execution, n: usize, chunk: usize, map: F, merge: M) -> Option<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Send + Sync,
    M: Fn(T, T) -> T,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let partials = map_indexed(exec, n_chunks, |c| {
        let start = c * chunk;
        map(start..(start + chunk).min(n))
    });
    partials.into_iter().reduce(merge)
}
