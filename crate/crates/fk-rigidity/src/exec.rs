//! Execution policy for site loops.
//!
//! With the `parallel` feature (default) site maps run on the rayon global
//! pool; otherwise, or after [`set_execution`]`(Execution::Sequential)`, they
//! run on the calling thread. Reductions never depend on the policy: values are
//! materialised per site and summed in fixed-size chunks in storage order, so
//! both policies produce bitwise identical results.

use std::sync::atomic::{AtomicBool, Ordering};

/// Number of consecutive sites summed sequentially before partial sums are combined.
pub const REDUCTION_CHUNK: usize = 1024;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// How site loops are executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

/// Select the execution policy for subsequent site loops (process-wide).
///
/// Requesting [`Execution::Parallel`] in a build without the `parallel`
/// feature silently falls back to sequential execution.
pub fn set_execution(policy: Execution) {
    FORCE_SEQUENTIAL.store(policy == Execution::Sequential, Ordering::SeqCst);
}

/// The policy currently in effect.
pub fn execution() -> Execution {
    if cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst) {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

/// Evaluate `f(0), …, f(n−1)` and collect the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if execution() == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Deterministic sum: chunks of [`REDUCTION_CHUNK`] values are summed left to
/// right, then the chunk sums are summed left to right.
pub fn det_sum(values: &[f64]) -> f64 {
    let chunks = values.len().div_ceil(REDUCTION_CHUNK);
    let partials = map_indexed(chunks, |c| {
        let start = c * REDUCTION_CHUNK;
        let end = (start + REDUCTION_CHUNK).min(values.len());
        values[start..end].iter().sum::<f64>()
    });
    partials.iter().sum()
}

/// Maximum of the values (`−∞` for an empty slice); NaN entries are ignored.
pub fn det_max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, |acc, v| if v > acc { v } else { acc })
}
