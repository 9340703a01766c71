//! Replica fan-out over a fixed-size worker pool.
//!
//! Work is split into replicas whose count and seeds depend only on the
//! budget, never on the number of workers; results come back in replica
//! order, so integer aggregates are identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Default number of samples per replica.
pub const DEFAULT_BATCH: u64 = 10_000;

/// Runs `f(replica)` for `replica in 0..replicas` on `workers` threads and
/// returns the results in replica order.
pub fn run_replicas<T, F>(replicas: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be >= 1".into()));
    }
    if workers == 1 {
        return Ok((0..replicas).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..replicas).into_par_iter().map(f).collect()))
}

/// Splits `samples` into replicas of at most `batch`: `(replica count, size of replica i)`.
pub fn split_budget(samples: u64, batch: u64) -> (u64, impl Fn(u64) -> u64) {
    let batch = batch.max(1);
    let replicas = samples.div_ceil(batch);
    (replicas, move |i: u64| batch.min(samples - i * batch))
}

/// Adds a value to a histogram, growing it as needed.
#[inline]
pub fn bump(hist: &mut Vec<u64>, value: u64) {
    let v = value as usize;
    if v >= hist.len() {
        hist.resize(v + 1, 0);
    }
    hist[v] += 1;
}

/// Elementwise sum of histograms.
pub fn merge_hist(into: &mut Vec<u64>, other: &[u64]) {
    if other.len() > into.len() {
        into.resize(other.len(), 0);
    }
    for (a, b) in into.iter_mut().zip(other) {
        *a += b;
    }
}
