//! Replica fan-out with a deterministic merge order.

use rayon::prelude::*;

use crate::error::Result;
use crate::sampler::{Purpose, RngStream};

/// Runs `f` for replicas `0..reps` in parallel, each on its own stream, and
/// returns the results in replica order.
pub fn replicas<T, F>(seed: u64, purpose: Purpose, reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, RngStream) -> Result<T> + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|i| f(i, RngStream::replica(seed, purpose, i as u64)))
        .collect()
}

/// Like [`replicas`], but groups replicas into batches sharing one generator,
/// which amortises generator setup for very cheap replicas. Batch `b` covers
/// replicas `b*batch .. (b+1)*batch` and uses stream id `b`.
pub fn batched<T, F>(seed: u64, purpose: Purpose, reps: usize, batch: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<T> + Sync + Send,
{
    let batch = batch.max(1);
    let batches = reps.div_ceil(batch);
    let nested: Vec<Vec<T>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::replica(seed, purpose, b as u64).rng();
            let len = batch.min(reps - b * batch);
            (0..len).map(|_| f(&mut rng)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}
