//! Trace events, block partitioning into synthetic users, and Zipf
//! workloads. Parsing of trace files lives in the `cache-regret` crate.

use alloc::string::String;
use alloc::vec::Vec;

use rand_distr::{Distribution, Zipf};

use crate::math::round;
use crate::model::{FileId, RequestBatch};
use crate::rng::{substream, Purpose};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub timestamp: i64,
    pub user_raw: String,
    pub file: FileId,
}

/// Splits `events` into `n_users` contiguous blocks of `len / n_users`
/// events (the last block also keeps the remainder) and advances every
/// block by one event per slot. `T` is the shortest block length, so the
/// tail of the last block is unused.
pub fn partition_blocks(events: &[TraceEvent], n_users: usize) -> Result<Vec<RequestBatch>> {
    if n_users == 0 {
        return Err(Error::invalid("need at least one user"));
    }
    if events.len() < n_users {
        return Err(Error::invalid(alloc::format!(
            "{} events cannot feed {n_users} users",
            events.len()
        )));
    }
    let block = events.len() / n_users;
    Ok((0..block)
        .map(|t| RequestBatch::one_hot((0..n_users).map(|k| events[k * block + t].file).collect()))
        .collect())
}

/// `T` i.i.d. draws with `P(k) ∝ (k + 1)^(-exponent)` over `n_files` files.
pub fn zipf_sequence(n_files: usize, exponent: f64, horizon: usize, seed: u64) -> Result<Vec<RequestBatch>> {
    zipf_users_sequence(1, n_files, exponent, horizon, seed)
}

/// [`zipf_sequence`] for `n_users` independent users; user `k` draws from
/// its own substream, so user 0 replays [`zipf_sequence`].
pub fn zipf_users_sequence(
    n_users: usize,
    n_files: usize,
    exponent: f64,
    horizon: usize,
    seed: u64,
) -> Result<Vec<RequestBatch>> {
    if n_files == 0 {
        return Err(Error::invalid("catalog must be nonempty"));
    }
    if !exponent.is_finite() || exponent < 0.0 {
        return Err(Error::invalid("Zipf exponent must be finite and nonnegative"));
    }
    let zipf = Zipf::new(n_files as f64, exponent).map_err(|e| Error::invalid(alloc::format!("{e}")))?;
    let streams: Vec<Vec<FileId>> = (0..n_users)
        .map(|k| {
            let mut rng = substream(seed, Purpose::Trace, k as u64);
            (0..horizon)
                .map(|_| {
                    let rank: f64 = zipf.sample(&mut rng);
                    rank as FileId - 1
                })
                .collect()
        })
        .collect();
    Ok((0..horizon)
        .map(|t| RequestBatch::one_hot(streams.iter().map(|s| s[t]).collect()))
        .collect())
}

/// `max(1, round(alpha N))`.
pub fn capacity_from_alpha(alpha: f64, n_files: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1]"));
    }
    Ok((round(alpha * n_files as f64) as usize).max(1))
}
