//! Request sequences used by the lower-bound constructions, plus a
//! deterministic worst case for demand caching.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::model::{BipartiteTopology, FileId, RequestBatch};
use crate::rewards::RewardKind;
use crate::rng::{substream, Purpose};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// Independent uniform draws from the first `support_size` files.
    UniformSupport,
    /// One uniform draw per slot, shared by every user.
    IdenticalUsers,
    /// Files 0, 1, 0, 1, ...
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    pub support_size: usize,
    pub horizon: usize,
    pub r: usize,
    pub seed: u64,
}

impl SequenceSpec {
    /// Batches for `topology` over a catalog of `n_files`. Uniform draws
    /// are independent across users.
    pub fn generate(&self, topology: &BipartiteTopology, n_files: usize) -> Result<Vec<RequestBatch>> {
        match self.kind {
            SequenceKind::UniformSupport => independent_users_sequence(
                topology.n_users(),
                self.horizon,
                self.support_size,
                self.r,
                n_files,
                self.seed,
            ),
            SequenceKind::IdenticalUsers => {
                if self.r != 1 {
                    return Err(Error::unsupported("identical-users sequences have r = 1"));
                }
                identical_users_sequence(topology, self.horizon, self.support_size, n_files, self.seed)
            }
            SequenceKind::Alternating => {
                if n_files < 2 {
                    return Err(Error::invalid("alternating sequence needs N >= 2"));
                }
                Ok(broadcast(&alternating_sequence(self.horizon)?, topology.n_users()))
            }
        }
    }
}

/// Support size the lower-bound adversary uses for a reward kind:
/// `2C` for single-cache and elastic, `2C|J|` for inelastic.
pub fn adversarial_support(kind: RewardKind, capacity: usize, n_caches: usize) -> usize {
    match kind {
        RewardKind::Inelastic => 2 * capacity * n_caches,
        _ => 2 * capacity,
    }
}

fn check_support(support_size: usize, n_files: usize) -> Result<()> {
    if support_size == 0 || support_size > n_files {
        return Err(Error::invalid(format!(
            "support size {support_size} must lie in 1..={n_files}"
        )));
    }
    Ok(())
}

/// Single user; each slot is the sum of `r` independent uniform draws from
/// files `0..support_size`.
pub fn uniform_support_sequence(
    horizon: usize,
    support_size: usize,
    r: usize,
    n_files: usize,
    seed: u64,
) -> Result<Vec<RequestBatch>> {
    independent_users_sequence(1, horizon, support_size, r, n_files, seed)
}

/// As [`uniform_support_sequence`] for `n_users` independent users.
pub fn independent_users_sequence(
    n_users: usize,
    horizon: usize,
    support_size: usize,
    r: usize,
    n_files: usize,
    seed: u64,
) -> Result<Vec<RequestBatch>> {
    check_support(support_size, n_files)?;
    if r == 0 {
        return Err(Error::invalid("requests per user must be positive"));
    }
    let mut rng = substream(seed, Purpose::Requests, 0);
    (0..horizon)
        .map(|_| {
            let files = (0..n_users * r)
                .map(|_| rng.random_range(0..support_size) as FileId)
                .collect();
            RequestBatch::new(r, files)
        })
        .collect()
}

/// One draw per slot from files `0..support_size`, copied to every user.
pub fn identical_users_sequence(
    topology: &BipartiteTopology,
    horizon: usize,
    support_size: usize,
    n_files: usize,
    seed: u64,
) -> Result<Vec<RequestBatch>> {
    check_support(support_size, n_files)?;
    let mut rng = substream(seed, Purpose::Requests, 0);
    Ok((0..horizon)
        .map(|_| {
            let f = rng.random_range(0..support_size) as FileId;
            RequestBatch::one_hot(alloc::vec![f; topology.n_users()])
        })
        .collect())
}

/// Single user requesting 0, 1, 0, 1, ...
pub fn alternating_sequence(horizon: usize) -> Result<Vec<RequestBatch>> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    Ok((0..horizon)
        .map(|t| RequestBatch::one_hot(alloc::vec![(t % 2) as FileId]))
        .collect())
}

/// Repeats a single-user sequence for every user.
pub fn broadcast(single: &[RequestBatch], n_users: usize) -> Vec<RequestBatch> {
    single
        .iter()
        .map(|b| {
            let files = b.files().iter().copied().cycle().take(b.files().len() * n_users).collect();
            RequestBatch::new(b.r(), files).expect("same r")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn degenerate_support() {
        let s = uniform_support_sequence(20, 1, 3, 5, 1).unwrap();
        assert!(s.iter().all(|b| b.files() == [0, 0, 0]));
    }

    #[test]
    fn support_above_catalog_rejected() {
        assert!(uniform_support_sequence(5, 6, 1, 5, 1).is_err());
        assert!(uniform_support_sequence(5, 0, 1, 5, 1).is_err());
    }

    #[test]
    fn reproducible() {
        let a = uniform_support_sequence(100, 4, 2, 10, 9).unwrap();
        let b = uniform_support_sequence(100, 4, 2, 10, 9).unwrap();
        let c = uniform_support_sequence(100, 4, 2, 10, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn identical_users_share_the_draw() {
        let t = crate::paper_topology_preset();
        let s = identical_users_sequence(&t, 50, 8, 8, 3).unwrap();
        for b in &s {
            assert_eq!(b.n_users(), 10);
            assert!(b.files().iter().all(|&f| f == b.files()[0]));
        }
    }

    #[test]
    fn support_sizes() {
        assert_eq!(adversarial_support(RewardKind::Elastic, 3, 4), 6);
        assert_eq!(adversarial_support(RewardKind::Inelastic, 3, 4), 24);
    }

    #[test]
    fn alternating() {
        let s = alternating_sequence(4).unwrap();
        let files: Vec<_> = s.iter().map(|b| b.files()[0]).collect();
        assert_eq!(files, vec![0, 1, 0, 1]);
        let wide = broadcast(&s, 3);
        assert_eq!(wide[1].files(), [1, 1, 1]);
    }
}
