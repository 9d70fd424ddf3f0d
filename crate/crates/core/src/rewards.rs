//! One-slot and cumulative rewards.

use alloc::format;
use alloc::vec::Vec;

use crate::math::KahanSum;
use crate::model::{BipartiteTopology, CacheConfig, RequestBatch};
use crate::{Error, Result};

/// Which reward function scores a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RewardKind {
    /// `x . y` for one user and one cache.
    Single,
    /// Hits add up across every cache a user reaches.
    Elastic,
    /// Per-file hits saturate at 1 however many caches serve them.
    Inelastic,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Single => "single",
            RewardKind::Elastic => "elastic",
            RewardKind::Inelastic => "inelastic",
        }
    }
}

impl core::str::FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(RewardKind::Single),
            "elastic" => Ok(RewardKind::Elastic),
            "inelastic" => Ok(RewardKind::Inelastic),
            other => Err(Error::invalid(format!("unknown reward kind `{other}`"))),
        }
    }
}

/// Reward kind against topology and request multiplicity.
pub fn check_kind(kind: RewardKind, topology: &BipartiteTopology, r: usize) -> Result<()> {
    match kind {
        RewardKind::Single if !topology.is_single() => Err(Error::unsupported(
            "single-cache reward needs exactly one user and one cache",
        )),
        RewardKind::Inelastic if r != 1 => Err(Error::unsupported(format!(
            "inelastic reward is defined for one request per user per slot, got r = {r}"
        ))),
        _ => Ok(()),
    }
}

pub(crate) fn check_dimensions(
    kind: RewardKind,
    topology: &BipartiteTopology,
    batch: &RequestBatch,
    configs: &[CacheConfig],
) -> Result<()> {
    if configs.len() != topology.n_caches() {
        return Err(Error::Dimension {
            what: "cache configurations",
            expected: topology.n_caches(),
            got: configs.len(),
        });
    }
    let n = configs[0].n_files();
    if let Some(bad) = configs.iter().find(|c| c.n_files() != n) {
        return Err(Error::Dimension {
            what: "catalog size across caches",
            expected: n,
            got: bad.n_files(),
        });
    }
    batch.validate(topology.n_users(), n)?;
    check_kind(kind, topology, batch.r())
}

/// `q(x, y)` for one slot.
pub fn one_slot_reward(
    kind: RewardKind,
    topology: &BipartiteTopology,
    batch: &RequestBatch,
    configs: &[CacheConfig],
) -> Result<f64> {
    check_dimensions(kind, topology, batch, configs)?;
    Ok(slot_reward_unchecked(kind, topology, batch, configs))
}

/// [`one_slot_reward`] without dimension checks, for the hot loop.
pub(crate) fn slot_reward_unchecked(
    kind: RewardKind,
    topology: &BipartiteTopology,
    batch: &RequestBatch,
    configs: &[CacheConfig],
) -> f64 {
    let mut total = 0.0;
    for (user, files) in batch.users().enumerate() {
        let caches = topology.out_neighbors(user);
        for &f in files {
            let coverage: f64 = caches.iter().map(|&j| configs[j].get(f)).sum();
            total += match kind {
                RewardKind::Inelastic => coverage.min(1.0),
                _ => coverage,
            };
        }
    }
    total
}

/// `Q = sum_t q(x_t, y_t)`, compensated.
pub fn cumulative_reward(
    kind: RewardKind,
    topology: &BipartiteTopology,
    batches: &[RequestBatch],
    configs: &[Vec<CacheConfig>],
) -> Result<f64> {
    if batches.len() != configs.len() {
        return Err(Error::Dimension {
            what: "slots in configuration sequence",
            expected: batches.len(),
            got: configs.len(),
        });
    }
    let mut acc = KahanSum::new();
    for (batch, cfg) in batches.iter().zip(configs) {
        acc.add(one_slot_reward(kind, topology, batch, cfg)?);
    }
    Ok(acc.value())
}

/// Reward of a fixed configuration held for a whole sequence, from the
/// per-user cumulative request counts `counts[i][f]`.
///
/// Rewards are separable per (user, file) and linear in the requests, so a
/// static configuration only sees the counts.
pub fn static_reward_from_counts(
    kind: RewardKind,
    topology: &BipartiteTopology,
    counts: &[Vec<f64>],
    configs: &[CacheConfig],
) -> f64 {
    let mut acc = KahanSum::new();
    for (user, user_counts) in counts.iter().enumerate() {
        let caches = topology.out_neighbors(user);
        for (f, &n) in user_counts.iter().enumerate() {
            if n == 0.0 {
                continue;
            }
            let coverage: f64 = caches.iter().map(|&j| configs[j].occupancy()[f]).sum();
            acc.add(
                n * match kind {
                    RewardKind::Inelastic => coverage.min(1.0),
                    _ => coverage,
                },
            );
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FileId;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_cache_user() -> BipartiteTopology {
        BipartiteTopology::build(1, 2, &[(0, 0), (0, 1)]).unwrap()
    }

    #[test]
    fn single_full_hit() {
        let t = BipartiteTopology::single();
        let y = [CacheConfig::uncoded(3, 1, &[0]).unwrap()];
        let x = RequestBatch::one_hot(vec![0]);
        assert_eq!(one_slot_reward(RewardKind::Single, &t, &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn elastic_adds_inelastic_caps() {
        let t = two_cache_user();
        let y = [
            CacheConfig::uncoded(2, 1, &[0]).unwrap(),
            CacheConfig::uncoded(2, 1, &[0]).unwrap(),
        ];
        let x = RequestBatch::one_hot(vec![0]);
        assert_eq!(one_slot_reward(RewardKind::Elastic, &t, &x, &y).unwrap(), 2.0);
        assert_eq!(one_slot_reward(RewardKind::Inelastic, &t, &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn fractional_below_cap() {
        let t = two_cache_user();
        let y = [
            CacheConfig::from_occupancy(vec![0.4, 0.0], 1).unwrap(),
            CacheConfig::from_occupancy(vec![0.4, 0.0], 1).unwrap(),
        ];
        let x = RequestBatch::one_hot(vec![0]);
        assert_abs_diff_eq!(
            one_slot_reward(RewardKind::Elastic, &t, &x, &y).unwrap(),
            0.8,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            one_slot_reward(RewardKind::Inelastic, &t, &x, &y).unwrap(),
            0.8,
            epsilon = 1e-15
        );
    }

    #[test]
    fn inelastic_rejects_multiple_requests() {
        let t = BipartiteTopology::single();
        let y = [CacheConfig::empty(2, 1)];
        let x = RequestBatch::new(2, vec![0, 1]).unwrap();
        assert!(matches!(
            one_slot_reward(RewardKind::Inelastic, &t, &x, &y),
            Err(Error::Unsupported(_))
        ));
        assert!(one_slot_reward(RewardKind::Elastic, &t, &x, &y).is_ok());
    }

    #[test]
    fn single_kind_needs_single_topology() {
        let t = two_cache_user();
        let y = [CacheConfig::empty(2, 1), CacheConfig::empty(2, 1)];
        let x = RequestBatch::one_hot(vec![0]);
        assert!(one_slot_reward(RewardKind::Single, &t, &x, &y).is_err());
    }

    #[test]
    fn cumulative_basics() {
        let t = BipartiteTopology::single();
        assert_eq!(cumulative_reward(RewardKind::Single, &t, &[], &[]).unwrap(), 0.0);

        let fixed = vec![CacheConfig::uncoded(2, 1, &[0]).unwrap()];
        let same: Vec<_> = (0..7).map(|_| RequestBatch::one_hot(vec![0])).collect();
        let cfgs = vec![fixed.clone(); 7];
        assert_eq!(cumulative_reward(RewardKind::Single, &t, &same, &cfgs).unwrap(), 7.0);

        let alternating: Vec<_> = (0..10)
            .map(|t| RequestBatch::one_hot(vec![(t % 2) as FileId]))
            .collect();
        let cfgs = vec![fixed; 10];
        assert_eq!(
            cumulative_reward(RewardKind::Single, &t, &alternating, &cfgs).unwrap(),
            5.0
        );
        assert!(cumulative_reward(RewardKind::Single, &t, &alternating, &cfgs[..3]).is_err());
    }

    fn random_configs(n: usize, c: usize, seeds: &[Vec<f64>]) -> Vec<CacheConfig> {
        seeds
            .iter()
            .map(|raw| {
                let p = crate::geometry::project_capped_simplex(&raw[..n], c).unwrap();
                CacheConfig::from_occupancy(p.projected, c).unwrap()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn inelastic_dominated_by_elastic(
            raw in proptest::collection::vec(proptest::collection::vec(-0.5f64..1.5, 5), 4),
            requests in proptest::collection::vec(0u32..5, 10),
        ) {
            let t = crate::paper_topology_preset();
            let y = random_configs(5, 2, &raw);
            let x = RequestBatch::one_hot(requests);
            let e = one_slot_reward(RewardKind::Elastic, &t, &x, &y).unwrap();
            let i = one_slot_reward(RewardKind::Inelastic, &t, &x, &y).unwrap();
            prop_assert!(i <= e + 1e-12);
            prop_assert!((0.0..=10.0 + 1e-12).contains(&i));
        }

        #[test]
        fn disjoint_supports_make_rewards_equal(
            perm in Just((0u32..8).collect::<Vec<_>>()).prop_shuffle(),
            requests in proptest::collection::vec(0u32..8, 10),
        ) {
            let t = crate::paper_topology_preset();
            let y: Vec<_> = perm
                .chunks(2)
                .map(|files| CacheConfig::uncoded(8, 2, files).unwrap())
                .collect();
            let x = RequestBatch::one_hot(requests);
            let e = one_slot_reward(RewardKind::Elastic, &t, &x, &y).unwrap();
            let i = one_slot_reward(RewardKind::Inelastic, &t, &x, &y).unwrap();
            prop_assert_eq!(e, i);
        }

        #[test]
        fn elastic_is_linear(
            a in proptest::collection::vec(proptest::collection::vec(-0.5f64..1.5, 5), 4),
            b in proptest::collection::vec(proptest::collection::vec(-0.5f64..1.5, 5), 4),
            lambda in 0.0f64..1.0,
            requests in proptest::collection::vec(0u32..5, 10),
        ) {
            let t = crate::paper_topology_preset();
            let (ya, yb) = (random_configs(5, 2, &a), random_configs(5, 2, &b));
            let mix: Vec<_> = ya
                .iter()
                .zip(&yb)
                .map(|(p, q)| {
                    let occ = p.occupancy().iter().zip(q.occupancy())
                        .map(|(u, v)| lambda * u + (1.0 - lambda) * v)
                        .collect();
                    CacheConfig::from_occupancy(occ, 2).unwrap()
                })
                .collect();
            let x = RequestBatch::one_hot(requests);
            let q = |y: &[CacheConfig]| one_slot_reward(RewardKind::Elastic, &t, &x, y).unwrap();
            prop_assert!((q(&mix) - (lambda * q(&ya) + (1.0 - lambda) * q(&yb))).abs() < 1e-9);
        }
    }
}
