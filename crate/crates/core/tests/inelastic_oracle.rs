//! Inelastic hindsight ascent against exhaustive enumeration of uncoded
//! configurations on tiny random instances.

use cache_regret_core::hindsight::{
    brute_force_inelastic, per_user_counts, static_opt_inelastic, InelasticAscent, InelasticSolver,
};
use cache_regret_core::rewards::{one_slot_reward, RewardKind};
use cache_regret_core::{BipartiteTopology, CacheConfig, RequestBatch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Tiny {
    topology: BipartiteTopology,
    n_files: usize,
    capacity: usize,
    batches: Vec<RequestBatch>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Tiny {
    let n_files = rng.random_range(2..=6);
    let capacity = rng.random_range(1..=2usize.min(n_files));
    let n_caches = rng.random_range(1..=2);
    let n_users = rng.random_range(1..=3);
    let mut edges = Vec::new();
    for u in 0..n_users {
        for c in 0..n_caches {
            if rng.random_bool(0.6) {
                edges.push((u, c));
            }
        }
        if !edges.iter().any(|&(x, _)| x == u) {
            edges.push((u, rng.random_range(0..n_caches)));
        }
    }
    let topology = BipartiteTopology::build(n_users, n_caches, &edges).unwrap();
    let horizon = rng.random_range(1..=20);
    // skewed draws so instances have structure
    let batches = (0..horizon)
        .map(|_| {
            RequestBatch::one_hot(
                (0..n_users)
                    .map(|_| {
                        let a = rng.random_range(0..n_files);
                        let b = rng.random_range(0..n_files);
                        a.min(b) as u32
                    })
                    .collect(),
            )
        })
        .collect();
    Tiny {
        topology,
        n_files,
        capacity,
        batches,
    }
}

fn cumulative(kind: RewardKind, tiny: &Tiny, configs: &[CacheConfig]) -> f64 {
    tiny.batches
        .iter()
        .map(|b| one_slot_reward(kind, &tiny.topology, b, configs).unwrap())
        .sum()
}

fn as_configs(y: &[Vec<f64>], capacity: usize) -> Vec<CacheConfig> {
    y.iter()
        .map(|v| CacheConfig::from_occupancy(v.clone(), capacity).unwrap())
        .collect()
}

#[test]
fn ascent_reaches_best_uncoded_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let tiny = random_instance(&mut rng);
        let counts = per_user_counts(tiny.topology.n_users(), tiny.n_files, &tiny.batches).unwrap();
        let brute = brute_force_inelastic(&tiny.topology, &counts, tiny.capacity).unwrap();
        let ascent = static_opt_inelastic(
            &tiny.topology,
            &tiny.batches,
            tiny.n_files,
            tiny.capacity,
            &InelasticSolver::default(),
        )
        .unwrap();
        assert!(
            ascent.reward >= brute.reward - 1e-6,
            "case {case}: ascent {} < brute {}",
            ascent.reward,
            brute.reward
        );
        let recomputed = cumulative(RewardKind::Inelastic, &tiny, &ascent.configs);
        assert!((recomputed - ascent.reward).abs() <= 1e-6 * recomputed.max(1.0));
        assert!(ascent.configs.iter().all(CacheConfig::is_feasible));
    }
}

#[test]
fn inelastic_never_exceeds_elastic_along_the_ascent() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let tiny = random_instance(&mut rng);
        let counts = per_user_counts(tiny.topology.n_users(), tiny.n_files, &tiny.batches).unwrap();
        let mut ascent = InelasticAscent::new(&tiny.topology, &counts, tiny.capacity).unwrap();
        for _ in 0..100 {
            ascent.step();
            let configs = as_configs(ascent.best(), tiny.capacity);
            for b in &tiny.batches {
                let e = one_slot_reward(RewardKind::Elastic, &tiny.topology, b, &configs).unwrap();
                let i = one_slot_reward(RewardKind::Inelastic, &tiny.topology, b, &configs).unwrap();
                assert!(i <= e + 1e-12);
            }
        }
    }
}

#[test]
fn brute_force_mode_is_at_least_uncoded_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let tiny = random_instance(&mut rng);
        let counts = per_user_counts(tiny.topology.n_users(), tiny.n_files, &tiny.batches).unwrap();
        let brute = brute_force_inelastic(&tiny.topology, &counts, tiny.capacity).unwrap();
        let solver = InelasticSolver {
            brute_force: true,
            ..InelasticSolver::default()
        };
        let s = static_opt_inelastic(&tiny.topology, &tiny.batches, tiny.n_files, tiny.capacity, &solver).unwrap();
        assert!(s.reward >= brute.reward);
    }
}
