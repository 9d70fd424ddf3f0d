//! End-to-end policy runs through the harness.

use cache_regret_core::adversary::{alternating_sequence, uniform_support_sequence};
use cache_regret_core::harness::{run_replication, CheckpointGrid, Instance, RunOptions};
use cache_regret_core::policies::{PolicyKind, PolicySpec};
use cache_regret_core::{BipartiteTopology, RequestBatch, RewardKind, RunResult};

fn all_policies() -> Vec<PolicySpec> {
    PolicyKind::ALL.iter().map(|&k| PolicySpec::new(k)).collect()
}

fn run(topology: &BipartiteTopology, reward: RewardKind, batches: &[RequestBatch], seed: u64) -> Vec<RunResult> {
    let instance = Instance {
        reward,
        topology,
        n_files: 6,
        capacity: 2,
    };
    let options = RunOptions {
        grid: CheckpointGrid::EverySlot,
        ..RunOptions::default()
    };
    let policies = [PolicyKind::Lru, PolicyKind::Lfu, PolicyKind::Fifo, PolicyKind::Oga]
        .into_iter()
        .map(PolicySpec::new)
        .collect::<Vec<_>>();
    run_replication(&instance, &policies, batches, 0, seed, &options).unwrap()
}

#[test]
fn same_seed_same_result() {
    let single = BipartiteTopology::single();
    let batches = uniform_support_sequence(500, 4, 1, 6, 17).unwrap();
    let instance = Instance {
        reward: RewardKind::Single,
        topology: &single,
        n_files: 6,
        capacity: 2,
    };
    let a = run_replication(&instance, &all_policies(), &batches, 0, 5, &RunOptions::default()).unwrap();
    let b = run_replication(&instance, &all_policies(), &batches, 0, 5, &RunOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 6);
    for r in &a {
        assert!(r.regret() >= -1e-9, "{} gained on the hindsight optimum", r.policy);
    }
}

#[test]
fn alternating_defeats_demand_policies() {
    let single = BipartiteTopology::single();
    let batches = alternating_sequence(101).unwrap();
    let instance = Instance {
        reward: RewardKind::Single,
        topology: &single,
        n_files: 2,
        capacity: 1,
    };
    let policies: Vec<_> = [PolicyKind::Lru, PolicyKind::Lfu, PolicyKind::Fifo]
        .into_iter()
        .map(PolicySpec::new)
        .collect();
    for r in run_replication(&instance, &policies, &batches, 0, 0, &RunOptions::default()).unwrap() {
        assert_eq!(r.cumulative_reward, 0.0);
        assert_eq!(r.regret(), 51.0);
    }
}

#[test]
fn disjoint_caches_decompose() {
    let pair = BipartiteTopology::build(2, 2, &[(0, 0), (1, 1)]).unwrap();
    let single = BipartiteTopology::single();
    let a = uniform_support_sequence(300, 5, 1, 6, 1).unwrap();
    let b = uniform_support_sequence(300, 6, 1, 6, 2).unwrap();
    let joint: Vec<RequestBatch> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| RequestBatch::one_hot(vec![x.files()[0], y.files()[0]]))
        .collect();

    let together = run(&pair, RewardKind::Elastic, &joint, 3);
    let alone_a = run(&single, RewardKind::Single, &a, 3);
    let alone_b = run(&single, RewardKind::Single, &b, 3);
    for ((j, x), y) in together.iter().zip(&alone_a).zip(&alone_b) {
        assert_eq!(j.policy, x.policy);
        for ((cj, cx), cy) in j.checkpoints.iter().zip(&x.checkpoints).zip(&y.checkpoints) {
            assert!((cj.cum_reward - cx.cum_reward - cy.cum_reward).abs() < 1e-9, "{}", j.policy);
            assert!((cj.hindsight_reward - cx.hindsight_reward - cy.hindsight_reward).abs() < 1e-9);
        }
    }
}
