//! Sequential driver: runs policies over a request sequence and reports
//! regret against the best static configuration on every checkpoint prefix.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::hindsight::{aggregate_counts, static_opt, InelasticSolver, DEFAULT_ASCENT_ITERATIONS};
use crate::math::{ceil, exp, ln, sqrt, KahanSum};
use crate::model::{BipartiteTopology, Checkpoint, RequestBatch, RunResult};
use crate::policies::{Policy, PolicyContext, PolicySpec};
use crate::rewards::{check_dimensions, check_kind, slot_reward_unchecked, RewardKind};
use crate::{Error, Result};

/// Default number of log-spaced checkpoints (the horizon is always added).
pub const DEFAULT_CHECKPOINTS: usize = 50;

/// Inelastic ascent budget at checkpoints before the horizon.
pub const INTERMEDIATE_ASCENT_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckpointGrid {
    /// `n` points spaced evenly in `log t` over `1..=T`, plus `T`.
    LogSpaced(usize),
    EverySlot,
    /// Given slots; out-of-range entries are dropped and `T` is added.
    Explicit(Vec<usize>),
}

impl Default for CheckpointGrid {
    fn default() -> Self {
        CheckpointGrid::LogSpaced(DEFAULT_CHECKPOINTS)
    }
}

/// Sorted, deduplicated checkpoint slots ending at `horizon`.
pub fn checkpoint_grid(horizon: usize, grid: &CheckpointGrid) -> Vec<usize> {
    if horizon == 0 {
        return Vec::new();
    }
    let mut points: Vec<usize> = match grid {
        CheckpointGrid::EverySlot => (1..=horizon).collect(),
        CheckpointGrid::Explicit(points) => points.iter().copied().filter(|&t| t >= 1 && t <= horizon).collect(),
        CheckpointGrid::LogSpaced(n) => {
            let n = *n;
            let top = ln(horizon as f64);
            (0..n)
                .map(|k| {
                    let frac = if n > 1 { k as f64 / (n - 1) as f64 } else { 1.0 };
                    (ceil(exp(top * frac) - 1e-9) as usize).clamp(1, horizon)
                })
                .collect()
        }
    };
    points.push(horizon);
    points.sort_unstable();
    points.dedup();
    points
}

/// What the driver computes besides the checkpoint series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub grid: CheckpointGrid,
    pub keep_per_slot: bool,
    /// Inelastic ascent iterations at the horizon.
    pub final_iterations: usize,
    /// Inelastic ascent iterations at earlier checkpoints.
    pub intermediate_iterations: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            grid: CheckpointGrid::default(),
            keep_per_slot: false,
            final_iterations: DEFAULT_ASCENT_ITERATIONS,
            intermediate_iterations: INTERMEDIATE_ASCENT_ITERATIONS,
        }
    }
}

/// The instance a sequence is played on.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub reward: RewardKind,
    pub topology: &'a BipartiteTopology,
    pub n_files: usize,
    pub capacity: usize,
}

impl Instance<'_> {
    fn validate(&self, batches: &[RequestBatch]) -> Result<()> {
        if self.capacity == 0 || self.n_files == 0 {
            return Err(Error::invalid("capacity and catalog size must be positive"));
        }
        for b in batches {
            b.validate(self.topology.n_users(), self.n_files)?;
            check_kind(self.reward, self.topology, b.r())?;
        }
        Ok(())
    }
}

/// Hindsight reward on the prefix ending at every checkpoint.
pub fn hindsight_at_checkpoints(
    instance: &Instance<'_>,
    batches: &[RequestBatch],
    checkpoints: &[usize],
    options: &RunOptions,
) -> Result<Vec<f64>> {
    instance.validate(batches)?;
    let topology = instance.topology;
    let mut counts = vec![vec![0.0; instance.n_files]; topology.n_users()];
    let mut next = 0;
    let mut out = Vec::with_capacity(checkpoints.len());
    for &cp in checkpoints {
        if cp > batches.len() {
            return Err(Error::invalid("checkpoint beyond the sequence"));
        }
        for batch in &batches[next..cp] {
            for (user, files) in batch.users().enumerate() {
                for &f in files {
                    counts[user][f as usize] += 1.0;
                }
            }
        }
        next = cp;
        let iterations = if cp == batches.len() {
            options.final_iterations
        } else {
            options.intermediate_iterations
        };
        let solver = InelasticSolver::with_iterations(iterations);
        let value = match instance.reward {
            // top-C sums need only the per-cache aggregates
            RewardKind::Single | RewardKind::Elastic => {
                let agg = aggregate_counts(topology, &counts)?;
                let mut scratch = Vec::new();
                agg.iter()
                    .map(|a| {
                        crate::policies::top_k(a, instance.capacity, &mut scratch);
                        scratch.iter().map(|&f| a[f as usize]).sum::<f64>()
                    })
                    .collect::<KahanSum>()
                    .value()
            }
            RewardKind::Inelastic => static_opt(instance.reward, topology, &counts, instance.capacity, &solver)?.reward,
        };
        out.push(value);
    }
    Ok(out)
}

/// Plays `policy` over `batches`: commit, score, observe, slot by slot.
/// `hindsight[k]` is the comparator at `checkpoints[k]`.
#[allow(clippy::too_many_arguments)]
pub fn run_policy(
    policy: &mut dyn Policy,
    instance: &Instance<'_>,
    batches: &[RequestBatch],
    checkpoints: &[usize],
    hindsight: &[f64],
    replication: usize,
    seed: u64,
    keep_per_slot: bool,
) -> Result<RunResult> {
    if checkpoints.len() != hindsight.len() {
        return Err(Error::Dimension {
            what: "hindsight values per checkpoint",
            expected: checkpoints.len(),
            got: hindsight.len(),
        });
    }
    let mut per_slot = Vec::new();
    let mut cumulative = KahanSum::new();
    let mut series = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0;
    for (index, batch) in batches.iter().enumerate() {
        let t = index + 1;
        let configs = policy.commit(t)?;
        if index == 0 {
            check_dimensions(instance.reward, instance.topology, batch, configs)?;
        }
        let q = slot_reward_unchecked(instance.reward, instance.topology, batch, configs);
        policy.observe(batch)?;
        cumulative.add(q);
        if keep_per_slot {
            per_slot.push(q);
        }
        if next_cp < checkpoints.len() && checkpoints[next_cp] == t {
            series.push(Checkpoint::new(t, cumulative.value(), hindsight[next_cp]));
            next_cp += 1;
        }
    }
    Ok(RunResult {
        policy: String::from(policy.label()),
        replication,
        seed,
        horizon: batches.len(),
        per_slot_reward: per_slot,
        cumulative_reward: cumulative.value(),
        hindsight_reward: hindsight.last().copied().unwrap_or(0.0),
        checkpoints: series,
    })
}

/// Every policy in `policies` on one shared sequence; the hindsight series
/// is computed once.
pub fn run_replication(
    instance: &Instance<'_>,
    policies: &[PolicySpec],
    batches: &[RequestBatch],
    replication: usize,
    seed: u64,
    options: &RunOptions,
) -> Result<Vec<RunResult>> {
    if batches.is_empty() {
        return Err(Error::invalid("empty request sequence"));
    }
    let checkpoints = checkpoint_grid(batches.len(), &options.grid);
    let hindsight = hindsight_at_checkpoints(instance, batches, &checkpoints, options)?;
    let ctx = PolicyContext {
        reward: instance.reward,
        topology: instance.topology,
        n_files: instance.n_files,
        capacity: instance.capacity,
        horizon: batches.len(),
        seed,
    };
    policies
        .iter()
        .map(|spec| {
            let mut policy = spec.build(&ctx)?;
            let mut result = run_policy(
                policy.as_mut(),
                instance,
                batches,
                &checkpoints,
                &hindsight,
                replication,
                seed,
                options.keep_per_slot,
            )?;
            result.policy = spec.label();
            Ok(result)
        })
        .collect()
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMean {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl SampleMean {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
                n,
            };
        }
        let mean = values.iter().copied().collect::<KahanSum>().value() / n as f64;
        let std_error = if n > 1 {
            let ss = values.iter().map(|v| (v - mean) * (v - mean)).collect::<KahanSum>().value();
            sqrt(ss / (n - 1) as f64 / n as f64)
        } else {
            0.0
        };
        Self { mean, std_error, n }
    }
}

/// Per-policy, per-checkpoint regret averaged over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSummary {
    pub policy: String,
    pub t: usize,
    pub regret: SampleMean,
}

impl RegretSummary {
    pub fn avg_regret(&self) -> f64 {
        self.regret.mean / self.t as f64
    }
}

/// Groups `results` by policy (first-appearance order) and averages the
/// regret at each checkpoint shared by all replications.
pub fn summarize(results: &[RunResult]) -> Vec<RegretSummary> {
    let mut policies: Vec<&str> = Vec::new();
    for r in results {
        if !policies.contains(&r.policy.as_str()) {
            policies.push(&r.policy);
        }
    }
    let mut out = Vec::new();
    for name in policies {
        let runs: Vec<&RunResult> = results.iter().filter(|r| r.policy == name).collect();
        for cp in &runs[0].checkpoints {
            let values: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.checkpoints.iter().find(|c| c.t == cp.t).map(|c| c.regret))
                .collect();
            if values.len() == runs.len() {
                out.push(RegretSummary {
                    policy: String::from(name),
                    t: cp.t,
                    regret: SampleMean::of(values),
                });
            }
        }
    }
    out
}
