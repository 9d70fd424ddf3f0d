//! Experiment specification and the parallel (replication x policy) grid.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use cache_regret_core::adversary::{
    adversarial_support, broadcast, alternating_sequence, identical_users_sequence, independent_users_sequence,
};
use cache_regret_core::harness::{run_replication, summarize, CheckpointGrid, Instance, RunOptions};
use cache_regret_core::policies::PolicySpec;
use cache_regret_core::rng::mix_seed;
use cache_regret_core::trace::{capacity_from_alpha, partition_blocks, zipf_users_sequence};
use cache_regret_core::{paper_topology_preset, BipartiteTopology, RequestBatch, RewardKind, RunResult};
use rayon::prelude::*;

use crate::trace_io::{load_trace, TraceFormat};
use crate::usage_bail;

/// Environment variable consulted when `--jobs` is absent.
pub const JOBS_ENV: &str = "CACHE_REGRET_JOBS";

/// Catalog size of Zipf workloads when none is given.
pub const DEFAULT_ZIPF_FILES: usize = 3700;

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySource {
    Single,
    Paper,
    File(PathBuf),
}

impl FromStr for TopologySource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(TopologySource::Single),
            "paper" => Ok(TopologySource::Paper),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(TopologySource::File(path.into())),
                _ => bail!("topology must be single, paper or file:PATH, got `{s}`"),
            },
        }
    }
}

impl TopologySource {
    pub fn load(&self) -> Result<BipartiteTopology> {
        match self {
            TopologySource::Single => Ok(BipartiteTopology::single()),
            TopologySource::Paper => Ok(paper_topology_preset()),
            TopologySource::File(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                parse_topology(&text).with_context(|| format!("in {}", path.display()))
            }
        }
    }
}

/// Topology text format: a `n_users n_caches` line followed by one
/// `user cache` edge per line, 0-indexed; `#` starts a comment.
pub fn parse_topology(text: &str) -> Result<BipartiteTopology> {
    let mut dims = None;
    let mut edges = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<usize> = line
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| anyhow!("line {}: `{w}` is not an index", index + 1)))
            .collect::<Result<_>>()?;
        if nums.len() != 2 {
            bail!("line {}: expected two integers", index + 1);
        }
        if dims.is_none() {
            dims = Some((nums[0], nums[1]));
        } else {
            edges.push((nums[0], nums[1]));
        }
    }
    let (users, caches) = dims.ok_or_else(|| anyhow!("empty topology file"))?;
    Ok(BipartiteTopology::build(users, caches, &edges)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSource {
    /// Independent uniform draws per user from the first `2C` files.
    Uniform2C,
    /// One uniform draw shared by all users, over `2C` files (`2C|J|` for
    /// inelastic rewards).
    Identical,
    Alternating,
    Zipf(f64),
    Trace(PathBuf),
}

impl FromStr for SequenceSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform2c" => Ok(SequenceSource::Uniform2C),
            "identical" => Ok(SequenceSource::Identical),
            "alternating" => Ok(SequenceSource::Alternating),
            _ => {
                if let Some(e) = s.strip_prefix("zipf:") {
                    let e: f64 = e.parse().map_err(|_| anyhow!("bad Zipf exponent `{e}`"))?;
                    if !(e.is_finite() && e >= 0.0) {
                        bail!("Zipf exponent must be finite and nonnegative");
                    }
                    Ok(SequenceSource::Zipf(e))
                } else if let Some(path) = s.strip_prefix("trace:").filter(|p| !p.is_empty()) {
                    Ok(SequenceSource::Trace(path.into()))
                } else {
                    bail!("sequence must be uniform2c, identical, alternating, zipf:EXP or trace:PATH, got `{s}`")
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapacitySpec {
    Absolute(usize),
    /// `C = max(1, round(alpha N))`.
    Alpha(f64),
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub reward: RewardKind,
    pub topology: BipartiteTopology,
    pub sequence: SequenceSource,
    pub policies: Vec<PolicySpec>,
    /// `None` replays the whole available sequence (traces only).
    pub horizon: Option<usize>,
    /// Catalog size; `None` picks the smallest that fits the sequence.
    pub n_files: Option<usize>,
    pub capacity: CapacitySpec,
    pub r: usize,
    pub replications: usize,
    pub seed: u64,
    pub grid: CheckpointGrid,
    pub jobs: Option<usize>,
}

/// A trace loaded once and shared by all replications.
#[derive(Debug, Clone)]
struct Prepared {
    n_files: usize,
    capacity: usize,
    horizon: usize,
    fixed: Option<Vec<RequestBatch>>,
}

impl ExperimentSpec {
    fn prepare(&self) -> Result<Prepared> {
        if self.replications == 0 {
            usage_bail!("replications must be at least 1");
        }
        if self.policies.is_empty() {
            usage_bail!("no policies given");
        }
        if self.r == 0 {
            usage_bail!("r must be at least 1");
        }
        let n_users = self.topology.n_users();
        if let SequenceSource::Trace(path) = &self.sequence {
            let trace = load_trace(path, TraceFormat::Csv)?;
            let batches = partition_blocks(&trace.events, n_users)?;
            let n_files = match self.n_files {
                Some(n) if n < trace.n_files => usage_bail!("--N {n} is below the trace catalog size {}", trace.n_files),
                Some(n) => n,
                None => trace.n_files,
            };
            let horizon = match self.horizon {
                Some(t) if t > batches.len() => {
                    usage_bail!("trace yields {} slots for {n_users} users, fewer than T = {t}", batches.len())
                }
                Some(t) => t,
                None => batches.len(),
            };
            let capacity = self.resolve_capacity(n_files)?;
            return Ok(Prepared {
                n_files,
                capacity,
                horizon,
                fixed: Some(batches[..horizon].to_vec()),
            });
        }
        let horizon = self
            .horizon
            .ok_or_else(|| crate::usage("T = auto is only meaningful for trace sequences"))?;
        if horizon == 0 {
            usage_bail!("T must be positive");
        }
        let n_files = match (self.n_files, self.capacity) {
            (Some(n), _) => n,
            (None, CapacitySpec::Alpha(_)) => match self.sequence {
                SequenceSource::Zipf(_) => DEFAULT_ZIPF_FILES,
                _ => usage_bail!("--alpha needs --N for this sequence"),
            },
            (None, CapacitySpec::Absolute(c)) => match self.sequence {
                SequenceSource::Uniform2C => 2 * c,
                SequenceSource::Identical => adversarial_support(self.reward, c, self.topology.n_caches()),
                SequenceSource::Alternating => 2,
                SequenceSource::Zipf(_) => DEFAULT_ZIPF_FILES,
                SequenceSource::Trace(_) => unreachable!(),
            },
        };
        let capacity = self.resolve_capacity(n_files)?;
        Ok(Prepared {
            n_files,
            capacity,
            horizon,
            fixed: None,
        })
    }

    fn resolve_capacity(&self, n_files: usize) -> Result<usize> {
        match self.capacity {
            CapacitySpec::Absolute(0) => usage_bail!("C must be positive"),
            CapacitySpec::Absolute(c) => Ok(c),
            CapacitySpec::Alpha(a) => Ok(capacity_from_alpha(a, n_files)?),
        }
    }

    fn generate(&self, p: &Prepared, seed: u64) -> Result<Vec<RequestBatch>> {
        if let Some(fixed) = &p.fixed {
            return Ok(fixed.clone());
        }
        let n_users = self.topology.n_users();
        let batches = match self.sequence {
            SequenceSource::Uniform2C => {
                independent_users_sequence(n_users, p.horizon, 2 * p.capacity, self.r, p.n_files, seed)?
            }
            SequenceSource::Identical => {
                if self.r != 1 {
                    usage_bail!("the identical-users sequence has r = 1");
                }
                let support = adversarial_support(self.reward, p.capacity, self.topology.n_caches());
                identical_users_sequence(&self.topology, p.horizon, support, p.n_files, seed)?
            }
            SequenceSource::Alternating => {
                if p.n_files < 2 {
                    usage_bail!("the alternating sequence needs N >= 2");
                }
                broadcast(&alternating_sequence(p.horizon)?, n_users)
            }
            SequenceSource::Zipf(e) => zipf_users_sequence(n_users, p.n_files, e, p.horizon, seed)?,
            SequenceSource::Trace(_) => unreachable!(),
        };
        Ok(batches)
    }
}

/// Seed of replication `k`.
pub fn replication_seed(base: u64, replication: usize) -> u64 {
    mix_seed(base, replication as u64)
}

/// Threads to use: `--jobs`, else `CACHE_REGRET_JOBS`, else all cores.
pub fn resolve_jobs(jobs: Option<usize>) -> Result<usize> {
    if let Some(j) = jobs {
        if j == 0 {
            usage_bail!("--jobs must be positive");
        }
        return Ok(j);
    }
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&j| j > 0)
            .ok_or_else(|| crate::usage(format!("{JOBS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `f` on a dedicated pool of `jobs` threads.
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start worker threads")?;
    Ok(pool.install(f))
}

/// The realized instance parameters after resolving defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedInstance {
    pub n_files: usize,
    pub capacity: usize,
    pub horizon: usize,
}

/// Every policy on every replication. Rows are ordered by replication,
/// then by the policy order of the spec, whatever the thread schedule.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(ResolvedInstance, Vec<RunResult>)> {
    let prepared = spec.prepare()?;
    let instance = Instance {
        reward: spec.reward,
        topology: &spec.topology,
        n_files: prepared.n_files,
        capacity: prepared.capacity,
    };
    let options = RunOptions {
        grid: spec.grid.clone(),
        ..RunOptions::default()
    };
    let jobs = resolve_jobs(spec.jobs)?;
    let per_rep: Vec<Result<Vec<RunResult>>> = with_pool(jobs, || {
        (0..spec.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(spec.seed, rep);
                let batches = spec.generate(&prepared, seed)?;
                Ok(run_replication(&instance, &spec.policies, &batches, rep, seed, &options)?)
            })
            .collect()
    })?;
    let mut results = Vec::with_capacity(spec.replications * spec.policies.len());
    for rep in per_rep {
        results.extend(rep?);
    }
    Ok((
        ResolvedInstance {
            n_files: prepared.n_files,
            capacity: prepared.capacity,
            horizon: prepared.horizon,
        },
        results,
    ))
}

/// One row of a capacity sweep: regret at the horizon averaged over
/// replications.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub capacity: usize,
    pub policy: String,
    pub horizon: usize,
    pub mean_regret: f64,
    pub std_error: f64,
}

impl SweepRow {
    pub fn avg_regret(&self) -> f64 {
        self.mean_regret / self.horizon as f64
    }
}

/// Reruns `spec` with `C = max(1, round(alpha N))` for every alpha.
pub fn capacity_sweep(spec: &ExperimentSpec, alphas: &[f64]) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        usage_bail!("no alphas given");
    }
    let mut rows = Vec::new();
    for &alpha in alphas {
        let run = ExperimentSpec {
            capacity: CapacitySpec::Alpha(alpha),
            ..spec.clone()
        };
        let (resolved, results) = run_experiment(&run)?;
        for s in summarize(&results).into_iter().filter(|s| s.t == resolved.horizon) {
            rows.push(SweepRow {
                alpha,
                capacity: resolved.capacity,
                policy: s.policy,
                horizon: s.t,
                mean_regret: s.regret.mean,
                std_error: s.regret.std_error,
            });
        }
    }
    Ok(rows)
}

/// Policies whose horizon regret decreases somewhere along the sweep.
pub fn non_monotone_policies(rows: &[SweepRow]) -> Vec<String> {
    let mut names: Vec<&str> = rows.iter().map(|r| r.policy.as_str()).collect();
    names.dedup();
    names.sort_unstable();
    names.dedup();
    names
        .into_iter()
        .filter(|name| {
            let mut series: Vec<&SweepRow> = rows.iter().filter(|r| r.policy == *name).collect();
            series.sort_by_key(|r| r.capacity);
            series.windows(2).any(|w| w[1].mean_regret < w[0].mean_regret)
        })
        .map(String::from)
        .collect()
}

pub fn read_alphas(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|a| {
            let v: f64 = a.trim().parse().map_err(|_| anyhow!("bad alpha `{a}`"))?;
            if !(v > 0.0 && v <= 1.0) {
                usage_bail!("alpha {v} is outside (0, 1]");
            }
            Ok(v)
        })
        .collect()
}

pub fn path_display(path: &Path) -> String {
    path.display().to_string()
}
