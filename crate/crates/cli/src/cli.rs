//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use cache_regret_core::bounds::{
    balls_into_bins_shard, bound_table, check_mc, lemma1_lower_bound, mad_exact, mad_lower_bound,
    regret_upper_bound, shard_count, BinsMode, BoundParams, BoundPolicy, BoundSetting, ShardSums,
};
use cache_regret_core::geometry::InelasticGradient;
use cache_regret_core::harness::CheckpointGrid;
use cache_regret_core::policies::{PolicyKind, PolicySpec};
use cache_regret_core::trace::partition_blocks;
use cache_regret_core::RewardKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::experiment::{
    capacity_sweep, non_monotone_policies, read_alphas, resolve_jobs, run_experiment, with_pool, CapacitySpec,
    ExperimentSpec, SequenceSource, TopologySource,
};
use crate::output::{fmt_num, write_bounds_csv, write_results_csv, write_results_json, write_table, write_table_json, Format};
use crate::trace_io::{load_trace, write_canonical, TraceFormat};
use crate::{exit_code, usage_bail};

#[derive(Debug, Parser)]
#[command(name = "cache-regret", version, about = "Regret of online caching policies, simulated and bounded")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Master seed; every random draw derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, default_value = "csv", value_parser = parse_with::<Format>)]
    pub format: Format,

    /// Omit the `# generated_unix=` line.
    #[arg(long, global = true)]
    pub no_header_meta: bool,

    /// Worker threads (default: $CACHE_REGRET_JOBS, else all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run policies against a request sequence and report regret.
    Simulate(SimulateArgs),
    /// Closed-form regret bounds.
    Bounds(BoundsArgs),
    /// Monte Carlo of the top-C load of T balls in 2C bins.
    Ballsbins(BallsbinsArgs),
    /// Mean absolute deviation of Bin(T, 1/2) against its lower bound.
    Mad(MadArgs),
    /// Convert a raw trace to the canonical per-user CSV.
    TraceConvert(TraceConvertArgs),
    /// Horizon regret for a list of capacity fractions.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_parser = parse_with::<RewardKind>)]
    pub reward: RewardKind,

    /// single, paper or file:PATH
    #[arg(long, default_value = "single", value_parser = parse_with::<TopologySource>)]
    pub topology: TopologySource,

    #[arg(
        long,
        default_value = "lru,lfu,fifo,ftpl,oga,static",
        value_delimiter = ',',
        value_parser = parse_with::<PolicyKind>
    )]
    pub policies: Vec<PolicyKind>,

    /// uniform2c, identical, alternating, zipf:EXP or trace:PATH
    #[arg(long, value_parser = parse_with::<SequenceSource>)]
    pub sequence: SequenceSource,

    /// Horizon, or `auto` for the full length of a trace.
    #[arg(long = "T", value_parser = parse_horizon)]
    pub horizon: Horizon,

    /// Catalog size (default depends on the sequence).
    #[arg(long = "N")]
    pub n_files: Option<usize>,

    /// Requests per user and slot.
    #[arg(long, default_value_t = 1)]
    pub r: usize,

    #[arg(long, default_value_t = 1)]
    pub reps: usize,

    /// Overrides the prescribed FTPL noise scale and OGA step size.
    #[arg(long)]
    pub eta: Option<f64>,

    /// Start LRU, LFU and FIFO from a random full cache.
    #[arg(long)]
    pub warm_start: bool,

    /// Inelastic OGA supergradient: masked or unmasked.
    #[arg(long, default_value = "masked", value_parser = parse_gradient)]
    pub inelastic_grad: InelasticGradient,

    /// Number of log-spaced checkpoints, or `all`.
    #[arg(long, default_value = "50", value_parser = parse_grid)]
    pub checkpoints: CheckpointGrid,

    /// Files held by the static policy (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub static_files: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Args)]
#[group(id = "capacity_choice", required = true, multiple = false)]
pub struct CapacityArgs {
    #[arg(long = "C")]
    pub capacity: Option<usize>,

    /// Capacity as a fraction of the catalog, `C = max(1, round(alpha N))`.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,

    #[command(flatten)]
    pub capacity: CapacityArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Comma-separated capacity fractions in (0, 1].
    #[arg(long)]
    pub alphas: String,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// theorem1, single, elastic or inelastic; `ftpl-inelastic` is rejected.
    #[arg(long)]
    pub setting: String,

    #[arg(long = "T")]
    pub horizon: usize,

    #[arg(long = "C", default_value_t = 1)]
    pub capacity: usize,

    /// Catalog size (default 2C).
    #[arg(long = "N")]
    pub n_files: Option<usize>,

    /// Right degree of the topology.
    #[arg(long, default_value_t = 1)]
    pub d: usize,

    /// Number of caches.
    #[arg(long = "J", default_value_t = 1)]
    pub n_caches: usize,

    /// Takes d and J from a right-regular topology.
    #[arg(long, value_parser = parse_with::<TopologySource>, conflicts_with_all = ["d", "n_caches"])]
    pub topology: Option<TopologySource>,

    #[arg(long, default_value_t = 1)]
    pub r: usize,

    /// Upper bounds to report: all, ftpl or oga.
    #[arg(long, default_value = "all")]
    pub policy: String,
}

#[derive(Debug, Args)]
pub struct BallsbinsArgs {
    #[arg(long = "T")]
    pub horizon: usize,

    #[arg(long = "C")]
    pub capacity: usize,

    #[arg(long)]
    pub trials: u64,

    #[arg(long, default_value = "exact", value_parser = parse_with::<BinsMode>)]
    pub mode: BinsMode,
}

#[derive(Debug, Args)]
pub struct MadArgs {
    #[arg(long = "Tmax")]
    pub t_max: usize,
}

#[derive(Debug, Args)]
pub struct TraceConvertArgs {
    #[arg(long = "in")]
    pub input: PathBuf,

    #[arg(long, default_value = "csv", value_parser = parse_with::<TraceFormat>)]
    pub in_format: TraceFormat,

    /// Number of disjoint blocks (synthetic users).
    #[arg(long)]
    pub users: usize,
}

fn parse_with<T>(s: &str) -> Result<T, String>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn parse_horizon(s: &str) -> Result<Horizon, String> {
    if s == "auto" {
        return Ok(Horizon::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("T must be a positive integer or `auto`, got `{s}`")),
        Ok(t) => Ok(Horizon::Fixed(t)),
    }
}

fn parse_gradient(s: &str) -> Result<InelasticGradient, String> {
    match s {
        "masked" => Ok(InelasticGradient::Masked),
        "unmasked" => Ok(InelasticGradient::Unmasked),
        _ => Err(format!("expected masked or unmasked, got `{s}`")),
    }
}

fn parse_grid(s: &str) -> Result<CheckpointGrid, String> {
    if s == "all" {
        return Ok(CheckpointGrid::EverySlot);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(CheckpointGrid::LogSpaced(n)),
        _ => Err(format!("checkpoints must be a positive count or `all`, got `{s}`")),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Bounds(a) => bounds(cli, a),
        Command::Ballsbins(a) => ballsbins(cli, a),
        Command::Mad(a) => mad(cli, a),
        Command::TraceConvert(a) => trace_convert(cli, a),
        Command::Sweep(a) => sweep(cli, a),
    }
}

fn meta(cli: &Cli) -> Vec<(&'static str, String)> {
    if cli.no_header_meta {
        return Vec::new();
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    vec![("generated_unix", secs.to_string())]
}

/// Runs `write` against `--out`, or stdout.
fn emit(cli: &Cli, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &cli.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut out = BufWriter::new(file);
            write(&mut out)?;
            out.flush().with_context(|| format!("writing {}", path.display()))?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            write(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn emit_table(cli: &Cli, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let meta = meta(cli);
    emit(cli, |out| match cli.format {
        Format::Csv => write_table(out, header, rows, &meta),
        Format::Json => write_table_json(out, header, rows, &meta),
    })
}

fn experiment_spec(cli: &Cli, run: &RunArgs, capacity: CapacitySpec) -> Result<ExperimentSpec> {
    let topology = run.topology.load()?;
    let mut distinct = run.policies.clone();
    distinct.sort_by_key(|k| k.name());
    distinct.dedup();
    if distinct.len() != run.policies.len() {
        usage_bail!("a policy is listed twice in --policies");
    }
    if run.reward == RewardKind::Single && !topology.is_single() {
        usage_bail!("--reward single needs --topology single");
    }
    let policies = run
        .policies
        .iter()
        .map(|&kind| {
            let mut spec = PolicySpec::new(kind);
            if matches!(kind, PolicyKind::Ftpl | PolicyKind::Oga) {
                spec.eta = run.eta;
            }
            spec.warm_start = run.warm_start;
            spec.inelastic_gradient = run.inelastic_grad;
            if kind == PolicyKind::Static {
                spec.static_files = run.static_files.clone();
            }
            spec
        })
        .collect();
    if run.eta.is_some_and(|e| !(e.is_finite() && e >= 0.0)) {
        usage_bail!("--eta must be finite and nonnegative");
    }
    if run.reward == RewardKind::Inelastic && run.policies.contains(&PolicyKind::Ftpl) {
        usage_bail!("FTPL is not defined for inelastic rewards");
    }
    Ok(ExperimentSpec {
        reward: run.reward,
        topology,
        sequence: run.sequence.clone(),
        policies,
        horizon: match run.horizon {
            Horizon::Auto => None,
            Horizon::Fixed(t) => Some(t),
        },
        n_files: run.n_files,
        capacity,
        r: run.r,
        replications: run.reps,
        seed: cli.seed,
        grid: run.checkpoints.clone(),
        jobs: cli.jobs,
    })
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let capacity = match (a.capacity.capacity, a.capacity.alpha) {
        (Some(c), None) => CapacitySpec::Absolute(c),
        (None, Some(alpha)) => CapacitySpec::Alpha(alpha),
        _ => usage_bail!("give exactly one of --C and --alpha"),
    };
    let spec = experiment_spec(cli, &a.run, capacity)?;
    let (_, results) = run_experiment(&spec)?;
    let meta = meta(cli);
    emit(cli, |out| match cli.format {
        Format::Csv => write_results_csv(out, &results, &meta),
        Format::Json => write_results_json(out, &results, &meta),
    })
}

fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    let alphas = read_alphas(&a.alphas)?;
    let spec = experiment_spec(cli, &a.run, CapacitySpec::Alpha(alphas[0]))?;
    let rows = capacity_sweep(&spec, &alphas)?;
    let bumpy = non_monotone_policies(&rows);
    if !bumpy.is_empty() {
        eprintln!(
            "note: regret does not grow monotonically with capacity for {}",
            bumpy.join(", ")
        );
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.alpha),
                r.capacity.to_string(),
                r.policy.clone(),
                r.horizon.to_string(),
                fmt_num(r.mean_regret),
                fmt_num(r.std_error),
                fmt_num(r.avg_regret()),
            ]
        })
        .collect();
    emit_table(
        cli,
        &["alpha", "C", "policy", "T", "mean_regret", "std_error", "avg_regret"],
        &table,
    )
}

fn bounds(cli: &Cli, a: &BoundsArgs) -> Result<()> {
    if a.setting == "ftpl-inelastic" {
        usage_bail!("no FTPL regret bound is known for inelastic rewards");
    }
    let setting: BoundSetting = a.setting.parse()?;
    let policy = match a.policy.as_str() {
        "all" => None,
        "ftpl" => Some(BoundPolicy::Ftpl),
        "oga" => Some(BoundPolicy::Oga),
        other => usage_bail!("--policy must be all, ftpl or oga, got `{other}`"),
    };
    let (d, n_caches) = match &a.topology {
        Some(source) => {
            let topology = source.load()?;
            let d = topology
                .right_degree()
                .ok_or_else(|| crate::usage("the topology is not right-regular"))?;
            (d, topology.n_caches())
        }
        None => (a.d, a.n_caches),
    };
    let params = BoundParams {
        horizon: a.horizon,
        capacity: a.capacity,
        n_files: a.n_files.unwrap_or(2 * a.capacity),
        d,
        n_caches,
        r: a.r,
    };
    if policy == Some(BoundPolicy::Ftpl) {
        // surfaces the reason when FTPL has no bound here
        regret_upper_bound(BoundPolicy::Ftpl, setting, params)?;
    }
    let rows: Vec<_> = bound_table(setting, params)?
        .into_iter()
        .filter(|row| match policy {
            None => true,
            Some(p) => !row.name.ends_with("_upper") || row.name.starts_with(p.name()),
        })
        .collect();
    let meta = meta(cli);
    match cli.format {
        Format::Csv => emit(cli, |out| write_bounds_csv(out, &rows, &meta)),
        Format::Json => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|b| {
                    let p = &b.params;
                    vec![
                        b.name.clone(),
                        b.setting.name().to_string(),
                        p.horizon.to_string(),
                        p.capacity.to_string(),
                        p.n_files.to_string(),
                        p.d.to_string(),
                        p.n_caches.to_string(),
                        p.r.to_string(),
                        fmt_num(b.value),
                        b.side.name().to_string(),
                    ]
                })
                .collect();
            emit_table(cli, &crate::output::BOUND_HEADER, &table)
        }
    }
}

fn ballsbins(cli: &Cli, a: &BallsbinsArgs) -> Result<()> {
    check_mc(a.capacity, a.trials)?;
    let jobs = resolve_jobs(cli.jobs)?;
    let (horizon, capacity, trials, seed, mode) = (a.horizon, a.capacity, a.trials, cli.seed, a.mode);
    let sums = with_pool(jobs, || {
        (0..shard_count(trials))
            .into_par_iter()
            .map(|k| balls_into_bins_shard(horizon, capacity, trials, seed, k, mode))
            .reduce(ShardSums::default, ShardSums::merge)
    })?;
    let est = sums.estimate(seed);
    let bound = lemma1_lower_bound(horizon, capacity)?;
    let pass = est.mean >= bound - 3.0 * est.std_error;
    let row = vec![
        horizon.to_string(),
        capacity.to_string(),
        mode.name().to_string(),
        est.trials.to_string(),
        seed.to_string(),
        fmt_num(est.mean),
        fmt_num(est.std_error),
        fmt_num(bound),
        if pass { "pass" } else { "fail" }.to_string(),
    ];
    emit_table(
        cli,
        &["T", "C", "mode", "trials", "seed", "mean", "std_error", "lemma1_bound", "pass"],
        &[row],
    )
}

fn mad(cli: &Cli, a: &MadArgs) -> Result<()> {
    if a.t_max == 0 {
        usage_bail!("--Tmax must be positive");
    }
    let rows = (1..=a.t_max)
        .map(|t| {
            let exact = mad_exact(t)?;
            let lower = mad_lower_bound(t)?;
            Ok(vec![t.to_string(), fmt_num(exact), fmt_num(lower), fmt_num(exact - lower)])
        })
        .collect::<Result<Vec<_>>>()?;
    emit_table(cli, &["T", "mad_exact", "mad_lower_bound", "margin"], &rows)
}

fn trace_convert(cli: &Cli, a: &TraceConvertArgs) -> Result<()> {
    if a.users == 0 {
        usage_bail!("--users must be positive");
    }
    let trace = load_trace(&a.input, a.in_format)?;
    let batches = partition_blocks(&trace.events, a.users)
        .map_err(anyhow::Error::msg)
        .with_context(|| format!("partitioning {}", a.input.display()))?;
    emit(cli, |out| Ok(write_canonical(out, &batches, trace.n_files)?))
}
