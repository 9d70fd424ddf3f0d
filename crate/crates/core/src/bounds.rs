//! Closed-form regret bounds and the balls-into-bins estimator behind the
//! lower bounds.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math::{exp, ln, ln_gamma, powf, sqrt, PI};
use crate::rng::{substream, Purpose};
use crate::{Error, Result};

/// Above this `T` the binomial coefficient is evaluated through log-gamma.
const DIRECT_MAD_LIMIT: usize = 50;

/// Trials per Monte Carlo shard. Shard `k` draws from its own substream,
/// so estimates do not depend on how shards are scheduled.
pub const SHARD_TRIALS: usize = 4096;

/// `E|Z - T/2|` for `Z ~ Bin(T, 1/2)`:
/// `2^-T (floor(T/2) + 1) binom(T, floor(T/2) + 1)`.
pub fn mad_exact(horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::invalid("T must be positive"));
    }
    let m = horizon / 2;
    let k = m + 1;
    if horizon <= DIRECT_MAD_LIMIT {
        // binom(T, k) / 2^T as a running product, exact enough below 2^53
        let mut binom = 1.0f64;
        for i in 0..k {
            binom = binom * (horizon - i) as f64 / (i + 1) as f64;
        }
        return Ok(k as f64 * binom / powf(2.0, horizon as f64));
    }
    let t = horizon as f64;
    let ln_binom = ln_gamma(t + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma(t - k as f64 + 1.0);
    Ok(exp(ln(k as f64) + ln_binom - t * core::f64::consts::LN_2))
}

/// `sqrt(T / 2 pi) - 1 / (2 sqrt(2 pi T))`.
pub fn mad_lower_bound(horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::invalid("T must be positive"));
    }
    let t = horizon as f64;
    Ok(sqrt(t / (2.0 * PI)) - 1.0 / (2.0 * sqrt(2.0 * PI * t)))
}

/// Robbins' bracket on `n!`, kept in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobbinsBounds {
    pub ln_lower: f64,
    pub ln_upper: f64,
}

impl RobbinsBounds {
    pub fn lower(&self) -> f64 {
        exp(self.ln_lower)
    }

    pub fn upper(&self) -> f64 {
        exp(self.ln_upper)
    }
}

/// `sqrt(2 pi) n^(n + 1/2) e^-n e^(1/(12n+1)) <= n! <= ... e^(1/(12n))`.
pub fn robbins_bounds(n: u64) -> Result<RobbinsBounds> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let x = n as f64;
    let base = 0.5 * ln(2.0 * PI) + (x + 0.5) * ln(x) - x;
    Ok(RobbinsBounds {
        ln_lower: base + 1.0 / (12.0 * x + 1.0),
        ln_upper: base + 1.0 / (12.0 * x),
    })
}

/// Lower bound on the expected load of the `C` fullest of `2C` bins after
/// `T` uniform throws:
/// `T/2 + sqrt(CT / 2 pi) - (sqrt 2 + 1) C^(3/2) / (2 sqrt(2 pi T)) - sqrt(2 / pi) C^2 / T`.
pub fn lemma1_lower_bound(horizon: usize, capacity: usize) -> Result<f64> {
    if horizon == 0 || capacity == 0 {
        return Err(Error::invalid("T and C must be positive"));
    }
    let (t, c) = (horizon as f64, capacity as f64);
    Ok(t / 2.0 + sqrt(c * t / (2.0 * PI))
        - (core::f64::consts::SQRT_2 + 1.0) * powf(c, 1.5) / (2.0 * sqrt(2.0 * PI * t))
        - sqrt(2.0 / PI) * c * c / t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinsMode {
    /// Sum of the `C` largest loads.
    Exact,
    /// Bins paired as `(2i, 2i+1)`; sum of the per-pair maxima.
    Superbin,
}

impl BinsMode {
    pub fn name(self) -> &'static str {
        match self {
            BinsMode::Exact => "exact",
            BinsMode::Superbin => "superbin",
        }
    }
}

impl core::str::FromStr for BinsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BinsMode::Exact),
            "superbin" => Ok(BinsMode::Superbin),
            other => Err(Error::invalid(format!("unknown balls-into-bins mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Integer moments of a batch of trials. Merging is exact, so the final
/// estimate is independent of the order shards finish in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ShardSums {
    pub trials: u64,
    pub sum: u64,
    pub sum_sq: u128,
}

impl ShardSums {
    pub fn merge(self, other: Self) -> Self {
        Self {
            trials: self.trials + other.trials,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn estimate(&self, seed: u64) -> MCEstimate {
        let n = self.trials as f64;
        let mean = self.sum as f64 / n;
        let std_error = if self.trials > 1 {
            // sum (x - mean)^2 = sum x^2 - (sum x)^2 / n, formed in integers
            let s = self.sum as u128;
            let centered = self.sum_sq as f64 - (s * s) as f64 / n;
            sqrt(centered.max(0.0) / (n - 1.0) / n)
        } else {
            0.0
        };
        MCEstimate {
            mean,
            std_error,
            trials: self.trials,
            seed,
        }
    }
}

/// Number of shards covering `trials`.
pub fn shard_count(trials: u64) -> u64 {
    trials.div_ceil(SHARD_TRIALS as u64)
}

/// Trials `shard * SHARD_TRIALS ..` of the estimator, capped at `trials`.
/// The throws depend only on `(seed, shard)`, not on `mode`.
pub fn balls_into_bins_shard(
    horizon: usize,
    capacity: usize,
    trials: u64,
    seed: u64,
    shard: u64,
    mode: BinsMode,
) -> ShardSums {
    let start = shard * SHARD_TRIALS as u64;
    let count = trials.saturating_sub(start).min(SHARD_TRIALS as u64);
    let mut rng = substream(seed, Purpose::BallsIntoBins, shard);
    let bins = 2 * capacity;
    let mut loads = vec![0u64; bins];
    let mut sums = ShardSums::default();
    for _ in 0..count {
        loads.iter_mut().for_each(|l| *l = 0);
        for _ in 0..horizon {
            loads[rng.random_range(0..bins)] += 1;
        }
        let x: u64 = match mode {
            BinsMode::Exact => {
                loads.sort_unstable_by(|a, b| b.cmp(a));
                loads[..capacity].iter().sum()
            }
            BinsMode::Superbin => loads.chunks_exact(2).map(|p| p[0].max(p[1])).sum(),
        };
        sums.trials += 1;
        sums.sum += x;
        sums.sum_sq += (x as u128) * (x as u128);
    }
    sums
}

/// Throws `T` balls into `2C` bins per trial and averages the statistic
/// selected by `mode`. Runs the shards sequentially.
pub fn balls_into_bins_mc(
    horizon: usize,
    capacity: usize,
    trials: u64,
    seed: u64,
    mode: BinsMode,
) -> Result<MCEstimate> {
    check_mc(capacity, trials)?;
    let total = (0..shard_count(trials))
        .map(|k| balls_into_bins_shard(horizon, capacity, trials, seed, k, mode))
        .fold(ShardSums::default(), ShardSums::merge);
    Ok(total.estimate(seed))
}

pub fn check_mc(capacity: usize, trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    if capacity == 0 {
        return Err(Error::invalid("capacity must be positive"));
    }
    Ok(())
}

/// The problem class a bound refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSetting {
    /// Single cache, `N = 2`, `C = 1`.
    Theorem1,
    Single,
    Elastic,
    Inelastic,
}

impl BoundSetting {
    pub fn name(self) -> &'static str {
        match self {
            BoundSetting::Theorem1 => "theorem1",
            BoundSetting::Single => "single",
            BoundSetting::Elastic => "elastic",
            BoundSetting::Inelastic => "inelastic",
        }
    }
}

impl core::str::FromStr for BoundSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem1" => Ok(BoundSetting::Theorem1),
            "single" => Ok(BoundSetting::Single),
            "elastic" => Ok(BoundSetting::Elastic),
            "inelastic" => Ok(BoundSetting::Inelastic),
            other => Err(Error::invalid(format!("unknown bound setting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundPolicy {
    Ftpl,
    Oga,
}

impl BoundPolicy {
    pub fn name(self) -> &'static str {
        match self {
            BoundPolicy::Ftpl => "ftpl",
            BoundPolicy::Oga => "oga",
        }
    }
}

/// Parameters of a bound; fields a setting does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundParams {
    pub horizon: usize,
    pub capacity: usize,
    pub n_files: usize,
    /// Right degree.
    pub d: usize,
    pub n_caches: usize,
    pub r: usize,
}

impl BoundParams {
    pub fn single(horizon: usize, capacity: usize, n_files: usize) -> Self {
        Self {
            horizon,
            capacity,
            n_files,
            d: 1,
            n_caches: 1,
            r: 1,
        }
    }

    /// Collapses the network fields for single-cache settings.
    fn normalized(mut self, setting: BoundSetting) -> Result<Self> {
        if self.horizon == 0 || self.capacity == 0 || self.r == 0 {
            return Err(Error::invalid("T, C and r must be positive"));
        }
        match setting {
            BoundSetting::Theorem1 => {
                self = Self { r: 1, ..Self::single(self.horizon, 1, 2) };
            }
            BoundSetting::Single => {
                self.d = 1;
                self.n_caches = 1;
            }
            BoundSetting::Elastic | BoundSetting::Inelastic => {
                if self.d == 0 || self.n_caches == 0 {
                    return Err(Error::invalid("d and |J| must be positive"));
                }
            }
        }
        if setting == BoundSetting::Inelastic && self.r != 1 {
            return Err(Error::unsupported("inelastic bounds assume r = 1"));
        }
        Ok(self)
    }
}

/// Lower bound on the worst-case regret of any policy, with the lower
/// order terms taken from [`lemma1_lower_bound`]. May be negative for tiny
/// `T`.
pub fn regret_lower_bound(setting: BoundSetting, params: BoundParams) -> Result<f64> {
    let p = params.normalized(setting)?;
    let gap = |balls: usize, bins_half: usize| -> Result<f64> {
        Ok(lemma1_lower_bound(balls, bins_half)? - balls as f64 / 2.0)
    };
    match setting {
        BoundSetting::Theorem1 => mad_lower_bound(p.horizon),
        BoundSetting::Single => gap(p.r * p.horizon, p.capacity),
        BoundSetting::Elastic => Ok((p.d * p.n_caches) as f64 * gap(p.r * p.horizon, p.capacity)?),
        BoundSetting::Inelastic => Ok(p.d as f64 * gap(p.horizon, p.n_caches * p.capacity)?),
    }
}

/// Worst-case regret guarantee of `policy` with its prescribed `eta`.
pub fn regret_upper_bound(policy: BoundPolicy, setting: BoundSetting, params: BoundParams) -> Result<f64> {
    let p = params.normalized(setting)?;
    let (t, c, d, j, r) = (
        p.horizon as f64,
        p.capacity as f64,
        p.d as f64,
        p.n_caches as f64,
        p.r as f64,
    );
    match policy {
        BoundPolicy::Oga => Ok(d * j * sqrt(2.0 * r * c * t)),
        BoundPolicy::Ftpl => {
            if setting == BoundSetting::Inelastic {
                return Err(Error::unsupported("no FTPL regret bound is known for inelastic rewards"));
            }
            if p.r != 1 {
                return Err(Error::unsupported("FTPL bounds assume r = 1"));
            }
            if p.n_files < 2 {
                return Err(Error::invalid("FTPL bounds need N >= 2"));
            }
            Ok(1.51 * powf(ln(p.n_files as f64), 0.25) * d * j * sqrt(c * t))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
    Exact,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
            Side::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub name: String,
    pub setting: BoundSetting,
    pub params: BoundParams,
    pub value: f64,
    pub side: Side,
}

/// Every bound that applies to `setting`: the regret lower bound, the OGA
/// and (where one exists) FTPL upper bounds, and for `Theorem1` also the
/// exact mean deviation.
pub fn bound_table(setting: BoundSetting, params: BoundParams) -> Result<Vec<BoundReport>> {
    let p = params.normalized(setting)?;
    let row = |name: &str, value: f64, side| BoundReport {
        name: String::from(name),
        setting,
        params: p,
        value,
        side,
    };
    let mut rows = vec![row("regret_lower", regret_lower_bound(setting, p)?, Side::Lower)];
    if setting == BoundSetting::Theorem1 {
        rows.push(row("mad_exact", mad_exact(p.horizon)?, Side::Exact));
    }
    rows.push(row("oga_upper", regret_upper_bound(BoundPolicy::Oga, setting, p)?, Side::Upper));
    if setting != BoundSetting::Inelastic && p.n_files >= 2 && p.r == 1 {
        rows.push(row("ftpl_upper", regret_upper_bound(BoundPolicy::Ftpl, setting, p)?, Side::Upper));
    }
    Ok(rows)
}
