//! Online caching policies.
//!
//! Every policy follows the same sequential contract: [`Policy::commit`]
//! fixes the configuration for slot `t` using only the history before `t`,
//! then [`Policy::observe`] reveals the slot's requests. Calling them out of
//! order is an error, so a policy cannot peek at `x_t` when committing.

mod demand;
mod fixed;
mod ftpl;
mod oga;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use demand::{DemandCaching, DemandRule, InitialFill};
pub use fixed::StaticFixed;
pub use ftpl::Ftpl;
pub use oga::Oga;

use crate::geometry::InelasticGradient;
use crate::math::{ln, powf, sqrt, PI};
use crate::model::{BipartiteTopology, CacheConfig, FileId, RequestBatch};
use crate::rewards::RewardKind;
use crate::{Error, Result};

pub trait Policy {
    /// Short name used in result files.
    fn label(&self) -> &str;

    /// Configuration of every cache for slot `t` (1-based). Repeated calls
    /// for the same slot return the same configuration.
    fn commit(&mut self, t: usize) -> Result<&[CacheConfig]>;

    /// Reveal the requests of the slot last committed.
    fn observe(&mut self, batch: &RequestBatch) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Lru,
    Lfu,
    Fifo,
    Ftpl,
    Oga,
    Static,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Lru,
        PolicyKind::Lfu,
        PolicyKind::Fifo,
        PolicyKind::Ftpl,
        PolicyKind::Oga,
        PolicyKind::Static,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
            PolicyKind::Fifo => "fifo",
            PolicyKind::Ftpl => "ftpl",
            PolicyKind::Oga => "oga",
            PolicyKind::Static => "static",
        }
    }
}

impl core::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown policy `{s}`")))
    }
}

/// Learning-rate / noise-scale formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `(4 pi ln N)^(-1/4) sqrt(T / C)`
    FtplSingle,
    /// `d (4 pi ln N)^(-1/4) sqrt(T / C)`
    FtplNetwork,
    /// `sqrt(2 C) / (d sqrt(T))`
    Oga,
}

/// Prescribed `eta` for a horizon `T` known upfront.
pub fn default_eta(rule: StepRule, horizon: usize, capacity: usize, n_files: usize, d: usize) -> Result<f64> {
    if horizon == 0 || capacity == 0 || d == 0 {
        return Err(Error::invalid("T, C and d must be positive"));
    }
    let (t, c, d) = (horizon as f64, capacity as f64, d as f64);
    match rule {
        StepRule::Oga => Ok(sqrt(2.0 * c) / (d * sqrt(t))),
        StepRule::FtplSingle | StepRule::FtplNetwork => {
            if n_files < 2 {
                return Err(Error::invalid("FTPL noise scale needs N >= 2"));
            }
            let base = powf(4.0 * PI * ln(n_files as f64), -0.25) * sqrt(t / c);
            Ok(if rule == StepRule::FtplNetwork { d * base } else { base })
        }
    }
}

/// Everything a policy needs to know about the problem instance.
#[derive(Debug, Clone)]
pub struct PolicyContext<'a> {
    pub reward: RewardKind,
    pub topology: &'a BipartiteTopology,
    pub n_files: usize,
    pub capacity: usize,
    pub horizon: usize,
    /// Seed of the replication; each policy draws from its own substreams.
    pub seed: u64,
}

/// Policy choice plus hyperparameter overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Overrides the prescribed `eta` (FTPL noise scale or OGA step).
    pub eta: Option<f64>,
    /// LRU / LFU / FIFO start from a seeded random full cache instead of
    /// an empty one.
    pub warm_start: bool,
    pub inelastic_gradient: InelasticGradient,
    /// Files held by the static policy; lowest ids when `None`.
    pub static_files: Option<Vec<FileId>>,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            eta: None,
            warm_start: false,
            inelastic_gradient: InelasticGradient::Masked,
            static_files: None,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn warm(mut self) -> Self {
        self.warm_start = true;
        self
    }

    pub fn label(&self) -> String {
        String::from(self.kind.name())
    }

    pub fn build(&self, ctx: &PolicyContext<'_>) -> Result<Box<dyn Policy + Send>> {
        let fill = if self.warm_start {
            InitialFill::Random
        } else {
            InitialFill::Empty
        };
        let demand = |rule| -> Result<Box<dyn Policy + Send>> {
            Ok(Box::new(DemandCaching::new(
                rule,
                ctx.topology,
                ctx.n_files,
                ctx.capacity,
                fill,
                ctx.seed,
            )?))
        };
        match self.kind {
            PolicyKind::Lru => demand(DemandRule::Lru),
            PolicyKind::Lfu => demand(DemandRule::Lfu),
            PolicyKind::Fifo => demand(DemandRule::Fifo),
            PolicyKind::Ftpl => {
                let etas = match self.eta {
                    Some(eta) => alloc::vec![eta; ctx.topology.n_caches()],
                    None => ctx
                        .topology
                        .in_degrees()
                        .map(|d| {
                            if d == 0 {
                                Ok(0.0)
                            } else {
                                default_eta(StepRule::FtplNetwork, ctx.horizon, ctx.capacity, ctx.n_files, d)
                            }
                        })
                        .collect::<Result<_>>()?,
                };
                Ok(Box::new(Ftpl::new(ctx.topology, ctx.n_files, ctx.capacity, etas, ctx.seed)?))
            }
            PolicyKind::Oga => {
                let eta = match self.eta {
                    Some(eta) => eta,
                    None => default_eta(
                        StepRule::Oga,
                        ctx.horizon,
                        ctx.capacity,
                        ctx.n_files,
                        ctx.topology.max_in_degree().max(1),
                    )?,
                };
                Ok(Box::new(Oga::new(
                    ctx.reward,
                    self.inelastic_gradient,
                    ctx.topology,
                    ctx.n_files,
                    ctx.capacity,
                    eta,
                )?))
            }
            PolicyKind::Static => {
                let files: Vec<FileId> = match &self.static_files {
                    Some(files) => files.clone(),
                    None => (0..ctx.capacity.min(ctx.n_files) as FileId).collect(),
                };
                let cfg = CacheConfig::uncoded(ctx.n_files, ctx.capacity, &files)?;
                Ok(Box::new(StaticFixed::new(alloc::vec![cfg; ctx.topology.n_caches()])?))
            }
        }
    }
}

/// Enforces commit-then-observe ordering.
#[derive(Debug, Clone)]
pub(crate) struct SlotClock {
    next: usize,
    committed: bool,
}

impl SlotClock {
    pub(crate) fn new() -> Self {
        Self {
            next: 1,
            committed: false,
        }
    }

    /// `Ok(true)` when slot `t` needs a fresh configuration.
    pub(crate) fn commit(&mut self, t: usize) -> Result<bool> {
        if t != self.next {
            return Err(Error::Sequence(format!(
                "commit for slot {t} but the next slot is {}",
                self.next
            )));
        }
        let fresh = !self.committed;
        self.committed = true;
        Ok(fresh)
    }

    pub(crate) fn observe(&mut self) -> Result<()> {
        if !self.committed {
            return Err(Error::Sequence(format!(
                "observe before commit of slot {}",
                self.next
            )));
        }
        self.committed = false;
        self.next += 1;
        Ok(())
    }
}

/// Requests seen by `cache` in `batch`: its in-neighbors' files, user order.
pub(crate) fn cache_requests<'a>(
    topology: &'a BipartiteTopology,
    batch: &'a RequestBatch,
    cache: usize,
) -> impl Iterator<Item = FileId> + 'a {
    topology
        .in_neighbors(cache)
        .iter()
        .flat_map(move |&i| batch.user(i).iter().copied())
}

pub(crate) fn check_batch(topology: &BipartiteTopology, n_files: usize, batch: &RequestBatch) -> Result<()> {
    batch.validate(topology.n_users(), n_files)
}

/// Top `k` indices of `scores`, highest first; ties go to the lower id.
pub(crate) fn top_k(scores: &[f64], k: usize, scratch: &mut Vec<FileId>) {
    scratch.clear();
    scratch.extend(0..scores.len() as FileId);
    let k = k.min(scores.len());
    if k == 0 {
        scratch.clear();
        return;
    }
    let order = |a: &FileId, b: &FileId| {
        scores[*b as usize]
            .total_cmp(&scores[*a as usize])
            .then(a.cmp(b))
    };
    if k < scratch.len() {
        scratch.select_nth_unstable_by(k - 1, order);
        scratch.truncate(k);
    }
    scratch.sort_unstable_by(order);
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eta_formulas() {
        assert_abs_diff_eq!(
            default_eta(StepRule::Oga, 4, 1, 2, 1).unwrap(),
            core::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        // N = e makes ln N = 1
        let n_e = default_eta(StepRule::FtplSingle, 1, 1, 2, 1).unwrap()
            * powf(ln(2.0), 0.25);
        assert_abs_diff_eq!(n_e, powf(4.0 * PI, -0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(powf(4.0 * PI, -0.25), 0.5311, epsilon = 1e-4);
        assert_eq!(
            default_eta(StepRule::FtplSingle, 100, 3, 50, 1).unwrap(),
            default_eta(StepRule::FtplNetwork, 100, 3, 50, 1).unwrap()
        );
        assert!(default_eta(StepRule::FtplSingle, 100, 1, 1, 1).is_err());
    }

    #[test]
    fn top_k_breaks_ties_by_id() {
        let mut s = Vec::new();
        top_k(&[1.0, 3.0, 3.0, 0.5, 3.0], 2, &mut s);
        assert_eq!(s, alloc::vec![1, 2]);
        top_k(&[0.0; 4], 3, &mut s);
        assert_eq!(s, alloc::vec![0, 1, 2]);
        top_k(&[0.0; 2], 5, &mut s);
        assert_eq!(s, alloc::vec![0, 1]);
    }

    #[test]
    fn clock_enforces_order() {
        let mut c = SlotClock::new();
        assert!(c.observe().is_err());
        assert!(c.commit(0).is_err());
        assert!(c.commit(1).unwrap());
        assert!(!c.commit(1).unwrap());
        assert!(c.commit(2).is_err());
        c.observe().unwrap();
        assert!(c.commit(2).unwrap());
    }

    #[test]
    fn kinds_parse() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("arc".parse::<PolicyKind>().is_err());
    }
}
