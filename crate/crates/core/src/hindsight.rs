//! Best static configuration in hindsight.
//!
//! Single-cache and elastic rewards are linear in the configuration, so the
//! optimum is a top-`C` selection per cache. The inelastic reward is concave
//! and piecewise linear; it is maximized by projected supergradient ascent
//! started from a local-search vertex, with exhaustive enumeration of
//! uncoded configurations available for tiny instances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{diameter_bound, project_in_place};
use crate::math::{sqrt, KahanSum};
use crate::model::{BipartiteTopology, CacheConfig, FileId, RequestBatch};
use crate::policies::top_k;
use crate::rewards::{check_kind, static_reward_from_counts, RewardKind};
use crate::{Error, Result};

/// Iterations used when the caller does not say otherwise.
pub const DEFAULT_ASCENT_ITERATIONS: usize = 2000;

/// Ascent steps between vertex roundings of the iterate.
const POLISH_EVERY: usize = 50;

/// Largest instance the brute-force solver accepts.
pub const BRUTE_FORCE_LIMITS: BruteForceLimits = BruteForceLimits {
    n_files: 6,
    capacity: 2,
    n_caches: 2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForceLimits {
    pub n_files: usize,
    pub capacity: usize,
    pub n_caches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HindsightMethod {
    TopK,
    SupergradientAscent,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HindsightSolution {
    pub configs: Vec<CacheConfig>,
    pub reward: f64,
    pub method: HindsightMethod,
    /// The reward is the exact optimum over the fractional feasible set.
    pub certified_exact: bool,
}

/// `counts[i][f]`: how often user `i` asked for file `f` in `batches`.
pub fn per_user_counts(n_users: usize, n_files: usize, batches: &[RequestBatch]) -> Result<Vec<Vec<f64>>> {
    let mut counts = vec![vec![0.0; n_files]; n_users];
    for batch in batches {
        batch.validate(n_users, n_files)?;
        for (user, files) in batch.users().enumerate() {
            for &f in files {
                counts[user][f as usize] += 1.0;
            }
        }
    }
    Ok(counts)
}

/// Per-cache aggregate `sum_{i in in(j)} counts[i]`.
pub fn aggregate_counts(topology: &BipartiteTopology, counts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_counts(topology, counts)?;
    let n = counts[0].len();
    Ok((0..topology.n_caches())
        .map(|j| {
            let mut agg = vec![0.0; n];
            for &i in topology.in_neighbors(j) {
                agg.iter_mut().zip(&counts[i]).for_each(|(a, c)| *a += c);
            }
            agg
        })
        .collect())
}

fn check_counts(topology: &BipartiteTopology, counts: &[Vec<f64>]) -> Result<()> {
    if counts.len() != topology.n_users() {
        return Err(Error::Dimension {
            what: "users in count table",
            expected: topology.n_users(),
            got: counts.len(),
        });
    }
    let n = counts[0].len();
    if n == 0 || counts.iter().any(|c| c.len() != n) {
        return Err(Error::invalid("count rows must share a positive catalog size"));
    }
    if counts.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::invalid("counts must be finite and nonnegative"));
    }
    Ok(())
}

fn top_config(scores: &[f64], capacity: usize, scratch: &mut Vec<FileId>) -> CacheConfig {
    top_k(scores, capacity, scratch);
    CacheConfig::uncoded(scores.len(), capacity, scratch).expect("top-C fits")
}

/// Caches the `C` most requested files (ties: lowest id).
pub fn static_opt_single(counts: &[f64], capacity: usize) -> Result<HindsightSolution> {
    if capacity == 0 || counts.is_empty() {
        return Err(Error::invalid("capacity and catalog size must be positive"));
    }
    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::invalid("counts must be finite and nonnegative"));
    }
    let mut scratch = Vec::new();
    let config = top_config(counts, capacity, &mut scratch);
    let reward = scratch.iter().map(|&f| counts[f as usize]).collect::<KahanSum>().value();
    Ok(HindsightSolution {
        configs: vec![config],
        reward,
        method: HindsightMethod::TopK,
        certified_exact: true,
    })
}

/// Each cache independently caches the top `C` of its in-neighbors'
/// aggregated counts.
pub fn static_opt_elastic(
    topology: &BipartiteTopology,
    counts: &[Vec<f64>],
    capacity: usize,
) -> Result<HindsightSolution> {
    if capacity == 0 {
        return Err(Error::invalid("capacity must be positive"));
    }
    let agg = aggregate_counts(topology, counts)?;
    let mut scratch = Vec::new();
    let configs: Vec<CacheConfig> = agg.iter().map(|a| top_config(a, capacity, &mut scratch)).collect();
    let reward = static_reward_from_counts(RewardKind::Elastic, topology, counts, &configs);
    Ok(HindsightSolution {
        configs,
        reward,
        method: HindsightMethod::TopK,
        certified_exact: true,
    })
}

/// Dispatches on the reward kind. Inelastic uses `solver`.
pub fn static_opt(
    kind: RewardKind,
    topology: &BipartiteTopology,
    counts: &[Vec<f64>],
    capacity: usize,
    solver: &InelasticSolver,
) -> Result<HindsightSolution> {
    match kind {
        RewardKind::Single => {
            check_kind(kind, topology, 1)?;
            check_counts(topology, counts)?;
            static_opt_single(&counts[0], capacity)
        }
        RewardKind::Elastic => static_opt_elastic(topology, counts, capacity),
        RewardKind::Inelastic => static_opt_inelastic_counts(topology, counts, capacity, solver),
    }
}

/// Settings of the inelastic solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InelasticSolver {
    pub iterations: usize,
    /// Also enumerate every uncoded configuration (tiny instances only) and
    /// return the better of the two.
    pub brute_force: bool,
}

impl Default for InelasticSolver {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ASCENT_ITERATIONS,
            brute_force: false,
        }
    }
}

impl InelasticSolver {
    pub fn with_iterations(iterations: usize) -> Self {
        Self {
            iterations,
            brute_force: false,
        }
    }
}

/// Inelastic optimum over a request sequence with one request per user.
pub fn static_opt_inelastic(
    topology: &BipartiteTopology,
    batches: &[RequestBatch],
    n_files: usize,
    capacity: usize,
    solver: &InelasticSolver,
) -> Result<HindsightSolution> {
    if let Some(b) = batches.iter().find(|b| b.r() != 1) {
        check_kind(RewardKind::Inelastic, topology, b.r())?;
    }
    let counts = per_user_counts(topology.n_users(), n_files, batches)?;
    static_opt_inelastic_counts(topology, &counts, capacity, solver)
}

/// Inelastic optimum from per-user counts.
pub fn static_opt_inelastic_counts(
    topology: &BipartiteTopology,
    counts: &[Vec<f64>],
    capacity: usize,
    solver: &InelasticSolver,
) -> Result<HindsightSolution> {
    let mut ascent = InelasticAscent::new(topology, counts, capacity)?;
    let brute = if solver.brute_force {
        Some(brute_force_inelastic(topology, counts, capacity)?)
    } else {
        None
    };
    for _ in 0..solver.iterations {
        ascent.step();
    }
    let ascent_solution = HindsightSolution {
        reward: ascent.best_value(),
        configs: ascent.into_best(),
        method: HindsightMethod::SupergradientAscent,
        certified_exact: false,
    };
    Ok(match brute {
        Some(b) if b.reward > ascent_solution.reward => b,
        _ => ascent_solution,
    })
}

/// Exhaustive search over uncoded configurations holding `min(C, N)` files
/// per cache. Exact over uncoded configurations only, so `certified_exact`
/// stays false.
pub fn brute_force_inelastic(
    topology: &BipartiteTopology,
    counts: &[Vec<f64>],
    capacity: usize,
) -> Result<HindsightSolution> {
    check_counts(topology, counts)?;
    let n = counts[0].len();
    let l = BRUTE_FORCE_LIMITS;
    if n > l.n_files || capacity > l.capacity || topology.n_caches() > l.n_caches || capacity == 0 {
        return Err(Error::unsupported(format!(
            "brute force needs N <= {}, 1 <= C <= {}, |J| <= {}",
            l.n_files, l.capacity, l.n_caches
        )));
    }
    let subsets = subsets_of_size(n, capacity.min(n));
    let j = topology.n_caches();
    let mut index = vec![0usize; j];
    let mut best: Option<HindsightSolution> = None;
    loop {
        let configs: Vec<CacheConfig> = index
            .iter()
            .map(|&s| CacheConfig::uncoded(n, capacity, &subsets[s]).expect("subset fits"))
            .collect();
        let reward = static_reward_from_counts(RewardKind::Inelastic, topology, counts, &configs);
        if best.as_ref().is_none_or(|b| reward > b.reward) {
            best = Some(HindsightSolution {
                configs,
                reward,
                method: HindsightMethod::BruteForce,
                certified_exact: false,
            });
        }
        // odometer increment
        let mut k = 0;
        while k < j {
            index[k] += 1;
            if index[k] < subsets.len() {
                break;
            }
            index[k] = 0;
            k += 1;
        }
        if k == j {
            break;
        }
    }
    Ok(best.expect("at least one configuration"))
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<FileId>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n as FileId).filter(|f| m >> f & 1 == 1).collect())
        .collect()
}

/// Projected supergradient ascent on the cumulative inelastic reward,
/// `F(y) = sum_i sum_f n^i_f min(1, sum_{j in out(i)} y^j_f)`.
///
/// Step `k` (1-based) moves along the masked supergradient of `F / T` with
/// length `D / (L sqrt(k))`, where `D = sqrt(2 C |J|)` bounds the diameter
/// and `L = d_max sqrt(|J|)` bounds the per-slot gradient norm. The start
/// is a vertex found by per-cache best-response sweeps from the elastic
/// optimum. Every few steps the iterate is also rounded to a vertex and
/// improved by the same sweeps; the best point seen is retained.
#[derive(Debug, Clone)]
pub struct InelasticAscent {
    topology: BipartiteTopology,
    capacity: usize,
    /// Nonzero counts as `(user, file, count)`.
    entries: Vec<(usize, FileId, f64)>,
    horizon: f64,
    step_scale: f64,
    current: Vec<Vec<f64>>,
    best: Vec<Vec<f64>>,
    best_value: f64,
    k: usize,
    grad: Vec<Vec<f64>>,
}

impl InelasticAscent {
    pub fn new(topology: &BipartiteTopology, counts: &[Vec<f64>], capacity: usize) -> Result<Self> {
        check_counts(topology, counts)?;
        if capacity == 0 {
            return Err(Error::invalid("capacity must be positive"));
        }
        let n = counts[0].len();
        let entries: Vec<(usize, FileId, f64)> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0.0)
                    .map(move |(f, &c)| (i, f as FileId, c))
            })
            .collect();
        // a user always contributes one request per slot
        let horizon = counts
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .fold(0.0, f64::max)
            .max(1.0);
        let lipschitz = topology.max_in_degree().max(1) as f64 * sqrt(topology.n_caches() as f64);
        let step_scale = diameter_bound(capacity, topology.n_caches()) / lipschitz;
        let mut ascent = Self {
            topology: topology.clone(),
            capacity,
            entries,
            horizon,
            step_scale,
            current: Vec::new(),
            best: Vec::new(),
            best_value: f64::NEG_INFINITY,
            k: 0,
            grad: vec![vec![0.0; n]; topology.n_caches()],
        };
        let start = ascent.warm_start(counts, n);
        ascent.best_value = ascent.value(&start);
        ascent.best = start.clone();
        ascent.current = start;
        Ok(ascent)
    }

    fn coverage(&self, y: &[Vec<f64>], user: usize, f: FileId) -> f64 {
        self.topology
            .out_neighbors(user)
            .iter()
            .map(|&j| y[j][f as usize])
            .sum()
    }

    /// `F(y)`.
    pub fn value(&self, y: &[Vec<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, f, c)| c * self.coverage(y, i, f).min(1.0))
            .collect::<KahanSum>()
            .value()
    }

    /// Elastic optimum improved by [`Self::sweeps`].
    fn warm_start(&self, counts: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
        let agg = aggregate_counts(&self.topology, counts).expect("checked");
        let mut scratch = Vec::new();
        let y: Vec<Vec<f64>> = agg
            .iter()
            .map(|a| top_config(a, self.capacity, &mut scratch).occupancy().to_vec())
            .collect();
        self.sweeps(y, n).0
    }

    /// Best-response sweeps over uncoded configurations: each cache in turn
    /// caches the top `C` files by the requests it would newly cover given
    /// the other caches, until no cache can improve.
    fn sweeps(&self, mut y: Vec<Vec<f64>>, n: usize) -> (Vec<Vec<f64>>, f64) {
        let mut scratch = Vec::new();
        let mut value = self.value(&y);
        let mut gain = vec![0.0; n];
        for _ in 0..64 {
            let mut improved = false;
            for j in 0..self.topology.n_caches() {
                gain.iter_mut().for_each(|g| *g = 0.0);
                for &(i, f, c) in &self.entries {
                    if !self.topology.out_neighbors(i).contains(&j) {
                        continue;
                    }
                    let others = self.coverage(&y, i, f) - y[j][f as usize];
                    gain[f as usize] += c * (1.0 - others).clamp(0.0, 1.0);
                }
                let candidate = top_config(&gain, self.capacity, &mut scratch).occupancy().to_vec();
                let previous = core::mem::replace(&mut y[j], candidate);
                let v = self.value(&y);
                if v > value + 1e-12 * value.abs().max(1.0) {
                    value = v;
                    improved = true;
                } else {
                    y[j] = previous;
                }
            }
            if !improved {
                break;
            }
        }
        (y, value)
    }

    /// Rounds the current iterate to its top `C` entries per cache and
    /// runs [`Self::sweeps`] from there.
    fn polish(&mut self) {
        let mut scratch = Vec::new();
        let n = self.grad[0].len();
        let rounded = self
            .current
            .iter()
            .map(|y| top_config(y, self.capacity, &mut scratch).occupancy().to_vec())
            .collect();
        let (y, v) = self.sweeps(rounded, n);
        if v > self.best_value {
            self.best_value = v;
            self.best = y;
        }
    }

    /// One ascent step; returns the value of the new iterate.
    pub fn step(&mut self) -> f64 {
        self.k += 1;
        for g in &mut self.grad {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        for &(i, f, c) in &self.entries {
            if self.coverage(&self.current, i, f) < 1.0 {
                for &j in self.topology.out_neighbors(i) {
                    self.grad[j][f as usize] += c / self.horizon;
                }
            }
        }
        let eta = self.step_scale / sqrt(self.k as f64);
        for (y, g) in self.current.iter_mut().zip(&self.grad) {
            y.iter_mut().zip(g).for_each(|(y, g)| *y += eta * g);
            project_in_place(y, self.capacity as f64);
        }
        let v = self.value(&self.current);
        if v > self.best_value {
            self.best_value = v;
            self.best.clone_from(&self.current);
        }
        if self.k.is_multiple_of(POLISH_EVERY) {
            self.polish();
        }
        v
    }

    pub fn iterations(&self) -> usize {
        self.k
    }

    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    pub fn best(&self) -> &[Vec<f64>] {
        &self.best
    }

    fn into_best(self) -> Vec<CacheConfig> {
        let capacity = self.capacity;
        self.best
            .into_iter()
            .map(|y| CacheConfig::from_occupancy(y, capacity).expect("projected iterate is feasible"))
            .collect()
    }
}
