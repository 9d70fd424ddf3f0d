//! Euclidean projection onto the capped simplex and reward supergradients.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{sqrt, KahanSum};
use crate::model::{BipartiteTopology, CacheConfig, FileId, RequestBatch};
use crate::rewards::RewardKind;
use crate::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;

/// Output of [`project_capped_simplex`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub projected: Vec<f64>,
    /// Shift `tau >= 0` with `projected = clip(v - tau, 0, 1)`.
    pub multiplier: f64,
    pub iterations: usize,
}

/// Projects `v` onto `{y in [0,1]^N : sum(y) <= capacity}`.
///
/// The solution is `clip(v - tau, 0, 1)` where `tau = 0` if the clipped
/// vector already fits, and otherwise solves `sum clip(v - tau, 0, 1) = C`.
/// The root is found by Newton steps on the piecewise-linear sum, safeguarded
/// by bisection; a sort-based breakpoint scan takes over if that stalls.
pub fn project_capped_simplex(v: &[f64], capacity: usize) -> Result<ProjectionResult> {
    if capacity == 0 {
        return Err(Error::invalid("capacity must be positive"));
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut projected = v.to_vec();
    let (multiplier, iterations) = project_in_place(&mut projected, capacity as f64);
    Ok(ProjectionResult {
        projected,
        multiplier,
        iterations,
    })
}

/// In-place variant; `v` must be finite. Returns `(tau, iterations)`.
pub(crate) fn project_in_place(v: &mut [f64], capacity: f64) -> (f64, usize) {
    let clipped_sum: KahanSum = v.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
    if clipped_sum.value() <= capacity + crate::FEASIBILITY_TOL {
        v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
        return (0.0, 0);
    }

    let (tau, iterations) = match newton_bisect(v, capacity) {
        Some(found) => found,
        None => (breakpoint_scan(v, capacity), MAX_ITERATIONS + 1),
    };
    v.iter_mut().for_each(|x| *x = (*x - tau).clamp(0.0, 1.0));
    (tau, iterations)
}

/// `(sum clip(v - tau, 0, 1), number of coordinates strictly inside (0,1))`.
fn shifted_sum(v: &[f64], tau: f64) -> (f64, usize) {
    let mut acc = KahanSum::new();
    let mut active = 0;
    for &x in v {
        let s = x - tau;
        if s >= 1.0 {
            acc.add(1.0);
        } else if s > 0.0 {
            acc.add(s);
            active += 1;
        }
    }
    (acc.value(), active)
}

fn newton_bisect(v: &[f64], capacity: f64) -> Option<(f64, usize)> {
    let mut lo = 0.0;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut tau = 0.0;
    for iteration in 1..=MAX_ITERATIONS {
        let (sum, active) = shifted_sum(v, tau);
        let residual = sum - capacity;
        if residual.abs() <= RESIDUAL_TOL {
            return Some((tau, iteration));
        }
        if residual > 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let newton = if active > 0 {
            tau + residual / active as f64
        } else {
            f64::NAN
        };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == tau {
            break;
        }
        tau = next;
    }
    None
}

/// Exact root by locating the linear piece between sorted breakpoints.
fn breakpoint_scan(v: &[f64], capacity: f64) -> f64 {
    let mut points: Vec<f64> = v
        .iter()
        .flat_map(|&x| [x - 1.0, x])
        .filter(|&b| b > 0.0)
        .collect();
    points.push(0.0);
    points.sort_unstable_by(f64::total_cmp);
    points.dedup();
    // sum is nonincreasing in tau: find last breakpoint with sum >= C
    let (mut lo, mut hi) = (0, points.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if shifted_sum(v, points[mid]).0 >= capacity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (points[lo], points[hi]);
    let (sa, sb) = (shifted_sum(v, a).0, shifted_sum(v, b).0);
    if sa <= capacity || sa == sb {
        return a;
    }
    a + (sa - capacity) / (sa - sb) * (b - a)
}

/// How the inelastic reward is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InelasticGradient {
    /// Drop the contribution of files already fully covered for a user
    /// (`sum_{j in out(i)} y^j_f >= 1`). A true supergradient.
    #[default]
    Masked,
    /// Reuse the elastic gradient. This is what the OGA analysis plugs in,
    /// but it violates the supergradient inequality once coverage exceeds 1.
    Unmasked,
}

/// Per-cache sparse gradient: `(file, value)` pairs, possibly repeated.
pub type SparseGradient = Vec<Vec<(FileId, f64)>>;

/// Sparse supergradient of the one-slot reward with respect to every
/// cache's occupancy.
pub fn supergradient_sparse(
    kind: RewardKind,
    mode: InelasticGradient,
    topology: &BipartiteTopology,
    batch: &RequestBatch,
    configs: &[CacheConfig],
) -> Result<SparseGradient> {
    crate::rewards::check_dimensions(kind, topology, batch, configs)?;
    let mut grad = vec![Vec::new(); topology.n_caches()];
    let masked = kind == RewardKind::Inelastic && mode == InelasticGradient::Masked;
    for (user, files) in batch.users().enumerate() {
        let caches = topology.out_neighbors(user);
        for &f in files {
            if masked {
                let coverage: f64 = caches.iter().map(|&j| configs[j].get(f)).sum();
                if coverage >= 1.0 {
                    continue;
                }
            }
            for &j in caches {
                grad[j].push((f, 1.0));
            }
        }
    }
    Ok(grad)
}

/// Dense supergradient, one vector of length `N` per cache.
///
/// Single / elastic: `g^j_f = sum_{i in in(j)} x^i_f`. Inelastic (masked):
/// the same sum restricted to users whose coverage of `f` is below 1.
pub fn supergradient(
    kind: RewardKind,
    mode: InelasticGradient,
    topology: &BipartiteTopology,
    batch: &RequestBatch,
    configs: &[CacheConfig],
) -> Result<Vec<Vec<f64>>> {
    let sparse = supergradient_sparse(kind, mode, topology, batch, configs)?;
    let n = configs[0].n_files();
    Ok(sparse
        .into_iter()
        .map(|entries| {
            let mut g = vec![0.0; n];
            for (f, v) in entries {
                g[f as usize] += v;
            }
            g
        })
        .collect())
}

/// Bound on the supergradient 2-norm, `d * sqrt(r |J|)`, for a right
/// `d`-regular topology where each user asks for `r` distinct files.
pub fn gradient_norm_bound(topology: &BipartiteTopology, r: usize) -> Result<f64> {
    let d = topology.right_degree().ok_or(Error::IrregularTopology)?;
    Ok(d as f64 * sqrt((r * topology.n_caches()) as f64))
}

/// Euclidean diameter bound of the joint feasible set, `sqrt(2 C |J|)`.
pub fn diameter_bound(capacity: usize, n_caches: usize) -> f64 {
    sqrt((2 * capacity * n_caches) as f64)
}
