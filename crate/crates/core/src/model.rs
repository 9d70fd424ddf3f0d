//! Domain types shared by every other module.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Index of a file in the catalog, `0..n_files`.
pub type FileId = u32;

/// Slack on the capacity constraint absorbing projection round-off.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// The file library.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Catalog {
    n_files: usize,
}

impl Catalog {
    pub fn new(n_files: usize) -> Result<Self> {
        if n_files == 0 {
            return Err(Error::invalid("catalog must hold at least one file"));
        }
        if n_files > FileId::MAX as usize {
            return Err(Error::invalid("catalog too large for 32-bit file ids"));
        }
        Ok(Self { n_files })
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn check(&self, file: FileId) -> Result<()> {
        if (file as usize) < self.n_files {
            Ok(())
        } else {
            Err(Error::FileOutOfRange {
                file: file as usize,
                n_files: self.n_files,
            })
        }
    }
}

/// Fractional occupancy of one cache. Entry `f` is the fraction of the
/// (coded) file `f` held; uncoded configurations have 0/1 entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheConfig {
    occupancy: Vec<f64>,
    capacity: usize,
}

impl CacheConfig {
    /// All-zero configuration.
    pub fn empty(n_files: usize, capacity: usize) -> Self {
        Self {
            occupancy: vec![0.0; n_files],
            capacity,
        }
    }

    /// Validated fractional configuration.
    pub fn from_occupancy(occupancy: Vec<f64>, capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("capacity must be positive"));
        }
        let cfg = Self {
            occupancy,
            capacity,
        };
        if let Some(index) = cfg.occupancy.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !cfg.is_feasible() {
            return Err(Error::invalid(format!(
                "occupancy outside [0,1] or above capacity {capacity}"
            )));
        }
        Ok(cfg)
    }

    /// Uncoded configuration caching exactly `files`.
    pub fn uncoded(n_files: usize, capacity: usize, files: &[FileId]) -> Result<Self> {
        if files.len() > capacity {
            return Err(Error::invalid(format!(
                "{} files do not fit in capacity {capacity}",
                files.len()
            )));
        }
        let mut occupancy = vec![0.0; n_files];
        for &f in files {
            let slot = occupancy.get_mut(f as usize).ok_or(Error::FileOutOfRange {
                file: f as usize,
                n_files,
            })?;
            if *slot == 1.0 {
                return Err(Error::invalid(format!("file {f} listed twice")));
            }
            *slot = 1.0;
        }
        Ok(Self {
            occupancy,
            capacity,
        })
    }

    pub fn n_files(&self) -> usize {
        self.occupancy.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn occupancy(&self) -> &[f64] {
        &self.occupancy
    }

    #[inline]
    pub fn get(&self, file: FileId) -> f64 {
        self.occupancy[file as usize]
    }

    pub fn total(&self) -> f64 {
        self.occupancy.iter().sum()
    }

    /// Box and capacity constraints, with [`FEASIBILITY_TOL`] on the sum.
    pub fn is_feasible(&self) -> bool {
        self.occupancy.iter().all(|&v| (0.0..=1.0).contains(&v))
            && self.total() <= self.capacity as f64 + FEASIBILITY_TOL
    }

    /// Every entry is 0 or 1 and at most `capacity` are 1.
    pub fn is_uncoded(&self) -> bool {
        self.occupancy.iter().all(|&v| v == 0.0 || v == 1.0)
            && self.occupancy.iter().filter(|&&v| v == 1.0).count() <= self.capacity
    }

    /// Files with nonzero occupancy, in id order.
    pub fn support(&self) -> Vec<FileId> {
        self.occupancy
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(f, _)| f as FileId)
            .collect()
    }

    pub(crate) fn occupancy_mut(&mut self) -> &mut Vec<f64> {
        &mut self.occupancy
    }

    pub(crate) fn set(&mut self, file: FileId, value: f64) {
        self.occupancy[file as usize] = value;
    }
}

/// Users on the left, caches on the right, edges meaning "user may fetch
/// from cache".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteTopology {
    n_users: usize,
    n_caches: usize,
    edges: Vec<(usize, usize)>,
    out_neighbors: Vec<Vec<usize>>,
    in_neighbors: Vec<Vec<usize>>,
}

impl BipartiteTopology {
    /// Validates indices and rejects duplicate edges.
    pub fn build(n_users: usize, n_caches: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_users == 0 || n_caches == 0 {
            return Err(Error::invalid("topology needs at least one user and one cache"));
        }
        let mut out_neighbors = vec![Vec::new(); n_users];
        let mut in_neighbors = vec![Vec::new(); n_caches];
        for &(user, cache) in edges {
            if user >= n_users || cache >= n_caches {
                return Err(Error::EdgeOutOfRange {
                    user,
                    cache,
                    n_users,
                    n_caches,
                });
            }
            if out_neighbors[user].contains(&cache) {
                return Err(Error::DuplicateEdge { user, cache });
            }
            out_neighbors[user].push(cache);
            in_neighbors[cache].push(user);
        }
        for list in out_neighbors.iter_mut().chain(in_neighbors.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Self {
            n_users,
            n_caches,
            edges: edges.to_vec(),
            out_neighbors,
            in_neighbors,
        })
    }

    /// One user attached to one cache.
    pub fn single() -> Self {
        Self::build(1, 1, &[(0, 0)]).expect("valid")
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_caches(&self) -> usize {
        self.n_caches
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Caches reachable from `user`.
    pub fn out_neighbors(&self, user: usize) -> &[usize] {
        &self.out_neighbors[user]
    }

    /// Users attached to `cache`.
    pub fn in_neighbors(&self, cache: usize) -> &[usize] {
        &self.in_neighbors[cache]
    }

    pub fn in_degree(&self, cache: usize) -> usize {
        self.in_neighbors[cache].len()
    }

    pub fn in_degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.in_neighbors.iter().map(Vec::len)
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_degrees().max().unwrap_or(0)
    }

    /// `Some(d)` when every cache has exactly `d` users.
    pub fn right_degree(&self) -> Option<usize> {
        let d = self.in_degree(0);
        self.in_degrees().all(|dj| dj == d).then_some(d)
    }

    pub fn is_right_regular(&self) -> bool {
        self.right_degree().is_some()
    }

    pub fn is_single(&self) -> bool {
        self.n_users == 1 && self.n_caches == 1 && self.edges.len() == 1
    }
}

/// The ten-user, four-cache network used in the MovieLens experiments.
///
/// Described 1-indexed: cache 1 serves users 1,2,3; cache 2 serves 4,5,6;
/// cache 3 serves 7,8,9; cache 4 serves 1,3,10. Every cache has in-degree 3.
pub fn paper_topology_preset() -> BipartiteTopology {
    const EDGES_ONE_INDEXED: [(usize, usize); 12] = [
        (1, 1),
        (2, 1),
        (3, 1),
        (4, 2),
        (5, 2),
        (6, 2),
        (7, 3),
        (8, 3),
        (9, 3),
        (1, 4),
        (3, 4),
        (10, 4),
    ];
    let edges: Vec<_> = EDGES_ONE_INDEXED
        .iter()
        .map(|&(u, c)| (u - 1, c - 1))
        .collect();
    BipartiteTopology::build(10, 4, &edges).expect("preset is valid")
}

/// One slot of requests: each user asks for exactly `r` files (with
/// repetition allowed, so `x^i_f` is the multiplicity of `f`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestBatch {
    r: usize,
    files: Vec<FileId>,
}

impl RequestBatch {
    /// One request per user.
    pub fn one_hot(files: Vec<FileId>) -> Self {
        Self { r: 1, files }
    }

    /// `files` holds `r` consecutive entries per user.
    pub fn new(r: usize, files: Vec<FileId>) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("requests per user must be positive"));
        }
        if !files.len().is_multiple_of(r) {
            return Err(Error::Dimension {
                what: "request entries not a multiple of r",
                expected: r,
                got: files.len(),
            });
        }
        Ok(Self { r, files })
    }

    /// Requests per user in this slot.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n_users(&self) -> usize {
        self.files.len() / self.r
    }

    /// The `r` files requested by `user`.
    pub fn user(&self, user: usize) -> &[FileId] {
        &self.files[user * self.r..(user + 1) * self.r]
    }

    pub fn users(&self) -> core::slice::ChunksExact<'_, FileId> {
        self.files.chunks_exact(self.r)
    }

    pub fn files(&self) -> &[FileId] {
        &self.files
    }

    /// Multiplicity `x^i_f`.
    pub fn weight(&self, user: usize, file: FileId) -> usize {
        self.user(user).iter().filter(|&&f| f == file).count()
    }

    /// Checks user count and file ids against a topology and catalog.
    pub fn validate(&self, n_users: usize, n_files: usize) -> Result<()> {
        if self.n_users() != n_users {
            return Err(Error::Dimension {
                what: "users in request batch",
                expected: n_users,
                got: self.n_users(),
            });
        }
        if let Some(&f) = self.files.iter().find(|&&f| f as usize >= n_files) {
            return Err(Error::FileOutOfRange {
                file: f as usize,
                n_files,
            });
        }
        Ok(())
    }
}

/// Regret bookkeeping at one checkpoint `t` (1-based slot count).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: usize,
    pub cum_reward: f64,
    pub hindsight_reward: f64,
    pub regret: f64,
}

impl Checkpoint {
    pub fn new(t: usize, cum_reward: f64, hindsight_reward: f64) -> Self {
        Self {
            t,
            cum_reward,
            hindsight_reward,
            regret: hindsight_reward - cum_reward,
        }
    }

    pub fn avg_regret(&self) -> f64 {
        self.regret / self.t as f64
    }
}

/// Outcome of one policy on one request sequence.
///
/// `checkpoints` carries the regret series on the checkpoint grid; with the
/// every-slot grid it has one entry per slot. `per_slot_reward` is left
/// empty when the driver was asked not to retain it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub policy: String,
    pub replication: usize,
    pub seed: u64,
    pub horizon: usize,
    pub per_slot_reward: Vec<f64>,
    pub cumulative_reward: f64,
    pub hindsight_reward: f64,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunResult {
    /// Regret at the horizon.
    pub fn regret(&self) -> f64 {
        self.hindsight_reward - self.cumulative_reward
    }

    pub fn regret_series(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.checkpoints.iter().map(|c| (c.t, c.regret))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_topology() {
        let t = BipartiteTopology::build(1, 1, &[(0, 0)]).unwrap();
        assert_eq!(t.out_neighbors(0), &[0]);
        assert_eq!(t.in_degree(0), 1);
        assert_eq!(t.right_degree(), Some(1));
    }

    #[test]
    fn duplicate_edge_rejected() {
        let err = BipartiteTopology::build(1, 1, &[(0, 0), (0, 0)]).unwrap_err();
        assert_eq!(err, Error::DuplicateEdge { user: 0, cache: 0 });
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let err = BipartiteTopology::build(2, 1, &[(2, 0)]).unwrap_err();
        assert!(matches!(err, Error::EdgeOutOfRange { user: 2, cache: 0, .. }));
    }

    #[test]
    fn preset_degrees() {
        let t = paper_topology_preset();
        assert_eq!((t.n_users(), t.n_caches()), (10, 4));
        assert_eq!(t.right_degree(), Some(3));
        // user 1 (1-indexed) reaches caches 1 and 4
        assert_eq!(t.out_neighbors(0), &[0, 3]);
        // user 5 only reaches cache 2
        assert_eq!(t.out_neighbors(4), &[1]);
        assert_eq!(t.in_neighbors(3), &[0, 2, 9]);
    }

    #[test]
    fn adjacency_is_symmetric() {
        let t = paper_topology_preset();
        for i in 0..t.n_users() {
            for j in 0..t.n_caches() {
                let e = t.edges().contains(&(i, j));
                assert_eq!(e, t.out_neighbors(i).contains(&j));
                assert_eq!(e, t.in_neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(CacheConfig::from_occupancy(vec![0.5, 0.5], 1).is_ok());
        assert!(CacheConfig::from_occupancy(vec![0.5, 0.6], 1).is_err());
        assert!(CacheConfig::from_occupancy(vec![1.2, 0.0], 2).is_err());
        assert!(CacheConfig::from_occupancy(vec![f64::NAN], 1).is_err());
        let u = CacheConfig::uncoded(4, 2, &[1, 3]).unwrap();
        assert!(u.is_uncoded() && u.is_feasible());
        assert_eq!(u.support(), vec![1, 3]);
        assert!(CacheConfig::uncoded(4, 1, &[1, 3]).is_err());
        assert!(CacheConfig::uncoded(4, 2, &[4]).is_err());
    }

    #[test]
    fn batch_weights() {
        let b = RequestBatch::new(2, vec![3, 3, 1, 0]).unwrap();
        assert_eq!(b.n_users(), 2);
        assert_eq!(b.weight(0, 3), 2);
        assert_eq!(b.weight(1, 3), 0);
        assert!(b.validate(2, 4).is_ok());
        assert!(b.validate(2, 3).is_err());
        assert!(RequestBatch::new(2, vec![1, 2, 3]).is_err());
    }
}
