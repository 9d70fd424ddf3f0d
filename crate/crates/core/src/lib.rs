//! Online caching under adversarial requests.
//!
//! This crate carries the allocation-only core: the domain model (catalog,
//! bipartite user/cache topology, request batches, cache configurations),
//! the capped-simplex projection and supergradients, the single / elastic /
//! inelastic reward functions, the online policies (LRU, LFU, FIFO, FTPL,
//! OGA, static), offline hindsight solvers, adversarial request generators,
//! closed-form regret bounds with a balls-into-bins Monte Carlo verifier,
//! and a sequential driver that turns a policy and a request sequence into
//! a regret curve.
//!
//! It is `no_std` and only needs `alloc`. File formats, the parallel
//! experiment grid and the command line live in the `cache-regret` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod bounds;
mod error;
pub mod geometry;
pub mod harness;
pub mod hindsight;
mod math;
pub mod model;
pub mod policies;
pub mod rewards;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use math::KahanSum;
pub use model::{
    paper_topology_preset, BipartiteTopology, CacheConfig, Catalog, FileId, RequestBatch,
    RunResult, FEASIBILITY_TOL,
};
pub use rewards::RewardKind;
