//! Follow the Perturbed Leader with Gaussian perturbations.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::{cache_requests, check_batch, top_k, Policy, SlotClock};
use crate::model::{BipartiteTopology, CacheConfig, FileId, RequestBatch};
use crate::rng::{substream, Purpose, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct CacheState {
    eta: f64,
    counts: Vec<f64>,
    rng: StreamRng,
    cached: Vec<FileId>,
}

/// Each cache independently loads the `C` files with the largest
/// `count + eta * gamma`, where `count` aggregates the requests of its
/// in-neighbors so far and `gamma ~ N(0, I)` is resampled every slot.
#[derive(Debug, Clone)]
pub struct Ftpl {
    topology: BipartiteTopology,
    n_files: usize,
    capacity: usize,
    caches: Vec<CacheState>,
    configs: Vec<CacheConfig>,
    perturbed: Vec<f64>,
    scratch: Vec<FileId>,
    clock: SlotClock,
}

impl Ftpl {
    /// `etas[j]` is the noise scale of cache `j`; cache `j` draws its noise
    /// from substream `j` of `seed`.
    pub fn new(
        topology: &BipartiteTopology,
        n_files: usize,
        capacity: usize,
        etas: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        Self::with_stream_offset(topology, n_files, capacity, etas, seed, 0)
    }

    /// As [`Ftpl::new`] but cache `j` uses noise substream `offset + j`.
    pub fn with_stream_offset(
        topology: &BipartiteTopology,
        n_files: usize,
        capacity: usize,
        etas: Vec<f64>,
        seed: u64,
        offset: u64,
    ) -> Result<Self> {
        if capacity == 0 || n_files == 0 {
            return Err(Error::invalid("capacity and catalog size must be positive"));
        }
        if etas.len() != topology.n_caches() {
            return Err(Error::Dimension {
                what: "noise scales",
                expected: topology.n_caches(),
                got: etas.len(),
            });
        }
        if etas.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid("noise scale must be finite and nonnegative"));
        }
        let caches = etas
            .into_iter()
            .enumerate()
            .map(|(j, eta)| CacheState {
                eta,
                counts: vec![0.0; n_files],
                rng: substream(seed, Purpose::FtplNoise, offset + j as u64),
                cached: Vec::new(),
            })
            .collect();
        Ok(Self {
            topology: topology.clone(),
            n_files,
            capacity,
            caches,
            configs: vec![CacheConfig::empty(n_files, capacity); topology.n_caches()],
            perturbed: vec![0.0; n_files],
            scratch: Vec::with_capacity(n_files),
            clock: SlotClock::new(),
        })
    }

    /// Cumulative request counts seen by `cache`.
    pub fn counts(&self, cache: usize) -> &[f64] {
        &self.caches[cache].counts
    }
}

impl Policy for Ftpl {
    fn label(&self) -> &str {
        "ftpl"
    }

    fn commit(&mut self, t: usize) -> Result<&[CacheConfig]> {
        if self.clock.commit(t)? {
            for (cache, config) in self.caches.iter_mut().zip(self.configs.iter_mut()) {
                if cache.eta == 0.0 {
                    self.perturbed.copy_from_slice(&cache.counts);
                } else {
                    for (p, &c) in self.perturbed.iter_mut().zip(&cache.counts) {
                        let gamma: f64 = StandardNormal.sample(&mut cache.rng);
                        *p = c + cache.eta * gamma;
                    }
                }
                top_k(&self.perturbed, self.capacity, &mut self.scratch);
                for &f in &cache.cached {
                    config.set(f, 0.0);
                }
                for &f in &self.scratch {
                    config.set(f, 1.0);
                }
                core::mem::swap(&mut cache.cached, &mut self.scratch);
                debug_assert!(cache.cached.len() <= self.capacity);
            }
        }
        Ok(&self.configs)
    }

    fn observe(&mut self, batch: &RequestBatch) -> Result<()> {
        check_batch(&self.topology, self.n_files, batch)?;
        self.clock.observe()?;
        for (j, cache) in self.caches.iter_mut().enumerate() {
            for f in cache_requests(&self.topology, batch, j) {
                cache.counts[f as usize] += 1.0;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(p: &mut Ftpl, requests: &[Vec<FileId>]) -> Vec<Vec<CacheConfig>> {
        requests
            .iter()
            .enumerate()
            .map(|(t, files)| {
                let cfg = p.commit(t + 1).unwrap().to_vec();
                p.observe(&RequestBatch::one_hot(files.clone())).unwrap();
                cfg
            })
            .collect()
    }

    #[test]
    fn zero_noise_follows_the_leader() {
        let single = BipartiteTopology::single();
        let mut p = Ftpl::new(&single, 3, 1, vec![0.0], 0).unwrap();
        let seq: Vec<_> = [0, 0, 0, 0, 0, 1, 1, 1, 2, 2].iter().map(|&f| vec![f]).collect();
        run(&mut p, &seq);
        assert_eq!(p.counts(0), &[5.0, 3.0, 2.0]);
        assert_eq!(p.commit(11).unwrap()[0].support(), vec![0]);
    }

    #[test]
    fn first_commit_is_a_full_uncoded_set() {
        let single = BipartiteTopology::single();
        let mut p = Ftpl::new(&single, 30, 4, vec![2.5], 9).unwrap();
        let cfg = &p.commit(1).unwrap()[0];
        assert!(cfg.is_uncoded());
        assert_eq!(cfg.support().len(), 4);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let t = crate::paper_topology_preset();
        let seq: Vec<Vec<FileId>> = (0..40).map(|s| (0..10).map(|i| ((s * 7 + i * 3) % 13) as FileId).collect()).collect();
        let mut a = Ftpl::new(&t, 13, 2, vec![1.5; 4], 11).unwrap();
        let mut b = Ftpl::new(&t, 13, 2, vec![1.5; 4], 11).unwrap();
        let mut c = Ftpl::new(&t, 13, 2, vec![1.5; 4], 12).unwrap();
        let (ra, rb, rc) = (run(&mut a, &seq), run(&mut b, &seq), run(&mut c, &seq));
        assert_eq!(ra, rb);
        assert_ne!(ra, rc);
    }

    #[test]
    fn commit_is_stable_within_a_slot() {
        let single = BipartiteTopology::single();
        let mut p = Ftpl::new(&single, 30, 4, vec![2.5], 9).unwrap();
        let first = p.commit(1).unwrap().to_vec();
        assert_eq!(first, p.commit(1).unwrap());
    }

    #[test]
    fn counts_follow_in_neighbors() {
        let t = crate::paper_topology_preset();
        let mut p = Ftpl::new(&t, 10, 1, vec![1.0; 4], 0).unwrap();
        p.commit(1).unwrap();
        p.observe(&RequestBatch::one_hot((0..10).collect())).unwrap();
        // cache 4 (1-indexed) serves users 1, 3, 10
        let expected: Vec<f64> = (0..10).map(|f| if [0, 2, 9].contains(&f) { 1.0 } else { 0.0 }).collect();
        assert_eq!(p.counts(3), expected.as_slice());
    }
}
