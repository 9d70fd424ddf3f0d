//! Classical demand caching: every miss is loaded immediately.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;

use super::{cache_requests, check_batch, Policy, SlotClock};
use crate::model::{BipartiteTopology, CacheConfig, FileId, RequestBatch};
use crate::rng::{substream, Purpose};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandRule {
    /// Evict the least recently requested resident.
    Lru,
    /// Evict the resident with the fewest requests so far (ties: the
    /// highest file id goes). The missed file is always loaded.
    Lfu,
    /// Evict the oldest insertion; hits do not reorder.
    Fifo,
}

/// Contents before the first slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialFill {
    Empty,
    /// A seeded uniformly random set of `min(C, N)` files per cache.
    Random,
}

#[derive(Debug, Clone)]
struct CacheState {
    /// LRU: least recent first. FIFO: oldest first. LFU: unordered.
    residents: Vec<FileId>,
    frequency: Vec<u64>,
    config: CacheConfig,
}

/// LRU, LFU or FIFO running independently at every cache on the requests of
/// its in-neighbors.
#[derive(Debug, Clone)]
pub struct DemandCaching {
    rule: DemandRule,
    topology: BipartiteTopology,
    n_files: usize,
    capacity: usize,
    caches: Vec<CacheState>,
    configs: Vec<CacheConfig>,
    clock: SlotClock,
}

impl DemandCaching {
    pub fn new(
        rule: DemandRule,
        topology: &BipartiteTopology,
        n_files: usize,
        capacity: usize,
        fill: InitialFill,
        seed: u64,
    ) -> Result<Self> {
        if capacity == 0 || n_files == 0 {
            return Err(Error::invalid("capacity and catalog size must be positive"));
        }
        let caches: Vec<CacheState> = (0..topology.n_caches())
            .map(|j| {
                let residents: Vec<FileId> = match fill {
                    InitialFill::Empty => Vec::new(),
                    InitialFill::Random => {
                        let mut rng = substream(seed, Purpose::WarmStart, j as u64);
                        sample(&mut rng, n_files, capacity.min(n_files))
                            .into_iter()
                            .map(|f| f as FileId)
                            .collect()
                    }
                };
                let config = CacheConfig::uncoded(n_files, capacity, &residents).expect("fits");
                CacheState {
                    residents,
                    frequency: if rule == DemandRule::Lfu {
                        vec![0; n_files]
                    } else {
                        Vec::new()
                    },
                    config,
                }
            })
            .collect();
        let configs = caches.iter().map(|c| c.config.clone()).collect();
        Ok(Self {
            rule,
            topology: topology.clone(),
            n_files,
            capacity,
            caches,
            configs,
            clock: SlotClock::new(),
        })
    }

    fn request(rule: DemandRule, capacity: usize, cache: &mut CacheState, file: FileId) {
        if rule == DemandRule::Lfu {
            cache.frequency[file as usize] += 1;
        }
        let position = cache.residents.iter().position(|&f| f == file);
        match (rule, position) {
            (DemandRule::Lru, Some(p)) => {
                cache.residents.remove(p);
                cache.residents.push(file);
            }
            (_, Some(_)) => {}
            (_, None) => {
                cache.residents.push(file);
                cache.config.set(file, 1.0);
                if cache.residents.len() > capacity {
                    let victim = match rule {
                        DemandRule::Lru | DemandRule::Fifo => 0,
                        DemandRule::Lfu => {
                            let freq = &cache.frequency;
                            let candidates = &cache.residents[..cache.residents.len() - 1];
                            (0..candidates.len())
                                .min_by(|&a, &b| {
                                    let (fa, fb) = (candidates[a], candidates[b]);
                                    freq[fa as usize]
                                        .cmp(&freq[fb as usize])
                                        .then(fb.cmp(&fa))
                                })
                                .expect("capacity >= 1")
                        }
                    };
                    let evicted = cache.residents.remove(victim);
                    cache.config.set(evicted, 0.0);
                }
            }
        }
        debug_assert!(cache.residents.len() <= capacity);
    }
}

impl Policy for DemandCaching {
    fn label(&self) -> &str {
        match self.rule {
            DemandRule::Lru => "lru",
            DemandRule::Lfu => "lfu",
            DemandRule::Fifo => "fifo",
        }
    }

    fn commit(&mut self, t: usize) -> Result<&[CacheConfig]> {
        if self.clock.commit(t)? {
            for (dst, src) in self.configs.iter_mut().zip(&self.caches) {
                dst.clone_from(&src.config);
            }
        }
        Ok(&self.configs)
    }

    fn observe(&mut self, batch: &RequestBatch) -> Result<()> {
        check_batch(&self.topology, self.n_files, batch)?;
        self.clock.observe()?;
        for (j, cache) in self.caches.iter_mut().enumerate() {
            for f in cache_requests(&self.topology, batch, j) {
                Self::request(self.rule, self.capacity, cache, f);
            }
        }
        Ok(())
    }
}
