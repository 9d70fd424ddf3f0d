//! Online gradient ascent over the joint capped-simplex polytope.

use alloc::vec::Vec;

use super::{check_batch, Policy, SlotClock};
use crate::geometry::{project_in_place, supergradient_sparse, InelasticGradient};
use crate::model::{BipartiteTopology, CacheConfig, RequestBatch};
use crate::rewards::{check_kind, RewardKind};
use crate::{Error, Result};

/// `y <- Proj(y + eta g)` per cache, starting from `C/N` everywhere.
#[derive(Debug, Clone)]
pub struct Oga {
    reward: RewardKind,
    mode: InelasticGradient,
    topology: BipartiteTopology,
    n_files: usize,
    capacity: usize,
    eta: f64,
    configs: Vec<CacheConfig>,
    clock: SlotClock,
}

impl Oga {
    pub fn new(
        reward: RewardKind,
        mode: InelasticGradient,
        topology: &BipartiteTopology,
        n_files: usize,
        capacity: usize,
        eta: f64,
    ) -> Result<Self> {
        if capacity == 0 || n_files == 0 {
            return Err(Error::invalid("capacity and catalog size must be positive"));
        }
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::invalid("step size must be finite and nonnegative"));
        }
        let start = (capacity as f64 / n_files as f64).min(1.0);
        let y0 = CacheConfig::from_occupancy(alloc::vec![start; n_files], capacity)?;
        Ok(Self {
            reward,
            mode,
            topology: topology.clone(),
            n_files,
            capacity,
            eta,
            configs: alloc::vec![y0; topology.n_caches()],
            clock: SlotClock::new(),
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl Policy for Oga {
    fn label(&self) -> &str {
        "oga"
    }

    fn commit(&mut self, t: usize) -> Result<&[CacheConfig]> {
        self.clock.commit(t)?;
        Ok(&self.configs)
    }

    fn observe(&mut self, batch: &RequestBatch) -> Result<()> {
        check_batch(&self.topology, self.n_files, batch)?;
        check_kind(self.reward, &self.topology, batch.r())?;
        self.clock.observe()?;
        let grad = supergradient_sparse(self.reward, self.mode, &self.topology, batch, &self.configs)?;
        for (config, entries) in self.configs.iter_mut().zip(grad) {
            if entries.is_empty() || self.eta == 0.0 {
                continue;
            }
            let y = config.occupancy_mut();
            for (f, g) in entries {
                y[f as usize] += self.eta * g;
            }
            project_in_place(y, self.capacity as f64);
            debug_assert!(config.is_feasible());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn starts_uniform_and_steps() {
        let single = BipartiteTopology::single();
        let mut p = Oga::new(RewardKind::Single, InelasticGradient::Masked, &single, 4, 1, 0.5).unwrap();
        assert_eq!(p.commit(1).unwrap()[0].occupancy(), &[0.25; 4]);
        p.observe(&RequestBatch::one_hot(alloc::vec![2])).unwrap();
        // (0.25, 0.25, 0.75, 0.25) sums to 1.5: shift by 1/8
        let y = p.commit(2).unwrap()[0].occupancy().to_vec();
        for (f, v) in y.iter().enumerate() {
            let want = if f == 2 { 0.625 } else { 0.125 };
            assert_abs_diff_eq!(*v, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn step_from_vertex() {
        // y = (1, 0), eta = 0.5, request file 1: (1, 0.5) projects to (0.75, 0.25)
        let single = BipartiteTopology::single();
        let mut p = Oga::new(RewardKind::Single, InelasticGradient::Masked, &single, 2, 1, 0.5).unwrap();
        p.configs[0] = CacheConfig::uncoded(2, 1, &[0]).unwrap();
        p.commit(1).unwrap();
        p.observe(&RequestBatch::one_hot(alloc::vec![1])).unwrap();
        let y = p.commit(2).unwrap()[0].occupancy().to_vec();
        assert_abs_diff_eq!(y[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.25, epsilon = 1e-12);
    }
}
