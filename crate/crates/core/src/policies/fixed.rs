use alloc::vec::Vec;

use super::{Policy, SlotClock};
use crate::model::{CacheConfig, RequestBatch};
use crate::{Error, Result};

/// Holds the same configuration forever.
#[derive(Debug, Clone)]
pub struct StaticFixed {
    configs: Vec<CacheConfig>,
    clock: SlotClock,
}

impl StaticFixed {
    pub fn new(configs: Vec<CacheConfig>) -> Result<Self> {
        if configs.is_empty() || configs.iter().any(|c| !c.is_feasible()) {
            return Err(Error::invalid("static configuration must be feasible"));
        }
        Ok(Self {
            configs,
            clock: SlotClock::new(),
        })
    }
}

impl Policy for StaticFixed {
    fn label(&self) -> &str {
        "static"
    }

    fn commit(&mut self, t: usize) -> Result<&[CacheConfig]> {
        self.clock.commit(t)?;
        Ok(&self.configs)
    }

    fn observe(&mut self, batch: &RequestBatch) -> Result<()> {
        batch.validate(batch.n_users(), self.configs[0].n_files())?;
        self.clock.observe()
    }
}
