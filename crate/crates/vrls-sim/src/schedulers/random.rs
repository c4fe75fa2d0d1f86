//! Centralized random assignment: uniform over the pool at each entry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EntryContext, Scheduler, SchedulerError, WorldView};

pub struct RandomScheduler {
    rng: ChaCha8Rng,
}

impl RandomScheduler {
    pub fn new(seed: u64) -> Self {
        RandomScheduler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for RandomScheduler {
    fn name(&self) -> &'static str {
        "random"
    }

    fn on_vehicle_entered(
        &mut self,
        _entry: &EntryContext,
        view: &WorldView<'_>,
    ) -> Result<usize, SchedulerError> {
        Ok(self.rng.random_range(0..view.scenario.pool.n_tbs()))
    }
}
