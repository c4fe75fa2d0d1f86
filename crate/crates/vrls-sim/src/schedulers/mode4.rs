//! Simplified distributed sensing baseline.
//!
//! Each vehicle reselects autonomously: it ranks TBs by sensed occupancy
//! (transmissions from in-range vehicles over the last sensing window),
//! draws uniformly from the least-occupied fifth of the pool, and repeats
//! whenever its reselection counter expires. With a keep probability of 0
//! the counter forces a fresh selection every cycle. Vehicles also reselect
//! at entry, since out-of-coverage entrants carry no network grant.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mobility::VehicleId;

use super::{EntryContext, Scheduler, SchedulerError, WorldView};

#[derive(Debug, Clone, Copy)]
pub struct Mode4Config {
    /// Sensing window length, ms.
    pub sensing_window_ms: u64,
    /// Fraction of the pool forming the candidate set.
    pub candidate_fraction: f64,
    /// Reselection counter drawn uniformly from this inclusive range.
    pub counter_range: (u32, u32),
    /// Probability of keeping the TB when the counter expires.
    pub prob_resource_keep: f64,
}

impl Default for Mode4Config {
    fn default() -> Self {
        Mode4Config {
            sensing_window_ms: 1000,
            candidate_fraction: 0.2,
            counter_range: (5, 15),
            prob_resource_keep: 0.0,
        }
    }
}

struct VehicleState {
    counter: u32,
}

pub struct Mode4Scheduler {
    config: Mode4Config,
    rng: ChaCha8Rng,
    states: BTreeMap<VehicleId, VehicleState>,
}

impl Mode4Scheduler {
    pub fn new(config: Mode4Config, seed: u64) -> Self {
        Mode4Scheduler {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            states: BTreeMap::new(),
        }
    }

    fn draw_counter(&mut self) -> u32 {
        let (lo, hi) = self.config.counter_range;
        self.rng.random_range(lo..=hi)
    }

    fn select(&mut self, view: &WorldView<'_>, x: f64, y: f64) -> usize {
        let n_tbs = view.scenario.pool.n_tbs();
        let range = crate::channel::ChannelModel::from_config(
            &view.scenario.channel,
            view.scenario.tx_power_dbm,
        )
        .sensing_range_m();
        let occupancy = view.sensing.occupancy(
            view.now_ms,
            self.config.sensing_window_ms,
            n_tbs,
            (x, y),
            range,
        );
        let mut ranked: Vec<usize> = (0..n_tbs).collect();
        ranked.sort_by_key(|&tb| (occupancy[tb], tb));
        let k = ((n_tbs as f64 * self.config.candidate_fraction).ceil() as usize).max(1);
        ranked[self.rng.random_range(0..k)]
    }
}

impl Scheduler for Mode4Scheduler {
    fn name(&self) -> &'static str {
        "mode4"
    }

    fn on_vehicle_entered(
        &mut self,
        entry: &EntryContext,
        view: &WorldView<'_>,
    ) -> Result<usize, SchedulerError> {
        let (x, y) = entry_xy(entry, view);
        let tb = self.select(view, x, y);
        let counter = self.draw_counter();
        self.states.insert(entry.vehicle, VehicleState { counter });
        Ok(tb)
    }

    fn on_warmup_assignment(&mut self, entry: &EntryContext, _tb: usize) {
        let counter = self.draw_counter();
        self.states.insert(entry.vehicle, VehicleState { counter });
    }

    fn after_transmission(&mut self, vehicle: VehicleId, view: &WorldView<'_>) -> Option<usize> {
        {
            let state = self.states.get_mut(&vehicle)?;
            state.counter = state.counter.saturating_sub(1);
            if state.counter > 0 {
                return None;
            }
        }
        let counter = self.draw_counter();
        self.states.get_mut(&vehicle)?.counter = counter;
        let keep = self.config.prob_resource_keep > 0.0
            && self.rng.random::<f64>() < self.config.prob_resource_keep;
        if keep {
            return None;
        }
        let v = view.vehicles.iter().find(|v| v.id == vehicle)?;
        let (x, y) = v.global_xy(view.now_ms, &view.scenario.geometry);
        Some(self.select(view, x, y))
    }

    fn on_vehicle_exited(&mut self, vehicle: VehicleId, _time_ms: u64) {
        self.states.remove(&vehicle);
    }
}

fn entry_xy(entry: &EntryContext, view: &WorldView<'_>) -> (f64, f64) {
    let geom = &view.scenario.geometry;
    match entry.direction {
        crate::mobility::Direction::Forward => (entry.entry_offset_m, 0.0),
        crate::mobility::Direction::Backward => {
            (geom.length_m - entry.entry_offset_m, geom.lane_width_m)
        }
    }
}
