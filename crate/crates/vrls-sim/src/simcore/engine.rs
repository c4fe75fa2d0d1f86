//! The 1 ms stepped engine: mobility, CAM scheduling onto pool occurrences,
//! channel resolution, PRR windows, and scheduler events.
//!
//! CAM generation instants sit on a global grid at multiples of the CAM
//! period, and each CAM goes out on the vehicle's TB in the next pool
//! occurrence. Vehicles sharing a subframe therefore always transmit in the
//! same millisecond, which is what makes half-duplex conflicts and TB
//! collisions deterministic properties of the assignment alone.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{resolve_subframe, ChannelModel, NodeSnapshot, ShadowingField};
use crate::mobility::{schedule_reinsert, Direction, Vehicle, VehicleId};
use crate::scenario::ScenarioConfig;
use crate::schedulers::{EntryContext, Scheduler, WorldView};
use crate::simcore::{PrrAccumulator, TraceWriter, WindowRecord};
use crate::SimError;

/// Rolling log of recent transmissions with transmitter positions; feeds the
/// distributed sensing baseline.
#[derive(Debug, Clone)]
pub struct SensingLog {
    retention_ms: u64,
    events: VecDeque<(u64, usize, f64, f64)>,
}

impl SensingLog {
    pub fn new(retention_ms: u64) -> Self {
        SensingLog {
            retention_ms,
            events: VecDeque::new(),
        }
    }

    pub fn record(&mut self, time_ms: u64, tb: usize, x: f64, y: f64) {
        self.events.push_back((time_ms, tb, x, y));
        let cutoff = time_ms.saturating_sub(self.retention_ms);
        while self.events.front().is_some_and(|&(t, ..)| t < cutoff) {
            self.events.pop_front();
        }
    }

    /// Per-TB count of transmissions within `window_ms` of `now` whose
    /// transmitter was within `range_m` of the sensing position.
    pub fn occupancy(
        &self,
        now_ms: u64,
        window_ms: u64,
        n_tbs: usize,
        at: (f64, f64),
        range_m: f64,
    ) -> Vec<u32> {
        let cutoff = now_ms.saturating_sub(window_ms);
        let mut counts = vec![0u32; n_tbs];
        for &(t, tb, x, y) in &self.events {
            if t < cutoff || tb >= n_tbs {
                continue;
            }
            let d = ((x - at.0).powi(2) + (y - at.1).powi(2)).sqrt();
            if d <= range_m {
                counts[tb] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub entries: u32,
    pub exits: u32,
    pub transmissions: u32,
    pub window_closed: bool,
}

/// Transmission slot of generation `k` for a TB in `subframe`: the matching
/// subframe position in the first pool occurrence at or after k * period.
fn slot_for_generation(k: u64, subframe: u64, period_ms: u64, pool_len_ms: u64) -> u64 {
    let base = k * period_ms;
    base + ((subframe + pool_len_ms - (base % pool_len_ms)) % pool_len_ms)
}

pub struct Engine {
    scenario: ScenarioConfig,
    pool_len_ms: u64,
    window_ms: u64,
    time_ms: u64,
    vehicles: Vec<Vehicle>,
    entry_queue: BTreeMap<u64, Vec<(VehicleId, Direction)>>,
    exit_queue: BTreeMap<u64, Vec<VehicleId>>,
    tx_queue: BTreeMap<u64, Vec<VehicleId>>,
    model: ChannelModel,
    shadowing: ShadowingField,
    window_acc: PrrAccumulator,
    windows: Vec<WindowRecord>,
    window_index: u64,
    record_windows: bool,
    sensing: SensingLog,
    trace: Option<TraceWriter>,
    rng: ChaCha8Rng,
    actions: u64,
    total_transmissions: u64,
}

impl Engine {
    pub fn new(scenario: ScenarioConfig, seed: u64) -> Self {
        let model = ChannelModel::from_config(&scenario.channel, scenario.tx_power_dbm);
        let window_acc = PrrAccumulator::new(&scenario.prr_range_bins);
        Engine {
            pool_len_ms: scenario.pool.period_ms(),
            window_ms: scenario.prr_window_ms(),
            time_ms: 0,
            vehicles: Vec::new(),
            entry_queue: BTreeMap::new(),
            exit_queue: BTreeMap::new(),
            tx_queue: BTreeMap::new(),
            model,
            shadowing: ShadowingField::new(),
            window_acc,
            windows: Vec::new(),
            window_index: 0,
            record_windows: true,
            sensing: SensingLog::new(2000),
            trace: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            scenario,
            actions: 0,
            total_transmissions: 0,
        }
    }

    /// Places the initial population: uniformly random positions in both
    /// directions with uniformly random TBs, reported to the scheduler as
    /// warm-up assignments.
    pub fn warmup(&mut self, sched: &mut dyn Scheduler) {
        debug_assert_eq!(self.time_ms, 0, "warmup precedes stepping");
        let n = self.scenario.mobility.population_cap();
        for i in 0..n {
            let id = VehicleId(i as u64);
            let direction = if self.rng.random::<bool>() {
                Direction::Forward
            } else {
                Direction::Backward
            };
            let offset = self.rng.random_range(0.0..self.scenario.geometry.length_m);
            let tb = self.rng.random_range(0..self.scenario.pool.n_tbs());
            let phase = self.rng.random_range(0..self.pool_len_ms);
            let ctx = EntryContext {
                vehicle: id,
                direction,
                speed_mps: self.scenario.speed_mps,
                time_ms: 0,
                entry_offset_m: offset,
            };
            sched.on_warmup_assignment(&ctx, tb);
            self.spawn(id, direction, offset, tb, 0, phase);
        }
    }

    /// Inserts one vehicle with a prescribed assignment, bypassing the
    /// scheduler. Construction hook for reproducing analytic setups.
    pub fn insert_vehicle_at(
        &mut self,
        direction: Direction,
        offset_m: f64,
        tb: usize,
        phase_ms: u64,
    ) -> VehicleId {
        let id = VehicleId(self.vehicles.len() as u64);
        self.spawn(id, direction, offset_m, tb, self.time_ms, phase_ms);
        id
    }

    fn spawn(
        &mut self,
        id: VehicleId,
        direction: Direction,
        offset_m: f64,
        tb: usize,
        entry_ms: u64,
        phase_ms: u64,
    ) {
        let period = self.scenario.cam_period_ms;
        let sf = self.scenario.pool.subframe_of(tb) as u64;
        let next_gen = (entry_ms + phase_ms).div_ceil(period);
        let next_tx_ms = slot_for_generation(next_gen, sf, period, self.pool_len_ms);
        let vehicle = Vehicle {
            id,
            direction,
            speed_mps: self.scenario.speed_mps,
            entry_time_ms: entry_ms,
            entry_offset_m: offset_m,
            assigned_tb: tb,
            cam_phase_ms: phase_ms,
            next_gen,
            next_tx_ms,
        };
        if let Some(exit) = vehicle.exit_time_ms(self.scenario.geometry.length_m) {
            self.exit_queue.entry(exit).or_default().push(id);
        }
        self.tx_queue.entry(next_tx_ms).or_default().push(id);
        self.vehicles.push(vehicle);
    }

    pub fn step(&mut self, sched: &mut dyn Scheduler) -> Result<StepReport, SimError> {
        let t = self.time_ms;
        let mut report = StepReport::default();

        if let Some(ids) = self.exit_queue.remove(&t) {
            for id in ids {
                let Some(pos) = self.vehicles.iter().position(|v| v.id == id) else {
                    continue;
                };
                if self.vehicles[pos].position_m(t) <= self.scenario.geometry.length_m {
                    continue; // stale entry from a reused id
                }
                let vehicle = self.vehicles.remove(pos);
                sched.on_vehicle_exited(id, t);
                let (when, dir) =
                    schedule_reinsert(t, vehicle.direction, &self.scenario.mobility, &mut self.rng);
                self.entry_queue.entry(when).or_default().push((id, dir));
                report.exits += 1;
            }
        }

        if let Some(pending) = self.entry_queue.remove(&t) {
            for (id, direction) in pending {
                let phase = self.rng.random_range(0..self.pool_len_ms);
                let ctx = EntryContext {
                    vehicle: id,
                    direction,
                    speed_mps: self.scenario.speed_mps,
                    time_ms: t,
                    entry_offset_m: 0.0,
                };
                let tb = {
                    let view = WorldView {
                        now_ms: t,
                        scenario: &self.scenario,
                        vehicles: &self.vehicles,
                        sensing: &self.sensing,
                    };
                    sched.on_vehicle_entered(&ctx, &view)?
                };
                let n_tbs = self.scenario.pool.n_tbs();
                if tb >= n_tbs {
                    return Err(SimError::InvalidTb { tb, n_tbs });
                }
                self.spawn(id, direction, 0.0, tb, t, phase);
                self.actions += 1;
                report.entries += 1;
            }
        }

        if let Some(ids) = self.tx_queue.remove(&t) {
            let mut transmitters: Vec<(NodeSnapshot, usize)> = Vec::new();
            let mut tx_indices: Vec<usize> = Vec::new();
            for id in ids {
                let Some(i) = self.vehicles.iter().position(|v| v.id == id) else {
                    continue;
                };
                if self.vehicles[i].next_tx_ms != t || tx_indices.contains(&i) {
                    continue; // stale slot from an exited and re-entered id
                }
                let v = &self.vehicles[i];
                let (x, y) = v.global_xy(t, &self.scenario.geometry);
                transmitters.push((NodeSnapshot { id, x, y }, v.assigned_tb));
                tx_indices.push(i);
            }
            if !transmitters.is_empty() {
                let listeners: Vec<NodeSnapshot> = self
                    .vehicles
                    .iter()
                    .map(|v| {
                        let (x, y) = v.global_xy(t, &self.scenario.geometry);
                        NodeSnapshot { id: v.id, x, y }
                    })
                    .collect();
                let outcomes = resolve_subframe(
                    &self.scenario.pool,
                    &transmitters,
                    &listeners,
                    &self.model,
                    &mut self.shadowing,
                    &mut self.rng,
                    t,
                )?;
                for outcome in &outcomes {
                    self.window_acc.observe(outcome);
                    if let Some(trace) = self.trace.as_mut() {
                        trace.record(outcome)?;
                    }
                }
                self.total_transmissions += outcomes.len() as u64;
                report.transmissions = outcomes.len() as u32;
                sched.observe_outcomes(&outcomes);

                for ((snap, tb), &i) in transmitters.iter().zip(&tx_indices) {
                    self.sensing.record(t, *tb, snap.x, snap.y);
                    let reselected = {
                        let view = WorldView {
                            now_ms: t,
                            scenario: &self.scenario,
                            vehicles: &self.vehicles,
                            sensing: &self.sensing,
                        };
                        sched.after_transmission(snap.id, &view)
                    };
                    let n_tbs = self.scenario.pool.n_tbs();
                    let period = self.scenario.cam_period_ms;
                    let pool_len = self.pool_len_ms;
                    let sf_of = |tb: usize| self.scenario.pool.subframe_of(tb) as u64;
                    let vehicle = &mut self.vehicles[i];
                    vehicle.next_gen += 1;
                    if let Some(new_tb) = reselected {
                        if new_tb >= n_tbs {
                            return Err(SimError::InvalidTb { tb: new_tb, n_tbs });
                        }
                        vehicle.assigned_tb = new_tb;
                    }
                    vehicle.next_tx_ms = slot_for_generation(
                        vehicle.next_gen,
                        sf_of(vehicle.assigned_tb),
                        period,
                        pool_len,
                    );
                    self.tx_queue
                        .entry(vehicle.next_tx_ms)
                        .or_default()
                        .push(snap.id);
                }
            }
        }

        if (t + 1) % self.window_ms == 0 {
            let counts = self.window_acc.take();
            if self.record_windows {
                self.windows.push(WindowRecord {
                    index: self.window_index,
                    start_ms: t + 1 - self.window_ms,
                    end_ms: t + 1,
                    partial: false,
                    counts,
                });
            }
            self.window_index += 1;
            report.window_closed = true;
        }
        self.time_ms = t + 1;
        Ok(report)
    }

    pub fn run_ms(&mut self, ms: u64, sched: &mut dyn Scheduler) -> Result<(), SimError> {
        for _ in 0..ms {
            self.step(sched)?;
        }
        Ok(())
    }

    /// Closes a partially elapsed window at run end, marked as partial.
    pub fn flush_partial_window(&mut self) {
        let start = self.time_ms - self.time_ms % self.window_ms;
        if start == self.time_ms {
            return; // flush lands exactly on a boundary: nothing pending
        }
        let counts = self.window_acc.take();
        if self.record_windows {
            self.windows.push(WindowRecord {
                index: self.window_index,
                start_ms: start,
                end_ms: self.time_ms,
                partial: true,
                counts,
            });
        }
        self.window_index += 1;
    }

    pub fn set_record_windows(&mut self, record: bool) {
        self.record_windows = record;
    }

    pub fn set_trace(&mut self, trace: TraceWriter) {
        self.trace = Some(trace);
    }

    pub fn finish_trace(&mut self) -> Result<(), SimError> {
        if let Some(trace) = self.trace.take() {
            trace.finish()?;
        }
        Ok(())
    }

    pub fn time_ms(&self) -> u64 {
        self.time_ms
    }

    pub fn actions(&self) -> u64 {
        self.actions
    }

    pub fn total_transmissions(&self) -> u64 {
        self.total_transmissions
    }

    pub fn population(&self) -> usize {
        self.vehicles.len()
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn windows(&self) -> &[WindowRecord] {
        &self.windows
    }

    pub fn take_windows(&mut self) -> Vec<WindowRecord> {
        std::mem::take(&mut self.windows)
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_scenario, BuiltinScenario, MobilityConfig};
    use crate::schedulers::RandomScheduler;

    #[test]
    fn slot_grid_pins_subframes_within_each_period() {
        // 10 ms pool, 100 ms period: generation k transmits at k*100 + sf
        assert_eq!(slot_for_generation(0, 3, 100, 10), 3);
        assert_eq!(slot_for_generation(5, 3, 100, 10), 503);
        // 2 ms pool, 100 ms period: the TB recurs every 50th pool occurrence
        assert_eq!(slot_for_generation(1, 1, 100, 2), 101);
        // non-multiple period: next pool occurrence after the generation
        assert_eq!(slot_for_generation(1, 0, 25, 10), 30);
        assert_eq!(slot_for_generation(1, 7, 25, 10), 27);
    }

    #[test]
    fn same_subframe_vehicles_transmit_simultaneously_every_period() {
        let mut scenario = builtin_scenario(BuiltinScenario::ScdI);
        scenario.speed_mps = 0.0;
        let scenario = scenario.validate().unwrap();
        let mut engine = Engine::new(scenario, 1);
        let pool = engine.scenario().pool;
        engine.insert_vehicle_at(Direction::Forward, 10.0, pool.tb_index(4, 0), 0);
        engine.insert_vehicle_at(Direction::Forward, 50.0, pool.tb_index(4, 1), 0);
        let mut sched = RandomScheduler::new(0);
        let mut tx_times = Vec::new();
        for _ in 0..1000 {
            let rep = engine.step(&mut sched).unwrap();
            if rep.transmissions > 0 {
                assert_eq!(rep.transmissions, 2, "co-subframe TBs fire together");
                tx_times.push(engine.time_ms() - 1);
            }
        }
        assert_eq!(tx_times.len(), 10);
        for pair in tx_times.windows(2) {
            assert_eq!(pair[1] - pair[0], 100);
        }
    }

    #[test]
    fn constant_density_keeps_population_exact() {
        let mut scenario = builtin_scenario(BuiltinScenario::Mcd);
        scenario.channel = crate::scenario::ChannelConfig::McdRange { range_m: 120.0 };
        let scenario = scenario.validate().unwrap();
        let mut engine = Engine::new(scenario, 3);
        let mut sched = RandomScheduler::new(4);
        engine.warmup(&mut sched);
        assert_eq!(engine.population(), 30);
        engine.set_record_windows(false);
        for _ in 0..60_000 {
            engine.step(&mut sched).unwrap();
            assert_eq!(engine.population(), 30);
        }
        assert!(engine.actions() > 0, "re-entries triggered fresh actions");
    }

    #[test]
    fn exp_reinsert_never_exceeds_the_cap_and_preserves_identities() {
        let scenario = builtin_scenario(BuiltinScenario::ScdII);
        let mut engine = Engine::new(scenario, 9);
        let mut sched = RandomScheduler::new(5);
        engine.warmup(&mut sched);
        let mut dipped_below = false;
        for _ in 0..120_000 {
            engine.step(&mut sched).unwrap();
            let queued: usize = engine.entry_queue.values().map(Vec::len).sum();
            assert!(engine.population() <= 4);
            assert_eq!(engine.population() + queued, 4, "no leaks, no duplication");
            if engine.population() < 4 {
                dipped_below = true;
            }
        }
        assert!(dipped_below, "exponential offsets leave gaps in occupancy");
    }

    #[test]
    fn deterministic_replay_yields_identical_outcome_streams() {
        let run = || {
            let scenario = builtin_scenario(BuiltinScenario::ScdI);
            let mut engine = Engine::new(scenario, 11);
            let mut sched = RandomScheduler::new(12);
            engine.warmup(&mut sched);
            for _ in 0..40_000 {
                engine.step(&mut sched).unwrap();
            }
            (
                engine.actions(),
                engine.total_transmissions(),
                engine
                    .windows()
                    .iter()
                    .map(|w| w.counts.clone())
                    .collect::<Vec<_>>(),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn idle_pool_produces_no_outcomes() {
        let mut scenario = builtin_scenario(BuiltinScenario::ScdI);
        scenario.mobility = MobilityConfig::ExpReinsert {
            max_vehicles: 1,
            mean_offset_s: 2.5,
        };
        let scenario = scenario.validate().unwrap();
        let mut engine = Engine::new(scenario, 2);
        // a single vehicle transmits but nobody is in range to receive
        let mut sched = RandomScheduler::new(2);
        engine.warmup(&mut sched);
        for _ in 0..10_000 {
            engine.step(&mut sched).unwrap();
        }
        assert!(engine.windows()[0].counts.is_empty());
    }

    #[test]
    fn thirty_vehicles_at_100ms_produce_300_transmissions_per_second() {
        let mut scenario = builtin_scenario(BuiltinScenario::Mcd);
        scenario.speed_mps = 0.0; // freeze so the population is stable
        let scenario = scenario.validate().unwrap();
        let mut engine = Engine::new(scenario, 8);
        let mut sched = RandomScheduler::new(8);
        engine.warmup(&mut sched);
        // skip the first two periods while first generations align
        engine.run_ms(200, &mut sched).unwrap();
        let before = engine.total_transmissions();
        engine.run_ms(1000, &mut sched).unwrap();
        assert_eq!(engine.total_transmissions() - before, 300);
    }
}
