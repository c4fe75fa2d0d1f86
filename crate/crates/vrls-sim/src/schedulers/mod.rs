//! Uniform scheduler contract plus the baseline schedulers.
//!
//! A scheduler assigns exactly one TB at vehicle entry, synchronously and in
//! zero simulation time. Outcome feedback and the per-transmission hook are
//! optional; only schedulers that need them implement them.

mod fixed;
mod mode4;
mod oracle;
mod random;

pub use fixed::FixedScheduler;
pub use mode4::{Mode4Config, Mode4Scheduler};
pub use oracle::{brute_force_assign, OracleScheduler};
pub use random::RandomScheduler;

use thiserror::Error;

use crate::mobility::{Direction, Vehicle, VehicleId};
use crate::scenario::ScenarioConfig;
use crate::simcore::{SensingLog, TransmissionOutcome};

#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("policy produced a non-finite action distribution")]
    NonFinitePolicy,
    #[error("scheduler {name} cannot run on this scenario: {reason}")]
    Unsupported { name: &'static str, reason: String },
    #[error("population {population} exceeds the exhaustive-search cap {cap}")]
    AboveCap { population: usize, cap: usize },
    #[error(transparent)]
    Nn(#[from] nnkit::NnError),
}

/// Entry information handed to the scheduler when a vehicle requests its
/// assignment at the coverage boundary.
#[derive(Debug, Clone, Copy)]
pub struct EntryContext {
    pub vehicle: VehicleId,
    pub direction: Direction,
    pub speed_mps: f64,
    pub time_ms: u64,
    /// Position along the travel axis at assignment time; non-zero only for
    /// the warm-up population.
    pub entry_offset_m: f64,
}

/// Read-only view of the world offered to schedulers. The sensing log is the
/// only part a distributed scheduler may consult; the vehicle list (with
/// current assignments) exists for genie-style oracles.
pub struct WorldView<'a> {
    pub now_ms: u64,
    pub scenario: &'a ScenarioConfig,
    pub vehicles: &'a [Vehicle],
    pub sensing: &'a SensingLog,
}

pub trait Scheduler {
    fn name(&self) -> &'static str;

    /// Returns the TB index for the entering vehicle.
    fn on_vehicle_entered(
        &mut self,
        entry: &EntryContext,
        view: &WorldView<'_>,
    ) -> Result<usize, SchedulerError>;

    /// Warm-up population assignments are drawn by the engine; schedulers
    /// that keep allocation bookkeeping learn about them here.
    fn on_warmup_assignment(&mut self, _entry: &EntryContext, _tb: usize) {}

    /// Outcome feedback after each resolved subframe.
    fn observe_outcomes(&mut self, _outcomes: &[TransmissionOutcome]) {}

    /// Called after a vehicle transmitted; returning a TB reselects it from
    /// the next CAM onward (used by the distributed sensing baseline).
    fn after_transmission(
        &mut self,
        _vehicle: VehicleId,
        _view: &WorldView<'_>,
    ) -> Option<usize> {
        None
    }

    fn on_vehicle_exited(&mut self, _vehicle: VehicleId, _time_ms: u64) {}
}
