//! Scripted assignment keyed by vehicle id: keeps a prescribed allocation
//! pattern stationary across re-entries. Used to reproduce analytic PRR
//! setups and as a test harness; not exposed on the command line.

use std::collections::BTreeMap;

use crate::mobility::VehicleId;

use super::{EntryContext, Scheduler, SchedulerError, WorldView};

pub struct FixedScheduler {
    assignments: BTreeMap<VehicleId, usize>,
    fallback: usize,
}

impl FixedScheduler {
    pub fn new(assignments: BTreeMap<VehicleId, usize>) -> Self {
        FixedScheduler {
            assignments,
            fallback: 0,
        }
    }

    /// Vehicle id n gets `tbs[n % tbs.len()]`.
    pub fn cycling(tbs: &[usize]) -> Self {
        let mut sched = FixedScheduler::new(BTreeMap::new());
        sched.fallback = 0;
        for i in 0..1024 {
            sched
                .assignments
                .insert(VehicleId(i), tbs[i as usize % tbs.len()]);
        }
        sched
    }
}

impl Scheduler for FixedScheduler {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn on_vehicle_entered(
        &mut self,
        entry: &EntryContext,
        _view: &WorldView<'_>,
    ) -> Result<usize, SchedulerError> {
        Ok(*self.assignments.get(&entry.vehicle).unwrap_or(&self.fallback))
    }
}
