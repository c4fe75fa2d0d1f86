//! The subframe-stepped (1 ms) simulation core: transmission outcomes, PRR
//! accounting, the engine, and the analytic single-collision-domain PRR.

mod engine;
mod prr;
mod trace;

pub use engine::{Engine, SensingLog, StepReport};
pub use prr::{BinCount, PrrAccumulator, WindowCounts, WindowRecord};
pub use trace::{recount_trace, TraceWriter};

use crate::mobility::VehicleId;
use crate::scenario::ResourcePool;

/// Per-receiver result of one transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceptionResult {
    Success,
    /// Receiver was itself transmitting in the same subframe.
    HdLoss,
    /// Destroyed by another transmission on the same TB.
    CollisionLoss,
    /// Below the SINR decoding threshold.
    SinrLoss,
    /// Beyond the deterministic transmission range.
    OutOfRange,
}

impl ReceptionResult {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReceptionResult::Success => "success",
            ReceptionResult::HdLoss => "hd_loss",
            ReceptionResult::CollisionLoss => "collision_loss",
            ReceptionResult::SinrLoss => "sinr_loss",
            ReceptionResult::OutOfRange => "out_of_range",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "success" => ReceptionResult::Success,
            "hd_loss" => ReceptionResult::HdLoss,
            "collision_loss" => ReceptionResult::CollisionLoss,
            "sinr_loss" => ReceptionResult::SinrLoss,
            "out_of_range" => ReceptionResult::OutOfRange,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReceiverRecord {
    pub receiver: VehicleId,
    pub distance_m: f64,
    pub result: ReceptionResult,
}

/// One transmission with its per-receiver outcomes. The receiver set never
/// includes the transmitter.
#[derive(Debug, Clone)]
pub struct TransmissionOutcome {
    pub time_ms: u64,
    pub tx: VehicleId,
    pub tb: usize,
    pub receivers: Vec<ReceiverRecord>,
}

/// Closed-form PRR of a stationary assignment in a single collision domain,
/// where every vehicle hears every other. A message is lost at all receivers
/// if its TB is reused, and lost at co-subframe transmitters regardless.
/// Returns None for fewer than two vehicles (no receivers).
pub fn analytic_scd_prr(assignment: &[usize], pool: &ResourcePool) -> Option<f64> {
    let n = assignment.len();
    if n < 2 {
        return None;
    }
    let mut tb_count = vec![0u32; pool.n_tbs()];
    let mut sf_count = vec![0u32; pool.n_subframes as usize];
    for &tb in assignment {
        tb_count[tb] += 1;
        sf_count[pool.subframe_of(tb) as usize] += 1;
    }
    let mut successes = 0u64;
    for &tb in assignment {
        if tb_count[tb] >= 2 {
            continue; // collision: no receiver decodes this message
        }
        let co_subframe = sf_count[pool.subframe_of(tb) as usize] - 1;
        successes += (n as u64 - 1) - co_subframe as u64;
    }
    Some(successes as f64 / (n as u64 * (n as u64 - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(sf: u32, sch: u32) -> ResourcePool {
        ResourcePool {
            n_subframes: sf,
            n_subchannels: sch,
        }
    }

    #[test]
    fn orthogonal_assignment_reaches_full_prr() {
        // 10 vehicles on 10 distinct subframes
        let p = pool(10, 2);
        let assignment: Vec<usize> = (0..10).map(|sf| p.tb_index(sf, 0)).collect();
        assert_eq!(analytic_scd_prr(&assignment, &p), Some(1.0));
    }

    #[test]
    fn one_hd_pair_gives_88_of_90() {
        let p = pool(10, 2);
        let mut assignment: Vec<usize> = (0..9).map(|sf| p.tb_index(sf, 0)).collect();
        assignment.push(p.tb_index(0, 1)); // shares subframe 0
        let prr = analytic_scd_prr(&assignment, &p).unwrap();
        assert_eq!(prr, 88.0 / 90.0);
    }

    #[test]
    fn one_tb_collision_pair_gives_80_percent() {
        let p = pool(10, 2);
        let mut assignment: Vec<usize> = (0..9).map(|sf| p.tb_index(sf, 0)).collect();
        assignment.push(p.tb_index(0, 0)); // same TB as vehicle 0
        let prr = analytic_scd_prr(&assignment, &p).unwrap();
        assert_eq!(prr, 0.8);
    }

    #[test]
    fn two_plus_two_split_gives_two_thirds() {
        let p = pool(2, 10);
        let assignment = vec![
            p.tb_index(0, 0),
            p.tb_index(0, 1),
            p.tb_index(1, 0),
            p.tb_index(1, 1),
        ];
        let prr = analytic_scd_prr(&assignment, &p).unwrap();
        assert!((prr - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn three_plus_one_split_gives_half() {
        let p = pool(2, 10);
        let assignment = vec![
            p.tb_index(0, 0),
            p.tb_index(0, 1),
            p.tb_index(0, 2),
            p.tb_index(1, 0),
        ];
        assert_eq!(analytic_scd_prr(&assignment, &p), Some(0.5));
    }

    #[test]
    fn single_hd_pair_among_five_gives_90_percent() {
        let p = pool(5, 4);
        let assignment = vec![
            p.tb_index(0, 0),
            p.tb_index(0, 1),
            p.tb_index(1, 0),
            p.tb_index(2, 0),
            p.tb_index(3, 0),
        ];
        assert_eq!(analytic_scd_prr(&assignment, &p), Some(0.9));
    }
}
