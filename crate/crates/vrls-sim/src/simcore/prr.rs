//! Packet-reception-ratio accounting over configurable distance bins.
//!
//! A receiver enters a bin's denominator when its distance to the
//! transmitter falls in `[min, max)`; receivers beyond the last bin are out
//! of scope entirely. Losses are tallied per window for reporting.

use super::{ReceptionResult, TransmissionOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinCount {
    pub lo_m: f64,
    pub hi_m: f64,
    pub successes: u64,
    pub in_range: u64,
}

impl BinCount {
    pub fn prr(&self) -> Option<f64> {
        if self.in_range == 0 {
            None
        } else {
            Some(self.successes as f64 / self.in_range as f64)
        }
    }
}

/// Counters for one closed measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowCounts {
    pub bins: Vec<BinCount>,
    pub hd_losses: u64,
    pub collision_losses: u64,
}

impl WindowCounts {
    /// Minimum PRR over the non-empty bins; None when every bin is empty
    /// (no transmissions observed).
    pub fn min_prr(&self) -> Option<f64> {
        self.bins
            .iter()
            .filter_map(BinCount::prr)
            .fold(None, |acc, p| Some(acc.map_or(p, |a: f64| a.min(p))))
    }

    /// PRR pooled over all bins (sum of successes over sum of denominators).
    pub fn pooled_prr(&self) -> Option<f64> {
        let suc: u64 = self.bins.iter().map(|b| b.successes).sum();
        let den: u64 = self.bins.iter().map(|b| b.in_range).sum();
        if den == 0 {
            None
        } else {
            Some(suc as f64 / den as f64)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bins.iter().all(|b| b.in_range == 0)
    }
}

/// A closed reporting window; `partial` marks a window flushed before its
/// full length elapsed at run end.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub index: u64,
    pub start_ms: u64,
    pub end_ms: u64,
    pub partial: bool,
    pub counts: WindowCounts,
}

#[derive(Debug, Clone)]
pub struct PrrAccumulator {
    bins: Vec<(f64, f64)>,
    successes: Vec<u64>,
    in_range: Vec<u64>,
    hd_losses: u64,
    collision_losses: u64,
}

impl PrrAccumulator {
    pub fn new(bins: &[(f64, f64)]) -> Self {
        PrrAccumulator {
            bins: bins.to_vec(),
            successes: vec![0; bins.len()],
            in_range: vec![0; bins.len()],
            hd_losses: 0,
            collision_losses: 0,
        }
    }

    fn bin_of(&self, distance: f64) -> Option<usize> {
        self.bins
            .iter()
            .position(|&(lo, hi)| distance >= lo && distance < hi)
    }

    pub fn observe(&mut self, outcome: &TransmissionOutcome) {
        for rec in &outcome.receivers {
            let Some(bin) = self.bin_of(rec.distance_m) else {
                continue;
            };
            self.in_range[bin] += 1;
            match rec.result {
                ReceptionResult::Success => self.successes[bin] += 1,
                ReceptionResult::HdLoss => self.hd_losses += 1,
                ReceptionResult::CollisionLoss => self.collision_losses += 1,
                ReceptionResult::SinrLoss | ReceptionResult::OutOfRange => {}
            }
        }
    }

    /// Closes the window: returns the counts and resets the sums.
    pub fn take(&mut self) -> WindowCounts {
        let bins = self
            .bins
            .iter()
            .zip(self.successes.iter().zip(&self.in_range))
            .map(|(&(lo_m, hi_m), (&successes, &in_range))| BinCount {
                lo_m,
                hi_m,
                successes,
                in_range,
            })
            .collect();
        let counts = WindowCounts {
            bins,
            hd_losses: self.hd_losses,
            collision_losses: self.collision_losses,
        };
        self.successes.iter_mut().for_each(|v| *v = 0);
        self.in_range.iter_mut().for_each(|v| *v = 0);
        self.hd_losses = 0;
        self.collision_losses = 0;
        counts
    }

    pub fn is_empty(&self) -> bool {
        self.in_range.iter().all(|&v| v == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::VehicleId;
    use crate::simcore::ReceiverRecord;

    fn outcome(records: Vec<(f64, ReceptionResult)>) -> TransmissionOutcome {
        TransmissionOutcome {
            time_ms: 0,
            tx: VehicleId(0),
            tb: 0,
            receivers: records
                .into_iter()
                .enumerate()
                .map(|(i, (distance_m, result))| ReceiverRecord {
                    receiver: VehicleId(i as u64 + 1),
                    distance_m,
                    result,
                })
                .collect(),
        }
    }

    #[test]
    fn receivers_beyond_the_last_bin_are_excluded() {
        let mut acc = PrrAccumulator::new(&[(0.0, 50.0), (50.0, 100.0)]);
        acc.observe(&outcome(vec![
            (10.0, ReceptionResult::Success),
            (60.0, ReceptionResult::SinrLoss),
            (130.0, ReceptionResult::OutOfRange),
        ]));
        let w = acc.take();
        assert_eq!(w.bins[0].in_range, 1);
        assert_eq!(w.bins[1].in_range, 1);
        assert_eq!(w.bins[0].successes + w.bins[1].successes, 1);
        assert_eq!(w.pooled_prr(), Some(0.5));
    }

    #[test]
    fn min_is_over_non_empty_bins_only() {
        let mut acc = PrrAccumulator::new(&[(0.0, 50.0), (50.0, 100.0)]);
        acc.observe(&outcome(vec![(10.0, ReceptionResult::Success)]));
        let w = acc.take();
        assert_eq!(w.min_prr(), Some(1.0));
    }

    #[test]
    fn empty_window_is_signalled_distinctly() {
        let mut acc = PrrAccumulator::new(&[(0.0, f64::INFINITY)]);
        assert!(acc.is_empty());
        let w = acc.take();
        assert_eq!(w.min_prr(), None);
        assert_eq!(w.pooled_prr(), None);
        assert!(w.is_empty());
    }

    #[test]
    fn take_resets_the_sums() {
        let mut acc = PrrAccumulator::new(&[(0.0, f64::INFINITY)]);
        acc.observe(&outcome(vec![(10.0, ReceptionResult::HdLoss)]));
        let w1 = acc.take();
        assert_eq!(w1.hd_losses, 1);
        assert_eq!(w1.bins[0].in_range, 1);
        let w2 = acc.take();
        assert_eq!(w2.hd_losses, 0);
        assert_eq!(w2.bins[0].in_range, 0);
    }
}
