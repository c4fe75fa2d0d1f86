//! Scheduler-side allocation bookkeeping and the observation it produces.
//!
//! The observation is an n_tbs x 4 matrix in [0,1]: per TB the normalized
//! assignment count and the normalized traveled distance of the last
//! assignee, first for the entering vehicle's own direction and then for the
//! opposite one. The scheduler is predictive: it sees nothing from inside
//! the area, so records expire once an assignee's estimated distance passes
//! the far end.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::mobility::Direction;
use crate::scenario::ScenarioConfig;

pub const STATE_COLS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    /// n_tbs rows by 4 columns, row-major.
    pub matrix: Vec<f64>,
    pub n_subframes: usize,
    pub n_subchannels: usize,
}

impl SchedulerState {
    pub fn n_rows(&self) -> usize {
        self.n_subframes * self.n_subchannels
    }

    /// Subframe group label of a row (rows are TB indices).
    pub fn group_of(&self, row: usize) -> usize {
        row / self.n_subchannels
    }
}

/// A state whose subframe groups were permuted. `perm[shuffled_row]` is the
/// original TB index of that row.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffledState {
    pub matrix: Vec<f64>,
    pub perm: Vec<usize>,
}

/// Shuffles whole subframe groups uniformly at random, preserving the
/// subchannel order inside each group.
pub fn shuffle_state(state: &SchedulerState, rng: &mut ChaCha8Rng) -> ShuffledState {
    let n_sf = state.n_subframes;
    let n_sch = state.n_subchannels;
    let mut group_order: Vec<usize> = (0..n_sf).collect();
    for i in (1..n_sf).rev() {
        let j = rng.random_range(0..=i);
        group_order.swap(i, j);
    }
    let mut matrix = Vec::with_capacity(state.matrix.len());
    let mut perm = Vec::with_capacity(state.n_rows());
    for &group in &group_order {
        for sch in 0..n_sch {
            let tb = group * n_sch + sch;
            perm.push(tb);
            matrix.extend_from_slice(&state.matrix[tb * STATE_COLS..(tb + 1) * STATE_COLS]);
        }
    }
    ShuffledState { matrix, perm }
}

#[derive(Debug, Clone, Copy)]
struct Assignment {
    /// Entry instant backdated by any initial offset, so traveled distance
    /// is speed * (now - virtual_entry). May be negative for warm-up
    /// vehicles placed mid-road.
    virtual_entry_ms: f64,
    speed_mps: f64,
}

impl Assignment {
    fn traveled_m(&self, now_ms: u64) -> f64 {
        self.speed_mps * (now_ms as f64 - self.virtual_entry_ms) / 1000.0
    }
}

/// Per-TB, per-direction allocation history with predictive expiry.
#[derive(Debug, Clone)]
pub struct TbBookkeeping {
    length_m: f64,
    max_per_direction: f64,
    n_subframes: usize,
    n_subchannels: usize,
    records: Vec<[Vec<Assignment>; 2]>,
}

fn dir_index(direction: Direction) -> usize {
    match direction {
        Direction::Forward => 0,
        Direction::Backward => 1,
    }
}

impl TbBookkeeping {
    pub fn new(scenario: &ScenarioConfig) -> Self {
        TbBookkeeping {
            length_m: scenario.geometry.length_m,
            max_per_direction: scenario.geometry.max_vehicles_per_direction() as f64,
            n_subframes: scenario.pool.n_subframes as usize,
            n_subchannels: scenario.pool.n_subchannels as usize,
            records: vec![[Vec::new(), Vec::new()]; scenario.pool.n_tbs()],
        }
    }

    pub fn record_assignment(
        &mut self,
        tb: usize,
        direction: Direction,
        now_ms: u64,
        speed_mps: f64,
        entry_offset_m: f64,
    ) {
        let virtual_entry_ms = if speed_mps > 0.0 {
            now_ms as f64 - entry_offset_m / speed_mps * 1000.0
        } else {
            now_ms as f64
        };
        self.records[tb][dir_index(direction)].push(Assignment {
            virtual_entry_ms,
            speed_mps,
        });
    }

    fn expire(&mut self, now_ms: u64) {
        let length = self.length_m;
        for per_tb in &mut self.records {
            for list in per_tb.iter_mut() {
                list.retain(|a| a.traveled_m(now_ms) <= length);
            }
        }
    }

    /// Live (non-expired) assignment count per TB for one direction.
    pub fn counts(&mut self, direction: Direction, now_ms: u64) -> Vec<u32> {
        self.expire(now_ms);
        self.records
            .iter()
            .map(|r| r[dir_index(direction)].len() as u32)
            .collect()
    }

    /// Builds the observation for a vehicle entering in `entrant_direction`.
    /// Column pairs are ordered same-direction first.
    pub fn build_state(&mut self, now_ms: u64, entrant_direction: Direction) -> SchedulerState {
        self.expire(now_ms);
        let n_tbs = self.records.len();
        let mut matrix = vec![0.0; n_tbs * STATE_COLS];
        let same = dir_index(entrant_direction);
        for (tb, per_tb) in self.records.iter().enumerate() {
            for (pair, &dir) in [same, 1 - same].iter().enumerate() {
                let list = &per_tb[dir];
                let count = list.len() as f64 / self.max_per_direction;
                let delta_x = list
                    .last()
                    .map(|a| (a.traveled_m(now_ms) / self.length_m).clamp(0.0, 1.0))
                    .unwrap_or(0.0);
                matrix[tb * STATE_COLS + 2 * pair] = count.clamp(0.0, 1.0);
                matrix[tb * STATE_COLS + 2 * pair + 1] = delta_x;
            }
        }
        SchedulerState {
            matrix,
            n_subframes: self.n_subframes,
            n_subchannels: self.n_subchannels,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin_scenario, BuiltinScenario};
    use rand::SeedableRng;

    fn scenario_250m() -> ScenarioConfig {
        let mut sc = builtin_scenario(BuiltinScenario::ScdI);
        sc.geometry.length_m = 250.0;
        sc.validate().unwrap()
    }

    #[test]
    fn empty_area_gives_the_zero_matrix() {
        let mut book = TbBookkeeping::new(&scenario_250m());
        let state = book.build_state(0, Direction::Forward);
        assert_eq!(state.n_rows(), 20);
        assert!(state.matrix.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn count_and_traveled_distance_normalize_as_published() {
        // 250 m area: 50 vehicles fit per direction. TB 1 assigned twice in
        // the entrant's direction; the last assignee entered 7.2 s ago at
        // 50 km/h, so it traveled 100 m = 0.4 of the area.
        let mut book = TbBookkeeping::new(&scenario_250m());
        let speed = 50.0 / 3.6;
        book.record_assignment(1, Direction::Forward, 0, speed, 0.0);
        book.record_assignment(1, Direction::Forward, 0, speed, 0.0);
        let state = book.build_state(7200, Direction::Forward);
        assert!((state.matrix[1 * STATE_COLS] - 2.0 / 50.0).abs() < 1e-12);
        assert!((state.matrix[1 * STATE_COLS + 1] - 0.4).abs() < 1e-12);
        // opposite-direction columns stay empty
        assert_eq!(state.matrix[1 * STATE_COLS + 2], 0.0);
        assert_eq!(state.matrix[1 * STATE_COLS + 3], 0.0);
    }

    #[test]
    fn opposite_entrant_swaps_the_column_pairs() {
        let mut book = TbBookkeeping::new(&scenario_250m());
        let speed = 50.0 / 3.6;
        book.record_assignment(3, Direction::Forward, 0, speed, 0.0);
        let fwd = book.build_state(1000, Direction::Forward);
        let bwd = book.build_state(1000, Direction::Backward);
        for tb in 0..20 {
            assert_eq!(fwd.matrix[tb * 4], bwd.matrix[tb * 4 + 2]);
            assert_eq!(fwd.matrix[tb * 4 + 1], bwd.matrix[tb * 4 + 3]);
            assert_eq!(fwd.matrix[tb * 4 + 2], bwd.matrix[tb * 4]);
            assert_eq!(fwd.matrix[tb * 4 + 3], bwd.matrix[tb * 4 + 1]);
        }
    }

    #[test]
    fn assignments_expire_once_the_assignee_leaves() {
        let mut book = TbBookkeeping::new(&scenario_250m());
        let speed = 50.0 / 3.6; // traverses 250 m in 18 s
        book.record_assignment(0, Direction::Forward, 0, speed, 0.0);
        assert_eq!(book.counts(Direction::Forward, 17_999)[0], 1);
        // clamped at 1.0 while still counted
        let state = book.build_state(17_999, Direction::Forward);
        assert!(state.matrix[1] <= 1.0 && state.matrix[1] > 0.99);
        assert_eq!(book.counts(Direction::Forward, 18_001)[0], 0);
        let state = book.build_state(18_001, Direction::Forward);
        assert_eq!(state.matrix[0], 0.0);
        assert_eq!(state.matrix[1], 0.0);
    }

    #[test]
    fn warmup_offsets_backdate_the_entry() {
        let mut book = TbBookkeeping::new(&scenario_250m());
        let speed = 50.0 / 3.6;
        // placed 125 m in: half the traversal is already done
        book.record_assignment(0, Direction::Backward, 0, speed, 125.0);
        let state = book.build_state(0, Direction::Backward);
        assert!((state.matrix[1] - 0.5).abs() < 1e-12);
        // expires after the remaining 9 s
        assert_eq!(book.counts(Direction::Backward, 9_001)[0], 0);
    }

    #[test]
    fn entries_stay_in_unit_range() {
        let mut book = TbBookkeeping::new(&scenario_250m());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..500u64 {
            let tb = rng.random_range(0..20);
            let dir = if rng.random::<bool>() {
                Direction::Forward
            } else {
                Direction::Backward
            };
            book.record_assignment(tb, dir, i * 40, 13.9, rng.random_range(0.0..250.0));
            let state = book.build_state(i * 40, dir);
            assert!(state.matrix.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn shuffle_permutes_groups_and_preserves_subchannel_order() {
        // 2 subframes x 2 subchannels: groups {0,1} and {2,3}; the only two
        // orderings are [0,1,2,3] and [2,3,0,1]
        let state = SchedulerState {
            matrix: (0..16).map(f64::from).collect(),
            n_subframes: 2,
            n_subchannels: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..64 {
            let s = shuffle_state(&state, &mut rng);
            assert!(s.perm == vec![0, 1, 2, 3] || s.perm == vec![2, 3, 0, 1]);
            seen.insert(s.perm.clone());
            // rows moved with their labels
            for (row, &tb) in s.perm.iter().enumerate() {
                assert_eq!(
                    s.matrix[row * STATE_COLS..(row + 1) * STATE_COLS],
                    state.matrix[tb * STATE_COLS..(tb + 1) * STATE_COLS]
                );
            }
        }
        assert_eq!(seen.len(), 2, "both orderings occur");
    }

    #[test]
    fn single_subframe_pool_shuffles_to_identity() {
        let state = SchedulerState {
            matrix: vec![0.5; 3 * STATE_COLS],
            n_subframes: 1,
            n_subchannels: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = shuffle_state(&state, &mut rng);
        assert_eq!(s.perm, vec![0, 1, 2]);
    }

    #[test]
    fn permutation_roundtrip_is_identity() {
        let state = SchedulerState {
            matrix: (0..80).map(f64::from).collect(),
            n_subframes: 10,
            n_subchannels: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = shuffle_state(&state, &mut rng);
            // applying perm then its inverse to action indices is the identity
            let mut inverse = vec![0usize; s.perm.len()];
            for (row, &tb) in s.perm.iter().enumerate() {
                inverse[tb] = row;
            }
            for tb in 0..20 {
                assert_eq!(s.perm[inverse[tb]], tb);
            }
        }
    }
}
