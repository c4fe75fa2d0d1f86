//! The scheduling agent: shuffled actor-critic inference at entry events,
//! reward measurement between consecutive actions, and trajectory recording
//! for the trainer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nnkit::{ActorCritic, ArchSpec, Checkpoint, PolicyNet, ValueNet};

use crate::mobility::Direction;
use crate::scenario::ScenarioConfig;
use crate::schedulers::{EntryContext, Scheduler, SchedulerError, WorldView};
use crate::simcore::{PrrAccumulator, TransmissionOutcome};
use crate::SimError;

use super::state::{shuffle_state, ShuffledState, TbBookkeeping};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    /// Draw from the policy distribution (training).
    Sample,
    /// Argmax with lowest-TB tie break (evaluation).
    Greedy,
}

/// One completed trajectory step: the state exactly as the network saw it
/// (shuffled), the action in shuffled indexing, the shuffle permutation, and
/// the reward measured until the next action.
#[derive(Debug, Clone)]
pub struct TrajStep {
    pub matrix: Vec<f64>,
    pub perm: Vec<usize>,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<TrajStep>,
    /// Shuffled state presented at the action after the last recorded step;
    /// the critic bootstraps the tail return from it.
    pub bootstrap: Vec<f64>,
}

/// Reward of an action window: -10 x (1 - min PRR) over the configured
/// bins, falling back to the previous action's reward when no transmissions
/// happened in between.
pub fn compute_reward(min_prr: Option<f64>, previous: f64) -> f64 {
    match min_prr {
        Some(prr) => -10.0 * (1.0 - prr),
        None => previous,
    }
}

pub struct VrlsScheduler {
    pub(crate) actor: PolicyNet,
    pub(crate) critic: ValueNet,
    book: TbBookkeeping,
    reward_acc: PrrAccumulator,
    prev_reward: f64,
    mode: ActMode,
    rng: ChaCha8Rng,
    recording: bool,
    target_steps: usize,
    steps: Vec<TrajStep>,
    pending: Option<(ShuffledState, usize)>,
    /// Input conditioning: the observation normalizes counts to the
    /// theoretical road capacity, which compresses them to a few percent of
    /// the unit range. The network sees counts rescaled to the configured
    /// population cap instead, so both feature kinds share the unit scale.
    count_gain: f64,
}

impl VrlsScheduler {
    pub fn new(
        scenario: &ScenarioConfig,
        init_seed: u64,
        rng_seed: u64,
        mode: ActMode,
    ) -> Result<Self, SimError> {
        let spec = ArchSpec::for_pool(scenario.pool.n_tbs());
        let nets = ActorCritic::new(&spec, init_seed)?;
        Ok(Self::from_nets(scenario, nets.actor, nets.critic, rng_seed, mode))
    }

    pub fn from_checkpoint(
        checkpoint: &Checkpoint,
        scenario: &ScenarioConfig,
        rng_seed: u64,
        mode: ActMode,
    ) -> Result<Self, SimError> {
        let n_tbs = scenario.pool.n_tbs();
        if checkpoint.arch.n_actions != n_tbs || checkpoint.arch.n_rows != n_tbs {
            return Err(SimError::CheckpointMismatch(format!(
                "checkpoint is sized for {} resources, scenario pool has {}",
                checkpoint.arch.n_actions, n_tbs
            )));
        }
        let mut nets = ActorCritic::new(&checkpoint.arch, checkpoint.seed)?;
        nets.actor.set_params(&checkpoint.actor_params)?;
        nets.critic.set_params(&checkpoint.critic_params)?;
        Ok(Self::from_nets(scenario, nets.actor, nets.critic, rng_seed, mode))
    }

    fn from_nets(
        scenario: &ScenarioConfig,
        actor: PolicyNet,
        critic: ValueNet,
        rng_seed: u64,
        mode: ActMode,
    ) -> Self {
        let capacity = scenario.geometry.max_vehicles_per_direction() as f64;
        let cap = scenario.mobility.population_cap() as f64;
        VrlsScheduler {
            actor,
            critic,
            book: TbBookkeeping::new(scenario),
            reward_acc: PrrAccumulator::new(&scenario.prr_range_bins),
            prev_reward: 0.0,
            mode,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            recording: false,
            target_steps: 0,
            steps: Vec::new(),
            pending: None,
            count_gain: (3.0 * capacity / cap).clamp(1.0, 50.0),
        }
    }

    /// Scales the count columns (0 and 2) by the configured gain; the
    /// shuffled matrix fed to the networks is stored in this form.
    fn condition_input(&self, shuffled: &mut ShuffledState) {
        for row in 0..shuffled.perm.len() {
            shuffled.matrix[row * 4] = (shuffled.matrix[row * 4] * self.count_gain).min(1.0);
            shuffled.matrix[row * 4 + 2] =
                (shuffled.matrix[row * 4 + 2] * self.count_gain).min(1.0);
        }
    }

    pub fn set_params(&mut self, actor: &[f64], critic: &[f64]) -> Result<(), SimError> {
        self.actor.set_params(actor)?;
        self.critic.set_params(critic)?;
        Ok(())
    }

    pub fn arch(&self) -> &ArchSpec {
        self.actor.spec()
    }

    /// Starts recording a fresh trajectory of `target_steps` completed
    /// steps. Any pending action from before the call is dropped, so every
    /// recorded step was acted under the current parameters.
    pub fn begin_trajectory(&mut self, target_steps: usize) {
        self.recording = true;
        self.target_steps = target_steps;
        self.steps.clear();
        self.pending = None;
    }

    /// True once `target_steps` steps have rewards and the bootstrap state
    /// for the tail return is available.
    pub fn trajectory_ready(&self) -> bool {
        self.recording && self.steps.len() >= self.target_steps && self.pending.is_some()
    }

    pub fn take_trajectory(&mut self) -> Trajectory {
        debug_assert!(self.trajectory_ready());
        let bootstrap = self
            .pending
            .take()
            .map(|(s, _)| s.matrix)
            .expect("trajectory_ready");
        self.recording = false;
        Trajectory {
            steps: std::mem::take(&mut self.steps),
            bootstrap,
        }
    }

    /// Shuffle, run the actor, pick an action, and map it back to a pool TB.
    fn act(
        &mut self,
        state: &super::state::SchedulerState,
    ) -> Result<(usize, ShuffledState, usize), SchedulerError> {
        let mut shuffled = shuffle_state(state, &mut self.rng);
        self.condition_input(&mut shuffled);
        let (probs, _) = self
            .actor
            .forward(&shuffled.matrix)
            .map_err(|_| SchedulerError::NonFinitePolicy)?;
        let idx = match self.mode {
            ActMode::Sample => {
                let draw: f64 = self.rng.random();
                let mut acc = 0.0;
                let mut chosen = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        chosen = i;
                        break;
                    }
                }
                chosen
            }
            ActMode::Greedy => {
                // argmax over original TB indexing so exact ties break toward
                // the lowest TB regardless of the shuffle
                let mut by_tb = vec![0.0; probs.len()];
                for (row, &tb) in shuffled.perm.iter().enumerate() {
                    by_tb[tb] = probs[row];
                }
                let tb = by_tb
                    .iter()
                    .enumerate()
                    .fold((0usize, f64::NEG_INFINITY), |(bi, bp), (i, &p)| {
                        if p > bp {
                            (i, p)
                        } else {
                            (bi, bp)
                        }
                    })
                    .0;
                shuffled.perm.iter().position(|&t| t == tb).expect("bijection")
            }
        };
        let tb = shuffled.perm[idx];
        Ok((tb, shuffled, idx))
    }
}

impl Scheduler for VrlsScheduler {
    fn name(&self) -> &'static str {
        "vrls"
    }

    fn on_vehicle_entered(
        &mut self,
        entry: &EntryContext,
        _view: &WorldView<'_>,
    ) -> Result<usize, SchedulerError> {
        // Close the reward window of the previous action first.
        let window = self.reward_acc.take();
        let reward = compute_reward(window.min_prr(), self.prev_reward);
        self.prev_reward = reward;
        if let Some((shuffled, action)) = self.pending.take() {
            if self.recording {
                self.steps.push(TrajStep {
                    matrix: shuffled.matrix,
                    perm: shuffled.perm,
                    action,
                    reward,
                });
            }
        }

        let state = self.book.build_state(entry.time_ms, entry.direction);
        let (tb, shuffled, action) = self.act(&state)?;
        if self.recording {
            self.pending = Some((shuffled, action));
        }
        self.book.record_assignment(
            tb,
            entry.direction,
            entry.time_ms,
            entry.speed_mps,
            entry.entry_offset_m,
        );
        Ok(tb)
    }

    fn on_warmup_assignment(&mut self, entry: &EntryContext, tb: usize) {
        self.book.record_assignment(
            tb,
            entry.direction,
            entry.time_ms,
            entry.speed_mps,
            entry.entry_offset_m,
        );
    }

    fn observe_outcomes(&mut self, outcomes: &[TransmissionOutcome]) {
        for outcome in outcomes {
            self.reward_acc.observe(outcome);
        }
    }
}

/// Bookkeeping counts for one direction; test access.
impl VrlsScheduler {
    pub fn bookkeeping_counts(&mut self, direction: Direction, now_ms: u64) -> Vec<u32> {
        self.book.counts(direction, now_ms)
    }
}
