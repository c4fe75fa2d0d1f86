//! Actor-critic training with parallel workers and a central coordinator.
//!
//! Each worker owns an independent simulation instance with its own seed,
//! collects a fixed-length trajectory under a parameter snapshot, computes
//! n-step-return advantage gradients locally, and sends them to the
//! coordinator. The coordinator is the only writer of the global parameters
//! and applies updates with the decaying step-size schedule, one epoch per
//! applied batch. The asynchronous mode mirrors that setting with one thread
//! per worker; the synchronous mode steps all workers in lockstep and
//! averages their gradients in a fixed order, which makes runs bit-for-bit
//! reproducible.

use std::sync::{Arc, Mutex};

use nnkit::{
    ActorCritic, ArchSpec, Checkpoint, LrSchedule, Optimizer, OptimizerKind, PolicyNet, ValueNet,
};

use crate::scenario::ScenarioConfig;
use crate::simcore::Engine;
use crate::SimError;

use super::agent::{ActMode, Trajectory, VrlsScheduler};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: u64,
    pub workers: usize,
    /// Deterministic lockstep mode; the default is asynchronous.
    pub sync: bool,
    pub actions_per_epoch: usize,
    pub gamma: f64,
    pub entropy_beta: f64,
    pub seed: u64,
    pub lr: LrSchedule,
    pub optimizer: OptimizerKind,
    /// Continue the step-size schedule from the checkpoint's epoch counter
    /// instead of restarting it.
    pub resume_schedule: bool,
    /// Abort if a trajectory needs more simulated time than this.
    pub max_trajectory_ms: u64,
    /// Clip each gradient batch to this global L2 norm before applying.
    pub grad_clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            workers: 16,
            sync: false,
            actions_per_epoch: 60,
            gamma: 0.9,
            entropy_beta: 0.01,
            seed: 0,
            lr: LrSchedule::default(),
            optimizer: OptimizerKind::rmsprop(),
            resume_schedule: false,
            max_trajectory_ms: 4_000_000,
            grad_clip_norm: Some(200.0),
        }
    }
}

/// One line of the training curve, recorded per applied batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epoch: u64,
    pub mean_reward: f64,
    pub mean_min_prr: f64,
    pub lr: f64,
}

struct TrajStats {
    mean_reward: f64,
}

/// Policy-gradient and value gradients of one trajectory under the given
/// snapshot. Returns go backward from the critic's bootstrap value; losses
/// are means over the trajectory.
fn trajectory_gradients(
    actor: &PolicyNet,
    critic: &ValueNet,
    traj: &Trajectory,
    gamma: f64,
    beta: f64,
) -> Result<(Vec<f64>, Vec<f64>, TrajStats), SimError> {
    let n = traj.steps.len();
    debug_assert!(n > 0);
    let (bootstrap_value, _) = critic.forward(&traj.bootstrap)?;

    let mut returns = vec![0.0; n];
    let mut tail = bootstrap_value;
    for t in (0..n).rev() {
        tail = traj.steps[t].reward + gamma * tail;
        returns[t] = tail;
    }

    let mut actor_grads = vec![0.0; actor.n_params()];
    let mut critic_grads = vec![0.0; critic.n_params()];
    let mut reward_sum = 0.0;
    for (step, &ret) in traj.steps.iter().zip(&returns) {
        reward_sum += step.reward;
        let (probs, cache) = actor.forward(&step.matrix)?;
        let (value, vcache) = critic.forward(&step.matrix)?;
        let advantage = ret - value;

        // d/dp of (-log p_a * adv - beta * entropy); losses are summed over
        // the trajectory so the step-size schedule acts on raw batch
        // gradients
        let dprobs: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let p_safe = p.max(1e-300);
                let mut g = beta * (p_safe.ln() + 1.0);
                if i == step.action {
                    g -= advantage / p_safe;
                }
                g
            })
            .collect();
        for (acc, g) in actor_grads.iter_mut().zip(actor.backward(&cache, &dprobs)) {
            *acc += g;
        }
        // critic loss 0.5 * (V - G)^2, meaned over the trajectory: raw
        // summed steps overshoot under plain gradient descent
        for (acc, g) in critic_grads
            .iter_mut()
            .zip(critic.backward(&vcache, (value - ret) / n as f64))
        {
            *acc += g;
        }
    }
    Ok((
        actor_grads,
        critic_grads,
        TrajStats {
            mean_reward: reward_sum / n as f64,
        },
    ))
}

/// Coordinator state: global parameters, shared optimizer statistics, and
/// the epoch counter driving the step-size schedule.
struct Master {
    actor_params: Vec<f64>,
    critic_params: Vec<f64>,
    opt_actor: Optimizer,
    opt_critic: Optimizer,
    epoch: u64,
    target_epochs: u64,
    schedule_offset: u64,
    lr: LrSchedule,
    grad_clip_norm: Option<f64>,
    curve: Vec<CurvePoint>,
    failure: Option<String>,
}

fn clip_global_norm(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
}

impl Master {
    fn snapshot(&self) -> (Vec<f64>, Vec<f64>) {
        (self.actor_params.clone(), self.critic_params.clone())
    }

    fn done(&self) -> bool {
        self.epoch >= self.target_epochs || self.failure.is_some()
    }

    fn apply(
        &mut self,
        actor_grads: &mut [f64],
        critic_grads: &mut [f64],
        mean_reward: f64,
    ) -> Result<(), SimError> {
        if let Some(max_norm) = self.grad_clip_norm {
            clip_global_norm(actor_grads, max_norm);
            clip_global_norm(critic_grads, max_norm);
        }
        let lr = self.lr.rate(self.schedule_offset + self.epoch);
        self.opt_actor.step(&mut self.actor_params, actor_grads, lr)?;
        self.opt_critic
            .step(&mut self.critic_params, critic_grads, lr)?;
        self.epoch += 1;
        self.curve.push(CurvePoint {
            epoch: self.schedule_offset + self.epoch,
            mean_reward,
            mean_min_prr: 1.0 + mean_reward / 10.0,
            lr,
        });
        Ok(())
    }
}

struct Worker {
    engine: Engine,
    agent: VrlsScheduler,
}

fn splitmix(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn make_worker(
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    index: u64,
    actor: &PolicyNet,
    critic: &ValueNet,
) -> Result<Worker, SimError> {
    let env_seed = splitmix(cfg.seed, 2 * index);
    let agent_seed = splitmix(cfg.seed, 2 * index + 1);
    let mut engine = Engine::new(scenario.clone(), env_seed);
    engine.set_record_windows(false);
    let mut agent = VrlsScheduler::new(scenario, cfg.seed, agent_seed, ActMode::Sample)?;
    agent.set_params(&actor.params(), &critic.params())?;
    engine.warmup(&mut agent);
    Ok(Worker { engine, agent })
}

fn collect_trajectory(worker: &mut Worker, cfg: &TrainConfig) -> Result<Trajectory, SimError> {
    worker.agent.begin_trajectory(cfg.actions_per_epoch);
    let start = worker.engine.time_ms();
    while !worker.agent.trajectory_ready() {
        worker.engine.step(&mut worker.agent)?;
        if worker.engine.time_ms() - start > cfg.max_trajectory_ms {
            return Err(SimError::Stalled(format!(
                "no full trajectory within {} simulated ms",
                cfg.max_trajectory_ms
            )));
        }
    }
    Ok(worker.agent.take_trajectory())
}

/// Trains on `scenario`, optionally continuing from a checkpoint (the
/// retraining path; the architecture must match the pool size). Returns the
/// final checkpoint and the training curve.
pub fn train(
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    init: Option<&Checkpoint>,
) -> Result<(Checkpoint, Vec<CurvePoint>), SimError> {
    if cfg.workers == 0 {
        return Err(SimError::Config("at least one worker required".into()));
    }
    let spec = ArchSpec::for_pool(scenario.pool.n_tbs());
    let (actor_params, critic_params, opt_actor, opt_critic, schedule_offset) = match init {
        None => {
            let nets = ActorCritic::new(&spec, cfg.seed)?;
            let na = nets.actor.n_params();
            let nc = nets.critic.n_params();
            (
                nets.actor.params(),
                nets.critic.params(),
                Optimizer::new(cfg.optimizer, na),
                Optimizer::new(cfg.optimizer, nc),
                0,
            )
        }
        Some(ck) => {
            if ck.arch.n_actions != scenario.pool.n_tbs() || ck.arch.n_rows != scenario.pool.n_tbs()
            {
                return Err(SimError::CheckpointMismatch(format!(
                    "checkpoint is sized for {} resources, scenario pool has {}",
                    ck.arch.n_actions,
                    scenario.pool.n_tbs()
                )));
            }
            let mut opt_actor = Optimizer::new(cfg.optimizer, ck.actor_params.len());
            let mut opt_critic = Optimizer::new(cfg.optimizer, ck.critic_params.len());
            let offset = if cfg.resume_schedule {
                if ck.optimizer_kind == cfg.optimizer
                    && ck.actor_opt_cache.len() == opt_actor.cache.len()
                {
                    opt_actor.cache.copy_from_slice(&ck.actor_opt_cache);
                    opt_critic.cache.copy_from_slice(&ck.critic_opt_cache);
                }
                ck.epoch
            } else {
                0
            };
            (
                ck.actor_params.clone(),
                ck.critic_params.clone(),
                opt_actor,
                opt_critic,
                offset,
            )
        }
    };

    let master = Master {
        actor_params,
        critic_params,
        opt_actor,
        opt_critic,
        epoch: 0,
        target_epochs: cfg.epochs,
        schedule_offset,
        lr: cfg.lr,
        grad_clip_norm: cfg.grad_clip_norm,
        curve: Vec::new(),
        failure: None,
    };

    let master = if cfg.epochs == 0 {
        master
    } else if cfg.sync {
        sync_train(scenario, cfg, master)?
    } else {
        async_train(scenario, cfg, master)?
    };

    if let Some(reason) = master.failure {
        return Err(SimError::Config(format!("training aborted: {reason}")));
    }
    let checkpoint = Checkpoint {
        arch: spec,
        epoch: master.schedule_offset + master.epoch,
        seed: cfg.seed,
        optimizer_kind: cfg.optimizer,
        actor_opt_cache: master.opt_actor.cache.clone(),
        critic_opt_cache: master.opt_critic.cache.clone(),
        actor_params: master.actor_params,
        critic_params: master.critic_params,
    };
    Ok((checkpoint, master.curve))
}

/// Lockstep mode: every worker collects one trajectory from the same
/// snapshot, gradients are averaged in worker order, and the batch is
/// applied as one epoch.
fn sync_train(
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    mut master: Master,
) -> Result<Master, SimError> {
    let spec = ArchSpec::for_pool(scenario.pool.n_tbs());
    let template = ActorCritic::new(&spec, cfg.seed)?;
    let mut workers: Vec<Worker> = (0..cfg.workers as u64)
        .map(|i| make_worker(scenario, cfg, i, &template.actor, &template.critic))
        .collect::<Result<_, _>>()?;

    for _ in 0..cfg.epochs {
        let (actor_p, critic_p) = master.snapshot();
        let mut sum_actor: Vec<f64> = Vec::new();
        let mut sum_critic: Vec<f64> = Vec::new();
        let mut reward_sum = 0.0;
        for worker in workers.iter_mut() {
            worker.agent.set_params(&actor_p, &critic_p)?;
            let traj = collect_trajectory(worker, cfg)?;
            let (ga, gc, stats) = trajectory_gradients(
                &worker.agent.actor,
                &worker.agent.critic,
                &traj,
                cfg.gamma,
                cfg.entropy_beta,
            )?;
            if sum_actor.is_empty() {
                sum_actor = ga;
                sum_critic = gc;
            } else {
                for (acc, g) in sum_actor.iter_mut().zip(&ga) {
                    *acc += g;
                }
                for (acc, g) in sum_critic.iter_mut().zip(&gc) {
                    *acc += g;
                }
            }
            reward_sum += stats.mean_reward;
        }
        let n = cfg.workers as f64;
        sum_actor.iter_mut().for_each(|g| *g /= n);
        sum_critic.iter_mut().for_each(|g| *g /= n);
        master.apply(&mut sum_actor, &mut sum_critic, reward_sum / n)?;
    }
    Ok(master)
}

/// One thread per worker; the coordinator applies gradient batches in
/// arrival order. A dead worker is logged and the rest continue.
fn async_train(
    scenario: &ScenarioConfig,
    cfg: &TrainConfig,
    master: Master,
) -> Result<Master, SimError> {
    let master = Arc::new(Mutex::new(master));
    fn lock<'a>(m: &'a Arc<Mutex<Master>>) -> std::sync::MutexGuard<'a, Master> {
        m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for index in 0..cfg.workers as u64 {
            let master = Arc::clone(&master);
            let handle = scope.spawn(move || -> Result<(), SimError> {
                let snapshot = {
                    let m = lock(&master);
                    m.snapshot()
                };
                let spec = ArchSpec::for_pool(scenario.pool.n_tbs());
                let template = ActorCritic::new(&spec, cfg.seed)?;
                let mut worker =
                    make_worker(scenario, cfg, index, &template.actor, &template.critic)?;
                worker.agent.set_params(&snapshot.0, &snapshot.1)?;
                loop {
                    {
                        let m = lock(&master);
                        if m.done() {
                            return Ok(());
                        }
                        let (a, c) = m.snapshot();
                        drop(m);
                        worker.agent.set_params(&a, &c)?;
                    }
                    let traj = collect_trajectory(&mut worker, cfg)?;
                    let (mut ga, mut gc, stats) = trajectory_gradients(
                        &worker.agent.actor,
                        &worker.agent.critic,
                        &traj,
                        cfg.gamma,
                        cfg.entropy_beta,
                    )?;
                    let mut m = lock(&master);
                    if m.done() {
                        return Ok(());
                    }
                    if let Err(e) = m.apply(&mut ga, &mut gc, stats.mean_reward) {
                        m.failure = Some(e.to_string());
                        return Err(e);
                    }
                }
            });
            handles.push((index, handle));
        }
        for (index, handle) in handles {
            match handle.join() {
                Ok(Ok(())) => {}
                Ok(Err(e)) => {
                    let mut m = lock(&master);
                    if m.failure.is_none() {
                        m.failure = Some(format!("worker {index}: {e}"));
                    }
                }
                Err(_) => {
                    // a panicked worker is logged; the others keep training
                    eprintln!("training worker {index} died; continuing with the rest");
                }
            }
        }
    });

    Ok(Arc::try_unwrap(master)
        .map_err(|_| SimError::Config("worker thread leaked a master handle".into()))?
        .into_inner()
        .unwrap_or_else(|poisoned| poisoned.into_inner()))
}
