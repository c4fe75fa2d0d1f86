//! Simulator and training framework for scheduling periodic V2V broadcasts
//! in a delimited out-of-coverage highway area: resource-pool scenarios,
//! constant-speed mobility with re-insertion, three channel variants with
//! half-duplex and collision semantics, PRR accounting, baseline schedulers,
//! and a learning scheduler trained by parallel actor-critic workers.

pub mod channel;
pub mod eval;
pub mod mobility;
pub mod scenario;
pub mod schedulers;
pub mod simcore;
pub mod vrls;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Scheduler(#[from] schedulers::SchedulerError),
    #[error(transparent)]
    Nn(#[from] nnkit::NnError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("scheduler returned TB {tb}, but the pool has only {n_tbs}")]
    InvalidTb { tb: usize, n_tbs: usize },
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("simulation stalled: {0}")]
    Stalled(String),
    #[error("{0}")]
    Config(String),
}
