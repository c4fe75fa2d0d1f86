//! The learning scheduler: state construction, subframe-grouped shuffle
//! augmentation, actor-critic inference, reward shaping, and parallel
//! training with a central coordinator.

mod agent;
mod state;
mod train;

pub use agent::{compute_reward, ActMode, TrajStep, Trajectory, VrlsScheduler};
pub use state::{shuffle_state, SchedulerState, ShuffledState, TbBookkeeping};
pub use train::{train, CurvePoint, TrainConfig};
