//! Minimal differentiable-computation kit sized for small actor-critic
//! networks: dense tensors, 1D/2D convolutions, fully connected layers,
//! tanh/softmax activations, reverse-mode gradients, and a step-size-scheduled
//! gradient-descent optimizer. Everything runs on f64 so finite-difference
//! checks stay meaningful.

mod checkpoint;
mod error;
pub mod gradcheck;
mod layer;
mod net;
mod optim;
mod tensor;

pub use checkpoint::Checkpoint;
pub use error::NnError;
pub use layer::{softmax, softmax_backward, Conv1d, Conv2d, Dense};
pub use net::{ActorCritic, ArchSpec, ConvTrunk, PolicyNet, TrunkCache, ValueNet};
pub use optim::{LrSchedule, Optimizer, OptimizerKind};
pub use tensor::Tensor;
