//! Gradient-descent optimizer with a decaying step-size schedule.

use crate::NnError;

/// Step size base / (1 + scale * epoch^power); the default follows the
/// training schedule 1e-3 / (1 + 0.01 * epoch^1.1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub scale: f64,
    pub power: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base: 1e-3,
            scale: 0.01,
            power: 1.1,
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, epoch: u64) -> f64 {
        self.base / (1.0 + self.scale * (epoch as f64).powf(self.power))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Plain gradient descent; useful for deterministic unit tests.
    Sgd,
    /// RMSProp-style adaptive scaling. Statistics live with the optimizer,
    /// i.e. with the coordinator when training in parallel.
    RmsProp { decay: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn rmsprop() -> Self {
        OptimizerKind::RmsProp {
            decay: 0.99,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    /// Second-moment accumulator (empty for SGD).
    pub cache: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        let cache = match kind {
            OptimizerKind::Sgd => Vec::new(),
            OptimizerKind::RmsProp { .. } => vec![0.0; n_params],
        };
        Optimizer { kind, cache }
    }

    /// Applies one descent step in place. Rejects non-finite gradients so a
    /// diverging run aborts with a diagnostic instead of poisoning the
    /// parameters.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::ShapeMismatch {
                what: "optimizer step",
                expected: params.len(),
                got: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite("gradients"));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::RmsProp { decay, epsilon } => {
                debug_assert_eq!(self.cache.len(), params.len());
                for ((p, g), c) in params.iter_mut().zip(grads).zip(&mut self.cache) {
                    *c = decay * *c + (1.0 - decay) * g * g;
                    *p -= lr * g / (c.sqrt() + epsilon);
                }
            }
        }
        Ok(())
    }
}
