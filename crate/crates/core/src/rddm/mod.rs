//! Residual diffusion: a forward process that mixes the residual
//! `x_res = x_in - x0` with Gaussian noise and terminates at `x_in + ε`,
//! plus reverse recovery, losses, a sampler with pluggable predictors and
//! an external-refiner hook.

mod check;
mod process;
mod refine;
mod sampler;
mod schedule;

pub use check::{run_checks, CheckOutcome};
pub use process::{
    forward_marginal, forward_step, losses, marginal_scalar, recover_scalar, recover_x0, step_scalar, DiffusionState,
    LossWeights, Tensor,
};
pub use refine::{refine, Refiner};
pub use sampler::{
    image_to_tensor, sample, tensor_to_image, timesteps, OracleHook, PredictorHook, SamplerMode, ZeroHook,
};
pub use schedule::{make_schedule, DiffusionSchedule, ScheduleKind};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RddmError {
    #[error("diffusion schedule needs at least one step")]
    ZeroSteps,
    #[error("step {t} outside 1..={steps}")]
    StepOutOfRange { t: usize, steps: usize },
    #[error("sampling steps {steps} must be in 1..={total}")]
    InvalidSamplingSteps { steps: usize, total: usize },
    #[error("tensor shape {got:?} does not match {expected:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("loss weights must be non-negative")]
    NegativeLambda,
    #[error("refiner failed: {0}")]
    Refiner(String),
}
