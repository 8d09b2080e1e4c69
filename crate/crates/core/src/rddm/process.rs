//! Forward process, marginal, reverse recovery and training losses.

use std::ops::{Add, Mul, Sub};

use ndarray::{Array3, Zip};

use super::{DiffusionSchedule, RddmError};

pub type Tensor = Array3<f64>;

pub(crate) fn check_shape(expected: &Tensor, got: &Tensor) -> Result<(), RddmError> {
    if expected.shape() != got.shape() {
        return Err(RddmError::ShapeMismatch { expected: expected.shape().to_vec(), got: got.shape().to_vec() });
    }
    Ok(())
}

/// One forward step `x_{t-1} + α·x_res + β·ε` on any scalar type.
pub fn step_scalar<S>(x_prev: S, alpha: S, x_res: S, beta: S, eps: S) -> S
where
    S: Clone + Add<Output = S> + Mul<Output = S>,
{
    x_prev + alpha * x_res + beta * eps
}

/// Closed-form marginal `x0 + ᾱ·x_res + β̄·ε` on any scalar type.
pub fn marginal_scalar<S>(x0: S, alpha_bar: S, x_res: S, beta_bar: S, eps: S) -> S
where
    S: Clone + Add<Output = S> + Mul<Output = S>,
{
    x0 + alpha_bar * x_res + beta_bar * eps
}

/// Inverse of the marginal for `x0`.
pub fn recover_scalar<S>(xt: S, alpha_bar: S, x_res: S, beta_bar: S, eps: S) -> S
where
    S: Clone + Sub<Output = S> + Mul<Output = S>,
{
    xt - alpha_bar * x_res - beta_bar * eps
}

/// Clean image, degraded input and the current chain state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub x0: Tensor,
    pub x_in: Tensor,
    pub xt: Tensor,
    pub t: usize,
}

impl DiffusionState {
    pub fn new(x0: Tensor, x_in: Tensor) -> Result<Self, RddmError> {
        check_shape(&x0, &x_in)?;
        Ok(Self { xt: x0.clone(), x0, x_in, t: 0 })
    }

    pub fn x_res(&self) -> Tensor {
        &self.x_in - &self.x0
    }

    /// Advances the state one step with noise `eps`.
    pub fn advance(&mut self, schedule: &DiffusionSchedule, eps: &Tensor) -> Result<(), RddmError> {
        self.xt = forward_step(&self.xt, &self.x_res(), schedule, self.t + 1, eps)?;
        self.t += 1;
        Ok(())
    }
}

pub fn forward_step(
    x_prev: &Tensor,
    x_res: &Tensor,
    schedule: &DiffusionSchedule,
    t: usize,
    eps: &Tensor,
) -> Result<Tensor, RddmError> {
    schedule.check_step(t, false)?;
    check_shape(x_prev, x_res)?;
    check_shape(x_prev, eps)?;
    let (a, b) = (schedule.alpha(t), schedule.beta(t));
    Ok(Zip::from(x_prev).and(x_res).and(eps).map_collect(|&x, &r, &e| step_scalar(x, a, r, b, e)))
}

/// `t = 0` is accepted and returns `x0` (all coefficients are zero).
pub fn forward_marginal(
    x0: &Tensor,
    x_res: &Tensor,
    schedule: &DiffusionSchedule,
    t: usize,
    eps: &Tensor,
) -> Result<Tensor, RddmError> {
    schedule.check_step(t, true)?;
    check_shape(x0, x_res)?;
    check_shape(x0, eps)?;
    let (a, b) = (schedule.alpha_bar(t), schedule.beta_bar(t));
    Ok(Zip::from(x0).and(x_res).and(eps).map_collect(|&x, &r, &e| marginal_scalar(x, a, r, b, e)))
}

pub fn recover_x0(
    xt: &Tensor,
    t: usize,
    schedule: &DiffusionSchedule,
    pred_res: &Tensor,
    pred_eps: &Tensor,
) -> Result<Tensor, RddmError> {
    schedule.check_step(t, true)?;
    check_shape(xt, pred_res)?;
    check_shape(xt, pred_eps)?;
    let (a, b) = (schedule.alpha_bar(t), schedule.beta_bar(t));
    Ok(Zip::from(xt).and(pred_res).and(pred_eps).map_collect(|&x, &r, &e| recover_scalar(x, a, r, b, e)))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_res: f64,
    pub lambda_eps: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_res: 1.0, lambda_eps: 1.0 }
    }
}

/// λ-scaled mean squared errors `(L_res, L_ε)`.
pub fn losses(
    true_res: &Tensor,
    true_eps: &Tensor,
    pred_res: &Tensor,
    pred_eps: &Tensor,
    weights: LossWeights,
) -> Result<(f64, f64), RddmError> {
    if !(weights.lambda_res >= 0.0 && weights.lambda_eps >= 0.0) {
        return Err(RddmError::NegativeLambda);
    }
    check_shape(true_res, pred_res)?;
    check_shape(true_res, true_eps)?;
    check_shape(true_res, pred_eps)?;
    let mse = |a: &Tensor, b: &Tensor| {
        let n = a.len().max(1) as f64;
        Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + (x - y) * (x - y)) / n
    };
    let l_res = if weights.lambda_res == 0.0 { 0.0 } else { weights.lambda_res * mse(true_res, pred_res) };
    let l_eps = if weights.lambda_eps == 0.0 { 0.0 } else { weights.lambda_eps * mse(true_eps, pred_eps) };
    Ok((l_res, l_eps))
}
