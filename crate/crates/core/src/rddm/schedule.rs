use serde::{Deserialize, Serialize};

use super::RddmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `αt = 1/T`, `βt² ∝ t`, normalized so both cumulative sums reach 1.
    #[default]
    UniformAlpha,
}

/// Per-step coefficients indexed by `t` in `0..=T`; index 0 holds the
/// `t = 0` convention (all coefficients zero).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    steps: usize,
    kind: ScheduleKind,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
    beta_bar: Vec<f64>,
}

pub fn make_schedule(steps: usize, kind: ScheduleKind) -> Result<DiffusionSchedule, RddmError> {
    if steps == 0 {
        return Err(RddmError::ZeroSteps);
    }
    let n = steps as f64;
    let tri = n * (n + 1.0);
    let mut alpha = vec![0.0];
    let mut beta = vec![0.0];
    let mut alpha_bar = vec![0.0];
    let mut beta_bar = vec![0.0];
    for t in 1..=steps {
        let tf = t as f64;
        alpha.push(1.0 / n);
        beta.push((2.0 * tf / tri).sqrt());
        // closed forms of the cumulative sums, exact at the endpoints
        alpha_bar.push(tf / n);
        beta_bar.push((tf * (tf + 1.0) / tri).sqrt());
    }
    Ok(DiffusionSchedule { steps, kind, alpha, beta, alpha_bar, beta_bar })
}

impl DiffusionSchedule {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn beta_bar(&self, t: usize) -> f64 {
        self.beta_bar[t]
    }

    pub(crate) fn check_step(&self, t: usize, allow_zero: bool) -> Result<(), RddmError> {
        if t > self.steps || (t == 0 && !allow_zero) {
            return Err(RddmError::StepOutOfRange { t, steps: self.steps });
        }
        Ok(())
    }
}
