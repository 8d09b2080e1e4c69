use image::{Rgb, RgbImage};
use ndarray::Zip;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::process::{check_shape, recover_x0, Tensor};
use super::{DiffusionSchedule, RddmError};

/// Predicts `(x_res, ε)` from the chain state `xt` at step `t`.
pub trait PredictorHook {
    fn predict(&self, xt: &Tensor, t: usize, x_in: &Tensor) -> (Tensor, Tensor);
}

/// Exact predictor that knows the clean image.
#[derive(Debug, Clone)]
pub struct OracleHook {
    pub x0: Tensor,
    pub schedule: DiffusionSchedule,
}

impl PredictorHook for OracleHook {
    fn predict(&self, xt: &Tensor, t: usize, x_in: &Tensor) -> (Tensor, Tensor) {
        let res = x_in - &self.x0;
        let (a, b) = (self.schedule.alpha_bar(t), self.schedule.beta_bar(t));
        let eps = Zip::from(xt).and(&self.x0).and(&res).map_collect(
            |&x, &x0, &r| {
                if b > 0.0 {
                    (x - x0 - a * r) / b
                } else {
                    0.0
                }
            },
        );
        (res, eps)
    }
}

/// Predicts zero residual and zero noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroHook;

impl PredictorHook for ZeroHook {
    fn predict(&self, xt: &Tensor, _t: usize, _x_in: &Tensor) -> (Tensor, Tensor) {
        (Tensor::zeros(xt.raw_dim()), Tensor::zeros(xt.raw_dim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    #[default]
    Deterministic,
    Stochastic,
}

/// Visited timesteps, from `T` down to the last step above zero.
pub fn timesteps(total: usize, steps: usize) -> Vec<usize> {
    (1..=steps).rev().map(|k| k * total / steps).collect()
}

fn gaussian(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let dim = (shape[0], shape[1], shape[2]);
    Tensor::from_shape_simple_fn(dim, || StandardNormal.sample(rng))
}

/// Reverse chain from `x_T = x_in + β̄_T·ε(seed)` over `steps` evenly
/// spaced timesteps.
pub fn sample(
    x_in: &Tensor,
    schedule: &DiffusionSchedule,
    hook: &dyn PredictorHook,
    steps: usize,
    seed: u64,
    mode: SamplerMode,
) -> Result<Tensor, RddmError> {
    let total = schedule.steps();
    if steps == 0 || steps > total {
        return Err(RddmError::InvalidSamplingSteps { steps, total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = gaussian(x_in.shape(), &mut rng);
    let mut xt = x_in + &(eps * schedule.beta_bar(total));
    let ts = timesteps(total, steps);
    for (i, &t) in ts.iter().enumerate() {
        let (res, eps) = hook.predict(&xt, t, x_in);
        check_shape(x_in, &res)?;
        check_shape(x_in, &eps)?;
        let x0 = recover_x0(&xt, t, schedule, &res, &eps)?;
        let next = ts.get(i + 1).copied().unwrap_or(0);
        xt = x0 + &(res * schedule.alpha_bar(next));
        if mode == SamplerMode::Stochastic && next > 0 {
            xt += &(gaussian(x_in.shape(), &mut rng) * schedule.beta_bar(next));
        }
    }
    Ok(xt)
}

/// 8-bit RGB to an `H×W×3` tensor in `[0, 1]`.
pub fn image_to_tensor(img: &RgbImage) -> Tensor {
    let (w, h) = img.dimensions();
    Tensor::from_shape_fn((h as usize, w as usize, 3), |(y, x, c)| img.get_pixel(x as u32, y as u32)[c] as f64 / 255.0)
}

/// Clamps to `[0, 1]` and rounds to 8 bits.
pub fn tensor_to_image(t: &Tensor) -> RgbImage {
    let (h, w, _) = t.dim();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let q = |c: usize| (t[[y as usize, x as usize, c]].clamp(0.0, 1.0) * 255.0).round() as u8;
        Rgb([q(0), q(1), q(2)])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rddm::{make_schedule, ScheduleKind};

    fn images() -> (Tensor, Tensor) {
        let x0 = Tensor::from_shape_fn((4, 5, 3), |(i, j, c)| ((i * 5 + j * 3 + c * 7) % 11) as f64 / 11.0);
        let x_in = x0.mapv(|v| 1.0 - v * 0.5);
        (x0, x_in)
    }

    #[test]
    fn timestep_grid() {
        assert_eq!(timesteps(10, 5), vec![10, 8, 6, 4, 2]);
        assert_eq!(timesteps(10, 10), (1..=10).rev().collect::<Vec<_>>());
        assert_eq!(timesteps(7, 3), vec![7, 4, 2]);
    }

    #[test]
    fn oracle_recovers_clean_image() {
        let s = make_schedule(10, ScheduleKind::UniformAlpha).unwrap();
        let (x0, x_in) = images();
        let hook = OracleHook { x0: x0.clone(), schedule: s.clone() };
        for seed in [0, 1, 99] {
            for steps in [5, 10] {
                let out = sample(&x_in, &s, &hook, steps, seed, SamplerMode::Deterministic).unwrap();
                let err = (&out - &x0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(err < 1e-12, "{err}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let s = make_schedule(10, ScheduleKind::UniformAlpha).unwrap();
        let (_, x_in) = images();
        let a = sample(&x_in, &s, &ZeroHook, 5, 3, SamplerMode::Stochastic).unwrap();
        let b = sample(&x_in, &s, &ZeroHook, 5, 3, SamplerMode::Stochastic).unwrap();
        assert_eq!(a, b);
        let c = sample(&x_in, &s, &ZeroHook, 5, 4, SamplerMode::Stochastic).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn step_count_validated() {
        let s = make_schedule(4, ScheduleKind::UniformAlpha).unwrap();
        let (_, x_in) = images();
        assert!(sample(&x_in, &s, &ZeroHook, 5, 0, SamplerMode::Deterministic).is_err());
        assert!(sample(&x_in, &s, &ZeroHook, 0, 0, SamplerMode::Deterministic).is_err());
    }

    struct BadHook;
    impl PredictorHook for BadHook {
        fn predict(&self, _: &Tensor, _: usize, _: &Tensor) -> (Tensor, Tensor) {
            (Tensor::zeros((1, 1, 3)), Tensor::zeros((1, 1, 3)))
        }
    }

    #[test]
    fn hook_shape_checked() {
        let s = make_schedule(4, ScheduleKind::UniformAlpha).unwrap();
        let (_, x_in) = images();
        assert!(matches!(
            sample(&x_in, &s, &BadHook, 2, 0, SamplerMode::Deterministic),
            Err(RddmError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn tensor_image_round_trip() {
        let img = RgbImage::from_fn(6, 4, |x, y| Rgb([(x * 40) as u8, (y * 60) as u8, 200]));
        assert_eq!(tensor_to_image(&image_to_tensor(&img)), img);
    }
}
