//! Self-check of the diffusion invariants, runnable from the command line.

use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use super::process::{forward_marginal, forward_step, marginal_scalar, recover_x0, step_scalar, Tensor};
use super::{make_schedule, sample, LossWeights, OracleHook, SamplerMode, ScheduleKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn schedule_endpoints() -> CheckOutcome {
    let mut worst = 0.0f64;
    for steps in 1..=1000 {
        let s = make_schedule(steps, ScheduleKind::UniformAlpha).expect("steps >= 1");
        worst = worst.max((s.alpha_bar(steps) - 1.0).abs()).max((s.beta_bar(steps) - 1.0).abs());
    }
    outcome("schedule-endpoints", worst <= 1e-12, format!("max endpoint deviation {worst:e} over T=1..1000"))
}

/// Zero-noise composition of forward steps against the marginal, exactly in
/// rational arithmetic.
fn deterministic_consistency() -> CheckOutcome {
    type Q = Ratio<i128>;
    let x0 = Q::new(3, 7);
    let x_in = Q::new(10, 11);
    let res = x_in - x0;
    let zero = Q::new(0, 1);
    let mut mismatches = 0;
    for steps in [1i128, 5, 10, 100] {
        let alpha = Q::new(1, steps);
        let mut x = x0;
        for t in 1..=steps {
            x = step_scalar(x, alpha, res, zero, zero);
            if x != marginal_scalar(x0, Q::new(t, steps), res, zero, zero) {
                mismatches += 1;
            }
        }
        if x != x_in {
            mismatches += 1;
        }
    }
    outcome(
        "eq-step-marginal-exact",
        mismatches == 0,
        format!("{mismatches} rational mismatches for T in {{1,5,10,100}}"),
    )
}

/// The same composition on f64 tensors, compared at rounding level.
fn deterministic_consistency_f64() -> CheckOutcome {
    let mut worst = 0.0f64;
    for steps in [1usize, 5, 10, 100] {
        let s = make_schedule(steps, ScheduleKind::UniformAlpha).expect("steps >= 1");
        let x0 = Tensor::from_shape_fn((3, 3, 3), |(i, j, c)| ((i * 9 + j * 3 + c) as f64 * 0.37).fract());
        let res = x0.mapv(|v| 0.9 - v);
        let z = Tensor::zeros(x0.raw_dim());
        let mut x = x0.clone();
        for t in 1..=steps {
            x = forward_step(&x, &res, &s, t, &z).expect("shapes match");
            let m = forward_marginal(&x0, &res, &s, t, &z).expect("shapes match");
            worst = (&x - &m).iter().fold(worst, |w, v| w.max(v.abs()));
        }
    }
    outcome("eq-step-marginal-f64", worst <= 1e-13, format!("max |iterated - marginal| = {worst:e}"))
}

fn variance_consistency(seed: u64) -> CheckOutcome {
    let trials = 10_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_z = 0.0f64;
    for steps in [5usize, 10] {
        let s = make_schedule(steps, ScheduleKind::UniformAlpha).expect("steps >= 1");
        let (x0, res) = (0.3, 0.4);
        let mut samples = vec![vec![0.0; trials]; steps + 1];
        for k in 0..trials {
            let mut x = x0;
            for (t, row) in samples.iter_mut().enumerate().skip(1) {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = step_scalar(x, s.alpha(t), res, s.beta(t), e);
                row[k] = x;
            }
        }
        for (t, row) in samples.iter().enumerate().skip(1) {
            let n = trials as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let target = s.beta_bar(t).powi(2);
            let se = target * (2.0 / (n - 1.0)).sqrt();
            worst_z = worst_z.max((var - target).abs() / se);
        }
    }
    outcome("eq-variance", worst_z <= 3.0, format!("worst |var - beta_bar^2| = {worst_z:.2} standard errors"))
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor {
    let u = Uniform::new(0.0, 1.0).expect("valid range");
    Tensor::from_shape_simple_fn((h, w, 3), || u.sample(rng))
}

fn recovery_identity(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = make_schedule(10, ScheduleKind::UniformAlpha).expect("steps >= 1");
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x0 = random_image(&mut rng, 8, 8);
        let res = &random_image(&mut rng, 8, 8) - &x0;
        let eps = Tensor::from_shape_simple_fn((8, 8, 3), || StandardNormal.sample(&mut rng));
        for t in 1..=10 {
            let xt = forward_marginal(&x0, &res, &s, t, &eps).expect("shapes match");
            let back = recover_x0(&xt, t, &s, &res, &eps).expect("shapes match");
            worst = (&back - &x0).iter().fold(worst, |w, v| w.max(v.abs()));
        }
    }
    outcome("recover-x0", worst <= 1e-6, format!("max recovery error {worst:e}"))
}

fn oracle_sampler(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = make_schedule(10, ScheduleKind::UniformAlpha).expect("steps >= 1");
    let mut worst = 0.0f64;
    for i in 0..10 {
        let x0 = random_image(&mut rng, 16, 16);
        let x_in = random_image(&mut rng, 16, 16);
        let hook = OracleHook { x0: x0.clone(), schedule: s.clone() };
        for steps in [5, 10] {
            let out = sample(&x_in, &s, &hook, steps, seed ^ i, SamplerMode::Deterministic).expect("valid sampler");
            worst = (&out - &x0).iter().fold(worst, |w, v| w.max(v.abs()));
        }
    }
    outcome("oracle-sampler", worst <= 1e-5, format!("max |sample - x0| = {worst:e} (10 images, steps 5 and 10)"))
}

fn loss_zero_iff_exact(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = random_image(&mut rng, 4, 4);
    let eps = random_image(&mut rng, 4, 4);
    let w = LossWeights::default();
    let exact = super::losses(&res, &eps, &res, &eps, w).expect("shapes match");
    let mut off = res.clone();
    off[[1, 2, 0]] += 1e-3;
    let perturbed = super::losses(&res, &eps, &off, &eps, w).expect("shapes match");
    let ok = exact == (0.0, 0.0) && perturbed.0 > 0.0 && perturbed.1 == 0.0;
    outcome("losses", ok, format!("exact {exact:?}, perturbed {perturbed:?}"))
}

/// Runs every check; deterministic for a given seed.
pub fn run_checks(seed: u64) -> Vec<CheckOutcome> {
    vec![
        schedule_endpoints(),
        deterministic_consistency(),
        deterministic_consistency_f64(),
        variance_consistency(seed),
        recovery_identity(seed),
        oracle_sampler(seed),
        loss_zero_iff_exact(seed),
    ]
}
