use std::fs;
use std::path::Path;

use clap::ValueEnum;
use reprostitch::metrics::{EvalConfig, SampsonConfig};
use reprostitch::rddm::Refiner;
use reprostitch::synth::SynthConfig;
use reprostitch::{BaselineConfig, ParallaxThresholds, StitchConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Pis3r,
    HomographyBaseline,
}

/// Resolved settings of one run. Every section is optional in the TOML
/// file; command-line flags override the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub reference: usize,
    /// Worker threads for dataset-level commands; 0 uses every core.
    pub jobs: usize,
    pub stitch: StitchConfig,
    pub baseline: BaselineConfig,
    pub diffusion: Refiner,
    pub eval: EvalConfig,
    pub sampson: SampsonConfig,
    pub parallax: ParallaxThresholds,
    pub synth: SynthConfig,
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<Method>,
    pub reference: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::malformed(p, e))?;
                toml::from_str(&text).map_err(|e| CliError::malformed(p, e))?
            }
            None => RunConfig::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(r) = o.reference {
            self.reference = r;
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(s) = o.seed {
            self.synth.seed = s;
            self.baseline.registration.seed = s;
            self.eval.registration.seed = s;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Refiner::External { command } = &self.diffusion {
            if command.is_empty() {
                return Err(CliError::Invalid("diffusion.command must name a program".into()));
            }
        }
        if !(self.parallax.tau1 >= 0.0 && self.parallax.tau1 <= self.parallax.tau2) {
            return Err(CliError::Invalid(format!(
                "parallax thresholds must satisfy 0 <= tau1 <= tau2 (got {}, {})",
                self.parallax.tau1, self.parallax.tau2
            )));
        }
        if self.stitch.max_dim == 0 || self.baseline.max_dim == 0 {
            return Err(CliError::Invalid("max_dim must be positive".into()));
        }
        Ok(())
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::Env(format!("thread pool: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn sections_parse() {
        let c: RunConfig = toml::from_str(
            r#"
            method = "homography-baseline"
            reference = 1
            [stitch]
            max_dim = 512
            [diffusion]
            mode = "external"
            command = ["refine", "--fast"]
            [parallax]
            tau1 = 0.01
            "#,
        )
        .unwrap();
        assert_eq!(c.method, Method::HomographyBaseline);
        assert_eq!(c.reference, 1);
        assert_eq!(c.stitch.max_dim, 512);
        assert_eq!(c.diffusion, Refiner::External { command: vec!["refine".into(), "--fast".into()] });
        assert_eq!(c.parallax.tau1, 0.01);
        assert_eq!(c.parallax.tau2, 0.25);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("methd = \"pis3r\"").is_err());
    }

    #[test]
    fn flags_win() {
        let mut c: RunConfig = toml::from_str("method = \"homography-baseline\"\njobs = 3").unwrap();
        c.apply(&Overrides { method: Some(Method::Pis3r), seed: Some(9), jobs: Some(1), reference: None });
        assert_eq!(c.method, Method::Pis3r);
        assert_eq!(c.jobs, 1);
        assert_eq!((c.synth.seed, c.baseline.registration.seed, c.eval.registration.seed), (9, 9, 9));
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig { reference: 1, ..RunConfig::default() };
        let back: RunConfig = serde_json::from_value(c.echo()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let c = RunConfig { diffusion: Refiner::External { command: vec![] }, ..RunConfig::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { parallax: ParallaxThresholds { tau1: 0.3, tau2: 0.1 }, ..RunConfig::default() };
        assert!(c.validate().is_err());
    }
}
