//! TOML run configuration.
//!
//! A single file (or the built-in defaults) describes the benchmark, the
//! training loop, and every phase's knobs. The CLI writes the fully resolved
//! form back out as `config_resolved.toml` so a run's inputs are always
//! recorded next to its outputs.

use serde::{Deserialize, Serialize};

use crate::datapool::{EnhanceConfig, VerifyRule};
use crate::env::BenchmarkSpec;
use crate::error::{Error, Result};
use crate::grpo::GrpoConfig;
use crate::policy::{ReferenceSpec, SftConfig};
use crate::trainer::{ArmMode, LoopConfig};

/// Parse `"a:b:c"` into three positive finite prior scales.
pub fn parse_priors(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "priors must be three colon-separated numbers, got `{s}`"
        )));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("prior `{part}` is not a number")))?;
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Config(format!(
                "prior `{part}` must be positive and finite"
            )));
        }
        *slot = v;
    }
    Ok(out)
}

/// Top-level run configuration. Every field has a default, so an empty file
/// (or no file at all) is a valid desk-scale run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub iterations: u32,
    /// `cdrem`, `prior_only`, `average`, `single`, or `no_grpo`.
    pub mode: String,
    /// Member picked under `single`: 0 strong ref, 1 noisy ref, 2 trained.
    pub single_index: usize,
    /// Prior scales as `strong:noisy:trained`.
    pub priors: String,
    /// Plans proposed per pool member per train step during enhancement.
    pub plans_per_step: u32,
    pub verify_rule: VerifyRule,
    pub recheck_previous: bool,
    pub diversity_over_all_steps: bool,
    pub propose_temperature: f64,
    pub state_buckets: u32,
    /// Rayon worker threads; 0 keeps the default (one per core).
    pub jobs: usize,
    /// Seed for generating the benchmark, independent of training seeds.
    pub benchmark_seed: u64,
    pub benchmark: BenchmarkSpec,
    pub sft_planner: SftConfig,
    pub sft_grounder: SftConfig,
    pub grpo: GrpoConfig,
    pub reference: ReferenceSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: vec![1, 2, 3, 4, 5],
            iterations: 3,
            mode: "cdrem".to_string(),
            single_index: 2,
            priors: "1:1:2".to_string(),
            plans_per_step: 1,
            verify_rule: VerifyRule::Majority,
            recheck_previous: true,
            diversity_over_all_steps: false,
            propose_temperature: 0.5,
            state_buckets: 1024,
            jobs: 0,
            benchmark_seed: 0,
            benchmark: BenchmarkSpec::default(),
            sft_planner: SftConfig::default(),
            sft_grounder: SftConfig::grounder_default(),
            grpo: GrpoConfig::default(),
            reference: ReferenceSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(src: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(src).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        // surfaces unknown modes, bad priors, and out-of-range phase knobs
        self.loop_config()?;
        Ok(())
    }

    /// Resolve the flat fields into the trainer's configuration.
    pub fn loop_config(&self) -> Result<LoopConfig> {
        let mode = ArmMode::from_str(&self.mode).ok_or_else(|| {
            Error::Config(format!(
                "unknown mode `{}` (expected one of {})",
                self.mode,
                ArmMode::ALL.map(|m| m.as_str()).join(", ")
            ))
        })?;
        let priors = parse_priors(&self.priors)?;
        let cfg = LoopConfig {
            iterations: self.iterations,
            mode,
            single_index: self.single_index,
            priors,
            enhance: EnhanceConfig {
                plans_per_step: self.plans_per_step,
                rule: self.verify_rule,
                propose_temperature: self.propose_temperature,
                recheck_previous: self.recheck_previous,
                diversity_over_all_steps: self.diversity_over_all_steps,
                state_buckets: self.state_buckets,
            },
            sft_planner: self.sft_planner,
            sft_grounder: self.sft_grounder,
            grpo: self.grpo,
            reference: self.reference,
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}
