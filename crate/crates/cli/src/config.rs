//! Experiment configuration: one JSON file, overridden by command-line
//! flags (flags win). Unknown keys are rejected so a typo cannot silently
//! change an experiment.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use loss01::{Mlp01Config, ScdConfig, SgdConfig, SvmConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub train: TrainSection,
    pub attack: AttackSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub model: Option<String>,
    pub votes: Option<usize>,
    pub vote_mode: Option<String>,
    pub iters: Option<usize>,
    pub eta: Option<f64>,
    pub k_features: Option<usize>,
    pub batch_frac: Option<f64>,
    pub threshold_cap: Option<usize>,
    pub hidden: Option<usize>,
    pub sgd_epochs: Option<usize>,
    pub sgd_batch: Option<usize>,
    pub sgd_lr: Option<f64>,
    pub sgd_momentum: Option<f64>,
    pub c_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub svm_epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub epsilon: Option<f64>,
    pub epochs: Option<usize>,
    pub substitute: Option<String>,
    pub sub_hidden: Option<Vec<usize>>,
    pub sub_sgd_epochs: Option<usize>,
    pub sub_iters: Option<usize>,
    pub sub_k_features: Option<usize>,
    pub max_set_multiple: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }
}

/// The four trainable model kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Scd01,
    Mlp01,
    Svm,
    Mlp,
}

impl ModelChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "scd01" => Ok(ModelChoice::Scd01),
            "mlp01" => Ok(ModelChoice::Mlp01),
            "svm" => Ok(ModelChoice::Svm),
            "mlp" => Ok(ModelChoice::Mlp),
            other => bail!("unknown model {other:?} (expected scd01|mlp01|svm|mlp)"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelChoice::Scd01 => "scd01",
            ModelChoice::Mlp01 => "mlp01",
            ModelChoice::Svm => "svm",
            ModelChoice::Mlp => "mlp",
        }
    }

    /// Restarts for the 01-loss family, bootstraps for the convex one.
    pub fn default_vote_mode(self) -> loss01::VoteMode {
        match self {
            ModelChoice::Scd01 | ModelChoice::Mlp01 => loss01::VoteMode::Restart,
            ModelChoice::Svm | ModelChoice::Mlp => loss01::VoteMode::Bootstrap,
        }
    }
}

pub fn parse_vote_mode(s: &str) -> Result<loss01::VoteMode> {
    match s {
        "restart" => Ok(loss01::VoteMode::Restart),
        "bootstrap" => Ok(loss01::VoteMode::Bootstrap),
        other => bail!("unknown vote mode {other:?} (expected restart|bootstrap)"),
    }
}

/// Effective training settings after merging config file and flags.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveTrain {
    pub model: String,
    pub votes: usize,
    pub vote_mode: String,
    pub seed: u64,
    pub scd: ScdEcho,
    pub hidden: usize,
    pub sgd: SgdEcho,
    pub svm: SvmEcho,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScdEcho {
    pub iterations: usize,
    pub features_per_step: usize,
    pub step_size: f64,
    pub batch_fraction: f64,
    pub threshold_cap: usize,
}

impl From<&ScdConfig> for ScdEcho {
    fn from(c: &ScdConfig) -> Self {
        ScdEcho {
            iterations: c.iterations,
            features_per_step: c.features_per_step,
            step_size: c.step_size,
            batch_fraction: c.batch_fraction,
            threshold_cap: c.threshold_cap,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SgdEcho {
    pub batch: usize,
    pub momentum: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl From<&SgdConfig> for SgdEcho {
    fn from(c: &SgdConfig) -> Self {
        SgdEcho {
            batch: c.batch,
            momentum: c.momentum,
            learning_rate: c.learning_rate,
            epochs: c.epochs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SvmEcho {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub epochs: usize,
}

impl From<&SvmConfig> for SvmEcho {
    fn from(c: &SvmConfig) -> Self {
        SvmEcho {
            c_grid: c.c_grid.clone(),
            folds: c.folds,
            epochs: c.epochs,
        }
    }
}

/// Builds the concrete trainer configs from a merged section. `seed` here is
/// the per-model base seed (already derived from the global seed).
pub struct TrainPlan {
    pub model: ModelChoice,
    pub votes: usize,
    pub vote_mode: loss01::VoteMode,
    pub base_seed: u64,
    pub scd: ScdConfig,
    pub mlp01: Mlp01Config,
    pub sgd: SgdConfig,
    pub svm: SvmConfig,
}

impl TrainPlan {
    pub fn echo(&self) -> EffectiveTrain {
        EffectiveTrain {
            model: self.model.name().to_string(),
            votes: self.votes,
            vote_mode: match self.vote_mode {
                loss01::VoteMode::Restart => "restart".to_string(),
                loss01::VoteMode::Bootstrap => "bootstrap".to_string(),
            },
            seed: self.base_seed,
            scd: ScdEcho::from(&self.scd),
            hidden: self.mlp01.hidden_k,
            sgd: SgdEcho::from(&self.sgd),
            svm: SvmEcho::from(&self.svm),
        }
    }
}
