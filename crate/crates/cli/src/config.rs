//! Run configuration shared by every command and written next to its
//! outputs.

use std::path::Path;

use anyhow::{bail, Context};
use emohlc_core::admixture::SolverOptions;
use emohlc_core::dataset::{DEFAULT_DETECT_THRESHOLD, DEFAULT_FREQUENCY_THRESHOLD};
use emohlc_core::hybrid::{TrainConfig, DEFAULT_EPSILON};
use emohlc_core::metrics::{KldOptions, LogBase, DEFAULT_KLD_SMOOTHING};
use emohlc_core::model_selection::{ParamGrid, TprStrategy, DEFAULT_FOLDS};
use emohlc_core::svm::SmoOptions;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.2;
pub const DEFAULT_TOP_K: usize = 10;

/// Every tunable of a run. Worker count and output location are not part
/// of it: they must not change any artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub split_fraction: f64,
    pub grid: ParamGrid,
    pub epsilon: f64,
    pub folds: usize,
    pub detect_threshold: f64,
    pub frequency_threshold: f64,
    pub kld_smoothing: f64,
    pub kld_base: LogBase,
    pub tpr_strategy: TprStrategy,
    pub smo: SmoOptions,
    pub admixture: SolverOptions,
    pub top_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            split_fraction: DEFAULT_SPLIT_FRACTION,
            grid: ParamGrid::default(),
            epsilon: DEFAULT_EPSILON,
            folds: DEFAULT_FOLDS,
            detect_threshold: DEFAULT_DETECT_THRESHOLD,
            frequency_threshold: DEFAULT_FREQUENCY_THRESHOLD,
            kld_smoothing: DEFAULT_KLD_SMOOTHING,
            kld_base: LogBase::Natural,
            tpr_strategy: TprStrategy::FoldAverage,
            smo: SmoOptions::default(),
            admixture: SolverOptions::default(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            bail!("split_fraction must lie in (0, 1), got {}", self.split_fraction);
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            bail!("epsilon must be >= 0, got {}", self.epsilon);
        }
        if self.folds < 2 {
            bail!("folds must be at least 2, got {}", self.folds);
        }
        if !(self.detect_threshold >= 0.0) {
            bail!("detect_threshold must be >= 0, got {}", self.detect_threshold);
        }
        if !(self.frequency_threshold > 0.0 && self.frequency_threshold <= 1.0) {
            bail!("frequency_threshold must lie in (0, 1], got {}", self.frequency_threshold);
        }
        if !(self.kld_smoothing > 0.0) {
            bail!("kld_smoothing must be > 0, got {}", self.kld_smoothing);
        }
        if !(self.smo.tolerance > 0.0) || self.smo.max_iter == 0 || self.smo.cache_rows < 2 {
            bail!("smo options need tolerance > 0, max_iter >= 1 and cache_rows >= 2");
        }
        if !(self.admixture.tol > 0.0) || self.admixture.max_iter == 0 {
            bail!("admixture options need tol > 0 and max_iter >= 1");
        }
        if self.top_k == 0 {
            bail!("top_k must be at least 1");
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            grid: self.grid.clone(),
            epsilon: self.epsilon,
            folds: self.folds,
            seed: self.seed,
            smo: self.smo,
            detect_threshold: self.detect_threshold,
            frequency_threshold: self.frequency_threshold,
            tpr_strategy: self.tpr_strategy,
        }
    }

    pub fn kld_options(&self) -> KldOptions {
        KldOptions {
            smoothing: self.kld_smoothing,
            base: self.kld_base,
        }
    }
}

/// The configuration as written to `run_config.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigRecord<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
}
