//! JSON config files for the `grid` and `kfold` subcommands.

use hdann_core::harness::{GridSpec, Timing};
use hdann_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

fn default_model() -> u8 {
    1
}

fn default_n_train() -> usize {
    1000
}

fn default_holdout() -> usize {
    500
}

fn default_monte_carlo() -> usize {
    2
}

fn default_k() -> usize {
    5
}

/// Config for `hdann grid`. Every field has a default; `grids` and `train`
/// fall back to the selected preset when absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFileConfig {
    #[serde(default = "default_model")]
    pub model: u8,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_holdout")]
    pub n_val: usize,
    #[serde(default = "default_holdout")]
    pub n_test: usize,
    #[serde(default = "default_monte_carlo")]
    pub monte_carlo: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub grids: Vec<GridSpec>,
}

impl Default for GridFileConfig {
    fn default() -> Self {
        GridFileConfig {
            model: default_model(),
            n_train: default_n_train(),
            n_val: default_holdout(),
            n_test: default_holdout(),
            monte_carlo: default_monte_carlo(),
            seed: 0,
            timing: Timing::Wall,
            train: None,
            grids: Vec::new(),
        }
    }
}

/// Config for `hdann kfold`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KfoldFileConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub grids: Vec<GridSpec>,
}

impl Default for KfoldFileConfig {
    fn default() -> Self {
        KfoldFileConfig {
            k: default_k(),
            seed: 0,
            timing: Timing::Wall,
            train: None,
            grids: Vec::new(),
        }
    }
}
