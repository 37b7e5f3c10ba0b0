//! Experiment configuration, loadable from TOML or JSON with the same
//! field names. Everything downstream of a config file is deterministic,
//! so a config fully identifies its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{validation, CliResult};
use crate::schema::TrainConfigJson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DgpKind {
    Demand,
    Mastouri,
    DspriteSurrogate,
}

impl DgpKind {
    pub fn name(&self) -> &'static str {
        match self {
            DgpKind::Demand => "demand",
            DgpKind::Mastouri => "mastouri",
            DgpKind::DspriteSurrogate => "dsprite_surrogate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EstimatorKind {
    Dfpv,
    FixedFeature,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Dfpv => "dfpv",
            EstimatorKind::FixedFeature => "fixed_feature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PolicyKind {
    Price,
    Cost,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Price => "price",
            PolicyKind::Cost => "cost",
        }
    }

    pub fn to_policy(self) -> pcl_core::causal::Policy {
        match self {
            PolicyKind::Price => pcl_core::causal::Policy::Price,
            PolicyKind::Cost => pcl_core::causal::Policy::Cost,
        }
    }
}

fn default_n_sims() -> usize {
    20
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Dfpv, EstimatorKind::FixedFeature]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_max_centers() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpKind,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    /// Per-stage sample counts: size s means s stage-1 and s stage-2 rows
    /// (and s evaluation rows in policy experiments).
    pub sizes: Vec<usize>,
    #[serde(default = "default_n_sims")]
    pub n_sims: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub train: TrainConfigJson,
    /// Dictionary size cap for fixed features and the direct-ridge baseline.
    #[serde(default = "default_max_centers")]
    pub max_centers: usize,
    /// Optional (λ₁, λ₂) grid; when present each run picks its λs by
    /// cross-stage validation instead of using the values in `train`.
    #[serde(default)]
    pub tune: Option<Vec<(f64, f64)>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.sizes.is_empty() {
            return Err(validation("config: sizes must be nonempty"));
        }
        if self.sizes.iter().any(|&s| s == 0) {
            return Err(validation("config: sizes must be positive"));
        }
        if self.n_sims == 0 {
            return Err(validation("config: n_sims must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(validation("config: estimators must be nonempty"));
        }
        if self.max_centers == 0 {
            return Err(validation("config: max_centers must be positive"));
        }
        if let Some(grid) = &self.tune {
            if grid.is_empty() {
                return Err(validation("config: tune grid must be nonempty when present"));
            }
        }
        Ok(())
    }

    /// A one-cell experiment, the shape `train` and `tune` work with.
    pub fn single(dgp: DgpKind, estimator: EstimatorKind, size: usize, seed: u64) -> Self {
        ExperimentConfig {
            dgp,
            estimators: vec![estimator],
            sizes: vec![size],
            n_sims: 1,
            base_seed: seed,
            train: TrainConfigJson::default(),
            max_centers: default_max_centers(),
            tune: None,
            output_dir: default_output_dir(),
        }
    }

    /// Parse by extension: .json as JSON, anything else as TOML.
    pub fn load(path: &Path) -> CliResult<Self> {
        let raw = fs::read_to_string(path)
            .map_err(|e| validation(format!("{}: {e}", path.display())))?;
        let config: ExperimentConfig = if path.extension().and_then(|e| e.to_str()) == Some("json")
        {
            serde_json::from_str(&raw).map_err(|e| validation(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&raw).map_err(|e| validation(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }
}
