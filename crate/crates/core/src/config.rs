//! Run configuration: scenario, plan, analysis settings and seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::EstimatorOptions;
use crate::noise::ScenarioConfig;
use crate::protocol::ExperimentPlan;
use crate::timeseries::{WindowConfig, DEFAULT_BINS};

/// Version written to every file. Readers accept any minor of this major.
pub const FORMAT_VERSION: &str = "1.0";

pub fn check_format_version(found: &str) -> Result<()> {
    let major = |v: &str| v.split('.').next().map(str::to_owned);
    if major(found) == major(FORMAT_VERSION) && found.split('.').all(|p| p.parse::<u32>().is_ok()) {
        Ok(())
    } else {
        Err(Error::Malformed(format!("unsupported format_version {found:?}, expected {FORMAT_VERSION}")))
    }
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub estimator: EstimatorOptions,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { window: WindowConfig::default(), estimator: EstimatorOptions::default(), histogram_bins: DEFAULT_BINS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: String,
    /// Master seed for every random stream.
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub plan: ExperimentPlan,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Default output directory when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(seed: u64, scenario: ScenarioConfig, plan: ExperimentPlan) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            seed,
            scenario,
            plan,
            analysis: AnalysisConfig::default(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        check_format_version(&self.format_version).map_err(|e| Error::Config(e.to_string()))?;
        self.scenario.validate()?;
        self.plan.validate(&self.scenario)?;
        self.analysis.window.validate()?;
        if self.analysis.histogram_bins == 0 {
            return Err(Error::Config("histogram_bins must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, in hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}
