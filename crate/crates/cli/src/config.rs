//! Scenario configuration files.

use std::collections::BTreeMap;
use std::path::Path;

use cbf_synth::synthesis::ClassK;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub output: OutputConfig,
    pub constraint: ConstraintConfig,
    #[serde(default)]
    pub gains: GainsConfig,
    /// Region for `check-degree`; defaults to the constraint's inflated box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_degree: Option<BoxConfig>,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    Configuration,
    FullState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub kind: OutputKind,
    pub indices: Vec<usize>,
    #[serde(default = "two")]
    pub relative_degree: usize,
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintConfig {
    UpperLimit {
        max: f64,
    },
    LowerLimit {
        min: f64,
    },
    Band {
        center: f64,
        half_width: f64,
    },
    Ellipse {
        z_center_m: f64,
        z_min_m: f64,
        theta_max_rad: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    #[serde(default)]
    pub alpha: ClassK,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

impl Default for GainsConfig {
    fn default() -> Self {
        GainsConfig {
            alpha: ClassK::default(),
            sigma: 1.0,
            mu: None,
            lambda: None,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    #[serde(default = "condition_samples")]
    pub condition_samples: usize,
    #[serde(default = "inflation")]
    pub inflation: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            condition_samples: condition_samples(),
            inflation: inflation(),
        }
    }
}

fn condition_samples() -> usize {
    10_000
}

fn inflation() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub x0: Vec<f64>,
    #[serde(default = "horizon")]
    pub horizon_s: f64,
    #[serde(default = "dt")]
    pub dt_s: f64,
    pub nominal: NominalConfig,
}

fn horizon() -> f64 {
    10.0
}

fn dt() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NominalConfig {
    Zero,
    Pd {
        position: usize,
        velocity: usize,
        #[serde(default)]
        input: usize,
        setpoint: f64,
        #[serde(default = "kp")]
        kp: f64,
        #[serde(default = "kd")]
        kd: f64,
    },
    QuadrotorHeight {
        height_m: f64,
        #[serde(default = "kp")]
        kp: f64,
        #[serde(default = "kd")]
        kd: f64,
    },
}

fn kp() -> f64 {
    5.0
}

fn kd() -> f64 {
    2.0
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }
}
