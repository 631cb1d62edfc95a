//! Run manifest: everything needed to reproduce a run, plus what it wrote.

use std::collections::BTreeMap;
use std::path::Path;

use kpfcp_core::complexity::Crossover;
use kpfcp_core::room::RoomScene;
use kpfcp_core::Algorithm;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    /// Fully resolved configuration; a random scene appears as explicit geometry.
    pub config: ExperimentConfig,
    /// Written files, relative to the output directory, with the gain
    /// applied to keep each WAV inside 16-bit range.
    pub outputs: BTreeMap<String, OutputFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    pub complexity: ComplexityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene: RoomScene,
    pub direct_tap: usize,
    pub direct_cutoff: usize,
    pub rir_taps: usize,
    pub measured_t60: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub fwsnr_db: f64,
    pub observed_fwsnr_db: f64,
    pub delta_fwsnr_db: f64,
}

/// Model cost of the run per TF unit, and the instrumented count if taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRecord {
    pub algorithm: Algorithm,
    pub model_macs_per_tf_unit: u64,
    pub estimator_macs_per_tf_unit: u64,
    pub tf_units: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured_macs_per_tf_unit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossover: Option<Crossover>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
