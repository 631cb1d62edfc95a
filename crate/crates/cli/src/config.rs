//! Experiment configuration: one JSON document, overridable from flags.

use std::path::{Path, PathBuf};

use kpfcp_core::estimator::{EstimatorKind, EstimatorSpec};
use kpfcp_core::room::SceneRanges;
use kpfcp_core::{Algorithm, FcpParams, KpfcpParams, ProcessOptions, StftConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::Manifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub input: InputSpec,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default)]
    pub process: ProcessOptions,
}

fn default_algorithm() -> Algorithm {
    Algorithm::Kpfcp(KpfcpParams::default())
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            input: InputSpec::default(),
            stft: StftConfig::default(),
            estimator: EstimatorSpec::default(),
            algorithm: default_algorithm(),
            metrics: MetricsSpec::default(),
            process: ProcessOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    Synthetic(SyntheticInput),
    Wav(WavInput),
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Synthetic(SyntheticInput::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticInput {
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_t60")]
    pub t60: f64,
    /// Additive white noise level; `null` renders a noiseless scene.
    #[serde(default = "default_snr")]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub scene: SceneSpec,
}

fn default_duration() -> f64 {
    8.0
}

fn default_t60() -> f64 {
    0.4
}

fn default_snr() -> Option<f64> {
    Some(25.0)
}

impl Default for SyntheticInput {
    fn default() -> Self {
        Self {
            duration_s: default_duration(),
            t60: default_t60(),
            snr_db: default_snr(),
            scene: SceneSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum SceneSpec {
    /// 7 x 7 x 3 m room, microphone at the centre, source 1 m away.
    #[default]
    Reference,
    /// Geometry drawn from `ranges` with the experiment seed.
    Random {
        #[serde(default)]
        ranges: SceneRanges,
    },
    Explicit {
        room_dims: [f64; 3],
        source_pos: [f64; 3],
        mic_pos: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavInput {
    pub observed: PathBuf,
    #[serde(default)]
    pub direct_truth: Option<PathBuf>,
    /// Direct-path estimate produced elsewhere, used by the external estimator.
    #[serde(default)]
    pub estimate: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "one")]
    pub segment_s: f64,
    #[serde(default = "three")]
    pub smooth_s: f64,
    /// CSV destination; defaults to `metrics.csv` in the output directory.
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            segment_s: 1.0,
            smooth_s: 3.0,
            csv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmName {
    Fcp,
    Kpfcp,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub algorithm: Option<AlgorithmName>,
    pub p: Option<usize>,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub t60: Option<f64>,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
    pub metrics_csv: Option<PathBuf>,
    pub instrument_macs: bool,
}

impl ExperimentConfig {
    /// Reads a config, or the config embedded in a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let is_manifest = value.get("manifest_version").is_some();
        let parsed = if is_manifest {
            serde_json::from_value::<Manifest>(value).map(|m| m.config)
        } else {
            serde_json::from_value::<ExperimentConfig>(value)
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(name) = o.algorithm {
            self.algorithm = match (name, self.algorithm) {
                (AlgorithmName::Fcp, a @ Algorithm::Fcp(_)) => a,
                (AlgorithmName::Kpfcp, a @ Algorithm::Kpfcp(_)) => a,
                (AlgorithmName::Fcp, _) => Algorithm::Fcp(FcpParams::default()),
                (AlgorithmName::Kpfcp, _) => Algorithm::Kpfcp(KpfcpParams::default()),
            };
        }
        match &mut self.algorithm {
            Algorithm::Kpfcp(k) => {
                if let Some(p) = o.p {
                    k.p = p;
                }
                if let Some(k1) = o.k1 {
                    k.k1 = k1;
                }
                if let Some(k2) = o.k2 {
                    k.k2 = k2;
                }
            }
            Algorithm::Fcp(f) => {
                if o.p.is_some() {
                    return Err(CliError::Config("--p applies only to the kpfcp algorithm".into()));
                }
                if o.k1.is_some() || o.k2.is_some() {
                    f.k = o.k1.unwrap_or(9) * o.k2.unwrap_or(9);
                }
            }
        }
        if o.t60.is_some() || o.snr_db.is_some() {
            let InputSpec::Synthetic(s) = &mut self.input else {
                return Err(CliError::Config("--t60 and --snr apply only to synthetic input".into()));
            };
            if let Some(t) = o.t60 {
                s.t60 = t;
            }
            if let Some(snr) = o.snr_db {
                s.snr_db = (snr != f64::INFINITY).then_some(snr);
            }
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(p) = &o.metrics_csv {
            self.metrics.csv = Some(p.clone());
        }
        if o.instrument_macs {
            self.process.instrument_macs = true;
        }
        Ok(())
    }

    /// Checks every section, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let field = |path: &str, e: kpfcp_core::Error| CliError::Config(format!("{path}: {e}"));
        self.stft.validate().map_err(|e| field("stft", e))?;
        self.estimator.validate().map_err(|e| field("estimator", e))?;
        self.algorithm.validate().map_err(|e| field("algorithm", e))?;
        match &self.input {
            InputSpec::Synthetic(s) => {
                if !(s.duration_s.is_finite() && s.duration_s > 0.0) {
                    return Err(CliError::Config(format!(
                        "input.duration_s must be positive, got {}",
                        s.duration_s
                    )));
                }
                if !(s.t60.is_finite() && s.t60 > 0.0) {
                    return Err(CliError::Config(format!("input.t60 must be positive, got {}", s.t60)));
                }
                if s.snr_db.is_some_and(|v| !v.is_finite()) {
                    return Err(CliError::Config("input.snr_db must be finite or null".into()));
                }
                if self.estimator.kind == EstimatorKind::External {
                    return Err(CliError::Config(
                        "estimator.kind: external estimates need wav input with an `estimate` path".into(),
                    ));
                }
            }
            InputSpec::Wav(w) => {
                if self.metrics.enabled && w.direct_truth.is_none() {
                    return Err(CliError::Config(
                        "metrics require reference: set input.direct_truth or disable metrics".into(),
                    ));
                }
                if self.estimator.kind == EstimatorKind::Oracle && w.direct_truth.is_none() {
                    return Err(CliError::Config(
                        "estimator.kind: the oracle estimator needs input.direct_truth".into(),
                    ));
                }
                if self.estimator.kind == EstimatorKind::External && w.estimate.is_none() {
                    return Err(CliError::Config(
                        "estimator.kind: the external estimator needs input.estimate".into(),
                    ));
                }
            }
        }
        if self.metrics.enabled && !(self.metrics.segment_s > 0.0 && self.metrics.smooth_s > 0.0) {
            return Err(CliError::Config("metrics.segment_s and metrics.smooth_s must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let empty: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(empty, cfg);
    }

    #[test]
    fn flags_override_file() {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(r#"{"seed": 4, "algorithm": {"kind": "kpfcp", "k1": 9, "k2": 9, "p": 2, "alpha1": 0.9, "alpha2": 0.9, "sigma": 0.01}}"#)
                .unwrap();
        cfg.apply(&Overrides {
            p: Some(5),
            seed: Some(9),
            t60: Some(0.7),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.seed, 9);
        let Algorithm::Kpfcp(k) = cfg.algorithm else { panic!() };
        assert_eq!((k.p, k.alpha1), (5, 0.9));
        let InputSpec::Synthetic(s) = cfg.input else { panic!() };
        assert_eq!(s.t60, 0.7);
    }

    #[test]
    fn switching_algorithm_uses_its_defaults() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides {
            algorithm: Some(AlgorithmName::Fcp),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Fcp(FcpParams::default()));
        assert!(cfg
            .apply(&Overrides {
                p: Some(3),
                ..Default::default()
            })
            .is_err());
    }

    #[test]
    fn order_above_filter_lengths_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&Overrides {
            p: Some(10),
            ..Default::default()
        })
        .unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("min(K1, K2)"), "{msg}");
        assert!(msg.contains("algorithm"), "{msg}");
    }

    #[test]
    fn wav_metrics_need_reference() {
        let cfg = ExperimentConfig {
            input: InputSpec::Wav(WavInput {
                observed: "y.wav".into(),
                direct_truth: None,
                estimate: None,
            }),
            estimator: EstimatorSpec {
                kind: EstimatorKind::Identity,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("metrics require reference"));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sede": 1}"#).is_err());
    }
}
