//! Scene or WAV ingestion, estimation, dereverberation and reporting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kpfcp_core::complexity::{crossover, MacModel, ESTIMATOR_MACS_PER_TF_UNIT};
use kpfcp_core::estimator::{estimate, EstimatorKind, EstimatorSpec, ExternalEstimator, DirectPathEstimator};
use kpfcp_core::metrics::{evaluate_with, MetricsReport};
use kpfcp_core::room::{image_method, render_scene, schroeder_t60, ImageMethodOptions, Rir, RoomScene};
use kpfcp_core::speech::synthetic_speech;
use kpfcp_core::wav::{clip_guard_gain, read_wav, write_wav};
use kpfcp_core::{analyze, dereverberate, synthesize, Algorithm, SampleBuffer};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, InputSpec, SceneSpec, SyntheticInput};
use crate::error::{CliError, Result};
use crate::manifest::{ComplexityRecord, Manifest, OutputFile, SceneRecord, Summary, MANIFEST_VERSION};

/// Independent streams drawn from the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub speech: u64,
    pub scene: u64,
    pub noise: u64,
    pub estimator: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        Self {
            speech: rng.next_u64(),
            scene: rng.next_u64(),
            noise: rng.next_u64(),
            estimator: rng.next_u64(),
        }
    }
}

/// Replaces a random scene by the geometry it draws.
pub fn resolve(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut out = cfg.clone();
    if let InputSpec::Synthetic(s) = &mut out.input {
        if let SceneSpec::Random { ranges } = &s.scene {
            let mut rng = ChaCha8Rng::seed_from_u64(Seeds::derive(cfg.seed).scene);
            let scene = RoomScene::sample(ranges, Some(s.t60), &mut rng);
            s.scene = SceneSpec::Explicit {
                room_dims: scene.room_dims,
                source_pos: scene.source_pos,
                mic_pos: scene.mic_pos,
            };
        }
    }
    out
}

pub fn room_scene(input: &SyntheticInput, seed: u64) -> RoomScene {
    match &input.scene {
        SceneSpec::Reference => RoomScene::reference(input.t60),
        SceneSpec::Random { ranges } => {
            let mut rng = ChaCha8Rng::seed_from_u64(Seeds::derive(seed).scene);
            RoomScene::sample(ranges, Some(input.t60), &mut rng)
        }
        SceneSpec::Explicit {
            room_dims,
            source_pos,
            mic_pos,
        } => RoomScene {
            room_dims: *room_dims,
            source_pos: *source_pos,
            mic_pos: *mic_pos,
            ..RoomScene::reference(input.t60)
        },
    }
}

/// Signals entering the dereverberation stage.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    pub observed: SampleBuffer,
    pub direct_truth: Option<SampleBuffer>,
    pub estimate: Option<SampleBuffer>,
    pub scene: Option<SceneRecord>,
}

fn read(path: &Path) -> Result<SampleBuffer> {
    if !path.exists() {
        return Err(CliError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
    }
    Ok(read_wav(path)?)
}

pub fn scene_record(scene: &RoomScene, rir: &Rir) -> SceneRecord {
    SceneRecord {
        scene: scene.clone(),
        direct_tap: rir.direct_tap,
        direct_cutoff: rir.direct_cutoff,
        rir_taps: rir.len(),
        measured_t60: schroeder_t60(&rir.taps, rir.sample_rate),
    }
}

pub fn prepare_input(cfg: &ExperimentConfig) -> Result<PreparedInput> {
    match &cfg.input {
        InputSpec::Synthetic(s) => {
            let seeds = Seeds::derive(cfg.seed);
            let scene = room_scene(s, cfg.seed);
            let rir = image_method(&scene, &ImageMethodOptions::default())?;
            let clean = synthetic_speech(s.duration_s, scene.sample_rate, seeds.speech);
            let rendered = render_scene(&clean, &rir, s.snr_db.unwrap_or(f64::INFINITY), seeds.noise)?;
            Ok(PreparedInput {
                observed: rendered.observed,
                direct_truth: Some(rendered.direct_truth),
                estimate: None,
                scene: Some(scene_record(&scene, &rir)),
            })
        }
        InputSpec::Wav(w) => {
            let observed = read(&w.observed)?;
            let direct_truth = w.direct_truth.as_deref().map(read).transpose()?;
            let estimate = w.estimate.as_deref().map(read).transpose()?;
            for (name, other) in [("direct_truth", &direct_truth), ("estimate", &estimate)] {
                if other.as_ref().is_some_and(|b| b.len() != observed.len()) {
                    return Err(CliError::Config(format!(
                        "input.{name} must have the same length as input.observed"
                    )));
                }
            }
            Ok(PreparedInput {
                observed,
                direct_truth,
                estimate,
                scene: None,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: SampleBuffer,
    pub metrics: Option<MetricsReport>,
    pub complexity: ComplexityRecord,
}

pub fn complexity_record(alg: &Algorithm, tf_units: u64, measured: Option<f64>) -> Result<ComplexityRecord> {
    let (model, cross) = match alg {
        Algorithm::Fcp(p) => (MacModel::FcpOnline { k: p.k }, None),
        Algorithm::Kpfcp(p) => (
            MacModel::KpFcp {
                p: p.p,
                k1: p.k1,
                k2: p.k2,
            },
            Some(crossover(p.k1, p.k2)?),
        ),
    };
    Ok(ComplexityRecord {
        algorithm: *alg,
        model_macs_per_tf_unit: model.macs_per_tf_unit()?,
        estimator_macs_per_tf_unit: ESTIMATOR_MACS_PER_TF_UNIT,
        tf_units,
        measured_macs_per_tf_unit: measured,
        crossover: cross,
    })
}

/// Runs estimation, dereverberation and scoring on prepared signals.
pub fn process(cfg: &ExperimentConfig, input: &PreparedInput) -> Result<RunOutcome> {
    let y = analyze(&input.observed, cfg.stft)?;
    let truth = input.direct_truth.as_ref().map(|t| analyze(t, cfg.stft)).transpose()?;
    let seeds = Seeds::derive(cfg.seed);
    let s_nn = match cfg.estimator.kind {
        EstimatorKind::External => {
            let ext = input
                .estimate
                .as_ref()
                .ok_or_else(|| CliError::Config("estimator.kind: external estimate missing".into()))?;
            ExternalEstimator {
                grid: analyze(ext, cfg.stft)?,
            }
            .estimate(&y)?
        }
        _ => {
            let spec = EstimatorSpec {
                seed: cfg.estimator.seed.wrapping_add(seeds.estimator),
                ..cfg.estimator.clone()
            };
            estimate(&spec, &y, truth.as_ref())?
        }
    };
    let run = dereverberate(&cfg.algorithm, &y, &s_nn, &cfg.process)?;
    let output = synthesize(&run.grid)?;
    let metrics = if cfg.metrics.enabled {
        let reference = input
            .direct_truth
            .as_ref()
            .ok_or_else(|| CliError::Config("metrics require reference".into()))?;
        Some(evaluate_with(
            reference,
            &input.observed,
            &output,
            cfg.metrics.segment_s,
            cfg.metrics.smooth_s,
        )?)
    } else {
        None
    };
    let tf_units = (y.num_frames() * y.num_bins()) as u64;
    let complexity = complexity_record(&cfg.algorithm, tf_units, run.macs.map(|m| m.per_tf_unit()))?;
    Ok(RunOutcome {
        output,
        metrics,
        complexity,
    })
}

/// Writes a WAV, scaling it down first if it would clip; returns the gain.
pub fn write_guarded(path: &Path, buf: &SampleBuffer) -> Result<f64> {
    let gain = clip_guard_gain(buf);
    let scaled;
    let out = if gain == 1.0 {
        buf
    } else {
        scaled = SampleBuffer::new(buf.samples.iter().map(|v| v * gain).collect(), buf.sample_rate)?;
        &scaled
    };
    write_wav(path, out)?;
    Ok(gain)
}

pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time_s", "fwsnr_db", "smoothed_db"])?;
    for (p, s) in report.per_segment.iter().zip(&report.smoothed) {
        w.write_record([p.time_s.to_string(), p.fwsnr_db.to_string(), s.fwsnr_db.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn file_entry(name: &str, gain: Option<f64>) -> OutputFile {
    OutputFile {
        path: name.to_string(),
        gain,
    }
}

/// Writes the outputs of one run into `out_dir` and returns its manifest.
pub fn write_run(
    cfg: &ExperimentConfig,
    input: &PreparedInput,
    outcome: &RunOutcome,
    out_dir: &Path,
) -> Result<Manifest> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut outputs = BTreeMap::new();
    let g = write_guarded(&out_dir.join("dereverberated.wav"), &outcome.output)?;
    outputs.insert("dereverberated".into(), file_entry("dereverberated.wav", Some(g)));
    if matches!(cfg.input, InputSpec::Synthetic(_)) {
        let g = write_guarded(&out_dir.join("observed.wav"), &input.observed)?;
        outputs.insert("observed".into(), file_entry("observed.wav", Some(g)));
        if let Some(d) = &input.direct_truth {
            let g = write_guarded(&out_dir.join("direct.wav"), d)?;
            outputs.insert("direct_truth".into(), file_entry("direct.wav", Some(g)));
        }
    }
    if let Some(report) = &outcome.metrics {
        write_json(&out_dir.join("metrics.json"), report)?;
        outputs.insert("metrics_json".into(), file_entry("metrics.json", None));
        let csv_path: PathBuf = cfg.metrics.csv.clone().unwrap_or_else(|| out_dir.join("metrics.csv"));
        write_metrics_csv(&csv_path, report)?;
        let shown = if cfg.metrics.csv.is_some() {
            csv_path.display().to_string()
        } else {
            "metrics.csv".to_string()
        };
        outputs.insert("metrics_csv".into(), file_entry(&shown, None));
    }
    write_json(&out_dir.join("complexity.json"), &outcome.complexity)?;
    outputs.insert("complexity".into(), file_entry("complexity.json", None));
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        outputs,
        scene: input.scene.clone(),
        summary: outcome.metrics.as_ref().map(|m| Summary {
            fwsnr_db: m.fwsnr_db,
            observed_fwsnr_db: m.observed_fwsnr_db,
            delta_fwsnr_db: m.delta_fwsnr_db,
        }),
        complexity: outcome.complexity.clone(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Validates, resolves, runs and writes one experiment.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let cfg = resolve(cfg);
    let input = prepare_input(&cfg)?;
    let outcome = process(&cfg, &input)?;
    write_run(&cfg, &input, &outcome, out_dir)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepEntry {
    pub algorithm: &'static str,
    #[serde(rename = "P")]
    pub p: Option<usize>,
    pub fwsnr_db: Option<f64>,
    pub observed_fwsnr_db: Option<f64>,
    pub delta_fwsnr_db: Option<f64>,
    pub model_macs_per_tf_unit: u64,
}

/// Runs KP-FCP for every order in `orders` (plus FCP when asked) on one
/// rendered observation; each run lands in its own subdirectory.
pub fn sweep_orders(cfg: &ExperimentConfig, orders: &[usize], include_fcp: bool, out_dir: &Path) -> Result<Vec<SweepEntry>> {
    let base = resolve(cfg);
    let Algorithm::Kpfcp(kp) = base.algorithm else {
        return Err(CliError::Config("sweep-p needs the kpfcp algorithm".into()));
    };
    let mut variants: Vec<(String, ExperimentConfig)> = orders
        .iter()
        .map(|p| {
            let mut c = base.clone();
            c.algorithm = Algorithm::Kpfcp(kpfcp_core::KpfcpParams { p: *p, ..kp });
            (format!("p{p}"), c)
        })
        .collect();
    if include_fcp {
        let mut c = base.clone();
        c.algorithm = Algorithm::Fcp(kpfcp_core::FcpParams {
            k: kp.k1 * kp.k2,
            alpha: kp.alpha1,
            sigma: kp.sigma,
            lambda_floor: kp.lambda_floor,
        });
        variants.push(("fcp".into(), c));
    }
    for (_, c) in &variants {
        c.validate()?;
    }
    let input = prepare_input(&base)?;
    let mut rows = Vec::new();
    for (name, c) in &variants {
        let outcome = process(c, &input)?;
        let m = write_run(c, &input, &outcome, &out_dir.join(name))?;
        rows.push(SweepEntry {
            algorithm: c.algorithm.name(),
            p: match c.algorithm {
                Algorithm::Kpfcp(k) => Some(k.p),
                Algorithm::Fcp(_) => None,
            },
            fwsnr_db: m.summary.as_ref().map(|s| s.fwsnr_db),
            observed_fwsnr_db: m.summary.as_ref().map(|s| s.observed_fwsnr_db),
            delta_fwsnr_db: m.summary.as_ref().map(|s| s.delta_fwsnr_db),
            model_macs_per_tf_unit: m.complexity.model_macs_per_tf_unit,
        });
    }
    let path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}
