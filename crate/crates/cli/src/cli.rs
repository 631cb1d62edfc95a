//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kpfcp_core::complexity::sweep_complexity;
use kpfcp_core::room::{calibrated_reflection, image_method, ImageMethodOptions};
use serde::Serialize;

use crate::config::{AlgorithmName, ExperimentConfig, InputSpec, Overrides};
use crate::error::{CliError, Result};
use crate::experiment::{
    resolve, room_scene, run_experiment, scene_record, sweep_orders, write_guarded, write_json,
};
use crate::manifest::SceneRecord;

#[derive(Debug, Parser)]
#[command(name = "kpfcp", version, about = "Online speech dereverberation with FCP and KP-FCP")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write audio, metrics and a manifest.
    Run(ExperimentArgs),
    /// Run KP-FCP for several orders P on one observation.
    SweepP(SweepArgs),
    /// Write the model MAC count per TF unit for a range of P.
    SweepComplexity(ComplexityArgs),
    /// Generate a room impulse response for the configured scene.
    MakeRir(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgorithmArg {
    Fcp,
    Kpfcp,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config or run manifest (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub k2: Option<usize>,
    /// Reverberation time in seconds.
    #[arg(long)]
    pub t60: Option<f64>,
    /// Signal-to-noise ratio in dB; `inf` renders without noise.
    #[arg(long, allow_negative_numbers = true)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "kpfcp-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub metrics_csv: Option<PathBuf>,
    /// Count multiply-accumulates while filtering.
    #[arg(long)]
    pub instrument_macs: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Orders to run.
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    pub p_list: Vec<usize>,
    /// Also run the full-length FCP filter on the same observation.
    #[arg(long)]
    pub include_fcp: bool,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    #[arg(long, default_value_t = 9)]
    pub k1: usize,
    #[arg(long, default_value_t = 9)]
    pub k2: usize,
    #[arg(long, default_value_t = 1)]
    pub p_min: usize,
    /// Defaults to min(K1, K2).
    #[arg(long)]
    pub p_max: Option<usize>,
    /// CSV file; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            algorithm: self.algorithm.map(|a| match a {
                AlgorithmArg::Fcp => AlgorithmName::Fcp,
                AlgorithmArg::Kpfcp => AlgorithmName::Kpfcp,
            }),
            p: self.p,
            k1: self.k1,
            k2: self.k2,
            t60: self.t60,
            snr_db: self.snr,
            seed: self.seed,
            metrics_csv: self.metrics_csv.clone(),
            instrument_macs: self.instrument_macs,
        }
    }

    /// Defaults, then the file, then the flags.
    pub fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&self.overrides())?;
        Ok(cfg)
    }
}

pub fn complexity_csv(k1: usize, k2: usize, p_min: usize, p_max: usize) -> Result<String> {
    let rows = sweep_complexity(k1, k2, p_min..=p_max)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(["P", "macs_kpfcp", "macs_fcp"])?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

#[derive(Debug, Serialize)]
struct RirReport<'a> {
    #[serde(flatten)]
    record: &'a SceneRecord,
    reflection_coefficient: f64,
    taps: &'a [f64],
}

pub fn make_rir(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SceneRecord> {
    let cfg = resolve(cfg);
    let InputSpec::Synthetic(input) = &cfg.input else {
        return Err(CliError::Config("make-rir needs a synthetic input scene".into()));
    };
    let scene = room_scene(input, cfg.seed);
    let rir = image_method(&scene, &ImageMethodOptions::default())?;
    let record = scene_record(&scene, &rir);
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let buf = kpfcp_core::SampleBuffer::new(rir.taps.clone(), rir.sample_rate)?;
    write_guarded(&out_dir.join("rir.wav"), &buf)?;
    let report = RirReport {
        record: &record,
        reflection_coefficient: calibrated_reflection(&scene)?,
        taps: &rir.taps,
    };
    write_json(&out_dir.join("rir.json"), &report)?;
    Ok(record)
}

/// Executes a parsed command and returns the text to print.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Run(args) => {
            let m = run_experiment(&args.config()?, &args.out)?;
            let mut msg = format!("wrote {}", args.out.join("manifest.json").display());
            if let Some(s) = m.summary {
                msg.push_str(&format!(
                    "\nfwsnr {:.3} dB (observed {:.3} dB, delta {:+.3} dB)",
                    s.fwsnr_db, s.observed_fwsnr_db, s.delta_fwsnr_db
                ));
            }
            if let Some(v) = m.complexity.measured_macs_per_tf_unit {
                msg.push_str(&format!(
                    "\nmacs per TF unit: measured {v:.1}, model {}",
                    m.complexity.model_macs_per_tf_unit
                ));
            }
            Ok(msg)
        }
        Command::SweepP(args) => {
            let cfg = args.experiment.config()?;
            cfg.validate()?;
            let rows = sweep_orders(&cfg, &args.p_list, args.include_fcp, &args.experiment.out)?;
            let mut msg = format!("wrote {}", args.experiment.out.join("sweep.csv").display());
            for r in rows {
                let label = r.p.map_or(r.algorithm.to_string(), |p| format!("P={p}"));
                if let Some(d) = r.delta_fwsnr_db {
                    msg.push_str(&format!("\n{label}: delta fwsnr {d:+.3} dB"));
                }
            }
            Ok(msg)
        }
        Command::SweepComplexity(args) => {
            let p_max = args.p_max.unwrap_or(args.k1.min(args.k2));
            let text = complexity_csv(args.k1, args.k2, args.p_min, p_max)?;
            match &args.out {
                Some(path) => {
                    std::fs::write(path, &text).map_err(|e| CliError::io(path, e))?;
                    Ok(format!("wrote {}", path.display()))
                }
                None => Ok(text.trim_end().to_string()),
            }
        }
        Command::MakeRir(args) => {
            let r = make_rir(&args.config()?, &args.out)?;
            Ok(format!(
                "wrote {} ({} taps, direct tap {}, measured T60 {})",
                args.out.join("rir.wav").display(),
                r.rir_taps,
                r.direct_tap,
                r.measured_t60.map_or("n/a".into(), |t| format!("{t:.3} s"))
            ))
        }
    }
}
