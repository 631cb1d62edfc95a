//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frames start at sample 0 and advance by `hop`; the final partial frame is
//! zero-padded. Analysis and synthesis both use a periodic square-root Hann
//! window, and synthesis divides by the accumulated window-product envelope,
//! so every sample covered by a non-zero envelope is reconstructed exactly.

use std::sync::Arc;

use ndarray::{Array2, ArrayView1, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono time-domain signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl SampleBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Square-root periodic Hann for both analysis and synthesis.
    #[default]
    SqrtHann,
}

impl WindowKind {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::SqrtHann => (0..len)
                .map(|n| (std::f64::consts::PI * n as f64 / len as f64).sin())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_size: usize,
    pub hop: usize,
    #[serde(default)]
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_size: 512,
            hop: 128,
            window: WindowKind::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_size < 2 || self.frame_size % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "frame_size must be even and >= 2, got {}",
                self.frame_size
            )));
        }
        if self.hop == 0 || self.frame_size % self.hop != 0 {
            return Err(Error::InvalidConfig(format!(
                "hop {} must divide frame_size {}",
                self.hop, self.frame_size
            )));
        }
        if self.frame_size / self.hop < 2 {
            return Err(Error::InvalidConfig(
                "frame overlap must be at least 50% for reconstruction".into(),
            ));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn num_frames(&self, num_samples: usize) -> usize {
        if num_samples <= self.frame_size {
            1
        } else {
            (num_samples - self.frame_size).div_ceil(self.hop) + 1
        }
    }
}

/// Complex time-frequency matrix, frames along axis 0 and onesided bins along axis 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TFGrid {
    pub data: Array2<Complex64>,
    pub config: StftConfig,
    /// Length of the time signal this grid was analysed from.
    pub num_samples: usize,
    pub sample_rate: u32,
}

impl TFGrid {
    pub fn zeros(frames: usize, config: StftConfig, num_samples: usize, sample_rate: u32) -> Self {
        Self {
            data: Array2::zeros((frames, config.num_bins())),
            config,
            num_samples,
            sample_rate,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, Complex64> {
        self.data.row(t)
    }

    /// Same dimensions and transform configuration.
    pub fn same_shape(&self, other: &TFGrid) -> bool {
        self.data.dim() == other.data.dim() && self.config == other.config
    }

    pub fn check_same_shape(&self, other: &TFGrid, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.data.dim(),
                other.data.dim()
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Copy of the first `frames` frames.
    pub fn truncated(&self, frames: usize) -> TFGrid {
        let frames = frames.min(self.num_frames());
        TFGrid {
            data: self.data.slice_axis(Axis(0), (0..frames).into()).to_owned(),
            config: self.config,
            num_samples: self.num_samples.min(
                (frames.saturating_sub(1)) * self.config.hop + self.config.frame_size,
            ),
            sample_rate: self.sample_rate,
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Reusable analysis/synthesis engine with cached FFT plans.
pub struct Stft {
    config: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            config,
            window: config.window.coefficients(config.frame_size),
            forward: planner.plan_fft_forward(config.frame_size),
            inverse: planner.plan_fft_inverse(config.frame_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Onesided spectrum of one windowed frame. `frame` shorter than the
    /// frame size is zero-padded.
    pub fn analyze_frame(&self, frame: &[f64], out: &mut [Complex64]) {
        let n = self.config.frame_size;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(frame.get(i).copied().unwrap_or(0.0) * self.window[i], 0.0))
            .collect();
        self.forward.process(&mut buf);
        out.copy_from_slice(&buf[..self.config.num_bins()]);
    }

    pub fn analyze(&self, x: &SampleBuffer) -> Result<TFGrid> {
        if x.is_empty() {
            return Err(Error::InvalidInput("cannot analyse an empty buffer".into()));
        }
        let cfg = self.config;
        let frames = cfg.num_frames(x.len());
        let mut grid = TFGrid::zeros(frames, cfg, x.len(), x.sample_rate);
        let mut spec = vec![Complex64::default(); cfg.num_bins()];
        for t in 0..frames {
            let start = t * cfg.hop;
            let end = (start + cfg.frame_size).min(x.len());
            self.analyze_frame(&x.samples[start..end], &mut spec);
            grid.data
                .row_mut(t)
                .iter_mut()
                .zip(&spec)
                .for_each(|(d, s)| *d = *s);
        }
        Ok(grid)
    }

    pub fn synthesize(&self, grid: &TFGrid) -> Result<SampleBuffer> {
        if grid.config != self.config {
            return Err(Error::ShapeMismatch("grid was produced with another config".into()));
        }
        if grid.num_bins() != self.config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "grid has {} bins, config expects {}",
                grid.num_bins(),
                self.config.num_bins()
            )));
        }
        if !grid.is_finite() {
            return Err(Error::InvalidInput("grid contains non-finite entries".into()));
        }
        let n = self.config.frame_size;
        let hop = self.config.hop;
        let frames = grid.num_frames();
        let span = (frames - 1) * hop + n;
        let mut out = vec![0.0; span];
        let mut envelope = vec![0.0; span];
        let mut buf = vec![Complex64::default(); n];
        let scale = 1.0 / n as f64;
        for t in 0..frames {
            let row = grid.frame(t);
            for (k, b) in buf.iter_mut().enumerate() {
                *b = if k <= n / 2 { row[k] } else { row[n - k].conj() };
            }
            // DC and Nyquist must be real for a real signal.
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            self.inverse.process(&mut buf);
            let start = t * hop;
            for i in 0..n {
                out[start + i] += buf[i].re * scale * self.window[i];
                envelope[start + i] += self.window[i] * self.window[i];
            }
        }
        let floor = 1e-10;
        for (o, e) in out.iter_mut().zip(&envelope) {
            *o = if *e > floor { *o / e } else { 0.0 };
        }
        out.resize(grid.num_samples.max(1), 0.0);
        SampleBuffer::new(out, grid.sample_rate)
    }
}

pub fn analyze(x: &SampleBuffer, cfg: StftConfig) -> Result<TFGrid> {
    Stft::new(cfg)?.analyze(x)
}

pub fn synthesize(grid: &TFGrid) -> Result<SampleBuffer> {
    Stft::new(grid.config)?.synthesize(grid)
}
