//! Frequency-weighted segmental SNR and segment tracks.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::SampleBuffer;

/// Constants of the FWSNR measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwsnrConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub num_bands: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Weight exponent applied to the reference band magnitude.
    pub gamma: f64,
    pub min_db: f64,
    pub max_db: f64,
}

impl Default for FwsnrConfig {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
            num_bands: 25,
            low_hz: 50.0,
            high_hz: 8000.0,
            gamma: 0.2,
            min_db: -10.0,
            max_db: 35.0,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel bands over the bins of an `fft_size`-point spectrum.
pub fn mel_bands(cfg: &FwsnrConfig, fft_size: usize, sample_rate: u32) -> Vec<Vec<(usize, f64)>> {
    let bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let hi = cfg.high_hz.min(sample_rate as f64 / 2.0);
    let (m_lo, m_hi) = (hz_to_mel(cfg.low_hz), hz_to_mel(hi));
    let edges: Vec<f64> = (0..cfg.num_bands + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (cfg.num_bands + 1) as f64))
        .collect();
    (0..cfg.num_bands)
        .map(|b| {
            let (lo, mid, top) = (edges[b], edges[b + 1], edges[b + 2]);
            let mut band: Vec<(usize, f64)> = (0..bins)
                .filter_map(|k| {
                    let f = k as f64 * bin_hz;
                    let w = if f > lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f < top {
                        (top - f) / (top - mid)
                    } else {
                        0.0
                    };
                    (w > 0.0).then_some((k, w))
                })
                .collect();
            if band.is_empty() {
                // Narrow low bands may fall between bins; take the nearest one.
                let k = ((mid / bin_hz).round() as usize).min(bins - 1);
                band.push((k, 1.0));
            }
            band
        })
        .collect()
}

struct FwsnrEngine {
    cfg: FwsnrConfig,
    frame_len: usize,
    hop: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    fft_size: usize,
    bands: Vec<Vec<(usize, f64)>>,
}

impl FwsnrEngine {
    fn new(cfg: FwsnrConfig, sample_rate: u32) -> Result<Self> {
        let fs = sample_rate as f64;
        let frame_len = (cfg.frame_ms * 1e-3 * fs).round() as usize;
        let hop = (cfg.hop_ms * 1e-3 * fs).round() as usize;
        if frame_len < 2 || hop == 0 || cfg.num_bands == 0 || !(cfg.min_db < cfg.max_db) {
            return Err(Error::InvalidConfig("degenerate FWSNR configuration".into()));
        }
        let fft_size = frame_len.next_power_of_two();
        let window = (0..frame_len)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / frame_len as f64).cos())
            .collect();
        Ok(Self {
            cfg,
            frame_len,
            hop,
            window,
            fft: FftPlanner::new().plan_fft_forward(fft_size),
            fft_size,
            bands: mel_bands(&cfg, fft_size, sample_rate),
        })
    }

    fn spectrum(&self, x: &[f64], start: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::default(); self.fft_size];
        for (i, w) in self.window.iter().enumerate() {
            buf[i].re = x.get(start + i).copied().unwrap_or(0.0) * w;
        }
        self.fft.process(&mut buf);
        buf.truncate(self.fft_size / 2 + 1);
        buf
    }

    /// Per-frame values over `[from, to)`; frames with a silent reference are skipped.
    fn frame_values(&self, r: &[f64], p: &[f64], from: usize, to: usize) -> Vec<f64> {
        let cfg = &self.cfg;
        let span = to - from;
        let frames = if span <= self.frame_len {
            1
        } else {
            (span - self.frame_len) / self.hop + 1
        };
        let mut out = Vec::with_capacity(frames);
        for t in 0..frames {
            let start = from + t * self.hop;
            let rs = self.spectrum(&r[..to], start);
            let ps = self.spectrum(&p[..to], start);
            let (mut num, mut den) = (0.0, 0.0);
            for band in &self.bands {
                let (mut sig, mut err) = (0.0, 0.0);
                for (k, w) in band {
                    sig += w * rs[*k].norm_sqr();
                    err += w * (rs[*k] - ps[*k]).norm_sqr();
                }
                if sig <= 0.0 {
                    continue;
                }
                let snr = if err > 0.0 {
                    (10.0 * (sig / err).log10()).clamp(cfg.min_db, cfg.max_db)
                } else {
                    cfg.max_db
                };
                let weight = sig.sqrt().powf(cfg.gamma);
                num += weight * snr;
                den += weight;
            }
            if den > 0.0 {
                out.push((num / den).clamp(cfg.min_db, cfg.max_db));
            }
        }
        out
    }
}

fn check_pair(reference: &SampleBuffer, processed: &SampleBuffer) -> Result<usize> {
    if reference.sample_rate != processed.sample_rate {
        return Err(Error::InvalidInput("reference and processed sample rates differ".into()));
    }
    Ok(reference.len().min(processed.len()))
}

pub fn fwsnr_with(cfg: FwsnrConfig, reference: &SampleBuffer, processed: &SampleBuffer) -> Result<f64> {
    let len = check_pair(reference, processed)?;
    let engine = FwsnrEngine::new(cfg, reference.sample_rate)?;
    let values = engine.frame_values(&reference.samples[..len], &processed.samples[..len], 0, len);
    mean_or_silent(&values)
}

fn mean_or_silent(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        Err(Error::InvalidInput("reference signal is silent".into()))
    } else {
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// FWSNR in dB with the default constants.
pub fn fwsnr(reference: &SampleBuffer, processed: &SampleBuffer) -> Result<f64> {
    fwsnr_with(FwsnrConfig::default(), reference, processed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPoint {
    pub time_s: f64,
    pub fwsnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentalTrack {
    pub per_segment: Vec<SegmentPoint>,
    pub smoothed: Vec<SegmentPoint>,
}

/// Centered moving average over `width` points, truncated at the edges.
pub fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    let half = width.max(1) / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// FWSNR per non-overlapping segment plus its moving-average smoothing.
pub fn segmental_track(
    reference: &SampleBuffer,
    processed: &SampleBuffer,
    segment_s: f64,
    smooth_s: f64,
) -> Result<SegmentalTrack> {
    segmental_track_with(FwsnrConfig::default(), reference, processed, segment_s, smooth_s)
}

pub fn segmental_track_with(
    cfg: FwsnrConfig,
    reference: &SampleBuffer,
    processed: &SampleBuffer,
    segment_s: f64,
    smooth_s: f64,
) -> Result<SegmentalTrack> {
    if !(segment_s > 0.0 && smooth_s > 0.0) {
        return Err(Error::InvalidConfig("segment and smoothing lengths must be positive".into()));
    }
    let len = check_pair(reference, processed)?;
    let fs = reference.sample_rate as f64;
    let seg_len = (segment_s * fs).round() as usize;
    let segments = len / seg_len.max(1);
    if segments == 0 {
        return Err(Error::InvalidInput(format!(
            "signal of {:.3} s is shorter than one {segment_s} s segment",
            len as f64 / fs
        )));
    }
    let engine = FwsnrEngine::new(cfg, reference.sample_rate)?;
    let values = (0..segments)
        .map(|i| {
            let (from, to) = (i * seg_len, (i + 1) * seg_len);
            let v = engine.frame_values(&reference.samples, &processed.samples, from, to);
            mean_or_silent(&v).map_err(|_| {
                Error::InvalidInput(format!("reference is silent in segment {i}"))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let width = (smooth_s / segment_s).round().max(1.0) as usize;
    let smooth = moving_average(&values, width);
    let point = |i: usize, v: f64| SegmentPoint {
        time_s: (i as f64 + 0.5) * segment_s,
        fwsnr_db: v,
    };
    Ok(SegmentalTrack {
        per_segment: values.iter().enumerate().map(|(i, v)| point(i, *v)).collect(),
        smoothed: smooth.iter().enumerate().map(|(i, v)| point(i, *v)).collect(),
    })
}

/// Improvement of a processed score over the observed score.
pub fn delta(metric_out: f64, metric_observed: f64) -> f64 {
    metric_out - metric_observed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fwsnr_db: f64,
    pub observed_fwsnr_db: f64,
    pub delta_fwsnr_db: f64,
    pub per_segment: Vec<SegmentPoint>,
    pub smoothed: Vec<SegmentPoint>,
    /// Smoothed per-segment improvement over the observation.
    pub delta_smoothed: Vec<SegmentPoint>,
    /// Slot for PESQ values computed by an external tool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_pesq: Option<f64>,
}

/// Scores `processed` and `observed` against the direct-path `reference`
/// with 1 s segments smoothed over 3 s.
pub fn evaluate(reference: &SampleBuffer, observed: &SampleBuffer, processed: &SampleBuffer) -> Result<MetricsReport> {
    evaluate_with(reference, observed, processed, 1.0, 3.0)
}

/// Like [`evaluate`]; the segment tracks are left empty when the signal is
/// shorter than one segment.
pub fn evaluate_with(
    reference: &SampleBuffer,
    observed: &SampleBuffer,
    processed: &SampleBuffer,
    segment_s: f64,
    smooth_s: f64,
) -> Result<MetricsReport> {
    let out = fwsnr(reference, processed)?;
    let obs = fwsnr(reference, observed)?;
    let (per_segment, smoothed, delta_smoothed) = if reference.duration_s() >= segment_s {
        let track = segmental_track(reference, processed, segment_s, smooth_s)?;
        let base = segmental_track(reference, observed, segment_s, smooth_s)?;
        let deltas: Vec<f64> = track
            .per_segment
            .iter()
            .zip(&base.per_segment)
            .map(|(a, b)| delta(a.fwsnr_db, b.fwsnr_db))
            .collect();
        let width = (smooth_s / segment_s).round().max(1.0) as usize;
        let smoothed_delta = moving_average(&deltas, width)
            .into_iter()
            .zip(&track.per_segment)
            .map(|(v, p)| SegmentPoint {
                time_s: p.time_s,
                fwsnr_db: v,
            })
            .collect();
        (track.per_segment, track.smoothed, smoothed_delta)
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    Ok(MetricsReport {
        fwsnr_db: out,
        observed_fwsnr_db: obs,
        delta_fwsnr_db: delta(out, obs),
        per_segment,
        smoothed,
        delta_smoothed,
        pesq: None,
        delta_pesq: None,
    })
}
