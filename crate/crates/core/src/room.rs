//! Shoebox room simulation with the image-source method.
//!
//! Produces single-microphone impulse responses, splits them into a direct
//! path and a reverberant tail, and renders (observed, ground truth) pairs
//! from clean speech with additive white Gaussian noise.

use std::f64::consts::{LN_10, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::SampleBuffer;

pub const SPEED_OF_SOUND: f64 = 343.0;
/// Direct-path window after the geometric direct arrival.
pub const DIRECT_WINDOW_MS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomScene {
    pub room_dims: [f64; 3],
    pub source_pos: [f64; 3],
    pub mic_pos: [f64; 3],
    pub t60: f64,
    pub sample_rate: u32,
    #[serde(default = "default_sound_speed")]
    pub sound_speed: f64,
}

fn default_sound_speed() -> f64 {
    SPEED_OF_SOUND
}

/// Sampling ranges for random scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRanges {
    pub dims_min: [f64; 3],
    pub dims_max: [f64; 3],
    pub mic_height: (f64, f64),
    pub distance: (f64, f64),
    pub t60: (f64, f64),
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            dims_min: [5.0, 5.0, 3.0],
            dims_max: [10.0, 10.0, 4.0],
            mic_height: (1.0, 2.0),
            distance: (0.5, 2.0),
            t60: (0.3, 0.8),
        }
    }
}

impl RoomScene {
    /// The 7 x 7 x 3 m evaluation room with the microphone at the centre
    /// (1.5 m high) and the source about 1 m away.
    pub fn reference(t60: f64) -> Self {
        Self {
            room_dims: [7.0, 7.0, 3.0],
            source_pos: [4.5, 3.5, 1.6],
            mic_pos: [3.5, 3.5, 1.5],
            t60,
            sample_rate: 16_000,
            sound_speed: SPEED_OF_SOUND,
        }
    }

    /// Draws a random scene: microphone centred in the floor plan, source
    /// at a random direction and distance. `t60` overrides the sampled
    /// reverberation time when given.
    pub fn sample<R: Rng + ?Sized>(ranges: &SceneRanges, t60: Option<f64>, rng: &mut R) -> Self {
        let mut dims = [0.0; 3];
        for (i, d) in dims.iter_mut().enumerate() {
            *d = rng.random_range(ranges.dims_min[i]..=ranges.dims_max[i]);
        }
        let mic = [
            dims[0] / 2.0,
            dims[1] / 2.0,
            rng.random_range(ranges.mic_height.0..=ranges.mic_height.1),
        ];
        let t60 = t60.unwrap_or_else(|| rng.random_range(ranges.t60.0..=ranges.t60.1));
        let margin = 0.3;
        let source = loop {
            let dist = rng.random_range(ranges.distance.0..=ranges.distance.1);
            let azimuth = rng.random_range(0.0..2.0 * PI);
            let elevation: f64 = rng.random_range(-0.4..0.4);
            let p = [
                mic[0] + dist * elevation.cos() * azimuth.cos(),
                mic[1] + dist * elevation.cos() * azimuth.sin(),
                mic[2] + dist * elevation.sin(),
            ];
            if p.iter().zip(&dims).all(|(x, l)| *x > margin && *x < l - margin) {
                break p;
            }
        };
        Self {
            room_dims: dims,
            source_pos: source,
            mic_pos: mic,
            t60,
            sample_rate: 16_000,
            sound_speed: SPEED_OF_SOUND,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.room_dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::InvalidConfig("room dimensions must be positive".into()));
        }
        for (name, p) in [("source", &self.source_pos), ("mic", &self.mic_pos)] {
            if p.iter()
                .zip(&self.room_dims)
                .any(|(x, l)| !(x.is_finite() && *x > 0.0 && x < l))
            {
                return Err(Error::InvalidConfig(format!(
                    "{name} position {p:?} is not strictly inside the room"
                )));
            }
        }
        if !(self.t60.is_finite() && self.t60 > 0.0) {
            return Err(Error::InvalidConfig(format!("t60 must be positive, got {}", self.t60)));
        }
        if self.sample_rate == 0 || !(self.sound_speed > 0.0) {
            return Err(Error::InvalidConfig("sample rate and sound speed must be positive".into()));
        }
        if self.distance() == 0.0 {
            return Err(Error::InvalidConfig("source and microphone coincide".into()));
        }
        Ok(())
    }

    pub fn distance(&self) -> f64 {
        dist(&self.source_pos, &self.mic_pos)
    }

    pub fn volume(&self) -> f64 {
        self.room_dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.room_dims;
        2.0 * (x * y + x * z + y * z)
    }

    /// Uniform wall absorption from Sabine's formula.
    pub fn sabine_absorption(&self) -> f64 {
        24.0 * LN_10 * self.volume() / (self.sound_speed * self.surface() * self.t60)
    }

    /// Reflection coefficient from Eyring's formula. In non-cubic rooms the
    /// image-source decay is slower than this predicts; [`image_method`]
    /// uses it only as the starting point of a calibration.
    pub fn reflection_coefficient(&self) -> Result<f64> {
        let sabine = self.sabine_absorption();
        if sabine > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "t60 {} s is unachievable in this room (Sabine absorption {sabine:.3} > 1)",
                self.t60
            )));
        }
        // Each reflection scales energy by (1 - a); the mean reflection rate
        // c S / 4V gives the Eyring decay, so invert that instead of Sabine.
        Ok((-0.5 * sabine).exp())
    }

    pub fn direct_delay_samples(&self) -> usize {
        (self.sample_rate as f64 * self.distance() / self.sound_speed).round() as usize
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageMethodOptions {
    /// Maximum total reflection order; unlimited when `None`.
    pub max_order: Option<u32>,
    /// RIR length in taps; defaults to ceil(t60 * fs).
    pub length: Option<usize>,
    /// Forces the wall reflection coefficient (0 gives free field).
    pub reflection: Option<f64>,
}

/// Room impulse response with the tap index that ends the direct path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub direct_tap: usize,
    pub direct_cutoff: usize,
    pub sample_rate: u32,
}

impl Rir {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Direct and reverberant parts split at `direct_cutoff`.
    pub fn split_at_cutoff(&self) -> (Rir, Rir) {
        let cut = self.direct_cutoff.min(self.len());
        let mut direct = self.clone();
        let mut reverb = self.clone();
        direct.taps[cut..].iter_mut().for_each(|t| *t = 0.0);
        reverb.taps[..cut].iter_mut().for_each(|t| *t = 0.0);
        (direct, reverb)
    }
}

fn ms_to_taps(ms: f64, fs: u32) -> usize {
    (ms * 1e-3 * fs as f64).round() as usize
}

pub fn image_method(scene: &RoomScene, opts: &ImageMethodOptions) -> Result<Rir> {
    scene.validate()?;
    let fs = scene.sample_rate as f64;
    let direct_tap = scene.direct_delay_samples();
    let direct_cutoff = direct_tap + ms_to_taps(DIRECT_WINDOW_MS, scene.sample_rate);
    let len = opts
        .length
        .unwrap_or_else(|| (scene.t60 * fs).ceil() as usize)
        .max(direct_cutoff + 1);
    let taps = match opts.reflection {
        Some(b) if !(0.0..=1.0).contains(&b) => {
            return Err(Error::InvalidConfig(format!("reflection coefficient {b} outside [0, 1]")))
        }
        Some(b) => image_taps(scene, b, len, opts.max_order),
        None => calibrated_taps(scene, len, opts.max_order)?.1,
    };
    Ok(Rir {
        taps,
        direct_tap,
        direct_cutoff,
        sample_rate: scene.sample_rate,
    })
}

/// Reflection coefficient for which the Schroeder decay of the
/// image-source RIR matches the scene's T60.
pub fn calibrated_reflection(scene: &RoomScene) -> Result<f64> {
    scene.validate()?;
    let len = ((scene.t60 * scene.sample_rate as f64).ceil() as usize)
        .max(scene.direct_delay_samples() + ms_to_taps(DIRECT_WINDOW_MS, scene.sample_rate) + 1);
    Ok(calibrated_taps(scene, len, None)?.0)
}

const CALIBRATION_ROUNDS: usize = 8;
const CALIBRATION_TOL: f64 = 0.005;

fn calibrated_taps(scene: &RoomScene, len: usize, max_order: Option<u32>) -> Result<(f64, Vec<f64>)> {
    // Decay rate is close to proportional to -ln(beta), so rescale that
    // exponent by measured / target until the two agree.
    let mut expo = -scene.reflection_coefficient()?.ln();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for _ in 0..CALIBRATION_ROUNDS {
        let beta = (-expo).exp();
        let taps = image_taps(scene, beta, len, max_order);
        let Some(t60) = schroeder_t60(&taps, scene.sample_rate) else {
            break;
        };
        let ratio = t60 / scene.t60;
        let miss = (ratio - 1.0).abs();
        if best.as_ref().is_none_or(|b| miss < b.0) {
            best = Some((miss, beta, taps));
        }
        if miss < CALIBRATION_TOL {
            break;
        }
        expo *= ratio;
    }
    match best {
        Some((_, beta, taps)) => Ok((beta, taps)),
        None => {
            let beta = scene.reflection_coefficient()?;
            Ok((beta, image_taps(scene, beta, len, max_order)))
        }
    }
}

fn image_taps(scene: &RoomScene, beta: f64, len: usize, max_order: Option<u32>) -> Vec<f64> {
    let fs = scene.sample_rate as f64;
    let c = scene.sound_speed;
    let mut taps = vec![0.0; len];
    let max_dist = len as f64 * c / fs;
    let reach = |l: f64| (max_dist / (2.0 * l)).ceil() as i64 + 1;
    let n = [
        reach(scene.room_dims[0]),
        reach(scene.room_dims[1]),
        reach(scene.room_dims[2]),
    ];
    let (s, m, l) = (&scene.source_pos, &scene.mic_pos, &scene.room_dims);
    for mx in -n[0]..=n[0] {
        for qx in 0..2i64 {
            let dx = (1 - 2 * qx) as f64 * s[0] - m[0] + 2.0 * mx as f64 * l[0];
            let ox = (mx - qx).unsigned_abs() + mx.unsigned_abs();
            for my in -n[1]..=n[1] {
                for qy in 0..2i64 {
                    let dy = (1 - 2 * qy) as f64 * s[1] - m[1] + 2.0 * my as f64 * l[1];
                    let oy = (my - qy).unsigned_abs() + my.unsigned_abs();
                    let dxy = dx * dx + dy * dy;
                    if dxy.sqrt() > max_dist {
                        continue;
                    }
                    for mz in -n[2]..=n[2] {
                        for qz in 0..2i64 {
                            let dz = (1 - 2 * qz) as f64 * s[2] - m[2] + 2.0 * mz as f64 * l[2];
                            let oz = (mz - qz).unsigned_abs() + mz.unsigned_abs();
                            let order = ox + oy + oz;
                            if max_order.is_some_and(|max| order > max as u64) {
                                continue;
                            }
                            let d = (dxy + dz * dz).sqrt();
                            let tap = (fs * d / c).round() as usize;
                            if tap >= len {
                                continue;
                            }
                            let gain = if order == 0 { 1.0 } else { beta.powi(order as i32) };
                            if gain != 0.0 {
                                taps[tap] += gain / (4.0 * PI * d);
                            }
                        }
                    }
                }
            }
        }
    }
    taps
}

/// Splits at `direct_tap + cutoff_ms`. Taps before the cutoff form the
/// direct part; the two parts sum to the input exactly.
pub fn split_direct(rir: &Rir, cutoff_ms: f64) -> Result<(Rir, Rir)> {
    if !(cutoff_ms.is_finite() && cutoff_ms >= 0.0) {
        return Err(Error::InvalidConfig(format!("invalid cutoff {cutoff_ms} ms")));
    }
    let cutoff = rir.direct_tap + ms_to_taps(cutoff_ms, rir.sample_rate);
    if cutoff >= rir.len() {
        return Err(Error::InvalidConfig(format!(
            "cutoff tap {cutoff} lies beyond the RIR ({} taps)",
            rir.len()
        )));
    }
    let mut at = rir.clone();
    at.direct_cutoff = cutoff;
    Ok(at.split_at_cutoff())
}

/// Reverberation time from the Schroeder backward integral, fitted
/// between -5 and -25 dB and extrapolated to -60 dB.
pub fn schroeder_t60(taps: &[f64], sample_rate: u32) -> Option<f64> {
    let mut edc = vec![0.0; taps.len()];
    let mut acc = 0.0;
    for (i, t) in taps.iter().enumerate().rev() {
        acc += t * t;
        edc[i] = acc;
    }
    let total = *edc.first()?;
    if total <= 0.0 {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|e| 10.0 * (e / total).log10()).collect();
    let start = db.iter().position(|d| *d <= -5.0)?;
    let end = db.iter().position(|d| *d <= -25.0)?;
    if end <= start + 1 {
        return None;
    }
    let n = (end - start) as f64;
    let fs = sample_rate as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, d) in db.iter().enumerate().take(end).skip(start) {
        let x = i as f64 / fs;
        sx += x;
        sy += d;
        sxx += x * x;
        sxy += x * d;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope < 0.0).then(|| -60.0 / slope)
}

/// Linear convolution truncated to `out_len` samples, computed by FFT.
pub fn convolve(x: &[f64], h: &[f64], out_len: usize) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; out_len];
    }
    let full = x.len() + h.len() - 1;
    let n = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(x.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    let mut b: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(h.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(p, q)| *p *= q);
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    (0..out_len)
        .map(|i| if i < full { a[i].re * scale } else { 0.0 })
        .collect()
}

/// Signals of one rendered scene, all the length of the clean input.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub observed: SampleBuffer,
    pub direct_truth: SampleBuffer,
    pub reverb_truth: SampleBuffer,
    pub noise: SampleBuffer,
}

impl RenderedScene {
    pub fn reverberant(&self) -> Vec<f64> {
        self.direct_truth
            .samples
            .iter()
            .zip(&self.reverb_truth.samples)
            .map(|(d, r)| d + r)
            .collect()
    }
}

/// Convolves `clean` with `rir` and adds white Gaussian noise at `snr_db`
/// relative to the reverberant speech. `f64::INFINITY` disables noise.
pub fn render_scene(clean: &SampleBuffer, rir: &Rir, snr_db: f64, seed: u64) -> Result<RenderedScene> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidConfig(format!("invalid SNR {snr_db} dB")));
    }
    if clean.energy() == 0.0 {
        return Err(Error::InvalidInput("clean signal is silent; SNR is undefined".into()));
    }
    if clean.sample_rate != rir.sample_rate {
        return Err(Error::InvalidInput(format!(
            "sample rates differ: clean {} Hz, RIR {} Hz",
            clean.sample_rate, rir.sample_rate
        )));
    }
    let (direct, reverb) = rir.split_at_cutoff();
    let len = clean.len();
    let direct_sig = convolve(&clean.samples, &direct.taps, len);
    let reverb_sig = convolve(&clean.samples, &reverb.taps, len);
    let reverberant: Vec<f64> = direct_sig.iter().zip(&reverb_sig).map(|(a, b)| a + b).collect();

    let noise = if snr_db == f64::INFINITY {
        vec![0.0; len]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let e_sig: f64 = reverberant.iter().map(|s| s * s).sum();
        let e_raw: f64 = raw.iter().map(|s| s * s).sum();
        let gain = (e_sig / (e_raw * 10f64.powf(snr_db / 10.0))).sqrt();
        raw.into_iter().map(|v| v * gain).collect()
    };
    let observed: Vec<f64> = reverberant.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let fs = clean.sample_rate;
    Ok(RenderedScene {
        observed: SampleBuffer::new(observed, fs)?,
        direct_truth: SampleBuffer::new(direct_sig, fs)?,
        reverb_truth: SampleBuffer::new(reverb_sig, fs)?,
        noise: SampleBuffer::new(noise, fs)?,
    })
}
