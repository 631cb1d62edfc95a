//! Deterministic speech-like test signals.
//!
//! Voiced syllables are glottal pulse trains with drifting pitch shaped by
//! three formant resonators; unvoiced syllables are high-passed noise
//! bursts. Syllables are separated by short pauses, which gives the
//! onset/offset structure that makes reverberation tails audible.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::stft::SampleBuffer;

const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
    [660.0, 1720.0, 2410.0],
];

struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    z1: f64,
    z2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, fs: f64) -> Self {
        let r = (-PI * bandwidth / fs).exp();
        let theta = 2.0 * PI * freq / fs;
        Self {
            a1: 2.0 * r * theta.cos(),
            a2: -r * r,
            gain: 1.0 - r,
            z1: 0.0,
            z2: 0.0,
        }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.gain * x + self.a1 * self.z1 + self.a2 * self.z2;
        self.z2 = self.z1;
        self.z1 = y;
        y
    }
}

/// Generates `duration_s` seconds of speech-like signal with peak 0.5.
pub fn synthetic_speech(duration_s: f64, sample_rate: u32, seed: u64) -> SampleBuffer {
    let fs = sample_rate as f64;
    let total = (duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    let base_pitch = rng.random_range(95.0..210.0);

    while out.len() < total {
        let pause = (rng.random_range(0.04..0.25) * fs) as usize;
        out.extend(std::iter::repeat_n(0.0, pause));

        let len = (rng.random_range(0.12..0.35) * fs) as usize;
        let level = rng.random_range(0.4..1.0);
        if rng.random_bool(0.75) {
            let formants = VOWELS[rng.random_range(0..VOWELS.len())];
            let mut res: Vec<Resonator> = formants
                .iter()
                .zip([80.0, 110.0, 160.0])
                .map(|(f, bw)| Resonator::new(*f, bw, fs))
                .collect();
            let pitch_start = base_pitch * rng.random_range(0.85..1.15);
            let pitch_end = pitch_start * rng.random_range(0.8..1.2);
            let mut phase = 0.0f64;
            for i in 0..len {
                let frac = i as f64 / len as f64;
                let f0 = pitch_start + (pitch_end - pitch_start) * frac;
                phase += f0 / fs;
                // Sawtooth-like glottal flow derivative plus aspiration.
                let glottal = if phase.fract() < f0 / fs { 1.0 } else { 0.0 }
                    + 0.02 * rng.sample::<f64, _>(StandardNormal);
                let env = (PI * frac).sin().powf(0.6);
                let y: f64 = res.iter_mut().map(|r| r.tick(glottal)).sum();
                out.push(level * env * y);
            }
        } else {
            let mut prev = 0.0;
            for i in 0..len / 2 {
                let n: f64 = rng.sample(StandardNormal);
                let hp = n - prev;
                prev = n;
                let env = (PI * i as f64 / (len / 2) as f64).sin();
                out.push(0.05 * level * env * hp);
            }
        }
    }
    out.truncate(total);
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    SampleBuffer::new(out, sample_rate).expect("synthesized samples are finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let a = synthetic_speech(2.0, 16000, 4);
        let b = synthetic_speech(2.0, 16000, 4);
        assert_eq!(a, b);
        assert_eq!(a.len(), 32000);
        let peak = a.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5).abs() < 1e-12);
        assert_ne!(a, synthetic_speech(2.0, 16000, 5));
    }

    #[test]
    fn contains_pauses() {
        let s = synthetic_speech(4.0, 16000, 1);
        let silent = s.samples.iter().filter(|v| v.abs() < 1e-9).count();
        assert!(silent > 1600, "only {silent} silent samples");
    }
}
