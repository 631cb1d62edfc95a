//! 16-bit PCM mono WAV input/output.

use std::path::Path;

use crate::error::{Error, Result};
use crate::stft::{SampleBuffer, DEFAULT_SAMPLE_RATE};

const FULL_SCALE: f64 = 32768.0;

pub fn read_wav(path: impl AsRef<Path>) -> Result<SampleBuffer> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedWav(format!(
            "{}: expected mono, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedWav(format!(
            "{}: expected 16-bit integer PCM, found {:?} {}-bit",
            path.display(),
            spec.sample_format,
            spec.bits_per_sample
        )));
    }
    if spec.sample_rate != DEFAULT_SAMPLE_RATE {
        return Err(Error::UnsupportedWav(format!(
            "{}: expected {} Hz, found {} Hz",
            path.display(),
            DEFAULT_SAMPLE_RATE,
            spec.sample_rate
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / FULL_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    SampleBuffer::new(samples, spec.sample_rate)
}

/// Writes `buf` as 16-bit PCM. Samples outside [-1, 1) saturate.
pub fn write_wav(path: impl AsRef<Path>, buf: &SampleBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for s in &buf.samples {
        writer.write_sample(quantize(*s))?;
    }
    writer.finalize()?;
    Ok(())
}

fn quantize(s: f64) -> i16 {
    (s * FULL_SCALE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Gain that keeps the buffer inside full scale: 1.0 unless the peak would clip.
pub fn clip_guard_gain(buf: &SampleBuffer) -> f64 {
    let peak = buf.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let limit = i16::MAX as f64 / FULL_SCALE;
    if peak > limit {
        limit / peak
    } else {
        1.0
    }
}
