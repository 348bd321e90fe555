//! RIFF/WAVE file I/O, PCM16 or IEEE float32.
//!
//! Readers accept whatever sample rate the file declares; the 16 kHz
//! requirement is enforced where audio enters the toolkit (pool loading and
//! session ingestion), not here. PCM16 samples map to `[-1, 1)` with
//! `-32768 -> -1.0`; float32 files round-trip bit-identically.

use std::path::Path;

use hound::{SampleFormat, WavSpec};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::signal::Waveform;

const PCM16_SCALE: f64 = 32768.0;

/// Read a PCM16 or float32 WAV file into a [`Waveform`].
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Malformed(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::Unsupported(format!(
                "{}: only PCM16 and float32 WAV are supported, got {fmt:?}/{bits}-bit",
                path.display()
            )))
        }
    };
    if interleaved.len() % channels != 0 {
        return Err(Error::Malformed(format!(
            "{}: truncated sample data ({} samples, {channels} channels)",
            path.display(),
            interleaved.len()
        )));
    }
    let len = interleaved.len() / channels;
    let mut samples = Array2::zeros((channels, len));
    for (i, v) in interleaved.into_iter().enumerate() {
        samples[[i % channels, i / channels]] = v;
    }
    Waveform::new(samples, spec.sample_rate)
}

/// Write a waveform as float32 WAV (the toolkit's native on-disk format).
pub fn write_wav(path: impl AsRef<Path>, x: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: x.channels() as u16,
        sample_rate: x.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for i in 0..x.len() {
        for c in 0..x.channels() {
            writer.write_sample(x.samples()[[c, i]] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Write a waveform as PCM16, rounding and clamping to the sample range.
pub fn write_wav_pcm16(path: impl AsRef<Path>, x: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: x.channels() as u16,
        sample_rate: x.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for i in 0..x.len() {
        for c in 0..x.channels() {
            let v = (x.samples()[[c, i]] * PCM16_SCALE).round().clamp(-32768.0, 32767.0);
            writer.write_sample(v as i16)?;
        }
    }
    writer.finalize()?;
    Ok(())
}
