//! WAV ingestion and export (16-bit PCM and 32-bit float, mono or stereo).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::{StereoRecording, TimeSignal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WavFormat {
    Pcm16,
    #[default]
    Float32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WavAudio {
    Mono(TimeSignal),
    Stereo(StereoRecording),
}

impl WavAudio {
    /// Channel `index` as a mono signal.
    pub fn channel(&self, index: usize) -> Result<TimeSignal> {
        match (self, index) {
            (WavAudio::Mono(s), 0) => Ok(s.clone()),
            (WavAudio::Stereo(r), 0) => Ok(r.left().clone()),
            (WavAudio::Stereo(r), 1) => Ok(r.right().clone()),
            _ => Err(Error::InvalidParameter(format!("wav file has no channel {index}"))),
        }
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavAudio> {
    let mut reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::InvalidSignal(format!(
                "unsupported wav sample format {format:?} with {bits} bits"
            )))
        }
    };
    let rate = f64::from(spec.sample_rate);
    match spec.channels {
        1 => Ok(WavAudio::Mono(TimeSignal::new(interleaved, rate)?)),
        2 => {
            let left = interleaved.iter().step_by(2).copied().collect();
            let right = interleaved.iter().skip(1).step_by(2).copied().collect();
            Ok(WavAudio::Stereo(StereoRecording::new(
                TimeSignal::new(left, rate)?,
                TimeSignal::new(right, rate)?,
            )?))
        }
        n => Err(Error::InvalidSignal(format!("unsupported channel count {n}"))),
    }
}

pub fn write_mono(path: impl AsRef<Path>, sig: &TimeSignal, format: WavFormat) -> Result<()> {
    write_channels(path.as_ref(), &[sig], format)
}

pub fn write_stereo(path: impl AsRef<Path>, rec: &StereoRecording, format: WavFormat) -> Result<()> {
    write_channels(path.as_ref(), &[rec.left(), rec.right()], format)
}

fn write_channels(path: &Path, channels: &[&TimeSignal], format: WavFormat) -> Result<()> {
    let rate = channels[0].rate();
    if rate.fract() != 0.0 || rate > f64::from(u32::MAX) {
        return Err(Error::InvalidSignal(format!("sample rate {rate} is not a wav rate")));
    }
    let (bits, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate: rate as u32,
        bits_per_sample: bits,
        sample_format,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for n in 0..channels[0].len() {
        for ch in channels {
            let v = ch.samples()[n];
            match format {
                WavFormat::Pcm16 => {
                    writer.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?
                }
                WavFormat::Float32 => writer.write_sample(v as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}
