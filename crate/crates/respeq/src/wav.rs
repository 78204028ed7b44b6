//! Mono WAV input and output.
//!
//! Accepted encodings: 16-bit integer PCM and IEEE 754 binary32, both
//! little-endian. Anything multichannel is rejected rather than downmixed.

use std::path::Path;

use crate::error::{Error, Result};
use crate::Waveform;

/// On-disk sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    /// IEEE 754 binary32; keeps simulation outputs exact enough to re-read.
    #[default]
    Float32,
    /// 16-bit integer PCM, samples clipped to [-1, 1] then scaled.
    Pcm16,
}

/// Read a mono WAV file into a [`Waveform`].
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::BadFormat {
            path: path.to_path_buf(),
            detail: format!("expected mono input, file has {} channels", spec.channels),
        });
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::BadFormat {
                path: path.to_path_buf(),
                detail: format!("unsupported encoding {fmt:?}/{bits} bits"),
            })
        }
    };
    Waveform::new(samples, spec.sample_rate)
}

/// Write a mono WAV file (atomically: temp file, then rename).
pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp-write");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: match encoding {
            WavEncoding::Float32 => 32,
            WavEncoding::Pcm16 => 16,
        },
        sample_format: match encoding {
            WavEncoding::Float32 => hound::SampleFormat::Float,
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
        },
    };
    let mut writer = hound::WavWriter::create(&tmp, spec)?;
    match encoding {
        WavEncoding::Float32 => {
            for &s in &wave.samples {
                writer.write_sample(s as f32)?;
            }
        }
        WavEncoding::Pcm16 => {
            for &s in &wave.samples {
                let clipped = s.clamp(-1.0, 1.0);
                writer.write_sample((clipped * 32767.0).round() as i16)?;
            }
        }
    }
    writer.finalize()?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_exact_at_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let wave = Waveform::new(vec![0.0, 0.25, -0.5, 1.0f64], 16000).unwrap();
        write_wav(&path, &wave, WavEncoding::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 16000);
        assert_eq!(back.samples, wave.samples);
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for _ in 0..8 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path), Err(Error::BadFormat { .. })));
    }

    #[test]
    fn pcm16_round_trip_within_quantization_step() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pcm.wav");
        let wave = Waveform::new(vec![0.1, -0.2, 0.3], 8000).unwrap();
        write_wav(&path, &wave, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in back.samples.iter().zip(&wave.samples) {
            assert!((a - b).abs() < 1.0 / 32768.0);
        }
    }
}
