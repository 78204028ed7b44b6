//! Noisy-reverberant data synthesis.
//!
//! A dry signal `s(t)` is convolved with a simulated room impulse response
//! `h(t)` and mixed with gain-controlled noise `n(t)`, giving the mixture
//! `y(t) = s(t) * h(t) + n(t)`. Rooms come from the image method with
//! uniform wall absorption derived from the target RT60 by Sabine's
//! formula; everything is deterministic given explicit seeds.

mod dataset;
mod image;
mod mix;
mod source;

pub use dataset::{
    load_record_waves, synthesize_dataset, DatasetConfig, Manifest, ManifestRecord, NoisePool,
    Rt60Policy, SnrPolicy, SourcePool, MANIFEST_HEADER,
};
pub use image::{estimate_rt60, generate_rir};
pub use mix::{apply_rir, mix_at_snr, SnrMix};
pub use source::{pseudo_speech, white_noise};
pub(crate) use dataset::write_atomic as write_atomic_bytes;
pub(crate) use source::normal;

use crate::error::{Error, Result};
use crate::Waveform;

/// Shoebox room geometry plus the acoustic targets the image method needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    /// Room extent in meters along x, y, z.
    pub dimensions: [f64; 3],
    pub source_position: [f64; 3],
    pub mic_position: [f64; 3],
    /// Target reverberation time in seconds; 0 disables reflections.
    pub rt60_target: f64,
    /// Largest total reflection count an image source may carry.
    pub max_reflection_order: u32,
    /// Speed of sound in m/s.
    pub speed_of_sound: f64,
}

impl RoomSpec {
    pub const DEFAULT_SPEED_OF_SOUND: f64 = 340.0;

    pub fn new(
        dimensions: [f64; 3],
        source_position: [f64; 3],
        mic_position: [f64; 3],
        rt60_target: f64,
        max_reflection_order: u32,
    ) -> Result<Self> {
        let spec = Self {
            dimensions,
            source_position,
            mic_position,
            rt60_target,
            max_reflection_order,
            speed_of_sound: Self::DEFAULT_SPEED_OF_SOUND,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !d.is_finite() || d <= 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "room dimensions must be positive, got {:?}",
                self.dimensions
            )));
        }
        for (name, p) in [
            ("source", &self.source_position),
            ("mic", &self.mic_position),
        ] {
            for axis in 0..3 {
                if !(p[axis] > 0.0 && p[axis] < self.dimensions[axis]) {
                    return Err(Error::InvalidGeometry(format!(
                        "{name} position {:?} is not strictly inside room {:?}",
                        p, self.dimensions
                    )));
                }
            }
        }
        if self.source_position == self.mic_position {
            return Err(Error::InvalidGeometry(
                "source and mic positions coincide".into(),
            ));
        }
        if !self.rt60_target.is_finite() || self.rt60_target < 0.0 {
            return Err(Error::Config(format!(
                "rt60_target must be a finite value >= 0, got {}",
                self.rt60_target
            )));
        }
        if !self.speed_of_sound.is_finite() || self.speed_of_sound <= 0.0 {
            return Err(Error::Config("speed_of_sound must be positive".into()));
        }
        Ok(())
    }

    /// Source-to-microphone distance in meters.
    pub fn source_mic_distance(&self) -> f64 {
        self.source_position
            .iter()
            .zip(&self.mic_position)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.dimensions.iter().product()
    }

    pub fn surface_area(&self) -> f64 {
        let [lx, ly, lz] = self.dimensions;
        2.0 * (lx * ly + lx * lz + ly * lz)
    }
}

/// Finite impulse response produced by [`generate_rir`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
    pub room: RoomSpec,
    /// Tap index of the direct path, `round(distance / c * sample_rate)`.
    pub direct_path_index: usize,
}

impl Rir {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// A single unit tap at index zero; convolving with it is the identity.
    pub fn identity(sample_rate: u32) -> Self {
        Rir {
            taps: vec![1.0],
            sample_rate,
            room: RoomSpec {
                dimensions: [1.0, 1.0, 1.0],
                source_position: [0.5, 0.5, 0.5],
                mic_position: [0.5, 0.5, 0.4],
                rt60_target: 0.0,
                max_reflection_order: 0,
                speed_of_sound: RoomSpec::DEFAULT_SPEED_OF_SOUND,
            },
            direct_path_index: 0,
        }
    }
}

/// One synthesized utterance: the four aligned waveforms plus provenance.
#[derive(Debug, Clone)]
pub struct MixtureRecord {
    /// Dry source `s`.
    pub dry: Waveform,
    /// Reverberant speech `x = s * h`.
    pub reverberant: Waveform,
    /// Noise after SNR gain, aligned with the mixture.
    pub noise: Waveform,
    /// `y = x + n`.
    pub mixture: Waveform,
    pub snr_db: f64,
    pub rir: Rir,
    pub seed: u64,
}

impl MixtureRecord {
    /// Checks the defining identity `mixture = reverberant + noise` and the
    /// length/rate agreement of all four waveforms.
    pub fn validate(&self) -> Result<()> {
        let len = self.mixture.len();
        let rate = self.mixture.sample_rate;
        for (name, w) in [
            ("dry", &self.dry),
            ("reverberant", &self.reverberant),
            ("noise", &self.noise),
        ] {
            if w.len() != len {
                return Err(Error::ShapeMismatch(format!(
                    "{name} has {} samples, mixture has {len}",
                    w.len()
                )));
            }
            if w.sample_rate != rate {
                return Err(Error::SampleRateMismatch {
                    left: w.sample_rate,
                    right: rate,
                });
            }
        }
        let scale = self
            .mixture
            .samples
            .iter()
            .fold(0.0f64, |m, s| m.max(s.abs()))
            .max(1e-300);
        for i in 0..len {
            let expect = self.reverberant.samples[i] + self.noise.samples[i];
            if (self.mixture.samples[i] - expect).abs() > 1e-12 * scale {
                return Err(Error::NonFinite(format!(
                    "mixture is not reverberant + noise at sample {i}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_geometry_validation() {
        assert!(RoomSpec::new([6.0, 5.0, 3.0], [1.0, 1.0, 1.5], [4.4, 1.0, 1.5], 0.3, 10).is_ok());
        // source on a wall
        assert!(RoomSpec::new([6.0, 5.0, 3.0], [0.0, 1.0, 1.5], [4.4, 1.0, 1.5], 0.3, 10).is_err());
        // mic outside
        assert!(RoomSpec::new([6.0, 5.0, 3.0], [1.0, 1.0, 1.5], [7.0, 1.0, 1.5], 0.3, 10).is_err());
        // coincident
        assert!(RoomSpec::new([6.0, 5.0, 3.0], [1.0, 1.0, 1.5], [1.0, 1.0, 1.5], 0.3, 10).is_err());
        // negative rt60
        assert!(RoomSpec::new([6.0, 5.0, 3.0], [1.0, 1.0, 1.5], [4.4, 1.0, 1.5], -0.1, 10).is_err());
    }

    #[test]
    fn distance_matches_hand_value() {
        let room =
            RoomSpec::new([6.0, 5.0, 3.0], [1.0, 1.0, 1.5], [4.4, 1.0, 1.5], 0.0, 0).unwrap();
        assert!((room.source_mic_distance() - 3.4).abs() < 1e-12);
        assert!((room.volume() - 90.0).abs() < 1e-12);
        assert!((room.surface_area() - 126.0).abs() < 1e-12);
    }
}
