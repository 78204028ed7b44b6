//! Progressive denoise-then-restore speech processing toolkit.
//!
//! The crate covers four areas that together form a desk-scale test bench
//! for restorative speech enhancement:
//!
//! * [`simulate`] — image-method room impulse responses, SNR-controlled
//!   mixing, and deterministic noisy-reverberant dataset synthesis.
//! * [`dsp`] — STFT analysis/synthesis, complex ratio masks, and magnitude
//!   feature fusion.
//! * [`quantize`] — eight composable quantization schemes (scalar grids,
//!   residual codebooks, finite-scalar and sign stages) with k-means++
//!   initialization, EMA codebook training, and bit-exact serialization.
//! * [`objectives`] — SI-SDR, weighted spectral losses, multi-resolution
//!   STFT loss, commitment/hinge/feature-match primitives, and the weighted
//!   codec composite.
//!
//! [`pipeline`] wires these into the two-stage flow (denoise, then encode /
//! quantize / decode) and produces evaluation reports; [`commands`] exposes
//! the same runs as reproducible CLI entry points.
//!
//! Every operation is deterministic given explicit seeds. Start with the
//! runnable programs under `examples/` — there is one per major capability.

pub mod blob;
pub mod commands;
pub mod config;
pub mod dsp;
pub mod error;
pub mod objectives;
pub mod pipeline;
pub mod quantize;
pub mod simulate;
pub mod wav;

pub use error::{Error, Result};

/// Toolkit version embedded in report headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Mono sample sequence with its sample rate.
///
/// Samples are dimensionless amplitudes, nominally in [-1, 1]; processing
/// never clips, only file export to 16-bit PCM does.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    /// Build a waveform, enforcing the type invariants: positive sample
    /// rate, at least one sample, all samples finite.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Config("waveform must hold at least one sample".into()));
        }
        if let Some(idx) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("waveform sample at index {idx}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// All-zero waveform of the given length.
    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len.max(1)], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Mean squared sample value.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}
