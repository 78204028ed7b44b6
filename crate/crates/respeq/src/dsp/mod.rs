//! Time-frequency analysis: STFT/iSTFT, complex ratio masks, feature fusion.

mod fusion;
mod mask;
mod stft;

pub use fusion::{fuse_features, load_affine_params, AffineParams, FusionConfig};
pub use mask::{apply_mask, compute_crm, ComplexMask, CRM_EPS_MAG_SQ};
pub use stft::{istft, stft};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Analysis/synthesis window shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// Periodic Hann, `0.5 * (1 - cos(2*pi*n/N))`.
    Hann,
    /// Square root of periodic Hann; analysis * synthesis gives Hann.
    SqrtHann,
}

impl WindowKind {
    pub fn samples(self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let hann =
                    0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos());
                match self {
                    WindowKind::Hann => hann,
                    WindowKind::SqrtHann => hann.sqrt(),
                }
            })
            .collect()
    }
}

/// STFT framing parameters. Constructed through [`StftConfig::new`], which
/// rejects non-power-of-two sizes and window/hop pairs that do not satisfy
/// constant overlap-add.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub center_padding: bool,
}

impl StftConfig {
    pub fn new(
        fft_size: usize,
        hop: usize,
        window: WindowKind,
        center_padding: bool,
    ) -> Result<Self> {
        if fft_size < 2 || !fft_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "fft_size must be a power of two >= 2, got {fft_size}"
            )));
        }
        if hop == 0 || hop > fft_size {
            return Err(Error::Config(format!(
                "hop must satisfy 0 < hop <= fft_size, got {hop}"
            )));
        }
        let cfg = Self {
            fft_size,
            hop,
            window,
            center_padding,
        };
        cfg.check_cola()?;
        Ok(cfg)
    }

    /// fft 512, hop 128, sqrt-Hann both sides, centered.
    pub fn default_se() -> Self {
        Self::new(512, 128, WindowKind::SqrtHann, true).expect("default config is COLA-valid")
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Product of analysis and synthesis windows (both equal here).
    pub(crate) fn window_product(&self) -> Vec<f64> {
        let w = self.window.samples(self.fft_size);
        w.iter().map(|v| v * v).collect()
    }

    /// Steady-state overlap-add sum of the window product must be constant
    /// for synthesis to invert analysis.
    fn check_cola(&self) -> Result<()> {
        let product = self.window_product();
        let n = self.fft_size;
        // Evaluate the overlap sum on one steady-state period [n, n + hop).
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for pos in n..n + self.hop {
            let mut acc = 0.0;
            let mut m = 0usize;
            loop {
                let start = m * self.hop;
                if start > pos {
                    break;
                }
                let offset = pos - start;
                if offset < n {
                    acc += product[offset];
                }
                m += 1;
            }
            min = min.min(acc);
            max = max.max(acc);
        }
        if min <= 0.0 || (max - min) / max > 1e-10 {
            return Err(Error::Config(format!(
                "window/hop pair violates constant overlap-add \
                 (overlap sum ranges {min:.6e}..{max:.6e})"
            )));
        }
        Ok(())
    }
}

/// Frames x bins one-sided complex spectrogram plus the framing metadata
/// needed to invert it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub data: Array2<Complex64>,
    pub config: StftConfig,
    pub sample_rate: u32,
    /// Original waveform length; iSTFT trims its output to this.
    pub orig_len: usize,
}

impl ComplexSpectrogram {
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    /// Elementwise magnitudes.
    pub fn magnitude(&self) -> Array2<f64> {
        self.data.mapv(|c| c.norm())
    }

    /// Unit-magnitude phase factors (zero cells map to 1+0i).
    pub fn phase(&self) -> Array2<Complex64> {
        self.data.mapv(|c| {
            let m = c.norm();
            if m > 0.0 {
                c / m
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("spectrogram entry".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_valid() {
        let cfg = StftConfig::default_se();
        assert_eq!(cfg.bins(), 257);
    }

    #[test]
    fn hann_quarter_hop_is_cola() {
        assert!(StftConfig::new(512, 128, WindowKind::Hann, true).is_ok());
        assert!(StftConfig::new(1024, 256, WindowKind::Hann, true).is_ok());
    }

    #[test]
    fn hann_half_hop_rejected() {
        // hann * hann overlap-added at fft/2 is not constant
        assert!(StftConfig::new(512, 256, WindowKind::Hann, true).is_err());
    }

    #[test]
    fn sqrt_hann_half_hop_is_cola() {
        assert!(StftConfig::new(512, 256, WindowKind::SqrtHann, true).is_ok());
    }

    #[test]
    fn non_divisor_hop_rejected() {
        assert!(StftConfig::new(512, 100, WindowKind::SqrtHann, true).is_err());
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(StftConfig::new(500, 125, WindowKind::Hann, true).is_err());
    }
}
