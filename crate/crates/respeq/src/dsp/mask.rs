//! Complex ratio masks: oracle computation and application.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

use super::ComplexSpectrogram;

/// Guard on |Y|^2 below which a mask cell is forced to zero instead of
/// dividing by a vanishing mixture cell.
pub const CRM_EPS_MAG_SQ: f64 = 1e-12;

/// Complex-valued time-frequency mask. `bound`, when set, caps the complex
/// magnitude of every entry (phase preserved).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMask {
    pub data: Array2<Complex64>,
    pub bound: Option<f64>,
}

impl ComplexMask {
    /// Build a mask from raw data, clamping magnitudes when a bound is given.
    pub fn new(data: Array2<Complex64>, bound: Option<f64>) -> Result<Self> {
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("mask entry".into()));
        }
        let data = match bound {
            Some(b) if b >= 0.0 => data.mapv(|c| clamp_mag(c, b)),
            Some(b) => {
                return Err(Error::Config(format!("mask bound must be >= 0, got {b}")));
            }
            None => data,
        };
        Ok(Self { data, bound })
    }

    pub fn ones(frames: usize, bins: usize) -> Self {
        Self {
            data: Array2::from_elem((frames, bins), Complex64::new(1.0, 0.0)),
            bound: None,
        }
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bins(&self) -> usize {
        self.data.ncols()
    }
}

fn clamp_mag(c: Complex64, bound: f64) -> Complex64 {
    let m = c.norm();
    if m > bound {
        if m == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            c * (bound / m)
        }
    } else {
        c
    }
}

/// Oracle complex ratio mask `M = X * conj(Y) / |Y|^2`, the exact complex
/// quotient X/Y wherever the mixture cell carries energy. Cells with
/// |Y|^2 <= [`CRM_EPS_MAG_SQ`] are zeroed.
pub fn compute_crm(
    mixture: &ComplexSpectrogram,
    target: &ComplexSpectrogram,
    bound: Option<f64>,
) -> Result<ComplexMask> {
    if mixture.data.dim() != target.data.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mixture {:?} vs target {:?}",
            mixture.data.dim(),
            target.data.dim()
        )));
    }
    let mut data = Array2::<Complex64>::zeros(mixture.data.dim());
    for ((idx, y), x) in mixture.data.indexed_iter().zip(target.data.iter()) {
        let denom = y.norm_sqr();
        data[idx] = if denom > CRM_EPS_MAG_SQ {
            x * y.conj() / denom
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    ComplexMask::new(data, bound)
}

/// Elementwise complex product `M .* Y`.
pub fn apply_mask(mixture: &ComplexSpectrogram, mask: &ComplexMask) -> Result<ComplexSpectrogram> {
    if mixture.data.dim() != mask.data.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mixture {:?} vs mask {:?}",
            mixture.data.dim(),
            mask.data.dim()
        )));
    }
    let mut out = mixture.clone();
    out.data.zip_mut_with(&mask.data, |y, m| *y *= m);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, StftConfig};
    use crate::Waveform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn spec_from(data: Array2<Complex64>) -> ComplexSpectrogram {
        ComplexSpectrogram {
            data,
            config: StftConfig::default_se(),
            sample_rate: 16000,
            orig_len: 0,
        }
    }

    #[test]
    fn single_cell_quotient() {
        let y = spec_from(Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)));
        let x = spec_from(Array2::from_elem((1, 1), Complex64::new(0.5, 0.5)));
        let m = compute_crm(&y, &x, None).unwrap();
        assert_eq!(m.data[(0, 0)], Complex64::new(0.5, 0.5));
    }

    #[test]
    fn identity_mask_when_target_equals_mixture() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let data = Array2::from_shape_fn((4, 6), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let y = spec_from(data.clone());
        let x = spec_from(data);
        let m = compute_crm(&y, &x, None).unwrap();
        for c in m.data.iter() {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_mixture_cell_gives_zero_mask() {
        let y = spec_from(Array2::zeros((1, 2)));
        let x = spec_from(Array2::from_elem((1, 2), Complex64::new(3.0, -1.0)));
        let m = compute_crm(&y, &x, None).unwrap();
        assert!(m.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn oracle_identity_through_apply_mask() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let cfg = StftConfig::default_se();
        let noise: Vec<f64> = (0..4000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let clean: Vec<f64> = (0..4000)
            .map(|n| 0.4 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / 16000.0).sin())
            .collect();
        let mix: Vec<f64> = clean.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let y = stft(&Waveform::new(mix, 16000).unwrap(), &cfg).unwrap();
        let x = stft(&Waveform::new(clean, 16000).unwrap(), &cfg).unwrap();
        let m = compute_crm(&y, &x, None).unwrap();
        let xhat = apply_mask(&y, &m).unwrap();
        for ((y_c, x_c), xh_c) in y.data.iter().zip(x.data.iter()).zip(xhat.data.iter()) {
            if y_c.norm_sqr() > CRM_EPS_MAG_SQ {
                assert!((xh_c - x_c).norm() <= 1e-9 * x_c.norm().max(1.0));
            }
        }
    }

    #[test]
    fn bound_clamps_magnitude_preserving_phase() {
        let data = Array2::from_elem((1, 1), Complex64::new(3.0, 4.0));
        let m = ComplexMask::new(data, Some(1.0)).unwrap();
        let c = m.data[(0, 0)];
        assert!((c.norm() - 1.0).abs() < 1e-12);
        assert!((c.arg() - Complex64::new(3.0, 4.0).arg()).abs() < 1e-12);
    }

    #[test]
    fn mask_of_ones_is_identity() {
        let y = spec_from(Array2::from_elem((2, 3), Complex64::new(0.3, -0.7)));
        let out = apply_mask(&y, &ComplexMask::ones(2, 3)).unwrap();
        assert_eq!(out.data, y.data);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let y = spec_from(Array2::zeros((2, 3)));
        let x = spec_from(Array2::zeros((2, 4)));
        assert!(compute_crm(&y, &x, None).is_err());
        assert!(apply_mask(&y, &ComplexMask::ones(2, 4)).is_err());
    }
}
