//! Invertible analysis/synthesis adapter between waveforms and feature
//! matrices.
//!
//! Stands in for a fixed neural encoder/decoder pair: STFT magnitudes
//! (optionally log-compressed) are mapped through an orthonormal projection
//! into D-dimensional frame features, and back. Because the projection is
//! exactly invertible and phase is carried alongside, codec fidelity is
//! attributable to the quantizer alone.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::dsp::{istft, stft, ComplexSpectrogram, StftConfig};
use crate::error::{Error, Result};
use crate::quantize::FeatureMatrix;
use crate::simulate::normal;
use crate::Waveform;

/// How STFT bins map to feature dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// Features are the magnitude bins themselves; requires `D == bins`.
    Identity,
    /// Seeded random orthonormal map from bins to `dim >= bins` feature
    /// dimensions; the stored transpose inverts it exactly.
    RandomOrthonormal { dim: usize, seed: u64 },
}

/// Whether features hold raw or log-compressed magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureDomain {
    LogMagnitude,
    Magnitude,
}

/// Which signal's phase is reattached at synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSource {
    /// Phase of the codec input (the denoised signal).
    FromInput,
    /// Phase of the original mixture.
    FromMixture,
}

/// Adapter parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecAdapterConfig {
    pub stft: StftConfig,
    pub projection: Projection,
    pub feature_domain: FeatureDomain,
    pub phase_source: PhaseSource,
    /// Magnitudes are clamped here before the log in log domain.
    pub log_floor: f64,
}

impl CodecAdapterConfig {
    /// Identity projection over the default STFT: D = 257 log-magnitude
    /// features per frame, phase carried from the codec input.
    pub fn default_identity() -> Self {
        Self {
            stft: StftConfig::default_se(),
            projection: Projection::Identity,
            feature_domain: FeatureDomain::LogMagnitude,
            phase_source: PhaseSource::FromInput,
            log_floor: 1e-7,
        }
    }
}

/// Phase and framing information [`CodecAdapter::decode`] needs besides the
/// features themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSidecar {
    pub phase: Array2<Complex64>,
    pub orig_len: usize,
    pub sample_rate: u32,
}

/// A built adapter; owns the projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecAdapter {
    cfg: CodecAdapterConfig,
    /// `dim x bins` with orthonormal columns; `None` for identity.
    projection: Option<Array2<f64>>,
    dim: usize,
}

fn gram_schmidt_columns(m: &mut Array2<f64>) {
    let (rows, cols) = m.dim();
    for j in 0..cols {
        for k in 0..j {
            let dot: f64 = (0..rows).map(|r| m[(r, j)] * m[(r, k)]).sum();
            for r in 0..rows {
                m[(r, j)] -= dot * m[(r, k)];
            }
        }
        let norm: f64 = (0..rows).map(|r| m[(r, j)] * m[(r, j)]).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for r in 0..rows {
                m[(r, j)] /= norm;
            }
        } else {
            // a vanishing column after projection is a measure-zero draw;
            // fall back to a basis vector orthogonal by construction
            for r in 0..rows {
                m[(r, j)] = f64::from(u8::from(r == j));
            }
        }
    }
}

impl CodecAdapter {
    pub fn new(cfg: CodecAdapterConfig) -> Result<Self> {
        if !cfg.log_floor.is_finite() || cfg.log_floor <= 0.0 {
            return Err(Error::Config("log_floor must be positive".into()));
        }
        let bins = cfg.stft.bins();
        let (projection, dim) = match cfg.projection {
            Projection::Identity => (None, bins),
            Projection::RandomOrthonormal { dim, seed } => {
                if dim < bins {
                    return Err(Error::Config(format!(
                        "orthonormal projection needs dim >= bins ({dim} < {bins})"
                    )));
                }
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let mut m = Array2::<f64>::zeros((dim, bins));
                for v in m.iter_mut() {
                    *v = normal(&mut rng);
                }
                gram_schmidt_columns(&mut m);
                (Some(m), dim)
            }
        };
        Ok(Self {
            cfg,
            projection,
            dim,
        })
    }

    pub fn config(&self) -> &CodecAdapterConfig {
        &self.cfg
    }

    /// Feature dimensionality D this adapter produces.
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn to_domain(&self, mag: f64) -> f64 {
        match self.cfg.feature_domain {
            FeatureDomain::LogMagnitude => mag.max(self.cfg.log_floor).ln(),
            FeatureDomain::Magnitude => mag,
        }
    }

    fn expand_domain(&self, v: f64) -> f64 {
        match self.cfg.feature_domain {
            FeatureDomain::LogMagnitude => v.exp(),
            FeatureDomain::Magnitude => v.max(0.0),
        }
    }

    fn project(&self, domain_mag: &Array2<f64>) -> FeatureMatrix {
        let data = match &self.projection {
            None => domain_mag.clone(),
            // z = mag * W^T  (W has orthonormal columns, so z * W inverts)
            Some(w) => domain_mag.dot(&w.t()),
        };
        FeatureMatrix { data }
    }

    fn unproject(&self, z: &FeatureMatrix) -> Array2<f64> {
        match &self.projection {
            None => z.data.clone(),
            Some(w) => z.data.dot(w),
        }
    }

    /// Features and phase from a spectrogram whose magnitude is the codec
    /// input (used by the fusion path, where magnitude and phase come from
    /// different signals).
    pub fn encode_magnitude(
        &self,
        magnitude: &Array2<f64>,
        phase_of: &ComplexSpectrogram,
    ) -> Result<(FeatureMatrix, PhaseSidecar)> {
        if magnitude.dim() != phase_of.data.dim() {
            return Err(Error::ShapeMismatch(format!(
                "magnitude {:?} vs phase source {:?}",
                magnitude.dim(),
                phase_of.data.dim()
            )));
        }
        if magnitude.ncols() != self.cfg.stft.bins() {
            return Err(Error::ShapeMismatch(format!(
                "magnitude has {} bins, adapter stft implies {}",
                magnitude.ncols(),
                self.cfg.stft.bins()
            )));
        }
        let domain = magnitude.mapv(|m| self.to_domain(m));
        let features = self.project(&domain);
        Ok((
            features,
            PhaseSidecar {
                phase: phase_of.phase(),
                orig_len: phase_of.orig_len,
                sample_rate: phase_of.sample_rate,
            },
        ))
    }

    /// Features and phase straight from a waveform.
    pub fn encode_waveform(&self, x: &Waveform) -> Result<(FeatureMatrix, PhaseSidecar)> {
        let spec = stft(x, &self.cfg.stft)?;
        let mag = spec.magnitude();
        self.encode_magnitude(&mag, &spec)
    }

    /// Inverse projection, domain expansion, phase reattachment, iSTFT.
    pub fn decode(&self, zq: &FeatureMatrix, sidecar: &PhaseSidecar) -> Result<Waveform> {
        if zq.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "features of dim {} into adapter of dim {}",
                zq.dim(),
                self.dim
            )));
        }
        if zq.frames() != sidecar.phase.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature frames vs {} phase frames",
                zq.frames(),
                sidecar.phase.nrows()
            )));
        }
        let mag = self.unproject(zq).mapv(|v| self.expand_domain(v));
        let mut data = Array2::<Complex64>::zeros(mag.dim());
        for (idx, slot) in data.indexed_iter_mut() {
            *slot = sidecar.phase[idx] * mag[idx];
        }
        istft(&ComplexSpectrogram {
            data,
            config: self.cfg.stft,
            sample_rate: sidecar.sample_rate,
            orig_len: sidecar.orig_len,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::si_sdr;

    fn tone(len: usize, freq: f64) -> Waveform {
        Waveform::new(
            (0..len)
                .map(|n| 0.4 * (2.0 * std::f64::consts::PI * freq * n as f64 / 16000.0).sin())
                .collect(),
            16000,
        )
        .unwrap()
    }

    #[test]
    fn identity_round_trip_recovers_signal() {
        let adapter = CodecAdapter::new(CodecAdapterConfig::default_identity()).unwrap();
        let x = tone(6000, 440.0);
        let (z, sidecar) = adapter.encode_waveform(&x).unwrap();
        let back = adapter.decode(&z, &sidecar).unwrap();
        assert_eq!(back.len(), x.len());
        assert!(si_sdr(&back, &x).unwrap() >= 40.0);
    }

    #[test]
    fn orthonormal_projection_round_trips() {
        let cfg = CodecAdapterConfig {
            projection: Projection::RandomOrthonormal { dim: 260, seed: 5 },
            ..CodecAdapterConfig::default_identity()
        };
        let adapter = CodecAdapter::new(cfg).unwrap();
        assert_eq!(adapter.dim(), 260);
        let x = tone(5000, 523.25);
        let (z, sidecar) = adapter.encode_waveform(&x).unwrap();
        assert_eq!(z.dim(), 260);
        let back = adapter.decode(&z, &sidecar).unwrap();
        assert!(si_sdr(&back, &x).unwrap() >= 40.0);
    }

    #[test]
    fn projection_matrix_has_orthonormal_columns() {
        let cfg = CodecAdapterConfig {
            stft: StftConfig::new(64, 16, crate::dsp::WindowKind::SqrtHann, true).unwrap(),
            projection: Projection::RandomOrthonormal { dim: 40, seed: 9 },
            ..CodecAdapterConfig::default_identity()
        };
        let adapter = CodecAdapter::new(cfg).unwrap();
        let w = adapter.projection.as_ref().unwrap();
        let bins = 33;
        for i in 0..bins {
            for j in 0..bins {
                let dot: f64 = (0..40).map(|r| w[(r, i)] * w[(r, j)]).sum();
                let expect = f64::from(u8::from(i == j));
                assert!((dot - expect).abs() < 1e-10, "({i},{j}) -> {dot}");
            }
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let cfg = CodecAdapterConfig {
            projection: Projection::RandomOrthonormal { dim: 300, seed: 77 },
            ..CodecAdapterConfig::default_identity()
        };
        let x = tone(3000, 330.0);
        let a = CodecAdapter::new(cfg.clone()).unwrap();
        let b = CodecAdapter::new(cfg).unwrap();
        let (za, _) = a.encode_waveform(&x).unwrap();
        let (zb, _) = b.encode_waveform(&x).unwrap();
        assert_eq!(za.data, zb.data);
    }

    #[test]
    fn zero_waveform_encodes_at_log_floor() {
        let adapter = CodecAdapter::new(CodecAdapterConfig::default_identity()).unwrap();
        let x = Waveform::silence(4000, 16000).unwrap();
        let (z, _) = adapter.encode_waveform(&x).unwrap();
        let floor = 1e-7f64.ln();
        assert!(z.data.iter().all(|v| (v - floor).abs() < 1e-12));
    }

    #[test]
    fn zero_features_decode_near_silence() {
        let adapter = CodecAdapter::new(CodecAdapterConfig::default_identity()).unwrap();
        let x = tone(4000, 440.0);
        let (z, sidecar) = adapter.encode_waveform(&x).unwrap();
        let floor_features = FeatureMatrix::new(Array2::from_elem(
            (z.frames(), z.dim()),
            1e-7f64.ln(),
        ))
        .unwrap();
        let out = adapter.decode(&floor_features, &sidecar).unwrap();
        assert!(out.power().sqrt() < 1e-6);
    }

    #[test]
    fn identity_requires_matching_dim() {
        let adapter = CodecAdapter::new(CodecAdapterConfig::default_identity()).unwrap();
        let bad = FeatureMatrix::new(Array2::zeros((3, 100))).unwrap();
        let x = tone(2000, 220.0);
        let (_, sidecar) = adapter.encode_waveform(&x).unwrap();
        assert!(adapter.decode(&bad, &sidecar).is_err());
    }

    #[test]
    fn undersized_projection_rejected() {
        let cfg = CodecAdapterConfig {
            projection: Projection::RandomOrthonormal { dim: 100, seed: 1 },
            ..CodecAdapterConfig::default_identity()
        };
        assert!(CodecAdapter::new(cfg).is_err());
    }

    #[test]
    fn magnitude_domain_round_trips_too() {
        let cfg = CodecAdapterConfig {
            feature_domain: FeatureDomain::Magnitude,
            ..CodecAdapterConfig::default_identity()
        };
        let adapter = CodecAdapter::new(cfg).unwrap();
        let x = tone(4000, 880.0);
        let (z, sidecar) = adapter.encode_waveform(&x).unwrap();
        let back = adapter.decode(&z, &sidecar).unwrap();
        assert!(si_sdr(&back, &x).unwrap() >= 60.0);
    }
}
