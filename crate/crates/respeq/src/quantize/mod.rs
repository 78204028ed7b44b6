//! Quantization schemes for frame-wise feature matrices.
//!
//! Eight schemes are built from four stage kinds:
//!
//! | scheme         | stages                                              |
//! |----------------|-----------------------------------------------------|
//! | `sq`           | one scalar grid                                     |
//! | `rsq`          | `n_q` residual scalar grids                         |
//! | `rvq`          | `n_q` residual codebooks                            |
//! | `sq-rvq`       | scalar grid, then `n_q - 1` residual codebooks      |
//! | `group-sq-rvq` | columns split into groups, `sq-rvq` per group       |
//! | `sq+rvq`       | scalar grid and `rvq` in parallel, weighted sum     |
//! | `rfsq`         | `n_q` residual finite-scalar stages                 |
//! | `rlfq`         | `n_q` residual sign stages                          |
//!
//! Residual codebooks keep index 0 frozen at the zero vector by default, so
//! a stage can always leave its residual untouched; that makes per-stage
//! residual energy non-increasing for every input, not just on average.
//! Sign stages get the same ability through a per-row zero escape.

pub(crate) mod format;
mod stage;
mod stack;
mod train;

pub use format::{load_codebooks, save_codebooks};
pub use stack::{dequantize, quantize, Codes, QuantizeResult, QuantizerStack, StackConfig};
pub use stage::{Codebook, FsqStage, LfqStage, ScalarStage, Stage, StageCodes};
pub use train::{train_codebooks, StageTrainStats, TrainConfig, TrainStats};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Frames x dims real feature matrix, the quantizers' working currency.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix entry".into()));
        }
        Ok(Self { data })
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Mean squared difference per element.
    pub fn mse_to(&self, other: &FeatureMatrix) -> Result<f64> {
        if self.data.dim() != other.data.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.data.dim(),
                other.data.dim()
            )));
        }
        let n = (self.frames() * self.dim()).max(1) as f64;
        Ok(self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }
}

/// Quantization scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Sq,
    Rsq,
    Rvq,
    SqRvq,
    GroupSqRvq,
    SqParRvq,
    Rfsq,
    Rlfq,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Sq,
        Scheme::Rsq,
        Scheme::Rvq,
        Scheme::SqRvq,
        Scheme::GroupSqRvq,
        Scheme::SqParRvq,
        Scheme::Rfsq,
        Scheme::Rlfq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Sq => "sq",
            Scheme::Rsq => "rsq",
            Scheme::Rvq => "rvq",
            Scheme::SqRvq => "sq-rvq",
            Scheme::GroupSqRvq => "group-sq-rvq",
            Scheme::SqParRvq => "sq+rvq",
            Scheme::Rfsq => "rfsq",
            Scheme::Rlfq => "rlfq",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "sq" => Ok(Scheme::Sq),
            "rsq" => Ok(Scheme::Rsq),
            "rvq" => Ok(Scheme::Rvq),
            "sq-rvq" => Ok(Scheme::SqRvq),
            "group-sq-rvq" => Ok(Scheme::GroupSqRvq),
            "sq+rvq" | "sq-par-rvq" => Ok(Scheme::SqParRvq),
            "rfsq" => Ok(Scheme::Rfsq),
            "rlfq" => Ok(Scheme::Rlfq),
            other => Err(Error::Config(format!(
                "unknown scheme {other:?}; expected one of sq, rsq, rvq, sq-rvq, \
                 group-sq-rvq, sq+rvq, rfsq, rlfq"
            ))),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Scheme::Sq => 0,
            Scheme::Rsq => 1,
            Scheme::Rvq => 2,
            Scheme::SqRvq => 3,
            Scheme::GroupSqRvq => 4,
            Scheme::SqParRvq => 5,
            Scheme::Rfsq => 6,
            Scheme::Rlfq => 7,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Scheme::ALL.into_iter().find(|s| s.tag() == tag)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Elementwise scalar quantization `round(tanh(z) * K) / K`.
///
/// Outputs live on the `2K + 1`-point grid `{-K..K}/K` and deviate from
/// `tanh(z)` by at most `1/(2K)`.
pub fn scalar_quantize(z: &FeatureMatrix, k: u32) -> Result<FeatureMatrix> {
    let stage = ScalarStage::new(k)?;
    let mut out = z.data.clone();
    out.mapv_inplace(|v| stage.quantize_value(v));
    FeatureMatrix::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn scheme_names_round_trip() {
        for scheme in Scheme::ALL {
            assert_eq!(Scheme::parse(scheme.name()).unwrap(), scheme);
            assert_eq!(Scheme::from_tag(scheme.tag()), Some(scheme));
        }
        assert!(Scheme::parse("vq").is_err());
    }

    #[test]
    fn scalar_quantize_worked_values() {
        let z = FeatureMatrix::new(array![[0.0, 10.0, 0.3]]).unwrap();
        let out = scalar_quantize(&z, 8).unwrap();
        assert_eq!(out.data[(0, 0)], 0.0);
        assert_eq!(out.data[(0, 1)], 1.0); // tanh(10) ~ 1, round(8)/8
        assert_eq!(out.data[(0, 2)], 0.25); // tanh(0.3)*8 = 2.33 -> 2/8
    }

    #[test]
    fn scalar_quantize_rejects_k_zero() {
        let z = FeatureMatrix::new(array![[0.0]]).unwrap();
        assert!(scalar_quantize(&z, 0).is_err());
    }

    #[test]
    fn feature_matrix_rejects_non_finite() {
        assert!(FeatureMatrix::new(array![[f64::INFINITY]]).is_err());
    }
}
