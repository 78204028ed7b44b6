//! Merge denoised and mixture magnitudes into a single codec input.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Per-cell affine map `out = w_denoised * d + w_mixture * m + bias`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub w_denoised: f64,
    pub w_mixture: f64,
    pub bias: f64,
}

/// How two magnitude matrices are combined. The default is the convex
/// combination `beta * denoised + (1 - beta) * mixture`; the general form
/// applies an affine map per cell, either one map for all bins or one per
/// frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionConfig {
    Convex { beta: f64 },
    Affine(Vec<AffineParams>),
}

impl FusionConfig {
    pub fn convex(beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("fusion beta must be in [0,1], got {beta}")));
        }
        Ok(FusionConfig::Convex { beta })
    }
}

/// Combine denoised and mixture magnitude matrices cell by cell.
pub fn fuse_features(
    mag_denoised: &Array2<f64>,
    mag_mixture: &Array2<f64>,
    cfg: &FusionConfig,
) -> Result<Array2<f64>> {
    if mag_denoised.dim() != mag_mixture.dim() {
        return Err(Error::ShapeMismatch(format!(
            "denoised {:?} vs mixture {:?}",
            mag_denoised.dim(),
            mag_mixture.dim()
        )));
    }
    match cfg {
        FusionConfig::Convex { beta } => {
            if !(0.0..=1.0).contains(beta) {
                return Err(Error::Config(format!("fusion beta must be in [0,1], got {beta}")));
            }
            let mut out = mag_denoised * *beta;
            out.zip_mut_with(mag_mixture, |o, m| *o += (1.0 - beta) * m);
            Ok(out)
        }
        FusionConfig::Affine(params) => {
            let bins = mag_denoised.ncols();
            if params.len() != 1 && params.len() != bins {
                return Err(Error::ShapeMismatch(format!(
                    "affine fusion has {} parameter rows, input has {} bins \
                     (need 1 or {})",
                    params.len(),
                    bins,
                    bins
                )));
            }
            let mut out = Array2::<f64>::zeros(mag_denoised.dim());
            for ((f, b), o) in out.indexed_iter_mut() {
                let p = if params.len() == 1 { &params[0] } else { &params[b] };
                *o = p.w_denoised * mag_denoised[(f, b)] + p.w_mixture * mag_mixture[(f, b)]
                    + p.bias;
            }
            Ok(out)
        }
    }
}

/// Load affine fusion parameters from a text file.
///
/// Format: one entry per line, three whitespace-separated numbers
/// `w_denoised w_mixture bias`; `#` starts a comment. A single entry
/// applies to every bin; otherwise the entry count must equal the bin
/// count of the matrices being fused.
pub fn load_affine_params(path: impl AsRef<Path>) -> Result<Vec<AffineParams>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut params = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                detail: format!("line {}: expected 3 numbers, got {}", lineno + 1, fields.len()),
            });
        }
        let mut values = [0.0f64; 3];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                detail: format!("line {}: bad number {field:?}", lineno + 1),
            })?;
        }
        params.push(AffineParams {
            w_denoised: values[0],
            w_mixture: values[1],
            bias: values[2],
        });
    }
    if params.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            detail: "no parameter entries found".into(),
        });
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn beta_endpoints_return_inputs() {
        let d = array![[2.0, 4.0], [6.0, 8.0]];
        let m = array![[1.0, 3.0], [5.0, 7.0]];
        let all_d = fuse_features(&d, &m, &FusionConfig::convex(1.0).unwrap()).unwrap();
        assert_eq!(all_d, d);
        let all_m = fuse_features(&d, &m, &FusionConfig::convex(0.0).unwrap()).unwrap();
        assert_eq!(all_m, m);
    }

    #[test]
    fn midpoint_averages() {
        let d = array![[2.0]];
        let m = array![[4.0]];
        let out = fuse_features(&d, &m, &FusionConfig::convex(0.5).unwrap()).unwrap();
        assert_eq!(out[(0, 0)], 3.0);
    }

    #[test]
    fn convex_path_is_monotone_in_beta() {
        let d = array![[1.0, 0.0]];
        let m = array![[0.0, 2.0]];
        let mut prev_dist = f64::INFINITY;
        for i in 0..=10 {
            let beta = i as f64 / 10.0;
            let out = fuse_features(&d, &m, &FusionConfig::convex(beta).unwrap()).unwrap();
            let dist: f64 = out
                .iter()
                .zip(d.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!(dist <= prev_dist + 1e-12);
            prev_dist = dist;
        }
    }

    #[test]
    fn beta_out_of_range_rejected() {
        assert!(FusionConfig::convex(1.5).is_err());
        assert!(FusionConfig::convex(-0.1).is_err());
    }

    #[test]
    fn affine_params_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fusion.txt");
        std::fs::write(&path, "# global map\n0.7 0.3 0.0\n").unwrap();
        let params = load_affine_params(&path).unwrap();
        assert_eq!(params.len(), 1);
        let d = array![[1.0]];
        let m = array![[2.0]];
        let out = fuse_features(&d, &m, &FusionConfig::Affine(params)).unwrap();
        assert!((out[(0, 0)] - 1.3).abs() < 1e-15);
    }

    #[test]
    fn per_bin_affine_requires_matching_count() {
        let params = vec![
            AffineParams { w_denoised: 1.0, w_mixture: 0.0, bias: 0.0 };
            3
        ];
        let d = array![[1.0, 2.0]];
        let m = array![[0.0, 0.0]];
        assert!(fuse_features(&d, &m, &FusionConfig::Affine(params)).is_err());
    }
}
