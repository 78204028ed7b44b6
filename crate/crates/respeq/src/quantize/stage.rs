//! Stage kinds: scalar grids, codebooks, finite-scalar grids, sign stages.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// `round(tanh(z) * K) / K` applied per element.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarStage {
    k: u32,
}

impl ScalarStage {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("scalar K must be >= 1".into()));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Via the integer grid so 0 always comes out as +0.0.
    pub fn quantize_value(&self, z: f64) -> f64 {
        self.grid_value(self.grid_index(z))
    }

    fn grid_index(&self, z: f64) -> i32 {
        (z.tanh() * f64::from(self.k)).round() as i32
    }

    fn grid_value(&self, index: i32) -> f64 {
        f64::from(index) / f64::from(self.k)
    }
}

/// Per-dimension bounded level grid. Odd level counts include zero; even
/// counts sit symmetric around it.
#[derive(Debug, Clone, PartialEq)]
pub struct FsqStage {
    levels: Vec<u32>,
}

impl FsqStage {
    pub fn new(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("fsq stage needs at least one dimension".into()));
        }
        if levels.iter().any(|l| *l < 2) {
            return Err(Error::Config("fsq level counts must be >= 2".into()));
        }
        Ok(Self { levels })
    }

    pub fn uniform(dim: usize, levels: u32) -> Result<Self> {
        Self::new(vec![levels; dim])
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// Level index in `0..levels` for one value.
    fn level_index(&self, d: usize, z: f64) -> u32 {
        let levels = self.levels[d];
        let t = z.tanh();
        if levels % 2 == 1 {
            let half = f64::from((levels - 1) / 2);
            ((t * half).round() + half) as u32
        } else {
            let m = f64::from(levels / 2);
            let g = (t * m - 0.5).round().clamp(-m, m - 1.0);
            (g + m) as u32
        }
    }

    fn level_value(&self, d: usize, index: u32) -> f64 {
        let levels = self.levels[d];
        if levels % 2 == 1 {
            let half = f64::from((levels - 1) / 2);
            (f64::from(index) - half) / half
        } else {
            let m = f64::from(levels / 2);
            (f64::from(index) - m + 0.5) / m
        }
    }
}

/// Sign quantizer: each component maps to +/- delta. With `zero_escape` a
/// whole row may emit the zero vector instead whenever the sign vector
/// would not reduce the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct LfqStage {
    dim: usize,
    delta: f64,
    zero_escape: bool,
}

impl LfqStage {
    pub fn new(dim: usize, delta: f64, zero_escape: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("lfq stage needs at least one dimension".into()));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::Config(format!("lfq delta must be positive, got {delta}")));
        }
        Ok(Self {
            dim,
            delta,
            zero_escape,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn zero_escape(&self) -> bool {
        self.zero_escape
    }
}

/// N x D code vectors with exponential-moving-average training state.
/// Vectors are held in binary32 so serialization is lossless; distance math
/// runs in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: Array2<f32>,
    pub ema_counts: Vec<f64>,
    pub ema_sums: Array2<f64>,
    reserved_zero: bool,
}

impl Codebook {
    pub fn new(mut vectors: Array2<f32>, reserved_zero: bool) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.ncols() == 0 {
            return Err(Error::Config("codebook must be non-empty".into()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("codebook vector entry".into()));
        }
        if reserved_zero {
            vectors.row_mut(0).fill(0.0);
        }
        let (n, d) = vectors.dim();
        Ok(Self {
            vectors,
            ema_counts: vec![0.0; n],
            ema_sums: Array2::zeros((n, d)),
            reserved_zero,
        })
    }

    /// Small seeded Gaussian spread, the pre-training default.
    pub fn seeded(n: usize, dim: usize, reserved_zero: bool, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut vectors = Array2::zeros((n, dim));
        for v in vectors.iter_mut() {
            *v = (0.1 * crate::simulate::normal(&mut rng)) as f32;
        }
        Self::new(vectors, reserved_zero)
    }

    pub fn n_codes(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn reserved_zero(&self) -> bool {
        self.reserved_zero
    }

    pub fn vectors(&self) -> ArrayView2<'_, f32> {
        self.vectors.view()
    }

    /// Code vector widened to f64.
    pub fn vector_f64(&self, index: usize) -> Array1<f64> {
        self.vectors.row(index).mapv(f64::from)
    }

    /// First free (trainable) index: 1 when index 0 is the frozen zero.
    pub fn first_free(&self) -> usize {
        usize::from(self.reserved_zero)
    }

    /// Overwrite one code vector. The frozen zero at index 0 is refused.
    pub fn set_vector(&mut self, index: usize, values: &[f32]) -> Result<()> {
        if index >= self.n_codes() {
            return Err(Error::CodeOutOfRange {
                index,
                size: self.n_codes(),
            });
        }
        if self.reserved_zero && index == 0 {
            return Err(Error::Config("codebook index 0 is the frozen zero vector".into()));
        }
        if values.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "vector of {} values into codebook of dim {}",
                values.len(),
                self.dim()
            )));
        }
        for (slot, v) in self.vectors.row_mut(index).iter_mut().zip(values) {
            *slot = *v;
        }
        Ok(())
    }

    /// Squared Euclidean distance from `v` to code `index`, in f64.
    pub fn distance_sq(&self, v: ArrayView1<'_, f64>, index: usize) -> f64 {
        self.vectors
            .row(index)
            .iter()
            .zip(v.iter())
            .map(|(c, x)| {
                let d = x - f64::from(*c);
                d * d
            })
            .sum()
    }

    /// Index of the closest code vector; ties break to the lowest index.
    pub fn nearest_code(&self, v: ArrayView1<'_, f64>) -> Result<usize> {
        if v.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "vector of dim {} against codebook of dim {}",
                v.len(),
                self.dim()
            )));
        }
        let mut best = 0usize;
        let mut best_dist = self.distance_sq(v, 0);
        for index in 1..self.n_codes() {
            let dist = self.distance_sq(v, index);
            if dist < best_dist {
                best = index;
                best_dist = dist;
            }
        }
        Ok(best)
    }
}

/// Emitted codes for one stage.
#[derive(Debug, Clone, PartialEq)]
pub enum StageCodes {
    /// Grid integers in `-K..=K`, row-major frames x dim.
    Scalar { k: u32, grid: Vec<i32> },
    /// One codebook index per frame.
    Vq { indices: Vec<u32> },
    /// Level indices, row-major frames x dim.
    Fsq { levels: Vec<u32> },
    /// Sign bits (1 = positive), row-major; plus a per-frame zero escape.
    Lfq { signs: Vec<u8>, escaped: Vec<u8> },
}

/// One stage of a quantizer chain.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Scalar(ScalarStage),
    Vq(Codebook),
    Fsq(FsqStage),
    Lfq(LfqStage),
}

impl Stage {
    /// Fixed input width, when the stage has one (scalar grids accept any).
    pub fn dim(&self) -> Option<usize> {
        match self {
            Stage::Scalar(_) => None,
            Stage::Vq(cb) => Some(cb.dim()),
            Stage::Fsq(s) => Some(s.dim()),
            Stage::Lfq(s) => Some(s.dim()),
        }
    }

    /// Quantize a residual block into codes.
    pub fn encode(&self, residual: ArrayView2<'_, f64>) -> Result<StageCodes> {
        if let Some(dim) = self.dim() {
            if residual.ncols() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "stage of dim {dim} fed {} columns",
                    residual.ncols()
                )));
            }
        }
        Ok(match self {
            Stage::Scalar(s) => StageCodes::Scalar {
                k: s.k(),
                grid: residual.iter().map(|z| s.grid_index(*z)).collect(),
            },
            Stage::Vq(cb) => {
                let mut indices = Vec::with_capacity(residual.nrows());
                for row in residual.rows() {
                    indices.push(cb.nearest_code(row)? as u32);
                }
                StageCodes::Vq { indices }
            }
            Stage::Fsq(s) => {
                let mut levels = Vec::with_capacity(residual.len());
                for row in residual.rows() {
                    for (d, z) in row.iter().enumerate() {
                        levels.push(s.level_index(d, *z));
                    }
                }
                StageCodes::Fsq { levels }
            }
            Stage::Lfq(s) => {
                let mut signs = Vec::with_capacity(residual.len());
                let mut escaped = Vec::with_capacity(residual.nrows());
                for row in residual.rows() {
                    let row_signs: Vec<u8> =
                        row.iter().map(|z| u8::from(*z >= 0.0)).collect();
                    let escape = if s.zero_escape() {
                        let sign_err: f64 = row
                            .iter()
                            .zip(&row_signs)
                            .map(|(z, sign)| {
                                let q = if *sign == 1 { s.delta() } else { -s.delta() };
                                (z - q) * (z - q)
                            })
                            .sum();
                        let keep_err: f64 = row.iter().map(|z| z * z).sum();
                        u8::from(sign_err >= keep_err)
                    } else {
                        0
                    };
                    escaped.push(escape);
                    signs.extend_from_slice(&row_signs);
                }
                StageCodes::Lfq { signs, escaped }
            }
        })
    }

    /// Rebuild the stage output from its codes. `quantize` and `dequantize`
    /// both go through here, which is what makes their round trip bit-exact.
    pub fn reconstruct(
        &self,
        codes: &StageCodes,
        frames: usize,
        dim: usize,
    ) -> Result<Array2<f64>> {
        match (self, codes) {
            (Stage::Scalar(s), StageCodes::Scalar { k, grid }) => {
                if *k != s.k() {
                    return Err(Error::Config(format!(
                        "codes carry K = {k}, stage has K = {}",
                        s.k()
                    )));
                }
                if grid.len() != frames * dim {
                    return Err(Error::ShapeMismatch("scalar code length".into()));
                }
                if grid.iter().any(|g| g.unsigned_abs() > s.k()) {
                    return Err(Error::CodeOutOfRange {
                        index: grid.iter().map(|g| g.unsigned_abs()).max().unwrap_or(0) as usize,
                        size: s.k() as usize,
                    });
                }
                Array2::from_shape_vec(
                    (frames, dim),
                    grid.iter().map(|g| s.grid_value(*g)).collect(),
                )
                .map_err(|e| Error::ShapeMismatch(e.to_string()))
            }
            (Stage::Vq(cb), StageCodes::Vq { indices }) => {
                if indices.len() != frames {
                    return Err(Error::ShapeMismatch("vq code length".into()));
                }
                let mut out = Array2::zeros((frames, dim));
                for (f, idx) in indices.iter().enumerate() {
                    let idx = *idx as usize;
                    if idx >= cb.n_codes() {
                        return Err(Error::CodeOutOfRange {
                            index: idx,
                            size: cb.n_codes(),
                        });
                    }
                    for (slot, c) in out.row_mut(f).iter_mut().zip(cb.vectors.row(idx)) {
                        *slot = f64::from(*c);
                    }
                }
                Ok(out)
            }
            (Stage::Fsq(s), StageCodes::Fsq { levels }) => {
                if levels.len() != frames * dim {
                    return Err(Error::ShapeMismatch("fsq code length".into()));
                }
                let mut out = Array2::zeros((frames, dim));
                for (i, level) in levels.iter().enumerate() {
                    let d = i % dim;
                    if *level >= s.levels()[d] {
                        return Err(Error::CodeOutOfRange {
                            index: *level as usize,
                            size: s.levels()[d] as usize,
                        });
                    }
                    out[(i / dim, d)] = s.level_value(d, *level);
                }
                Ok(out)
            }
            (Stage::Lfq(s), StageCodes::Lfq { signs, escaped }) => {
                if signs.len() != frames * dim || escaped.len() != frames {
                    return Err(Error::ShapeMismatch("lfq code length".into()));
                }
                let mut out = Array2::zeros((frames, dim));
                for f in 0..frames {
                    if escaped[f] == 1 {
                        continue;
                    }
                    for d in 0..dim {
                        out[(f, d)] = if signs[f * dim + d] == 1 {
                            s.delta()
                        } else {
                            -s.delta()
                        };
                    }
                }
                Ok(out)
            }
            _ => Err(Error::Config("stage kind does not match its codes".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn scalar_bound_holds() {
        let s = ScalarStage::new(8).unwrap();
        for z in [-30.0, -2.0, -0.3, 0.0, 0.07, 0.5, 3.0, 50.0] {
            let q = s.quantize_value(z);
            assert!((q - z.tanh()).abs() <= 1.0 / 16.0 + 1e-15, "z = {z}");
        }
    }

    #[test]
    fn nearest_code_exact_and_tie_break() {
        let cb = Codebook::new(
            array![[0.0f32, 0.0], [1.0, 1.0], [1.0, 1.0]],
            false,
        )
        .unwrap();
        // exact match
        assert_eq!(cb.nearest_code(array![1.0, 1.0].view()).unwrap(), 1);
        // (0.4, 0.4): 0.32 to origin vs 0.72 to ones
        assert_eq!(cb.nearest_code(array![0.4, 0.4].view()).unwrap(), 0);
        // equidistant between duplicate rows 1 and 2 -> lowest index
        assert_eq!(cb.nearest_code(array![2.0, 2.0].view()).unwrap(), 1);
        // midpoint between distinct codes -> lowest index
        assert_eq!(cb.nearest_code(array![0.5, 0.5].view()).unwrap(), 0);
    }

    #[test]
    fn nearest_code_dimension_mismatch() {
        let cb = Codebook::new(array![[0.0f32, 0.0]], false).unwrap();
        assert!(cb.nearest_code(array![1.0, 2.0, 3.0].view()).is_err());
    }

    #[test]
    fn reserved_zero_pins_row_zero() {
        let cb = Codebook::new(array![[5.0f32, 5.0], [1.0, 1.0]], true).unwrap();
        assert_eq!(cb.vector_f64(0), array![0.0, 0.0]);
        let mut cb = cb;
        assert!(cb.set_vector(0, &[1.0, 1.0]).is_err());
        assert!(cb.set_vector(1, &[2.0, 2.0]).is_ok());
    }

    #[test]
    fn fsq_odd_grid_contains_zero() {
        let s = FsqStage::uniform(1, 5).unwrap();
        let values: Vec<f64> = (0..5).map(|i| s.level_value(0, i)).collect();
        assert_eq!(values, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(s.level_index(0, 0.0), 2);
    }

    #[test]
    fn fsq_even_grid_is_symmetric() {
        let s = FsqStage::uniform(1, 4).unwrap();
        let values: Vec<f64> = (0..4).map(|i| s.level_value(0, i)).collect();
        assert_eq!(values, vec![-0.75, -0.25, 0.25, 0.75]);
        // saturated inputs stay on the grid
        assert_eq!(s.level_index(0, 100.0), 3);
        assert_eq!(s.level_index(0, -100.0), 0);
    }

    #[test]
    fn fsq_encode_round_trips_on_grid() {
        let s = FsqStage::uniform(3, 5).unwrap();
        let stage = Stage::Fsq(s);
        let z = array![[0.9, -0.2, 0.0], [-3.0, 0.4, 2.0]];
        let codes = stage.encode(z.view()).unwrap();
        let out = stage.reconstruct(&codes, 2, 3).unwrap();
        let codes2 = stage.encode(out.view()).unwrap();
        let out2 = stage.reconstruct(&codes2, 2, 3).unwrap();
        // grid points tanh back close enough to re-quantize to themselves
        for (a, b) in out.iter().zip(out2.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lfq_signs_and_escape() {
        let stage = Stage::Lfq(LfqStage::new(2, 1.0, true).unwrap());
        // big residual: sign vector helps
        let big = array![[0.9, -1.2]];
        let codes = stage.encode(big.view()).unwrap();
        let out = stage.reconstruct(&codes, 1, 2).unwrap();
        assert_eq!(out, array![[1.0, -1.0]]);
        // tiny residual: sign vector would grow it, so escape to zero
        let tiny = array![[0.01, -0.02]];
        let codes = stage.encode(tiny.view()).unwrap();
        let out = stage.reconstruct(&codes, 1, 2).unwrap();
        assert_eq!(out, array![[0.0, 0.0]]);
    }

    #[test]
    fn lfq_without_escape_constrains_outputs() {
        let stage = Stage::Lfq(LfqStage::new(2, 0.5, false).unwrap());
        let z = array![[0.01, -0.02], [5.0, -5.0]];
        let codes = stage.encode(z.view()).unwrap();
        let out = stage.reconstruct(&codes, 2, 2).unwrap();
        for v in out.iter() {
            assert!(v.abs() == 0.5);
        }
    }

    #[test]
    fn out_of_range_codes_rejected() {
        let cb = Codebook::new(array![[0.0f32, 0.0], [1.0, 1.0]], false).unwrap();
        let stage = Stage::Vq(cb);
        let bad = StageCodes::Vq { indices: vec![7] };
        assert!(matches!(
            stage.reconstruct(&bad, 1, 2),
            Err(Error::CodeOutOfRange { .. })
        ));
    }
}
