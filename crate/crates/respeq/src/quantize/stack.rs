//! Assembling stages into schemes and running them.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

use super::stage::{Codebook, FsqStage, LfqStage, ScalarStage, Stage, StageCodes};
use super::{FeatureMatrix, Scheme};

/// Everything needed to build an untrained stack.
#[derive(Debug, Clone, PartialEq)]
pub struct StackConfig {
    pub scheme: Scheme,
    /// Feature dimensionality D.
    pub dim: usize,
    /// Stage count for residual schemes.
    pub n_q: usize,
    /// Codebook size N for VQ stages.
    pub codebook_size: usize,
    /// Scalar grid constant K.
    pub scalar_k: u32,
    /// Levels per dimension for finite-scalar stages.
    pub fsq_levels: u32,
    /// Output magnitude for sign stages.
    pub lfq_delta: f64,
    /// Column groups for the grouped scheme.
    pub group_count: usize,
    /// Weight w on the scalar branch of the parallel scheme.
    pub parallel_weight: f64,
    /// Freeze index 0 of every codebook at the zero vector and give sign
    /// stages a per-row zero escape.
    pub reserved_zero: bool,
    /// Seed for the initial (pre-training) codebook spread.
    pub init_seed: u64,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::SqRvq,
            dim: 256,
            n_q: 8,
            codebook_size: 1024,
            scalar_k: 8,
            fsq_levels: 5,
            lfq_delta: 1.0,
            group_count: 2,
            parallel_weight: 0.5,
            reserved_zero: true,
            init_seed: 0,
        }
    }
}

impl StackConfig {
    pub fn desk(scheme: Scheme, dim: usize, codebook_size: usize) -> Self {
        Self {
            scheme,
            dim,
            codebook_size,
            ..Self::default()
        }
    }
}

/// A configured quantizer: one stage chain per group, or two chains for the
/// parallel scheme (scalar branch first, residual branch second).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerStack {
    scheme: Scheme,
    dim: usize,
    group_count: usize,
    parallel_weight: f64,
    reserved_zero: bool,
    pub(crate) chains: Vec<Vec<Stage>>,
}

impl QuantizerStack {
    pub fn build(cfg: &StackConfig) -> Result<Self> {
        if cfg.dim == 0 {
            return Err(Error::Config("stack dim must be >= 1".into()));
        }
        if cfg.n_q == 0 {
            return Err(Error::Config("n_q must be >= 1".into()));
        }
        if cfg.codebook_size == 0 {
            return Err(Error::Config("codebook_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&cfg.parallel_weight) {
            return Err(Error::Config(format!(
                "parallel_weight must be in [0,1], got {}",
                cfg.parallel_weight
            )));
        }

        let scalar = || ScalarStage::new(cfg.scalar_k).map(Stage::Scalar);
        let vq = |dim: usize, slot: u64| -> Result<Stage> {
            Ok(Stage::Vq(Codebook::seeded(
                cfg.codebook_size,
                dim,
                cfg.reserved_zero,
                cfg.init_seed.wrapping_add(slot),
            )?))
        };

        let chains: Vec<Vec<Stage>> = match cfg.scheme {
            Scheme::Sq => vec![vec![scalar()?]],
            Scheme::Rsq => vec![(0..cfg.n_q).map(|_| scalar()).collect::<Result<_>>()?],
            Scheme::Rvq => {
                vec![(0..cfg.n_q)
                    .map(|i| vq(cfg.dim, i as u64))
                    .collect::<Result<_>>()?]
            }
            Scheme::SqRvq => {
                let mut chain = vec![scalar()?];
                for i in 1..cfg.n_q {
                    chain.push(vq(cfg.dim, i as u64)?);
                }
                vec![chain]
            }
            Scheme::GroupSqRvq => {
                if cfg.group_count == 0 || !cfg.dim.is_multiple_of(cfg.group_count) {
                    return Err(Error::Config(format!(
                        "dim {} not divisible by group_count {}",
                        cfg.dim, cfg.group_count
                    )));
                }
                let group_dim = cfg.dim / cfg.group_count;
                let mut chains = Vec::with_capacity(cfg.group_count);
                for g in 0..cfg.group_count {
                    let mut chain = vec![scalar()?];
                    for i in 1..cfg.n_q {
                        chain.push(vq(group_dim, (g * cfg.n_q + i) as u64)?);
                    }
                    chains.push(chain);
                }
                chains
            }
            Scheme::SqParRvq => {
                let sq_branch = vec![scalar()?];
                let rvq_branch = (0..cfg.n_q)
                    .map(|i| vq(cfg.dim, i as u64))
                    .collect::<Result<_>>()?;
                vec![sq_branch, rvq_branch]
            }
            Scheme::Rfsq => vec![(0..cfg.n_q)
                .map(|_| FsqStage::uniform(cfg.dim, cfg.fsq_levels).map(Stage::Fsq))
                .collect::<Result<_>>()?],
            Scheme::Rlfq => vec![(0..cfg.n_q)
                .map(|_| {
                    LfqStage::new(cfg.dim, cfg.lfq_delta, cfg.reserved_zero).map(Stage::Lfq)
                })
                .collect::<Result<_>>()?],
        };

        Ok(Self {
            scheme: cfg.scheme,
            dim: cfg.dim,
            group_count: if cfg.scheme == Scheme::GroupSqRvq {
                cfg.group_count
            } else {
                1
            },
            parallel_weight: cfg.parallel_weight,
            reserved_zero: cfg.reserved_zero,
            chains,
        })
    }

    pub(crate) fn from_parts(
        scheme: Scheme,
        dim: usize,
        group_count: usize,
        parallel_weight: f64,
        reserved_zero: bool,
        chains: Vec<Vec<Stage>>,
    ) -> Result<Self> {
        let stack = Self {
            scheme,
            dim,
            group_count,
            parallel_weight,
            reserved_zero,
            chains,
        };
        stack.validate()?;
        Ok(stack)
    }

    fn validate(&self) -> Result<()> {
        let expected_chains = match self.scheme {
            Scheme::GroupSqRvq => self.group_count,
            Scheme::SqParRvq => 2,
            _ => 1,
        };
        if self.chains.len() != expected_chains {
            return Err(Error::Config(format!(
                "scheme {} expects {expected_chains} chains, found {}",
                self.scheme,
                self.chains.len()
            )));
        }
        if self.scheme == Scheme::GroupSqRvq && !self.dim.is_multiple_of(self.group_count) {
            return Err(Error::Config("dim not divisible by group_count".into()));
        }
        for chain in &self.chains {
            if chain.is_empty() {
                return Err(Error::Config("empty stage chain".into()));
            }
        }
        Ok(())
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn parallel_weight(&self) -> f64 {
        self.parallel_weight
    }

    pub fn reserved_zero(&self) -> bool {
        self.reserved_zero
    }

    /// Stage count of the (first) chain.
    pub fn n_stages(&self) -> usize {
        match self.scheme {
            Scheme::SqParRvq => self.chains[1].len(),
            _ => self.chains[0].len(),
        }
    }

    pub fn chains(&self) -> &[Vec<Stage>] {
        &self.chains
    }

    /// Mutable access for training; chain structure must stay intact.
    pub(crate) fn chains_mut(&mut self) -> &mut Vec<Vec<Stage>> {
        &mut self.chains
    }

    /// Width of each column block a chain operates on.
    pub(crate) fn chain_dim(&self) -> usize {
        match self.scheme {
            Scheme::GroupSqRvq => self.dim / self.group_count,
            _ => self.dim,
        }
    }
}

/// Codes emitted by [`quantize`]; enough to reconstruct the quantized
/// features exactly with the same stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Codes {
    pub scheme: Scheme,
    pub frames: usize,
    pub dim: usize,
    /// Mirrors the stack's chain structure.
    pub chains: Vec<Vec<StageCodes>>,
}

/// Output of [`quantize`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeResult {
    pub codes: Codes,
    /// The reconstruction the codes decode to.
    pub quantized: FeatureMatrix,
    /// Residual energy (sum of squares over all frames and dims) before
    /// quantization and after each stage. For the parallel scheme this
    /// tracks the residual branch; the scalar branch has no residual chain.
    pub per_stage_residual_energy: Vec<f64>,
}

fn sq_sum(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

struct ChainRun {
    codes: Vec<StageCodes>,
    sum: Array2<f64>,
    energies: Vec<f64>,
}

fn run_chain(chain: &[Stage], input: ArrayView2<'_, f64>) -> Result<ChainRun> {
    let frames = input.nrows();
    let dim = input.ncols();
    let mut residual = input.to_owned();
    let mut sum = Array2::<f64>::zeros((frames, dim));
    let mut energies = Vec::with_capacity(chain.len() + 1);
    energies.push(sq_sum(&residual));
    let mut codes = Vec::with_capacity(chain.len());
    for stage in chain {
        let stage_codes = stage.encode(residual.view())?;
        let out = stage.reconstruct(&stage_codes, frames, dim)?;
        residual -= &out;
        sum += &out;
        energies.push(sq_sum(&residual));
        codes.push(stage_codes);
    }
    Ok(ChainRun {
        codes,
        sum,
        energies,
    })
}

/// Decode a chain's codes back into its summed reconstruction, adding stage
/// outputs in the same order `run_chain` did.
fn decode_chain(
    chain: &[Stage],
    codes: &[StageCodes],
    frames: usize,
    dim: usize,
) -> Result<Array2<f64>> {
    if chain.len() != codes.len() {
        return Err(Error::Config(format!(
            "stack chain has {} stages, codes carry {}",
            chain.len(),
            codes.len()
        )));
    }
    let mut sum = Array2::<f64>::zeros((frames, dim));
    for (stage, stage_codes) in chain.iter().zip(codes) {
        sum += &stage.reconstruct(stage_codes, frames, dim)?;
    }
    Ok(sum)
}

/// Run a feature matrix through the stack.
pub fn quantize(stack: &QuantizerStack, z: &FeatureMatrix) -> Result<QuantizeResult> {
    if z.dim() != stack.dim() {
        return Err(Error::ShapeMismatch(format!(
            "features of dim {} into stack of dim {}",
            z.dim(),
            stack.dim()
        )));
    }
    let frames = z.frames();
    match stack.scheme {
        Scheme::GroupSqRvq => {
            let group_dim = stack.chain_dim();
            let mut chains = Vec::with_capacity(stack.group_count);
            let mut quantized = Array2::<f64>::zeros((frames, stack.dim));
            let mut energies: Vec<f64> = Vec::new();
            for (g, chain) in stack.chains.iter().enumerate() {
                let cols = s![.., g * group_dim..(g + 1) * group_dim];
                let run = run_chain(chain, z.data.slice(cols))?;
                quantized.slice_mut(cols).assign(&run.sum);
                if energies.is_empty() {
                    energies = run.energies;
                } else {
                    for (acc, e) in energies.iter_mut().zip(&run.energies) {
                        *acc += e;
                    }
                }
                chains.push(run.codes);
            }
            Ok(QuantizeResult {
                codes: Codes {
                    scheme: stack.scheme,
                    frames,
                    dim: stack.dim,
                    chains,
                },
                quantized: FeatureMatrix::new(quantized)?,
                per_stage_residual_energy: energies,
            })
        }
        Scheme::SqParRvq => {
            let sq_run = run_chain(&stack.chains[0], z.data.view())?;
            let rvq_run = run_chain(&stack.chains[1], z.data.view())?;
            let w = stack.parallel_weight;
            let quantized = &sq_run.sum * w + &rvq_run.sum * (1.0 - w);
            Ok(QuantizeResult {
                codes: Codes {
                    scheme: stack.scheme,
                    frames,
                    dim: stack.dim,
                    chains: vec![sq_run.codes, rvq_run.codes],
                },
                quantized: FeatureMatrix::new(quantized)?,
                per_stage_residual_energy: rvq_run.energies,
            })
        }
        _ => {
            let run = run_chain(&stack.chains[0], z.data.view())?;
            Ok(QuantizeResult {
                codes: Codes {
                    scheme: stack.scheme,
                    frames,
                    dim: stack.dim,
                    chains: vec![run.codes],
                },
                quantized: FeatureMatrix::new(run.sum)?,
                per_stage_residual_energy: run.energies,
            })
        }
    }
}

/// Reconstruct features from codes. Bit-identical to the `quantized` field
/// the codes were produced with.
pub fn dequantize(stack: &QuantizerStack, codes: &Codes) -> Result<FeatureMatrix> {
    if codes.scheme != stack.scheme {
        return Err(Error::Config(format!(
            "codes for scheme {} fed to stack of scheme {}",
            codes.scheme, stack.scheme
        )));
    }
    if codes.dim != stack.dim {
        return Err(Error::ShapeMismatch(format!(
            "codes of dim {} into stack of dim {}",
            codes.dim, stack.dim
        )));
    }
    if codes.chains.len() != stack.chains.len() {
        return Err(Error::Config(format!(
            "codes carry {} chains, stack has {}",
            codes.chains.len(),
            stack.chains.len()
        )));
    }
    let frames = codes.frames;
    match stack.scheme {
        Scheme::GroupSqRvq => {
            let group_dim = stack.chain_dim();
            let mut out = Array2::<f64>::zeros((frames, stack.dim));
            for (g, (chain, chain_codes)) in
                stack.chains.iter().zip(&codes.chains).enumerate()
            {
                let decoded = decode_chain(chain, chain_codes, frames, group_dim)?;
                out.slice_mut(s![.., g * group_dim..(g + 1) * group_dim])
                    .assign(&decoded);
            }
            FeatureMatrix::new(out)
        }
        Scheme::SqParRvq => {
            let sq = decode_chain(&stack.chains[0], &codes.chains[0], frames, stack.dim)?;
            let rvq = decode_chain(&stack.chains[1], &codes.chains[1], frames, stack.dim)?;
            let w = stack.parallel_weight;
            FeatureMatrix::new(&sq * w + &rvq * (1.0 - w))
        }
        _ => FeatureMatrix::new(decode_chain(
            &stack.chains[0],
            &codes.chains[0],
            frames,
            stack.dim,
        )?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_features(frames: usize, dim: usize, seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        FeatureMatrix::new(Array2::from_shape_fn((frames, dim), |_| {
            rng.random_range(-1.5..1.5)
        }))
        .unwrap()
    }

    fn desk_stack(scheme: Scheme, seed: u64) -> QuantizerStack {
        QuantizerStack::build(&StackConfig {
            init_seed: seed,
            ..StackConfig::desk(scheme, 8, 16)
        })
        .unwrap()
    }

    #[test]
    fn every_scheme_round_trips_bit_exactly() {
        let z = random_features(13, 8, 1);
        for scheme in Scheme::ALL {
            let stack = desk_stack(scheme, 3);
            let result = quantize(&stack, &z).unwrap();
            let back = dequantize(&stack, &result.codes).unwrap();
            assert_eq!(back.data, result.quantized.data, "scheme {scheme}");
        }
    }

    #[test]
    fn residual_energy_never_increases() {
        for scheme in Scheme::ALL {
            let stack = desk_stack(scheme, 5);
            for seed in 0..8 {
                let z = random_features(6, 8, 100 + seed);
                let result = quantize(&stack, &z).unwrap();
                let e = &result.per_stage_residual_energy;
                for w in e.windows(2) {
                    assert!(
                        w[1] <= w[0] + 1e-9,
                        "scheme {scheme}: energies {e:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn additive_schemes_sum_their_stage_outputs() {
        let z = random_features(9, 8, 2);
        for scheme in [Scheme::Rsq, Scheme::Rvq, Scheme::SqRvq, Scheme::Rfsq, Scheme::Rlfq] {
            let stack = desk_stack(scheme, 7);
            let result = quantize(&stack, &z).unwrap();
            let mut sum = Array2::<f64>::zeros((9, 8));
            for (stage, codes) in stack.chains()[0].iter().zip(&result.codes.chains[0]) {
                sum += &stage.reconstruct(codes, 9, 8).unwrap();
            }
            let err: f64 = (&sum - &result.quantized.data)
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9, "scheme {scheme}: max err {err}");
        }
    }

    #[test]
    fn rvq_exact_code_terminates_in_zeros() {
        let mut stack = desk_stack(Scheme::Rvq, 9);
        let z = random_features(1, 8, 3);
        // plant the feature row as code 5 of stage 1
        let row: Vec<f32> = z.data.row(0).iter().map(|v| *v as f32).collect();
        if let Stage::Vq(cb) = &mut stack.chains_mut()[0][0] {
            cb.set_vector(5, &row).unwrap();
        }
        let z32 = FeatureMatrix::new(z.data.mapv(|v| f64::from(v as f32))).unwrap();
        let result = quantize(&stack, &z32).unwrap();
        // stage 1 hits code 5, residual zero, remaining stages emit code 0
        match &result.codes.chains[0][0] {
            StageCodes::Vq { indices } => assert_eq!(indices[0], 5),
            _ => panic!("expected vq codes"),
        }
        for stage_codes in &result.codes.chains[0][1..] {
            match stage_codes {
                StageCodes::Vq { indices } => assert_eq!(indices[0], 0),
                _ => panic!("expected vq codes"),
            }
        }
        assert_eq!(result.quantized.data, z32.data);
    }

    #[test]
    fn parallel_endpoints_match_branches() {
        let z = random_features(7, 8, 4);
        for (w, reference_scheme) in [(1.0, Scheme::Sq), (0.0, Scheme::Rvq)] {
            let stack = QuantizerStack::build(&StackConfig {
                parallel_weight: w,
                init_seed: 11,
                ..StackConfig::desk(Scheme::SqParRvq, 8, 16)
            })
            .unwrap();
            let reference = QuantizerStack::build(&StackConfig {
                init_seed: 11,
                ..StackConfig::desk(reference_scheme, 8, 16)
            })
            .unwrap();
            let a = quantize(&stack, &z).unwrap();
            let b = quantize(&reference, &z).unwrap();
            for (x, y) in a.quantized.data.iter().zip(b.quantized.data.iter()) {
                assert!((x - y).abs() < 1e-12, "w = {w}");
            }
        }
    }

    #[test]
    fn sq_rvq_with_zero_only_codebooks_equals_sq() {
        let stack = QuantizerStack::build(&StackConfig {
            codebook_size: 1,
            init_seed: 1,
            ..StackConfig::desk(Scheme::SqRvq, 8, 1)
        })
        .unwrap();
        let z = random_features(11, 8, 5);
        let result = quantize(&stack, &z).unwrap();
        let sq = super::super::scalar_quantize(&z, 8).unwrap();
        assert_eq!(result.quantized.data, sq.data);
    }

    #[test]
    fn grouped_scheme_concatenates_blocks() {
        let stack = desk_stack(Scheme::GroupSqRvq, 6);
        assert_eq!(stack.group_count(), 2);
        let z = random_features(5, 8, 6);
        let result = quantize(&stack, &z).unwrap();
        let back = dequantize(&stack, &result.codes).unwrap();
        assert_eq!(back.data, result.quantized.data);
        assert_eq!(result.codes.chains.len(), 2);
    }

    #[test]
    fn more_stages_never_hurt() {
        let z = random_features(16, 8, 7);
        for n_q in 1..=6usize {
            let a = QuantizerStack::build(&StackConfig {
                n_q,
                init_seed: 13,
                ..StackConfig::desk(Scheme::Rvq, 8, 16)
            })
            .unwrap();
            let b = QuantizerStack::build(&StackConfig {
                n_q: n_q + 1,
                init_seed: 13,
                ..StackConfig::desk(Scheme::Rvq, 8, 16)
            })
            .unwrap();
            let mse_a = quantize(&a, &z).unwrap().quantized.mse_to(&z).unwrap();
            let mse_b = quantize(&b, &z).unwrap().quantized.mse_to(&z).unwrap();
            assert!(mse_b <= mse_a + 1e-12, "n_q {n_q}: {mse_b} vs {mse_a}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let stack = desk_stack(Scheme::Rvq, 8);
        let z = random_features(4, 5, 8);
        assert!(quantize(&stack, &z).is_err());
    }

    #[test]
    fn group_count_must_divide_dim() {
        let cfg = StackConfig {
            group_count: 3,
            ..StackConfig::desk(Scheme::GroupSqRvq, 8, 16)
        };
        assert!(QuantizerStack::build(&cfg).is_err());
    }
}
