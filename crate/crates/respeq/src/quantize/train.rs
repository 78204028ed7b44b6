//! Codebook training: k-means++ seeding, Lloyd refinement, EMA updates.

use std::collections::HashSet;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

use super::stack::{quantize, QuantizerStack};
use super::stage::{Codebook, Stage};
use super::{FeatureMatrix, Scheme};

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// EMA passes over the training set.
    pub epochs: usize,
    /// EMA decay gamma; 0 reduces each epoch to a full-batch k-means step.
    pub ema_decay: f64,
    /// Lloyd iterations refining the k-means++ seeding before EMA starts.
    pub kmeans_init_iters: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            ema_decay: 0.99,
            kmeans_init_iters: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("training needs at least one epoch".into()));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!(
                "ema_decay must be in [0,1), got {}",
                self.ema_decay
            )));
        }
        Ok(())
    }
}

/// Per-codebook training report.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrainStats {
    pub chain: usize,
    pub stage: usize,
    /// Assignment MSE per element, recorded at the start of each epoch.
    pub per_epoch_mse: Vec<f64>,
    /// Dead codes reseeded at the end of each epoch.
    pub dead_codes_reseeded: Vec<usize>,
    /// Set when the codebook has more codes than distinct training rows.
    pub distinct_warning: bool,
}

/// Full training report.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    pub stages: Vec<StageTrainStats>,
    /// Quantization MSE of the trained stack over the training set.
    pub final_mse: f64,
}

fn stage_seed(base: u64, chain: usize, stage: usize) -> u64 {
    let mut z = base
        .wrapping_add((chain as u64).wrapping_mul(0xA076_1D64_78BD_642F))
        .wrapping_add((stage as u64 + 1).wrapping_mul(0xE703_7ED1_A0B4_28DB));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^ (z >> 31)
}

/// Nearest code and its squared distance, scanning every code.
fn assign(cb: &Codebook, row: ArrayView1<'_, f64>) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_dist = cb.distance_sq(row, 0);
    for index in 1..cb.n_codes() {
        let dist = cb.distance_sq(row, index);
        if dist < best_dist {
            best = index;
            best_dist = dist;
        }
    }
    (best, best_dist)
}

fn sq_dist_f64(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// k-means++ seeding over `rows`, returning `k` centers in f64.
fn kmeans_pp_init(
    rows: ArrayView2<'_, f64>,
    k: usize,
    rng: &mut ChaCha12Rng,
) -> Array2<f64> {
    let n = rows.nrows();
    let dim = rows.ncols();
    let mut centers = Array2::<f64>::zeros((k, dim));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&rows.row(first));

    let mut min_dist: Vec<f64> = (0..n)
        .map(|i| sq_dist_f64(rows.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = min_dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, d) in min_dist.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&rows.row(pick));
        for (i, d) in min_dist.iter_mut().enumerate() {
            let dist = sq_dist_f64(rows.row(i), centers.row(c));
            if dist < *d {
                *d = dist;
            }
        }
    }
    centers
}

/// Lloyd iterations over f64 centers (free codes only).
fn lloyd_refine(rows: ArrayView2<'_, f64>, centers: &mut Array2<f64>, iters: usize) {
    let n = rows.nrows();
    let k = centers.nrows();
    let dim = centers.ncols();
    for _ in 0..iters {
        let mut sums = Array2::<f64>::zeros((k, dim));
        let mut counts = vec![0.0f64; k];
        for i in 0..n {
            let row = rows.row(i);
            let mut best = 0usize;
            let mut best_dist = sq_dist_f64(row, centers.row(0));
            for c in 1..k {
                let dist = sq_dist_f64(row, centers.row(c));
                if dist < best_dist {
                    best = c;
                    best_dist = dist;
                }
            }
            counts[best] += 1.0;
            let mut target = sums.row_mut(best);
            target += &row;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0.0 {
                let mean = sums.row(c).mapv(|v| v / count);
                centers.row_mut(c).assign(&mean);
            }
        }
    }
}

/// Train one codebook on a residual stream.
fn train_single(
    cb: &mut Codebook,
    rows: ArrayView2<'_, f64>,
    cfg: &TrainConfig,
    seed: u64,
    chain: usize,
    stage: usize,
) -> Result<StageTrainStats> {
    let n = rows.nrows();
    let dim = rows.ncols();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let distinct = {
        let mut set = HashSet::new();
        for row in rows.rows() {
            let bits: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            set.insert(bits);
        }
        set.len()
    };
    let distinct_warning = cb.n_codes() > distinct;

    let first_free = cb.first_free();
    let n_free = cb.n_codes() - first_free;
    let mut stats = StageTrainStats {
        chain,
        stage,
        per_epoch_mse: Vec::with_capacity(cfg.epochs),
        dead_codes_reseeded: Vec::with_capacity(cfg.epochs),
        distinct_warning,
    };
    if n_free == 0 {
        return Ok(stats);
    }

    let mut centers = kmeans_pp_init(rows, n_free, &mut rng);
    lloyd_refine(rows, &mut centers, cfg.kmeans_init_iters);
    for (offset, center) in centers.rows().into_iter().enumerate() {
        let values: Vec<f32> = center.iter().map(|v| *v as f32).collect();
        cb.set_vector(first_free + offset, &values)?;
    }

    let gamma = cfg.ema_decay;
    for _epoch in 0..cfg.epochs {
        let mut counts = vec![0.0f64; cb.n_codes()];
        let mut sums = Array2::<f64>::zeros((cb.n_codes(), dim));
        let mut err = 0.0f64;
        for i in 0..n {
            let row = rows.row(i);
            let (idx, dist) = assign(cb, row);
            err += dist;
            counts[idx] += 1.0;
            let mut target = sums.row_mut(idx);
            target += &row;
        }
        stats.per_epoch_mse.push(err / (n * dim) as f64);

        for (c, &count) in counts.iter().enumerate() {
            cb.ema_counts[c] = gamma * cb.ema_counts[c] + (1.0 - gamma) * count;
            let blended: Array1<f64> = cb
                .ema_sums
                .row(c)
                .iter()
                .zip(sums.row(c).iter())
                .map(|(old, new)| gamma * old + (1.0 - gamma) * new)
                .collect();
            cb.ema_sums.row_mut(c).assign(&blended);
        }
        for c in first_free..cb.n_codes() {
            if cb.ema_counts[c] > 0.0 {
                let values: Vec<f32> = cb
                    .ema_sums
                    .row(c)
                    .iter()
                    .map(|v| (*v / cb.ema_counts[c]) as f32)
                    .collect();
                cb.set_vector(c, &values)?;
            }
        }

        // Reseed codes whose running weight collapsed.
        let avg: f64 =
            cb.ema_counts[first_free..].iter().sum::<f64>() / n_free as f64;
        let mut reseeded = 0usize;
        if avg > 0.0 {
            for c in first_free..cb.n_codes() {
                if cb.ema_counts[c] < 1e-3 * avg {
                    let pick = rng.random_range(0..n);
                    let values: Vec<f32> =
                        rows.row(pick).iter().map(|v| *v as f32).collect();
                    cb.set_vector(c, &values)?;
                    cb.ema_counts[c] = 0.0;
                    cb.ema_sums.row_mut(c).fill(0.0);
                    reseeded += 1;
                }
            }
        }
        stats.dead_codes_reseeded.push(reseeded);
    }

    Ok(stats)
}

/// Train every codebook in the stack, stage by stage along each chain's
/// residual stream. Scalar, finite-scalar, and sign stages have nothing to
/// train but still shape the stream feeding later codebooks.
pub fn train_codebooks(
    stack: &mut QuantizerStack,
    data: &[FeatureMatrix],
    cfg: &TrainConfig,
) -> Result<TrainStats> {
    cfg.validate()?;
    if data.is_empty() || data.iter().all(|m| m.frames() == 0) {
        return Err(Error::Config("training data is empty".into()));
    }
    let dim = stack.dim();
    for m in data {
        if m.dim() != dim {
            return Err(Error::ShapeMismatch(format!(
                "training matrix of dim {} into stack of dim {}",
                m.dim(),
                dim
            )));
        }
    }

    let total_frames: usize = data.iter().map(|m| m.frames()).sum();
    let chain_dim = stack.chain_dim();
    let scheme = stack.scheme();
    let group_count = stack.group_count();
    let base_seed = cfg.seed;

    let mut stages_stats = Vec::new();
    for chain_idx in 0..stack.chains().len() {
        // Column block this chain sees.
        let col_start = match scheme {
            Scheme::GroupSqRvq => chain_idx * chain_dim,
            _ => 0,
        };
        let _ = group_count;
        let mut residual = Array2::<f64>::zeros((total_frames, chain_dim));
        let mut row = 0usize;
        for m in data {
            let block = m.data.slice(s![.., col_start..col_start + chain_dim]);
            residual
                .slice_mut(s![row..row + m.frames(), ..])
                .assign(&block);
            row += m.frames();
        }

        let n_stages = stack.chains()[chain_idx].len();
        for stage_idx in 0..n_stages {
            if let Stage::Vq(cb) = &mut stack.chains_mut()[chain_idx][stage_idx] {
                let stats = train_single(
                    cb,
                    residual.view(),
                    cfg,
                    stage_seed(base_seed, chain_idx, stage_idx),
                    chain_idx,
                    stage_idx,
                )?;
                stages_stats.push(stats);
            }
            let stage = &stack.chains()[chain_idx][stage_idx];
            let codes = stage.encode(residual.view())?;
            let out = stage.reconstruct(&codes, total_frames, chain_dim)?;
            residual -= &out;
        }
    }

    let mut total_err = 0.0f64;
    let mut total_elems = 0usize;
    for m in data {
        let q = quantize(stack, m)?;
        total_err += m
            .data
            .iter()
            .zip(q.quantized.data.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        total_elems += m.frames() * m.dim();
    }

    Ok(TrainStats {
        stages: stages_stats,
        final_mse: total_err / total_elems.max(1) as f64,
    })
}
