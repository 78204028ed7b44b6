//! Losses and metrics as pure functions.
//!
//! Everything here is stateless and reduces with a fixed summation order,
//! so repeated evaluation is bit-reproducible.

use ndarray::Array2;

use crate::dsp::{stft, StftConfig, WindowKind};
use crate::error::{Error, Result};
use crate::quantize::FeatureMatrix;
use crate::Waveform;

/// SI-SDR is clamped to this symmetric range so degenerate cases (exact
/// match, zero estimate) stay finite.
pub const SI_SDR_CAP_DB: f64 = 120.0;

const SI_SDR_EPS: f64 = 1e-12;

/// Scale-invariant signal-to-distortion ratio in dB.
///
/// The estimate is projected onto the reference
/// (`alpha = <est, ref> / ||ref||^2`) and the energy ratio of the projected
/// target to the residual is reported, clamped to +/-[`SI_SDR_CAP_DB`].
pub fn si_sdr(est: &Waveform, reference: &Waveform) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    let ref_energy = reference.energy();
    if ref_energy <= 0.0 {
        return Err(Error::ZeroPower("reference is silent".into()));
    }
    let dot: f64 = est
        .samples
        .iter()
        .zip(&reference.samples)
        .map(|(e, r)| e * r)
        .sum();
    let alpha = dot / ref_energy;
    let mut target_energy = 0.0f64;
    let mut residual_energy = 0.0f64;
    for (e, r) in est.samples.iter().zip(&reference.samples) {
        let t = alpha * r;
        target_energy += t * t;
        let d = t - e;
        residual_energy += d * d;
    }
    if target_energy == 0.0 {
        // nothing of the reference survives in the estimate
        return Ok(-SI_SDR_CAP_DB);
    }
    // epsilon scales with the target so an exact match hits the cap at any
    // signal level
    let value =
        10.0 * (target_energy / (residual_energy + SI_SDR_EPS * target_energy)).log10();
    Ok(value.clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB))
}

/// Denoising loss: `-si_sdr(est, ref) + lambda * mean |(|Est| - |Ref|)|`
/// over STFT magnitude cells.
pub fn dn_loss(
    est: &Waveform,
    reference: &Waveform,
    cfg: &StftConfig,
    lambda: f64,
) -> Result<f64> {
    let sdr = si_sdr(est, reference)?;
    let mag_est = stft(est, cfg)?.magnitude();
    let mag_ref = stft(reference, cfg)?.magnitude();
    let n = mag_est.len().max(1) as f64;
    let l1: f64 = mag_est
        .iter()
        .zip(mag_ref.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    Ok(-sdr + lambda * l1)
}

/// Per-cell weights emphasizing over-suppressed spectral regions.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    /// Weight per cell: 1 outside the mask, in [1, 2] inside.
    pub alpha: Array2<f64>,
    /// 1 where the reference magnitude exceeds the threshold.
    pub mask: Array2<u8>,
    pub threshold: f64,
}

pub const WEIGHT_MAP_THRESHOLD: f64 = 1e-8;

/// Build the weight map from denoised and reference magnitudes.
///
/// The magnitude deficit `d = |Est| - |Ref|` is doubled where negative
/// (over-suppression), normalized by its largest masked-in absolute value,
/// and mapped to `alpha = 1 + |d'| / max|d'|` on masked-in cells. Cells
/// whose reference magnitude is at or below the threshold keep `alpha = 1`.
pub fn weight_map(
    mag_denoised: &Array2<f64>,
    mag_ref: &Array2<f64>,
    threshold: f64,
) -> Result<WeightMap> {
    if mag_denoised.dim() != mag_ref.dim() {
        return Err(Error::ShapeMismatch(format!(
            "denoised {:?} vs reference {:?}",
            mag_denoised.dim(),
            mag_ref.dim()
        )));
    }
    let mask = mag_ref.mapv(|m| u8::from(m > threshold));
    let mut emphasized = Array2::<f64>::zeros(mag_denoised.dim());
    let mut max_abs = 0.0f64;
    for ((idx, d), r) in mag_denoised.indexed_iter().zip(mag_ref.iter()) {
        let delta = d - r;
        let doubled = if delta < 0.0 { 2.0 * delta } else { delta };
        emphasized[idx] = doubled;
        if mask[idx] == 1 {
            max_abs = max_abs.max(doubled.abs());
        }
    }
    let alpha = if max_abs > 0.0 {
        let mut alpha = Array2::<f64>::ones(mag_denoised.dim());
        for (idx, a) in alpha.indexed_iter_mut() {
            if mask[idx] == 1 {
                *a = 1.0 + emphasized[idx].abs() / max_abs;
            }
        }
        alpha
    } else {
        Array2::ones(mag_denoised.dim())
    };
    Ok(WeightMap {
        alpha,
        mask,
        threshold,
    })
}

/// Weighted denoising loss: the L1 magnitude term of [`dn_loss`] scaled
/// per cell by the [`weight_map`] alpha.
pub fn weighted_dn_loss(
    est: &Waveform,
    reference: &Waveform,
    cfg: &StftConfig,
    lambda: f64,
) -> Result<f64> {
    let sdr = si_sdr(est, reference)?;
    let mag_est = stft(est, cfg)?.magnitude();
    let mag_ref = stft(reference, cfg)?.magnitude();
    let weights = weight_map(&mag_est, &mag_ref, WEIGHT_MAP_THRESHOLD)?;
    let n = mag_est.len().max(1) as f64;
    let weighted_l1: f64 = mag_est
        .iter()
        .zip(mag_ref.iter())
        .zip(weights.alpha.iter())
        .map(|((a, b), w)| w * (a - b).abs())
        .sum::<f64>()
        / n;
    Ok(-sdr + lambda * weighted_l1)
}

/// Resolutions and sub-band split for [`mr_stft_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct MrStftConfig {
    pub resolutions: Vec<StftConfig>,
    /// Contiguous frequency bands each resolution is also scored on.
    pub subbands: usize,
}

impl Default for MrStftConfig {
    fn default() -> Self {
        let res = |fft, hop| StftConfig::new(fft, hop, WindowKind::Hann, true).unwrap();
        Self {
            resolutions: vec![res(512, 128), res(1024, 256), res(2048, 512)],
            subbands: 4,
        }
    }
}

fn spectral_convergence(est: &Array2<f64>, reference: &Array2<f64>) -> f64 {
    let mut diff = 0.0f64;
    let mut norm = 0.0f64;
    for (a, b) in est.iter().zip(reference.iter()) {
        diff += (a - b) * (a - b);
        norm += b * b;
    }
    if diff == 0.0 {
        0.0
    } else {
        diff.sqrt() / norm.sqrt().max(1e-15)
    }
}

const LOG_MAG_FLOOR: f64 = 1e-12;

fn log_mag_l1(est: &Array2<f64>, reference: &Array2<f64>) -> f64 {
    let n = est.len().max(1) as f64;
    est.iter()
        .zip(reference.iter())
        .map(|(a, b)| (a.max(LOG_MAG_FLOOR).ln() - b.max(LOG_MAG_FLOOR).ln()).abs())
        .sum::<f64>()
        / n
}

/// Per-resolution (spectral-convergence, log-magnitude) components,
/// each averaging the full-band term with the sub-band mean.
pub fn mr_stft_terms(
    est: &Waveform,
    reference: &Waveform,
    cfg: &MrStftConfig,
) -> Result<Vec<(f64, f64)>> {
    if est.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    if cfg.resolutions.is_empty() || cfg.subbands == 0 {
        return Err(Error::Config("mr-stft needs resolutions and subbands >= 1".into()));
    }
    let mut terms = Vec::with_capacity(cfg.resolutions.len());
    for res in &cfg.resolutions {
        let mag_est = stft(est, res)?.magnitude();
        let mag_ref = stft(reference, res)?.magnitude();
        let sc_full = spectral_convergence(&mag_est, &mag_ref);
        let lm_full = log_mag_l1(&mag_est, &mag_ref);

        let bins = mag_est.ncols();
        let bands = cfg.subbands.min(bins).max(1);
        let mut sc_bands = 0.0f64;
        let mut lm_bands = 0.0f64;
        for b in 0..bands {
            let lo = b * bins / bands;
            let hi = ((b + 1) * bins / bands).max(lo + 1);
            let est_band = mag_est.slice(ndarray::s![.., lo..hi]).to_owned();
            let ref_band = mag_ref.slice(ndarray::s![.., lo..hi]).to_owned();
            sc_bands += spectral_convergence(&est_band, &ref_band);
            lm_bands += log_mag_l1(&est_band, &ref_band);
        }
        sc_bands /= bands as f64;
        lm_bands /= bands as f64;

        terms.push((0.5 * (sc_full + sc_bands), 0.5 * (lm_full + lm_bands)));
    }
    Ok(terms)
}

/// Multi-resolution STFT loss: mean over resolutions of spectral
/// convergence plus log-magnitude L1, scored over the full band and the
/// configured sub-band partition. Zero exactly when the magnitudes match
/// at every resolution.
pub fn mr_stft_loss(est: &Waveform, reference: &Waveform, cfg: &MrStftConfig) -> Result<f64> {
    let terms = mr_stft_terms(est, reference, cfg)?;
    Ok(terms.iter().map(|(sc, lm)| sc + lm).sum::<f64>() / terms.len() as f64)
}

/// Mean squared difference between encoder output and its quantization.
pub fn commitment_loss(z: &FeatureMatrix, zq: &FeatureMatrix) -> Result<f64> {
    z.mse_to(zq)
}

/// Which side of the adversarial game a hinge score belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HingeSide {
    Generator,
    DiscriminatorReal,
    DiscriminatorFake,
}

/// Hinge loss over discriminator scores: `mean(relu(1 - s))` for the
/// generator and real sides, `mean(relu(1 + s))` for the fake side.
pub fn hinge_adv_loss(scores: &[f64], side: HingeSide) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Config("hinge loss needs at least one score".into()));
    }
    let total: f64 = scores
        .iter()
        .map(|s| match side {
            HingeSide::Generator | HingeSide::DiscriminatorReal => (1.0 - s).max(0.0),
            HingeSide::DiscriminatorFake => (1.0 + s).max(0.0),
        })
        .sum();
    Ok(total / scores.len() as f64)
}

/// L1 feature-matching loss: mean absolute difference per layer, averaged
/// over layers.
pub fn feature_match_loss(est: &[Array2<f64>], reference: &[Array2<f64>]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} estimate layers vs {} reference layers",
            est.len(),
            reference.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::Config("feature match loss needs at least one layer".into()));
    }
    let mut total = 0.0f64;
    for (layer, (a, b)) in est.iter().zip(reference).enumerate() {
        if a.dim() != b.dim() {
            return Err(Error::ShapeMismatch(format!(
                "layer {layer}: {:?} vs {:?}",
                a.dim(),
                b.dim()
            )));
        }
        let n = a.len().max(1) as f64;
        total += a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / n;
    }
    Ok(total / est.len() as f64)
}

/// Weights of the codec training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub w_rec: f64,
    pub w_adv: f64,
    pub w_feat: f64,
    pub w_com: f64,
    /// Magnitude-term weight of the denoising losses.
    pub lambda_dn: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_rec: 1.0,
            w_adv: 1.0,
            w_feat: 20.0,
            w_com: 10.0,
            lambda_dn: 1000.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_rec", self.w_rec),
            ("w_adv", self.w_adv),
            ("w_feat", self.w_feat),
            ("w_com", self.w_com),
            ("lambda_dn", self.lambda_dn),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// The four codec loss parts, pre-weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompositeParts {
    pub reconstruction: f64,
    pub adversarial: f64,
    pub feature_match: f64,
    pub commitment: f64,
}

/// Weighted sum of the codec loss parts.
pub fn codec_composite_loss(parts: &CompositeParts, weights: &LossWeights) -> Result<f64> {
    weights.validate()?;
    for (name, v) in [
        ("reconstruction", parts.reconstruction),
        ("adversarial", parts.adversarial),
        ("feature_match", parts.feature_match),
        ("commitment", parts.commitment),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("composite loss part {name}")));
        }
    }
    Ok(weights.w_rec * parts.reconstruction
        + weights.w_adv * parts.adversarial
        + weights.w_feat * parts.feature_match
        + weights.w_com * parts.commitment)
}

/// Gate for [`log_spectral_distance`]: cells whose reference magnitude is
/// at or below this are excluded.
pub const LSD_FLOOR: f64 = 1e-8;

/// Root-mean-square log-magnitude distance in dB over reference-active
/// cells. Zero exactly when the gated magnitudes agree.
pub fn log_spectral_distance(
    est: &Waveform,
    reference: &Waveform,
    cfg: &StftConfig,
) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    let mag_est = stft(est, cfg)?.magnitude();
    let mag_ref = stft(reference, cfg)?.magnitude();
    let mut total = 0.0f64;
    let mut count = 0usize;
    for (a, b) in mag_est.iter().zip(mag_ref.iter()) {
        if *b > LSD_FLOOR {
            let db = 20.0 * (a.max(LSD_FLOOR).log10() - b.log10());
            total += db * db;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::ZeroPower("reference spectrogram below the gate".into()));
    }
    Ok((total / count as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_wave(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 16000).unwrap()
    }

    fn sine(len: usize, freq: f64, amp: f64) -> Waveform {
        Waveform::new(
            (0..len)
                .map(|n| amp * (2.0 * std::f64::consts::PI * freq * n as f64 / 16000.0).sin())
                .collect(),
            16000,
        )
        .unwrap()
    }

    #[test]
    fn si_sdr_caps_on_exact_match() {
        let x = random_wave(2000, 1);
        assert_eq!(si_sdr(&x, &x).unwrap(), SI_SDR_CAP_DB);
        let scaled = Waveform::new(x.samples.iter().map(|s| 3.7 * s).collect(), 16000).unwrap();
        assert_eq!(si_sdr(&scaled, &x).unwrap(), SI_SDR_CAP_DB);
    }

    #[test]
    fn si_sdr_scale_invariant() {
        let x = random_wave(1500, 2);
        let est = random_wave(1500, 3);
        let base = si_sdr(&est, &x).unwrap();
        for c in [0.1, 0.5, 2.0, 10.0, -1.0] {
            let scaled =
                Waveform::new(est.samples.iter().map(|s| c * s).collect(), 16000).unwrap();
            let v = si_sdr(&scaled, &x).unwrap();
            assert!((v - base).abs() <= 1e-9, "c = {c}: {v} vs {base}");
        }
    }

    #[test]
    fn orthogonal_noise_at_equal_energy_gives_zero_db() {
        // sine and cosine over whole periods are orthogonal
        let n = 1600;
        let reference = sine(n, 400.0, 0.5);
        let noise: Vec<f64> = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 400.0 * i as f64 / 16000.0).cos())
            .collect();
        let est = Waveform::new(
            reference
                .samples
                .iter()
                .zip(&noise)
                .map(|(r, m)| r + m)
                .collect(),
            16000,
        )
        .unwrap();
        let v = si_sdr(&est, &reference).unwrap();
        assert!(v.abs() < 1e-6, "got {v}");
    }

    #[test]
    fn si_sdr_rejects_silent_reference() {
        let x = random_wave(100, 4);
        let silent = Waveform::silence(100, 16000).unwrap();
        assert!(si_sdr(&x, &silent).is_err());
    }

    #[test]
    fn dn_loss_at_match_is_negative_cap() {
        let x = sine(4000, 300.0, 0.4);
        let cfg = StftConfig::default_se();
        let v = dn_loss(&x, &x, &cfg, 1000.0).unwrap();
        assert_eq!(v, -SI_SDR_CAP_DB);
    }

    #[test]
    fn dn_loss_lambda_zero_is_negative_si_sdr() {
        let x = sine(4000, 300.0, 0.4);
        let est = random_wave(4000, 5);
        let cfg = StftConfig::default_se();
        let v = dn_loss(&est, &x, &cfg, 0.0).unwrap();
        assert!((v + si_sdr(&est, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dn_loss_zero_estimate_matches_two_term_evaluation() {
        let x = sine(4000, 250.0, 0.5);
        let zero = Waveform::silence(4000, 16000).unwrap();
        let cfg = StftConfig::default_se();
        let v = dn_loss(&zero, &x, &cfg, 1000.0).unwrap();
        // independent evaluation: -(-cap) + lambda * mean(|X|)
        let mag = crate::dsp::stft(&x, &cfg).unwrap().magnitude();
        let l1 = mag.iter().sum::<f64>() / mag.len() as f64;
        let expected = SI_SDR_CAP_DB + 1000.0 * l1;
        assert!((v - expected).abs() < 1e-9 * expected.abs());
        assert!(v.is_finite());
    }

    #[test]
    fn weight_map_hand_grid() {
        // deficits [[-1, 0.5], [2, -2]] against reference magnitude 10
        let mag_ref = array![[10.0, 10.0], [10.0, 10.0]];
        let mag_den = array![[9.0, 10.5], [12.0, 8.0]];
        let w = weight_map(&mag_den, &mag_ref, WEIGHT_MAP_THRESHOLD).unwrap();
        let expected = array![[1.5, 1.125], [1.5, 2.0]];
        for (a, e) in w.alpha.iter().zip(expected.iter()) {
            assert!((a - e).abs() <= 1e-12, "{:?}", w.alpha);
        }
    }

    #[test]
    fn weight_map_is_one_on_match_and_below_threshold() {
        let mag = array![[0.5, 1e-9], [2.0, 0.0]];
        let w = weight_map(&mag, &mag, WEIGHT_MAP_THRESHOLD).unwrap();
        assert!(w.alpha.iter().all(|a| *a == 1.0));
        // below-threshold cells keep alpha = 1 even with large deficits
        let mag_ref = array![[1e-9, 1.0]];
        let mag_den = array![[5.0, 1.0]];
        let w = weight_map(&mag_den, &mag_ref, WEIGHT_MAP_THRESHOLD).unwrap();
        assert_eq!(w.alpha[(0, 0)], 1.0);
        assert_eq!(w.mask[(0, 0)], 0);
    }

    #[test]
    fn weight_map_invariants_random() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..50 {
            let shape = (rng.random_range(1..6), rng.random_range(1..6));
            let mag_ref = Array2::from_shape_fn(shape, |_| rng.random_range(0.0..1.0f64));
            let mag_den = Array2::from_shape_fn(shape, |_| rng.random_range(0.0..1.0f64));
            let w = weight_map(&mag_den, &mag_ref, 0.5).unwrap();
            let mut best: Option<(f64, (usize, usize))> = None;
            for (idx, m) in w.mask.indexed_iter() {
                let a = w.alpha[idx];
                if *m == 0 {
                    assert_eq!(a, 1.0);
                } else {
                    assert!((1.0..=2.0 + 1e-12).contains(&a));
                    let d = mag_den[idx] - mag_ref[idx];
                    let dd = if d < 0.0 { 2.0 * d } else { d };
                    if best.map(|(b, _)| dd.abs() > b).unwrap_or(true) {
                        best = Some((dd.abs(), idx));
                    }
                }
            }
            if let Some((max_abs, idx)) = best {
                if max_abs > 0.0 {
                    assert!((w.alpha[idx] - 2.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn over_suppression_weighs_heavier_than_inflation() {
        // Within one map, two masked-in cells carry mirrored deficits of
        // equal size; the doubled negative branch gets the strictly larger
        // alpha-weighted contribution. (Note an all-negative map versus its
        // all-positive mirror weighs out exactly equal: the normalization
        // by max|delta'| cancels the doubling when every sign agrees.)
        let mag_ref = array![[10.0, 10.0, 10.0]];
        let mag_den = array![[9.0, 11.0, 15.0]]; // deltas -1, +1, +5
        let w = weight_map(&mag_den, &mag_ref, WEIGHT_MAP_THRESHOLD).unwrap();
        let term_negative = w.alpha[(0, 0)] * 1.0;
        let term_positive = w.alpha[(0, 1)] * 1.0;
        assert!(
            term_negative > term_positive,
            "negative {term_negative} vs positive {term_positive}"
        );

        // Utterance level: against a fixed dominant positive cell, the
        // variant whose probe cell is suppressed scores strictly higher.
        let anchor_ref = array![[10.0, 10.0]];
        let suppressed = array![[9.0, 15.0]]; // probe -1 beside +5
        let inflated = array![[11.0, 15.0]]; // probe +1 beside +5
        let w_sup = weight_map(&suppressed, &anchor_ref, WEIGHT_MAP_THRESHOLD).unwrap();
        let w_inf = weight_map(&inflated, &anchor_ref, WEIGHT_MAP_THRESHOLD).unwrap();
        let total = |w: &WeightMap, den: &Array2<f64>| -> f64 {
            w.alpha
                .iter()
                .zip(den.iter().zip(anchor_ref.iter()))
                .map(|(a, (d, r))| a * (d - r).abs())
                .sum()
        };
        let sup = total(&w_sup, &suppressed);
        let inf = total(&w_inf, &inflated);
        assert!(sup > inf, "suppressed {sup} vs inflated {inf}");
    }

    #[test]
    fn weighted_dn_equals_dn_on_match() {
        let x = sine(3000, 500.0, 0.3);
        let cfg = StftConfig::default_se();
        let a = weighted_dn_loss(&x, &x, &cfg, 1000.0).unwrap();
        let b = dn_loss(&x, &x, &cfg, 1000.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mr_stft_zero_on_match_and_sign_flip() {
        let cfg = MrStftConfig::default();
        let y = random_wave(6000, 7);
        assert_eq!(mr_stft_loss(&y, &y, &cfg).unwrap(), 0.0);
        let flipped = Waveform::new(y.samples.iter().map(|s| -s).collect(), 16000).unwrap();
        let v = mr_stft_loss(&flipped, &y, &cfg).unwrap();
        assert!(v < 1e-9, "sign flip changed magnitudes: {v}");
    }

    #[test]
    fn mr_stft_zero_estimate_has_unit_spectral_convergence() {
        let cfg = MrStftConfig::default();
        let y = random_wave(6000, 8);
        let zero = Waveform::silence(6000, 16000).unwrap();
        for (sc, _) in mr_stft_terms(&zero, &y, &cfg).unwrap() {
            assert!((sc - 1.0).abs() < 1e-9, "sc = {sc}");
        }
    }

    #[test]
    fn commitment_loss_hand_values() {
        let z = FeatureMatrix::new(Array2::from_elem((3, 4), 0.6)).unwrap();
        let zq = FeatureMatrix::new(Array2::from_elem((3, 4), 0.5)).unwrap();
        assert_eq!(commitment_loss(&z, &z).unwrap(), 0.0);
        let v = commitment_loss(&z, &zq).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
        // homogeneity: scaling both by c scales loss by c^2
        let z2 = FeatureMatrix::new(z.data.mapv(|v| 3.0 * v)).unwrap();
        let zq2 = FeatureMatrix::new(zq.data.mapv(|v| 3.0 * v)).unwrap();
        let v2 = commitment_loss(&z2, &zq2).unwrap();
        assert!((v2 - 9.0 * v).abs() < 1e-12);
    }

    #[test]
    fn hinge_loss_cases() {
        assert_eq!(
            hinge_adv_loss(&[1.0, 2.0, 5.0], HingeSide::Generator).unwrap(),
            0.0
        );
        assert_eq!(hinge_adv_loss(&[0.0], HingeSide::Generator).unwrap(), 1.0);
        assert_eq!(
            hinge_adv_loss(&[-2.0], HingeSide::DiscriminatorFake).unwrap(),
            0.0
        );
        assert_eq!(
            hinge_adv_loss(&[0.0], HingeSide::DiscriminatorFake).unwrap(),
            1.0
        );
        assert!(hinge_adv_loss(&[], HingeSide::Generator).is_err());
    }

    #[test]
    fn feature_match_cases() {
        let a = vec![array![[3.0]]];
        let b = vec![array![[5.0]]];
        assert_eq!(feature_match_loss(&a, &b).unwrap(), 2.0);
        assert_eq!(feature_match_loss(&a, &a).unwrap(), 0.0);
        // consistent permutation leaves the value unchanged
        let l1 = vec![array![[1.0, 2.0]], array![[5.0]]];
        let l2 = vec![array![[2.0, 1.0]], array![[9.0]]];
        let v = feature_match_loss(&l1, &l2).unwrap();
        let p1 = vec![l1[1].clone(), l1[0].clone()];
        let p2 = vec![l2[1].clone(), l2[0].clone()];
        assert_eq!(feature_match_loss(&p1, &p2).unwrap(), v);
        // shape mismatch
        let bad = vec![array![[1.0, 2.0, 3.0]]];
        assert!(feature_match_loss(&l1[..1], &bad).is_err());
    }

    #[test]
    fn composite_loss_weights() {
        let weights = LossWeights::default();
        let ones = CompositeParts {
            reconstruction: 1.0,
            adversarial: 1.0,
            feature_match: 1.0,
            commitment: 1.0,
        };
        assert_eq!(codec_composite_loss(&ones, &weights).unwrap(), 32.0);
        let zeros = CompositeParts::default();
        assert_eq!(codec_composite_loss(&zeros, &weights).unwrap(), 0.0);
        let mixed = CompositeParts {
            reconstruction: 0.5,
            adversarial: 0.0,
            feature_match: 0.0,
            commitment: 0.1,
        };
        assert!((codec_composite_loss(&mixed, &weights).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(weights.lambda_dn, 1000.0);
    }

    #[test]
    fn lsd_cases() {
        let cfg = StftConfig::default_se();
        let s = sine(4000, 440.0, 0.4);
        assert_eq!(log_spectral_distance(&s, &s, &cfg).unwrap(), 0.0);
        let doubled = Waveform::new(s.samples.iter().map(|v| 2.0 * v).collect(), 16000).unwrap();
        let v = log_spectral_distance(&doubled, &s, &cfg).unwrap();
        assert!((v - 20.0 * 2.0f64.log10()).abs() < 1e-9, "lsd {v}");
        let negated = Waveform::new(s.samples.iter().map(|v| -v).collect(), 16000).unwrap();
        let v = log_spectral_distance(&negated, &s, &cfg).unwrap();
        assert!(v < 1e-9);
    }
}
