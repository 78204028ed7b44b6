//! Evaluate every objective on a small demo pair: SI-SDR, the plain and
//! weighted denoising losses, multi-resolution STFT loss, and the codec
//! composite with its documented weights.
//!
//! ```bash
//! cargo run --release -p respeq --example loss_functions
//! ```

use ndarray::Array2;
use respeq::dsp::StftConfig;
use respeq::objectives::{
    codec_composite_loss, commitment_loss, dn_loss, feature_match_loss, hinge_adv_loss,
    log_spectral_distance, mr_stft_loss, si_sdr, weight_map, weighted_dn_loss, CompositeParts,
    HingeSide, LossWeights, MrStftConfig, WEIGHT_MAP_THRESHOLD,
};
use respeq::quantize::FeatureMatrix;
use respeq::Waveform;

fn sine(len: usize, freq: f64, amp: f64) -> Waveform {
    Waveform::new(
        (0..len)
            .map(|n| amp * (2.0 * std::f64::consts::PI * freq * n as f64 / 16000.0).sin())
            .collect(),
        16000,
    )
    .unwrap()
}

fn main() -> respeq::Result<()> {
    let reference = sine(16000, 440.0, 0.5);
    // an "over-suppressed" estimate: same tone at 60% level
    let estimate = Waveform::new(
        reference.samples.iter().map(|s| 0.6 * s).collect(),
        16000,
    )?;
    let cfg = StftConfig::default_se();
    let weights = LossWeights::default();

    println!("si_sdr(est, ref)        = {:+.3} dB", si_sdr(&estimate, &reference)?);
    println!(
        "dn_loss (lambda {})   = {:+.4}",
        weights.lambda_dn,
        dn_loss(&estimate, &reference, &cfg, weights.lambda_dn)?
    );
    println!(
        "weighted_dn_loss        = {:+.4}",
        weighted_dn_loss(&estimate, &reference, &cfg, weights.lambda_dn)?
    );
    println!(
        "mr_stft_loss            = {:.5}",
        mr_stft_loss(&estimate, &reference, &MrStftConfig::default())?
    );
    println!(
        "log_spectral_distance   = {:.3} dB (exactly 20*log10(1/0.6) per cell)",
        log_spectral_distance(&estimate, &reference, &cfg)?
    );

    // the weight map doubles over-suppressed deficits before normalizing
    let mag_ref = Array2::from_elem((1, 4), 1.0);
    let mag_den = ndarray::array![[0.5, 1.5, 1.0, 0.9]];
    let map = weight_map(&mag_den, &mag_ref, WEIGHT_MAP_THRESHOLD)?;
    let alphas: Vec<f64> = map.alpha.iter().copied().collect();
    println!("weight map over deficits [-0.5, +0.5, 0, -0.1]: {alphas:.3?}");

    let z = FeatureMatrix::new(Array2::from_elem((4, 4), 0.30))?;
    let zq = FeatureMatrix::new(Array2::from_elem((4, 4), 0.25))?;
    let parts = CompositeParts {
        reconstruction: mr_stft_loss(&estimate, &reference, &MrStftConfig::default())?,
        adversarial: hinge_adv_loss(&[0.2, -0.4, 0.9], HingeSide::Generator)?,
        feature_match: feature_match_loss(
            std::slice::from_ref(&z.data),
            std::slice::from_ref(&zq.data),
        )?,
        commitment: commitment_loss(&z, &zq)?,
    };
    println!(
        "codec composite         = {:.4} (weights 1/1/20/10)",
        codec_composite_loss(&parts, &weights)?
    );
    Ok(())
}
