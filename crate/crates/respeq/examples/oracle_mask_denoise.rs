//! Denoise a simulated mixture with the oracle complex ratio mask and
//! measure how close the result gets to the reverberant reference.
//!
//! ```bash
//! cargo run --release -p respeq --example oracle_mask_denoise
//! ```

use respeq::dsp::StftConfig;
use respeq::objectives::si_sdr;
use respeq::pipeline::{run_dn, MaskSource};
use respeq::simulate::{apply_rir, generate_rir, mix_at_snr, pseudo_speech, white_noise, RoomSpec};

fn main() -> respeq::Result<()> {
    let fs = 16000;
    let dry = pseudo_speech(fs as usize * 2, fs, 11)?;
    let room = RoomSpec::new([5.0, 4.0, 2.8], [1.2, 1.0, 1.4], [3.6, 2.8, 1.5], 0.25, 16)?;
    let rir = generate_rir(&room, fs)?;
    let reverberant = apply_rir(&dry, &rir)?;
    let noise = white_noise(fs as usize * 2, fs, 12)?;

    let cfg = StftConfig::default_se();
    println!("snr_db  si_sdr(mixture)  si_sdr(denoised)");
    for snr in [-5.0, 0.0, 5.0] {
        let mix = mix_at_snr(&reverberant, &noise, snr, 13)?;
        let before = si_sdr(&mix.mixture, &reverberant)?;
        let denoised = run_dn(&mix.mixture, &MaskSource::Oracle, Some(&reverberant), &cfg)?;
        let after = si_sdr(&denoised, &reverberant)?;
        println!("{snr:+5.1}   {before:+13.2}   {after:+15.2}");
    }
    println!("(oracle masking is bounded only by STFT framing)");
    Ok(())
}
