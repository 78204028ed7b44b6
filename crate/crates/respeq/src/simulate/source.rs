//! Built-in deterministic source material: harmonic-plus-noise
//! pseudo-speech and Gaussian white noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::Waveform;

/// Standard normal draw via Box-Muller; keeps the sample stream a pure
/// function of the underlying ChaCha state.
pub(crate) fn normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Seeded Gaussian white noise with RMS 0.1.
pub fn white_noise(len: usize, sample_rate: u32, seed: u64) -> Result<Waveform> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..len.max(1)).map(|_| 0.1 * normal(&mut rng)).collect();
    Waveform::new(samples, sample_rate)
}

/// Synthetic voiced signal: a drifting fundamental with 1/k harmonics,
/// syllable-rate amplitude modulation, and a little breath noise. Stands in
/// for recorded speech wherever a deterministic source is needed.
pub fn pseudo_speech(len: usize, sample_rate: u32, seed: u64) -> Result<Waveform> {
    let len = len.max(1);
    let fs = f64::from(sample_rate);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let n_harmonics = 10usize;
    let phases: Vec<f64> = (0..n_harmonics)
        .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    let syllable_rate: f64 = rng.random_range(2.0..5.0);
    let syllable_phase: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
    let mut f0: f64 = rng.random_range(100.0..180.0);
    let mut phase_acc = vec![0.0f64; n_harmonics];
    for (h, p) in phase_acc.iter_mut().zip(&phases) {
        *h = *p;
    }

    let control_interval = (fs / 100.0).round().max(1.0) as usize; // 10 ms
    let mut samples = Vec::with_capacity(len);
    for n in 0..len {
        if n % control_interval == 0 {
            f0 = (f0 + rng.random_range(-2.0..2.0)).clamp(90.0, 220.0);
        }
        let t = n as f64 / fs;
        // raised-cosine syllabic envelope in [0.05, 1]
        let envelope = 0.05
            + 0.95
                * (0.5
                    + 0.5
                        * (2.0 * std::f64::consts::PI * syllable_rate * t + syllable_phase)
                            .sin());
        let mut value = 0.0;
        for (k, acc) in phase_acc.iter_mut().enumerate() {
            let harmonic = (k + 1) as f64;
            *acc += 2.0 * std::f64::consts::PI * f0 * harmonic / fs;
            value += (*acc).sin() / harmonic;
        }
        value = envelope * value / 2.0;
        value += 0.003 * normal(&mut rng);
        samples.push(value);
    }

    // normalize peak to 0.5 so headroom survives reverberation
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);
    for s in &mut samples {
        *s *= 0.5 / peak;
    }
    Waveform::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources_are_deterministic() {
        let a = pseudo_speech(8000, 16000, 42).unwrap();
        let b = pseudo_speech(8000, 16000, 42).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = white_noise(8000, 16000, 42).unwrap();
        let d = white_noise(8000, 16000, 42).unwrap();
        assert_eq!(c.samples, d.samples);
    }

    #[test]
    fn different_seeds_differ() {
        let a = pseudo_speech(4000, 16000, 1).unwrap();
        let b = pseudo_speech(4000, 16000, 2).unwrap();
        assert_ne!(a.samples, b.samples);
    }

    #[test]
    fn pseudo_speech_is_bounded_and_energetic() {
        let w = pseudo_speech(16000, 16000, 3).unwrap();
        assert!(w.samples.iter().all(|s| s.abs() <= 0.5 + 1e-12));
        assert!(w.power() > 1e-4);
    }

    #[test]
    fn white_noise_rms_near_target() {
        let w = white_noise(100_000, 16000, 4).unwrap();
        let rms = w.power().sqrt();
        assert!((rms - 0.1).abs() < 0.005, "rms {rms}");
    }
}
