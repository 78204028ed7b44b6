//! Forward and inverse STFT with per-sample overlap normalization.

use ndarray::Array2;
use num_complex::Complex64;
use realfft::RealFftPlanner;

use crate::error::{Error, Result};
use crate::Waveform;

use super::{ComplexSpectrogram, StftConfig};

/// Number of frames covering `padded_len` samples: ceil-based so every
/// sample falls inside at least one frame.
fn frame_count(padded_len: usize, cfg: &StftConfig) -> usize {
    if padded_len <= cfg.fft_size {
        1
    } else {
        (padded_len - cfg.fft_size).div_ceil(cfg.hop) + 1
    }
}

/// One-sided STFT. With `center_padding` the signal is padded by fft/2
/// zeros on both ends so the first frame is centered on sample zero;
/// without it the signal must be at least one frame long.
pub fn stft(x: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    if !cfg.center_padding && x.len() < cfg.fft_size {
        return Err(Error::Config(format!(
            "input of {} samples is shorter than fft_size {} and center_padding is off",
            x.len(),
            cfg.fft_size
        )));
    }
    let pad = if cfg.center_padding { cfg.fft_size / 2 } else { 0 };
    let padded_len = x.len() + 2 * pad;
    let frames = frame_count(padded_len, cfg);
    let bins = cfg.bins();
    let window = cfg.window.samples(cfg.fft_size);

    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let mut input = fft.make_input_vec();
    let mut output = fft.make_output_vec();
    let mut scratch = fft.make_scratch_vec();

    let sample_at = |idx: usize| -> f64 {
        if idx < pad || idx >= pad + x.len() {
            0.0
        } else {
            x.samples[idx - pad]
        }
    };

    let mut data = Array2::<Complex64>::zeros((frames, bins));
    for frame in 0..frames {
        let start = frame * cfg.hop;
        for (n, slot) in input.iter_mut().enumerate() {
            *slot = sample_at(start + n) * window[n];
        }
        fft.process_with_scratch(&mut input, &mut output, &mut scratch)
            .expect("forward fft on validated sizes");
        for (b, value) in output.iter().enumerate() {
            data[(frame, b)] = *value;
        }
    }

    Ok(ComplexSpectrogram {
        data,
        config: *cfg,
        sample_rate: x.sample_rate,
        orig_len: x.len(),
    })
}

/// Inverse STFT by windowed overlap-add, normalized per sample by the
/// accumulated window product. Exact wherever at least one window is
/// nonzero, so `istft(stft(x))` reproduces `x` up to rounding for every
/// COLA-valid config.
pub fn istft(spec: &ComplexSpectrogram) -> Result<Waveform> {
    let cfg = &spec.config;
    if spec.bins() != cfg.bins() {
        return Err(Error::ShapeMismatch(format!(
            "spectrogram has {} bins but config implies {}",
            spec.bins(),
            cfg.bins()
        )));
    }
    spec.check_finite()?;
    let frames = spec.frames();
    let pad = if cfg.center_padding { cfg.fft_size / 2 } else { 0 };
    let window = cfg.window.samples(cfg.fft_size);
    let product = cfg.window_product();

    let mut planner = RealFftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_size);
    let mut freq = ifft.make_input_vec();
    let mut time = ifft.make_output_vec();
    let mut scratch = ifft.make_scratch_vec();

    let total = (frames - 1) * cfg.hop + cfg.fft_size;
    let mut acc = vec![0.0f64; total];
    let mut den = vec![0.0f64; total];
    let scale = 1.0 / cfg.fft_size as f64;

    for frame in 0..frames {
        for (b, slot) in freq.iter_mut().enumerate() {
            *slot = spec.data[(frame, b)];
        }
        // A real signal has purely real DC and Nyquist bins; masked spectra
        // may not, so project before synthesis.
        freq[0].im = 0.0;
        let last = freq.len() - 1;
        freq[last].im = 0.0;
        ifft.process_with_scratch(&mut freq, &mut time, &mut scratch)
            .expect("inverse fft on validated sizes");
        let start = frame * cfg.hop;
        for n in 0..cfg.fft_size {
            acc[start + n] += time[n] * scale * window[n];
            den[start + n] += product[n];
        }
    }

    let avail = total.saturating_sub(pad);
    let out_len = spec.orig_len.min(avail);
    let mut samples = Vec::with_capacity(spec.orig_len);
    for n in 0..out_len {
        let idx = pad + n;
        samples.push(if den[idx] > 1e-12 { acc[idx] / den[idx] } else { 0.0 });
    }
    samples.resize(spec.orig_len, 0.0);
    Waveform::new(samples, spec.sample_rate)
}
