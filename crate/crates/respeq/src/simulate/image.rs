//! Image-method impulse response generation and Schroeder RT60 estimation.

use crate::error::{Error, Result};

use super::{Rir, RoomSpec};

/// Sabine constant relating volume, absorption area, and RT60.
const SABINE: f64 = 0.161;

/// Uniform wall reflection coefficient for the requested RT60.
///
/// Sabine: `rt60 = 0.161 * V / (S * a)`, solved for the absorption `a` and
/// converted to an amplitude reflection coefficient `sqrt(1 - a)`.
/// `rt60 = 0` short-circuits to fully absorbing walls.
fn reflection_coefficient(room: &RoomSpec) -> Result<f64> {
    if room.rt60_target == 0.0 {
        return Ok(0.0);
    }
    let absorption = SABINE * room.volume() / (room.surface_area() * room.rt60_target);
    if absorption > 1.0 {
        return Err(Error::InfeasibleRoom(format!(
            "rt60_target {} s needs absorption {:.3} > 1 for this room",
            room.rt60_target, absorption
        )));
    }
    Ok((1.0 - absorption).sqrt())
}

/// Generate a room impulse response with the Allen-Berkley image method.
///
/// Taps are placed at `round(distance / c * fs)` — no fractional-delay
/// filtering — with amplitude `beta^reflections / (4 pi distance)`. When
/// `rt60_target` is zero or `max_reflection_order` is zero the response is
/// the bare direct-path impulse.
pub fn generate_rir(room: &RoomSpec, sample_rate: u32) -> Result<Rir> {
    room.validate()?;
    if sample_rate == 0 {
        return Err(Error::Config("sample_rate must be positive".into()));
    }
    let fs = f64::from(sample_rate);
    let c = room.speed_of_sound;
    let distance = room.source_mic_distance();
    let direct_path_index = (distance / c * fs).round() as usize;

    let beta = reflection_coefficient(room)?;
    let reflective = beta > 0.0 && room.max_reflection_order > 0;

    // Tail sized to hold the decay comfortably past the -60 dB point.
    let tail = if reflective {
        ((room.rt60_target * 1.3 + 0.02) * fs).ceil() as usize
    } else {
        0
    };
    let n_taps = direct_path_index + tail + 1;
    let mut taps = vec![0.0f64; n_taps];

    if !reflective {
        taps[direct_path_index] = 1.0 / (4.0 * std::f64::consts::PI * distance);
        return Ok(Rir {
            taps,
            sample_rate,
            room: room.clone(),
            direct_path_index,
        });
    }

    let order = i64::from(room.max_reflection_order);
    // |2m - q| <= order bounds the lattice index m on each axis.
    let span = (order + 1) / 2 + 1;
    let [lx, ly, lz] = room.dimensions;
    let src = room.source_position;
    let mic = room.mic_position;

    for mx in -span..=span {
        for my in -span..=span {
            for mz in -span..=span {
                for q in 0..2i64 {
                    for j in 0..2i64 {
                        for k in 0..2i64 {
                            let refl_x = (2 * mx - q).abs();
                            let refl_y = (2 * my - j).abs();
                            let refl_z = (2 * mz - k).abs();
                            if refl_x + refl_y + refl_z > order {
                                continue;
                            }
                            let dx = (1 - 2 * q) as f64 * src[0] - mic[0]
                                + 2.0 * mx as f64 * lx;
                            let dy = (1 - 2 * j) as f64 * src[1] - mic[1]
                                + 2.0 * my as f64 * ly;
                            let dz = (1 - 2 * k) as f64 * src[2] - mic[2]
                                + 2.0 * mz as f64 * lz;
                            let dist = (dx * dx + dy * dy + dz * dz).sqrt();
                            let idx = (dist / c * fs).round() as usize;
                            if idx >= n_taps {
                                continue;
                            }
                            let reflections = (refl_x + refl_y + refl_z) as i32;
                            taps[idx] += beta.powi(reflections)
                                / (4.0 * std::f64::consts::PI * dist);
                        }
                    }
                }
            }
        }
    }

    Ok(Rir {
        taps,
        sample_rate,
        room: room.clone(),
        direct_path_index,
    })
}

/// Schroeder backward-integration RT60 estimate.
///
/// The energy decay curve is fit by least squares over its -5..-35 dB
/// span and the slope extrapolated to 60 dB of decay.
pub fn estimate_rt60(rir: &Rir) -> Result<f64> {
    let total: f64 = rir.taps.iter().map(|t| t * t).sum();
    if total <= 0.0 {
        return Err(Error::ZeroPower("RIR carries no energy".into()));
    }
    let fs = f64::from(rir.sample_rate);

    // Backward integral of squared taps, normalized to its start.
    let mut edc = vec![0.0f64; rir.taps.len()];
    let mut acc = 0.0;
    for (i, tap) in rir.taps.iter().enumerate().rev() {
        acc += tap * tap;
        edc[i] = acc;
    }

    let mut sum_t = 0.0;
    let mut sum_d = 0.0;
    let mut sum_tt = 0.0;
    let mut sum_td = 0.0;
    let mut count = 0.0;
    for (i, &e) in edc.iter().enumerate() {
        if e <= 0.0 {
            break;
        }
        let db = 10.0 * (e / total).log10();
        if !(-35.0..=-5.0).contains(&db) {
            continue;
        }
        let t = i as f64 / fs;
        sum_t += t;
        sum_d += db;
        sum_tt += t * t;
        sum_td += t * db;
        count += 1.0;
    }
    if count < 2.0 {
        return Err(Error::InsufficientDecay(
            "decay curve never spans the -5..-35 dB fit range".into(),
        ));
    }
    let denom = count * sum_tt - sum_t * sum_t;
    if denom.abs() < 1e-300 {
        return Err(Error::InsufficientDecay(
            "fit range collapses to a single instant".into(),
        ));
    }
    let slope = (count * sum_td - sum_t * sum_d) / denom;
    if slope >= 0.0 {
        return Err(Error::InsufficientDecay(format!(
            "non-decaying energy curve (slope {slope:.3} dB/s)"
        )));
    }
    Ok(-60.0 / slope)
}
