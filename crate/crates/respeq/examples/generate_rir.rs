//! Generate a room impulse response with the image method and check its
//! reverberation time with Schroeder backward integration.
//!
//! ```bash
//! cargo run --release -p respeq --example generate_rir
//! ```

use respeq::simulate::{estimate_rt60, generate_rir, RoomSpec};
use respeq::wav::{write_wav, WavEncoding};
use respeq::Waveform;

fn main() -> respeq::Result<()> {
    let sample_rate = 16000;
    let room = RoomSpec::new(
        [6.0, 5.0, 3.0],     // meters
        [1.0, 1.0, 1.5],     // source
        [4.4, 1.0, 1.5],     // microphone, 3.4 m away
        0.3,                 // target RT60 in seconds
        30,                  // max reflection order
    )?;

    let rir = generate_rir(&room, sample_rate)?;
    println!(
        "{} taps, direct path at sample {} (expected {:.1})",
        rir.taps.len(),
        rir.direct_path_index,
        room.source_mic_distance() / room.speed_of_sound * f64::from(sample_rate),
    );

    let estimate = estimate_rt60(&rir)?;
    println!("target rt60 0.300 s, schroeder estimate {estimate:.3} s");

    // order 0 keeps only the direct path
    let anechoic = RoomSpec::new([6.0, 5.0, 3.0], [1.0, 1.0, 1.5], [4.4, 1.0, 1.5], 0.3, 0)?;
    let direct_only = generate_rir(&anechoic, sample_rate)?;
    let nonzero = direct_only.taps.iter().filter(|t| **t != 0.0).count();
    println!("order-0 response has {nonzero} nonzero tap(s)");

    let out = std::env::temp_dir().join("respeq_example_rir.wav");
    write_wav(&out, &Waveform::new(rir.taps.clone(), sample_rate)?, WavEncoding::Float32)?;
    println!("wrote {}", out.display());
    Ok(())
}
