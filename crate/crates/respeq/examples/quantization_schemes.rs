//! Run one feature matrix through all eight quantization schemes and
//! compare untrained reconstruction error and residual-energy decay.
//!
//! ```bash
//! cargo run --release -p respeq --example quantization_schemes
//! ```

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use respeq::quantize::{quantize, FeatureMatrix, QuantizerStack, Scheme, StackConfig};

fn main() -> respeq::Result<()> {
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let z = FeatureMatrix::new(Array2::from_shape_fn((64, 8), |_| {
        rng.random_range(-1.2..1.2)
    }))?;

    println!("{:<14} {:>10}  residual energy by stage", "scheme", "mse");
    for scheme in Scheme::ALL {
        let stack = QuantizerStack::build(&StackConfig {
            init_seed: 42,
            ..StackConfig::desk(scheme, 8, 32)
        })?;
        let result = quantize(&stack, &z)?;
        let mse = result.quantized.mse_to(&z)?;
        let energies: Vec<String> = result
            .per_stage_residual_energy
            .iter()
            .map(|e| format!("{e:.2}"))
            .collect();
        println!("{:<14} {mse:>10.5}  {}", scheme.name(), energies.join(" -> "));
    }
    println!("\n(untrained codebooks; residual energies never increase stage to stage)");
    Ok(())
}
