//! End-to-end run: simulate a noisy-reverberant record, train an SQ-RVQ
//! stack on its features, then denoise with the oracle mask and restore
//! through the quantized codec path.
//!
//! ```bash
//! cargo run --release -p respeq --example full_pipeline
//! ```

use respeq::pipeline::{
    run_pipeline_record, CodecAdapter, CodecAdapterConfig, MaskSource, PipelineConfig,
};
use respeq::quantize::{train_codebooks, QuantizerStack, Scheme, StackConfig, TrainConfig};
use respeq::simulate::{
    apply_rir, generate_rir, mix_at_snr, pseudo_speech, white_noise, MixtureRecord, RoomSpec,
};

fn main() -> respeq::Result<()> {
    let fs = 16000;
    let seed = 21;

    // one synthetic utterance through a simulated room at 0 dB SNR
    let dry = pseudo_speech(fs as usize * 2, fs, seed)?;
    let room = RoomSpec::new([6.0, 4.5, 3.0], [1.5, 1.2, 1.5], [4.0, 3.2, 1.4], 0.3, 16)?;
    let rir = generate_rir(&room, fs)?;
    let reverberant = apply_rir(&dry, &rir)?;
    let noise = white_noise(fs as usize * 2, fs, seed ^ 1)?;
    let mix = mix_at_snr(&reverberant, &noise, 0.0, seed ^ 2)?;
    let record = MixtureRecord {
        dry,
        reverberant,
        noise: mix.noise,
        mixture: mix.mixture,
        snr_db: 0.0,
        rir,
        seed,
    };

    // train the quantizer on this record's own reverberant features
    let adapter_cfg = CodecAdapterConfig::default_identity();
    let adapter = CodecAdapter::new(adapter_cfg.clone())?;
    let (features, _) = adapter.encode_waveform(&record.reverberant)?;
    let mut stack = QuantizerStack::build(&StackConfig {
        init_seed: 3,
        ..StackConfig::desk(Scheme::SqRvq, adapter.dim(), 64)
    })?;
    let stats = train_codebooks(
        &mut stack,
        std::slice::from_ref(&features),
        &TrainConfig {
            epochs: 6,
            ema_decay: 0.0,
            kmeans_init_iters: 2,
            seed: 9,
        },
    )?;
    println!("trained sq-rvq stack, feature mse {:.4e}", stats.final_mse);

    let cfg = PipelineConfig {
        mask_source: MaskSource::Oracle,
        fusion: None,
        adapter: adapter_cfg,
        quantizer: Some(stack),
    };
    let out = run_pipeline_record(&record, &cfg)?;
    println!("pipeline metrics:");
    for (name, value) in &out.metrics {
        println!("  {name:<14} {value:+.4}");
    }
    println!(
        "residual energy over stages: {}",
        out.per_stage_residual_energy
            .iter()
            .map(|e| format!("{e:.1}"))
            .collect::<Vec<_>>()
            .join(" -> ")
    );
    Ok(())
}
