//! The two-stage flow: denoise by time-frequency masking, then restore
//! through the feature codec (adapter, quantizer, adapter inverse).

mod adapter;
mod report;

pub use adapter::{
    CodecAdapter, CodecAdapterConfig, FeatureDomain, PhaseSidecar, PhaseSource, Projection,
};
pub use report::{ReportRow, ReportTable};

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::blob::read_complex_matrix;
use crate::dsp::{apply_mask, compute_crm, fuse_features, istft, stft, ComplexMask, FusionConfig};
use crate::error::{Error, Result};
use crate::objectives::{log_spectral_distance, si_sdr};
use crate::quantize::{quantize, Codes, FeatureMatrix, QuantizerStack};
use crate::simulate::MixtureRecord;
use crate::Waveform;

/// Where the denoising stage's mask comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    /// Exact complex-ratio mask computed from the reverberant reference.
    Oracle,
    /// Precomputed mask loaded from a complex-matrix blob.
    File(PathBuf),
    /// All-ones mask; the stage reduces to an STFT round trip.
    Passthrough,
}

/// Full pipeline parameters. The adapter's STFT config also drives the
/// denoising stage, so fused magnitudes line up with codec features.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mask_source: MaskSource,
    /// When set, the codec input magnitude is the fusion of the denoised
    /// and mixture magnitudes; phase still follows the adapter's source.
    pub fusion: Option<FusionConfig>,
    pub adapter: CodecAdapterConfig,
    /// `None` runs the unquantized path.
    pub quantizer: Option<QuantizerStack>,
}

/// Everything a pipeline run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Denoising-stage output `x_hat`.
    pub denoised: Waveform,
    /// Restored waveform after the codec path.
    pub restored: Waveform,
    /// Pre-quantization features `z`.
    pub features: FeatureMatrix,
    /// Quantized features `z_q` (equal to `z` on the unquantized path).
    pub quantized: FeatureMatrix,
    pub codes: Option<Codes>,
    /// Residual energies from the quantizer (empty when unquantized).
    pub per_stage_residual_energy: Vec<f64>,
    /// Named scalars: always `feature_mse`; `si_sdr_dry`, `si_sdr_reverb`,
    /// and `lsd_dry` when the references were supplied.
    pub metrics: BTreeMap<String, f64>,
}

/// Denoising stage: mask the mixture spectrogram and resynthesize.
pub fn run_dn(
    mixture: &Waveform,
    source: &MaskSource,
    reverberant_ref: Option<&Waveform>,
    cfg: &crate::dsp::StftConfig,
) -> Result<Waveform> {
    let mix_spec = stft(mixture, cfg)?;
    let mask = match source {
        MaskSource::Oracle => {
            let reference = reverberant_ref.ok_or_else(|| {
                Error::MissingInput("oracle mask needs the reverberant reference".into())
            })?;
            if reference.len() != mixture.len() {
                return Err(Error::ShapeMismatch(format!(
                    "reference has {} samples, mixture {}",
                    reference.len(),
                    mixture.len()
                )));
            }
            let ref_spec = stft(reference, cfg)?;
            compute_crm(&mix_spec, &ref_spec, None)?
        }
        MaskSource::File(path) => {
            let data = read_complex_matrix(path)?;
            if data.dim() != mix_spec.data.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "mask {:?} vs mixture spectrogram {:?}",
                    data.dim(),
                    mix_spec.data.dim()
                )));
            }
            ComplexMask::new(data, None)?
        }
        MaskSource::Passthrough => ComplexMask::ones(mix_spec.frames(), mix_spec.bins()),
    };
    istft(&apply_mask(&mix_spec, &mask)?)
}

/// Output of the restoration stage alone.
#[derive(Debug, Clone, PartialEq)]
pub struct RestorationOutput {
    pub restored: Waveform,
    pub features: FeatureMatrix,
    pub quantized: FeatureMatrix,
    pub codes: Option<Codes>,
    pub per_stage_residual_energy: Vec<f64>,
}

/// Restoration stage: encode the denoised signal (optionally fused with
/// the mixture magnitude), quantize, decode.
pub fn run_drrst(
    denoised: &Waveform,
    mixture: Option<&Waveform>,
    cfg: &PipelineConfig,
) -> Result<RestorationOutput> {
    let adapter = CodecAdapter::new(cfg.adapter.clone())?;

    let needs_mixture =
        cfg.fusion.is_some() || cfg.adapter.phase_source == PhaseSource::FromMixture;
    let mix_spec = if needs_mixture {
        let mixture = mixture.ok_or_else(|| {
            Error::MissingInput("fusion or mixture-phase decoding needs the mixture".into())
        })?;
        Some(stft(mixture, &cfg.adapter.stft)?)
    } else {
        None
    };

    let (features, sidecar) = match &cfg.fusion {
        Some(fusion) => {
            let den_spec = stft(denoised, &cfg.adapter.stft)?;
            let mix_spec = mix_spec.as_ref().expect("fusion computed the mixture stft");
            let fused = fuse_features(&den_spec.magnitude(), &mix_spec.magnitude(), fusion)?;
            let phase_of = match cfg.adapter.phase_source {
                PhaseSource::FromInput => &den_spec,
                PhaseSource::FromMixture => mix_spec,
            };
            adapter.encode_magnitude(&fused, phase_of)?
        }
        None => match cfg.adapter.phase_source {
            PhaseSource::FromInput => adapter.encode_waveform(denoised)?,
            PhaseSource::FromMixture => {
                let den_spec = stft(denoised, &cfg.adapter.stft)?;
                let mix_spec = mix_spec.as_ref().expect("mixture stft computed above");
                adapter.encode_magnitude(&den_spec.magnitude(), mix_spec)?
            }
        },
    };

    let (quantized, codes, energies) = match &cfg.quantizer {
        Some(stack) => {
            let result = quantize(stack, &features)?;
            (
                result.quantized,
                Some(result.codes),
                result.per_stage_residual_energy,
            )
        }
        None => (features.clone(), None, Vec::new()),
    };

    let restored = adapter.decode(&quantized, &sidecar)?;
    Ok(RestorationOutput {
        restored,
        features,
        quantized,
        codes,
        per_stage_residual_energy: energies,
    })
}

/// End-to-end run on a bare mixture with optional references for the
/// oracle mask and the metrics.
pub fn run_pipeline(
    mixture: &Waveform,
    reverberant: Option<&Waveform>,
    dry: Option<&Waveform>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutput> {
    let denoised = run_dn(mixture, &cfg.mask_source, reverberant, &cfg.adapter.stft)?;
    let stage = run_drrst(&denoised, Some(mixture), cfg)?;

    let mut metrics = BTreeMap::new();
    metrics.insert(
        "feature_mse".to_string(),
        stage.features.mse_to(&stage.quantized)?,
    );
    if let Some(dry) = dry {
        metrics.insert("si_sdr_dry".to_string(), si_sdr(&stage.restored, dry)?);
        metrics.insert(
            "lsd_dry".to_string(),
            log_spectral_distance(&stage.restored, dry, &cfg.adapter.stft)?,
        );
    }
    if let Some(reverberant) = reverberant {
        metrics.insert(
            "si_sdr_reverb".to_string(),
            si_sdr(&stage.restored, reverberant)?,
        );
    }

    Ok(PipelineOutput {
        denoised,
        restored: stage.restored,
        features: stage.features,
        quantized: stage.quantized,
        codes: stage.codes,
        per_stage_residual_energy: stage.per_stage_residual_energy,
        metrics,
    })
}

/// End-to-end run on a full mixture record.
pub fn run_pipeline_record(rec: &MixtureRecord, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    run_pipeline(
        &rec.mixture,
        Some(&rec.reverberant),
        Some(&rec.dry),
        cfg,
    )
}

/// Metric names `evaluate` produces, in report column order.
pub const EVAL_COLUMNS: [&str; 4] = ["si_sdr_dry", "si_sdr_reverb", "lsd_dry", "feature_mse"];

/// Score a pipeline output against a record's references. Returns the
/// named scalar map plus the per-stage residual energies.
pub fn evaluate(
    out: &PipelineOutput,
    rec: &MixtureRecord,
) -> Result<(BTreeMap<String, f64>, Vec<f64>)> {
    if out.restored.len() != rec.dry.len() {
        return Err(Error::ShapeMismatch(format!(
            "restored has {} samples, references {}",
            out.restored.len(),
            rec.dry.len()
        )));
    }
    let mut metrics = BTreeMap::new();
    metrics.insert(
        "si_sdr_dry".to_string(),
        si_sdr(&out.restored, &rec.dry)?,
    );
    metrics.insert(
        "si_sdr_reverb".to_string(),
        si_sdr(&out.restored, &rec.reverberant)?,
    );
    metrics.insert(
        "lsd_dry".to_string(),
        log_spectral_distance(&out.restored, &rec.dry, &crate::dsp::StftConfig::default_se())?,
    );
    metrics.insert(
        "feature_mse".to_string(),
        out.features.mse_to(&out.quantized)?,
    );
    Ok((metrics, out.per_stage_residual_energy.clone()))
}
