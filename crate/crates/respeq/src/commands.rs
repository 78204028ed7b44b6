//! Command implementations behind the CLI binary.
//!
//! Each command validates its whole configuration before touching the
//! filesystem, writes outputs atomically, and embeds the resolved config
//! and toolkit version in every report header. Given fixed seeds, each is
//! a pure function of its inputs.

use std::path::{Path, PathBuf};

use crate::blob::{read_features, write_codes, write_features};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::objectives::{log_spectral_distance, si_sdr};
use crate::pipeline::{run_pipeline, CodecAdapter, PipelineConfig, ReportTable};
use crate::quantize::{
    load_codebooks, quantize, save_codebooks, train_codebooks, FeatureMatrix, QuantizerStack,
    TrainStats,
};
use crate::simulate::{
    estimate_rt60, generate_rir, synthesize_dataset, Manifest, ManifestRecord,
};
use crate::wav::{read_wav, write_wav, WavEncoding};
use crate::{Waveform, VERSION};

fn stamp(table: &mut ReportTable, cfg: &RunConfig) {
    table.push_meta("respeq-version", VERSION);
    for (k, v) in cfg.echo() {
        table.push_meta(format!("config.{k}"), v);
    }
}

/// `simulate`: synthesize a dataset under `out_dir`, returning the manifest
/// path.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate_paths()?;
    let dataset = cfg.dataset_config()?;
    synthesize_dataset(&dataset, cfg.seed()?, out_dir)?;
    Ok(out_dir.join("manifest.tsv"))
}

/// `train-codebook`: encode the configured target signal of every manifest
/// record, train the configured stack, and write the codebook plus a
/// per-epoch stats table beside it.
pub fn cmd_train_codebook(
    cfg: &RunConfig,
    manifest_path: &Path,
    out_codebook: &Path,
) -> Result<TrainStats> {
    cfg.validate_paths()?;
    let adapter = CodecAdapter::new(cfg.adapter_config()?)?;
    let stack_cfg = cfg.stack_config(adapter.dim())?;
    let train_cfg = cfg.train_config()?;
    let target = cfg.train_target()?;

    let manifest = Manifest::read(manifest_path)?;
    if manifest.records.is_empty() {
        return Err(Error::MissingInput(format!(
            "manifest {} has no records",
            manifest_path.display()
        )));
    }
    let mut features = Vec::with_capacity(manifest.records.len());
    for record in &manifest.records {
        let rel = match target {
            "dry" => &record.dry_path,
            "mixture" => &record.mix_path,
            _ => &record.reverb_path,
        };
        let wave = read_wav(manifest.resolve(rel))?;
        let (z, _) = adapter.encode_waveform(&wave)?;
        features.push(z);
    }

    let mut stack = QuantizerStack::build(&stack_cfg)?;
    let stats = train_codebooks(&mut stack, &features, &train_cfg)?;
    save_codebooks(&stack, out_codebook)?;

    let mut table = ReportTable::new(vec!["mse".into(), "dead_codes_reseeded".into()]);
    stamp(&mut table, cfg);
    table.push_meta("final_mse", format!("{}", stats.final_mse));
    for stage in &stats.stages {
        if stage.distinct_warning {
            table.push_meta(
                format!("warning.chain{}_stage{}", stage.chain, stage.stage),
                "codebook larger than distinct training vectors",
            );
        }
        for (epoch, (mse, dead)) in stage
            .per_epoch_mse
            .iter()
            .zip(&stage.dead_codes_reseeded)
            .enumerate()
        {
            table.push_row(
                format!("chain{}_stage{}_epoch{}", stage.chain, stage.stage, epoch),
                vec![*mse, *dead as f64],
            )?;
        }
    }
    table.write(stats_path(out_codebook))?;
    Ok(stats)
}

/// Stats table written next to a trained codebook.
pub fn stats_path(codebook: &Path) -> PathBuf {
    let mut name = codebook
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "codebook".into());
    name.push_str(".stats.tsv");
    codebook.with_file_name(name)
}

/// Input selector for [`cmd_run`].
#[derive(Debug, Clone)]
pub enum RunInput {
    Manifest(PathBuf),
    SingleWav(PathBuf),
}

fn build_pipeline_config(
    cfg: &RunConfig,
    codebook: Option<&Path>,
) -> Result<(PipelineConfig, usize)> {
    let adapter_cfg = cfg.adapter_config()?;
    let adapter = CodecAdapter::new(adapter_cfg.clone())?;
    let quantizer = match codebook {
        Some(path) => {
            if !path.exists() {
                return Err(Error::MissingInput(format!(
                    "codebook {} does not exist",
                    path.display()
                )));
            }
            let stack = load_codebooks(path)?;
            if stack.dim() != adapter.dim() {
                return Err(Error::Config(format!(
                    "codebook dim {} does not match adapter dim {}",
                    stack.dim(),
                    adapter.dim()
                )));
            }
            Some(stack)
        }
        None => None,
    };
    let n_energies = quantizer
        .as_ref()
        .map(|s| s.n_stages() + 1)
        .unwrap_or(0);
    Ok((
        PipelineConfig {
            mask_source: cfg.mask_source()?,
            fusion: cfg.fusion()?,
            adapter: adapter_cfg,
            quantizer,
        },
        n_energies,
    ))
}

/// `run`: push a manifest (or a single WAV) through the two-stage pipeline,
/// writing restored WAVs and a metrics report. Returns the report path.
pub fn cmd_run(
    cfg: &RunConfig,
    input: &RunInput,
    codebook: Option<&Path>,
    out_dir: &Path,
) -> Result<PathBuf> {
    cfg.validate_paths()?;
    let (pipeline_cfg, n_energies) = build_pipeline_config(cfg, codebook)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut columns = vec![
        "si_sdr_dry".to_string(),
        "si_sdr_reverb".to_string(),
        "lsd_dry".to_string(),
        "feature_mse".to_string(),
    ];
    if matches!(input, RunInput::SingleWav(_)) {
        columns = vec!["feature_mse".to_string()];
    }
    for i in 0..n_energies {
        columns.push(format!("residual_energy_{i}"));
    }
    let mut table = ReportTable::new(columns);
    stamp(&mut table, cfg);

    match input {
        RunInput::Manifest(path) => {
            let manifest = Manifest::read(path)?;
            if manifest.records.is_empty() {
                return Err(Error::MissingInput(format!(
                    "manifest {} has no records",
                    path.display()
                )));
            }
            for record in &manifest.records {
                let dry = read_wav(manifest.resolve(&record.dry_path))?;
                let reverb = read_wav(manifest.resolve(&record.reverb_path))?;
                let mixture = read_wav(manifest.resolve(&record.mix_path))?;
                let out =
                    run_pipeline(&mixture, Some(&reverb), Some(&dry), &pipeline_cfg)?;
                write_wav(
                    out_dir.join(format!("restored_{}.wav", record.id)),
                    &out.restored,
                    WavEncoding::Float32,
                )?;
                let mut values = vec![
                    out.metrics["si_sdr_dry"],
                    out.metrics["si_sdr_reverb"],
                    out.metrics["lsd_dry"],
                    out.metrics["feature_mse"],
                ];
                values.extend(&out.per_stage_residual_energy);
                table.push_row(record.id.clone(), values)?;
            }
        }
        RunInput::SingleWav(path) => {
            let mixture = read_wav(path)?;
            let out = run_pipeline(&mixture, None, None, &pipeline_cfg)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "input".into());
            write_wav(
                out_dir.join(format!("restored_{stem}.wav")),
                &out.restored,
                WavEncoding::Float32,
            )?;
            let mut values = vec![out.metrics["feature_mse"]];
            values.extend(&out.per_stage_residual_energy);
            table.push_row(stem, values)?;
        }
    }

    let report = out_dir.join("report.tsv");
    table.write(&report)?;
    Ok(report)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// `eval`: score restored estimates (named `restored_<id>.wav`) against a
/// manifest's references. Appends mean and median rows plus a per-SNR
/// mean row for each distinct SNR level.
pub fn cmd_eval(
    cfg: &RunConfig,
    estimates_dir: &Path,
    manifest_path: &Path,
    out_report: &Path,
) -> Result<PathBuf> {
    cfg.validate_paths()?;
    let manifest = Manifest::read(manifest_path)?;
    if manifest.records.is_empty() {
        return Err(Error::MissingInput(format!(
            "manifest {} has no records",
            manifest_path.display()
        )));
    }
    let columns = vec![
        "snr_db".to_string(),
        "si_sdr_dry".to_string(),
        "si_sdr_reverb".to_string(),
        "lsd_dry".to_string(),
    ];
    let mut table = ReportTable::new(columns);
    stamp(&mut table, cfg);
    let stft = cfg.stft_config()?;

    let mut per_row: Vec<(f64, Vec<f64>)> = Vec::new();
    for record in &manifest.records {
        let est_path = estimates_dir.join(format!("restored_{}.wav", record.id));
        if !est_path.exists() {
            return Err(Error::MissingInput(format!(
                "estimate {} does not exist",
                est_path.display()
            )));
        }
        let est = read_wav(&est_path)?;
        let dry = read_wav(manifest.resolve(&record.dry_path))?;
        let reverb = read_wav(manifest.resolve(&record.reverb_path))?;
        let values = vec![
            record.snr_db,
            si_sdr(&est, &dry)?,
            si_sdr(&est, &reverb)?,
            log_spectral_distance(&est, &dry, &stft)?,
        ];
        per_row.push((record.snr_db, values[1..].to_vec()));
        table.push_row(record.id.clone(), values)?;
    }

    let metric_count = 3;
    let column_values = |rows: &[(f64, Vec<f64>)], i: usize| -> Vec<f64> {
        rows.iter().map(|(_, v)| v[i]).collect()
    };
    let mut mean_row = vec![f64::NAN];
    let mut median_row = vec![f64::NAN];
    for i in 0..metric_count {
        mean_row.push(mean(&column_values(&per_row, i)));
        median_row.push(median(&column_values(&per_row, i)));
    }
    table.push_row("mean", mean_row)?;
    table.push_row("median", median_row)?;

    // per-SNR grouping, ordered by level
    let mut levels: Vec<f64> = per_row.iter().map(|(s, _)| *s).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    levels.dedup();
    if levels.len() > 1 {
        for level in levels {
            let group: Vec<(f64, Vec<f64>)> = per_row
                .iter()
                .filter(|(s, _)| *s == level)
                .cloned()
                .collect();
            let mut row = vec![level];
            for i in 0..metric_count {
                row.push(mean(&column_values(&group, i)));
            }
            table.push_row(format!("mean@snr={level}"), row)?;
        }
    }

    table.write(out_report)?;
    Ok(out_report.to_path_buf())
}

/// Outcome of [`cmd_rir`], for the CLI to print.
#[derive(Debug, Clone)]
pub struct RirSummary {
    pub wav_path: PathBuf,
    pub taps: usize,
    pub direct_path_index: usize,
    /// Schroeder estimate; `None` when the decay range is unreachable
    /// (single-tap responses).
    pub estimated_rt60: Option<f64>,
}

/// `rir`: generate one impulse response from the `rir.*` config keys and
/// write it as a binary32 WAV.
pub fn cmd_rir(cfg: &RunConfig, out_wav: &Path) -> Result<RirSummary> {
    cfg.validate_paths()?;
    let room = cfg.rir_room()?;
    let rir = generate_rir(&room, cfg.sample_rate()?)?;
    let wave = Waveform::new(rir.taps.clone(), rir.sample_rate)?;
    write_wav(out_wav, &wave, WavEncoding::Float32)?;
    Ok(RirSummary {
        wav_path: out_wav.to_path_buf(),
        taps: rir.taps.len(),
        direct_path_index: rir.direct_path_index,
        estimated_rt60: estimate_rt60(&rir).ok(),
    })
}

/// Outcome of [`cmd_quantize`].
#[derive(Debug, Clone)]
pub struct QuantizeSummary {
    pub codes_path: PathBuf,
    pub feature_mse: f64,
    pub per_stage_residual_energy: Vec<f64>,
}

/// `quantize`: feature matrix in, codes out, optionally also the
/// reconstructed (dequantized) features.
pub fn cmd_quantize(
    cfg: &RunConfig,
    features_path: &Path,
    codebook_path: &Path,
    out_codes: &Path,
    reconstruct: Option<&Path>,
) -> Result<QuantizeSummary> {
    cfg.validate_paths()?;
    if !codebook_path.exists() {
        return Err(Error::MissingInput(format!(
            "codebook {} does not exist",
            codebook_path.display()
        )));
    }
    let stack = load_codebooks(codebook_path)?;
    let features: FeatureMatrix = read_features(features_path)?;
    let result = quantize(&stack, &features)?;
    write_codes(&result.codes, out_codes)?;
    if let Some(path) = reconstruct {
        write_features(&result.quantized, path)?;
    }
    Ok(QuantizeSummary {
        codes_path: out_codes.to_path_buf(),
        feature_mse: features.mse_to(&result.quantized)?,
        per_stage_residual_energy: result.per_stage_residual_energy,
    })
}

/// Manifest record accessor used by integration tests.
pub fn manifest_record_ids(manifest: &Manifest) -> Vec<&ManifestRecord> {
    manifest.records.iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.set("sim.count", "2").unwrap();
        cfg.set("sim.segment_secs", "0.4").unwrap();
        cfg.set("sim.snr_levels", "0").unwrap();
        cfg.set("sim.rt60_levels", "0.2").unwrap();
        cfg.set("sim.max_order", "6").unwrap();
        cfg.set("quantizer.N", "8").unwrap();
        cfg.set("quantizer.n_q", "2").unwrap();
        cfg.set("train.epochs", "2").unwrap();
        cfg
    }

    #[test]
    fn simulate_train_run_eval_round() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_cfg();
        let data_dir = dir.path().join("data");
        let manifest = cmd_simulate(&cfg, &data_dir).unwrap();
        assert!(manifest.exists());

        let codebook = dir.path().join("codebook.rseq");
        let stats = cmd_train_codebook(&cfg, &manifest, &codebook).unwrap();
        assert!(codebook.exists());
        assert!(stats_path(&codebook).exists());
        assert!(stats.final_mse.is_finite());

        let run_dir = dir.path().join("run");
        let report =
            cmd_run(&cfg, &RunInput::Manifest(manifest.clone()), Some(&codebook), &run_dir)
                .unwrap();
        let table = ReportTable::read(&report).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert!(run_dir.join("restored_utt00000.wav").exists());

        let eval_report = dir.path().join("eval.tsv");
        cmd_eval(&cfg, &run_dir, &manifest, &eval_report).unwrap();
        let table = ReportTable::read(&eval_report).unwrap();
        // 2 utterances + mean + median (single SNR level: no group rows)
        assert_eq!(table.rows.len(), 4);
    }

    #[test]
    fn missing_codebook_error_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_cfg();
        let missing = dir.path().join("nope.rseq");
        let err = cmd_run(
            &cfg,
            &RunInput::SingleWav(dir.path().join("x.wav")),
            Some(&missing),
            &dir.path().join("out"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("nope.rseq"), "{err}");
    }

    #[test]
    fn rir_command_reports_direct_index() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        let out = dir.path().join("rir.wav");
        let summary = cmd_rir(&cfg, &out).unwrap();
        assert_eq!(summary.direct_path_index, 160);
        assert!(out.exists());
        assert!(summary.estimated_rt60.is_some());
    }

    #[test]
    fn quantize_command_round_trips_codes() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_cfg();
        cfg.set("quantizer.D", "6").unwrap();
        // build and save a small stack directly
        let stack = QuantizerStack::build(&crate::quantize::StackConfig {
            n_q: 2,
            ..crate::quantize::StackConfig::desk(crate::quantize::Scheme::SqRvq, 6, 8)
        })
        .unwrap();
        let codebook = dir.path().join("cb.rseq");
        save_codebooks(&stack, &codebook).unwrap();

        let z = FeatureMatrix::new(ndarray::Array2::from_shape_fn((5, 6), |(f, d)| {
            (f as f64 - 2.0) * 0.3 + d as f64 * 0.1
        }))
        .unwrap();
        let features = dir.path().join("z.rsef");
        write_features(&z, &features).unwrap();

        let codes = dir.path().join("z.rsec");
        let recon = dir.path().join("zq.rsef");
        let summary =
            cmd_quantize(&cfg, &features, &codebook, &codes, Some(&recon)).unwrap();
        assert!(codes.exists());
        let zq = read_features(&recon).unwrap();
        let direct = quantize(&stack, &z).unwrap();
        assert_eq!(zq.data, direct.quantized.data);
        assert!(summary.feature_mse >= 0.0);
        // energies include the pre-quantization entry
        assert_eq!(summary.per_stage_residual_energy.len(), 3);
    }

    #[test]
    fn empty_manifest_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.tsv");
        std::fs::write(&manifest, format!("{}\n", crate::simulate::MANIFEST_HEADER)).unwrap();
        let cfg = quick_cfg();
        let err =
            cmd_train_codebook(&cfg, &manifest, &dir.path().join("cb.rseq")).unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
    }
}
