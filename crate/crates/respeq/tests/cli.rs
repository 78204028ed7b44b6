//! End-to-end checks of the `respeq` binary: exit codes, output layout,
//! and flag/config precedence.

use std::path::Path;
use std::process::Command;

fn respeq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_respeq"))
}

fn quick_args(cmd: &mut Command) -> &mut Command {
    cmd.args([
        "--set",
        "sim.count=2",
        "--set",
        "sim.segment_secs=0.4",
        "--set",
        "sim.snr_levels=-5,5",
        "--set",
        "sim.rt60_levels=0.2",
        "--set",
        "sim.max_order=6",
        "--set",
        "quantizer.N=8",
        "--set",
        "quantizer.n_q=2",
        "--set",
        "train.epochs=2",
    ])
}

#[test]
fn full_cli_flow_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");

    let mut cmd = respeq();
    quick_args(cmd.args(["simulate", "--out"]).arg(&data));
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = data.join("manifest.tsv");
    assert!(manifest.exists());

    let codebook = dir.path().join("cb.rseq");
    let mut cmd = respeq();
    quick_args(
        cmd.args(["train-codebook", "--manifest"])
            .arg(&manifest)
            .arg("--out")
            .arg(&codebook),
    );
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(codebook.exists());

    let run_dir = dir.path().join("run");
    let mut cmd = respeq();
    quick_args(
        cmd.args(["run", "--manifest"])
            .arg(&manifest)
            .arg("--codebook")
            .arg(&codebook)
            .arg("--out")
            .arg(&run_dir),
    );
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run_dir.join("report.tsv").exists());
    assert!(run_dir.join("restored_utt00000.wav").exists());
    assert!(run_dir.join("restored_utt00001.wav").exists());

    let eval_out = dir.path().join("eval.tsv");
    let mut cmd = respeq();
    quick_args(
        cmd.args(["eval", "--estimates"])
            .arg(&run_dir)
            .arg("--manifest")
            .arg(&manifest)
            .arg("--out")
            .arg(&eval_out),
    );
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&eval_out).unwrap();
    assert!(text.contains("\nmean\t"));
    assert!(text.contains("\nmedian\t"));
    // two SNR levels -> per-level mean rows
    assert!(text.contains("mean@snr=-5\t"));
    assert!(text.contains("mean@snr=5\t"));
}

#[test]
fn invalid_rt60_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = respeq()
        .args(["simulate", "--set", "sim.rt60_range=-0.1,0.3", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = respeq()
        .args(["simulate", "--set", "no.such.key=1", "--out"])
        .arg(dir.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_codebook_fails_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("probe.wav");
    let wave = respeq::simulate::pseudo_speech(4000, 16000, 3).unwrap();
    respeq::wav::write_wav(&wav, &wave, respeq::wav::WavEncoding::Float32).unwrap();
    let out = respeq()
        .args(["run", "--wav"])
        .arg(&wav)
        .arg("--codebook")
        .arg(dir.path().join("missing.rseq"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing.rseq"), "{stderr}");
}

#[test]
fn seed_flag_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        "seed = 1\nsim.count = 1\nsim.segment_secs = 0.3\nsim.rt60_levels = 0\nsim.snr_levels = 0\n",
    )
    .unwrap();

    let run = |out_dir: &Path, seed: Option<&str>| {
        let mut cmd = respeq();
        cmd.args(["simulate", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(out_dir);
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(out_dir.join("wav/utt00000_mix.wav")).unwrap()
    };

    let base = run(&dir.path().join("a"), None);
    let overridden = run(&dir.path().join("b"), Some("2"));
    let overridden_again = run(&dir.path().join("c"), Some("2"));
    assert_ne!(base, overridden, "seed override must change the draw");
    assert_eq!(overridden, overridden_again, "same seed must agree");
}

#[test]
fn single_wav_mode_with_passthrough_mask() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("probe.wav");
    let wave = respeq::simulate::pseudo_speech(6000, 16000, 5).unwrap();
    respeq::wav::write_wav(&wav, &wave, respeq::wav::WavEncoding::Float32).unwrap();
    let out_dir = dir.path().join("out");
    let out = respeq()
        .args(["run", "--set", "mask.source=passthrough", "--wav"])
        .arg(&wav)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("restored_probe.wav").exists());
    assert!(out_dir.join("report.tsv").exists());
}

#[test]
fn quantize_subcommand_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    // prepare features and a codebook through the library
    let z = respeq::quantize::FeatureMatrix::new(ndarray::Array2::from_shape_fn(
        (6, 4),
        |(f, d)| (f as f64) * 0.2 - (d as f64) * 0.1,
    ))
    .unwrap();
    let features = dir.path().join("z.rsef");
    respeq::blob::write_features(&z, &features).unwrap();
    let stack = respeq::quantize::QuantizerStack::build(&respeq::quantize::StackConfig {
        n_q: 2,
        ..respeq::quantize::StackConfig::desk(respeq::quantize::Scheme::Rvq, 4, 8)
    })
    .unwrap();
    let codebook = dir.path().join("cb.rseq");
    respeq::quantize::save_codebooks(&stack, &codebook).unwrap();

    let codes = dir.path().join("z.rsec");
    let recon = dir.path().join("zq.rsef");
    let out = respeq()
        .args(["quantize", "--features"])
        .arg(&features)
        .arg("--codebook")
        .arg(&codebook)
        .arg("--out")
        .arg(&codes)
        .arg("--reconstruct")
        .arg(&recon)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let reloaded_codes = respeq::blob::read_codes(&codes).unwrap();
    let expected = respeq::quantize::quantize(&stack, &z).unwrap();
    assert_eq!(reloaded_codes, expected.codes);
    let zq = respeq::blob::read_features(&recon).unwrap();
    assert_eq!(zq.data, expected.quantized.data);
}

#[test]
fn rir_subcommand_prints_direct_path() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("rir.wav");
    let out = respeq()
        .args(["rir", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("direct path at sample 160"), "{stdout}");
    assert!(out_path.exists());
}
