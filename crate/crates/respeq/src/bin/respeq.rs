//! Thin command-line front end over [`respeq::commands`].
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use respeq::commands::{
    cmd_eval, cmd_quantize, cmd_rir, cmd_run, cmd_simulate, cmd_train_codebook, RunInput,
};
use respeq::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "respeq",
    version,
    about = "Progressive denoise-then-restore speech toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set quantizer.scheme=rvq`.
    /// Repeatable; wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override every configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> respeq::Result<RunConfig> {
        let mut overrides = Vec::new();
        for entry in &self.set {
            let (k, v) = entry.split_once('=').ok_or_else(|| {
                respeq::Error::Config(format!("--set expects KEY=VALUE, got {entry:?}"))
            })?;
            overrides.push((k.to_string(), v.to_string()));
        }
        RunConfig::load(self.config.as_deref(), &overrides, self.seed)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a noisy-reverberant dataset and its manifest.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train quantizer codebooks on a dataset's features.
    TrainCodebook {
        #[command(flatten)]
        config: ConfigArgs,
        /// Manifest written by `simulate`.
        #[arg(long)]
        manifest: PathBuf,
        /// Codebook file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the denoise-then-restore pipeline.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Manifest to process (mutually exclusive with --wav).
        #[arg(long, conflicts_with = "wav")]
        manifest: Option<PathBuf>,
        /// Single mixture WAV to process.
        #[arg(long)]
        wav: Option<PathBuf>,
        /// Trained codebook; omit for the unquantized path.
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Output directory for restored WAVs and the report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score restored estimates against a manifest's references.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory holding `restored_<id>.wav` files.
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Report file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a single room impulse response WAV.
    Rir {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output WAV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantize a feature-matrix blob into codes.
    Quantize {
        #[command(flatten)]
        config: ConfigArgs,
        /// Input feature matrix (`RSEF` blob).
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        codebook: PathBuf,
        /// Output codes (`RSEC` blob).
        #[arg(long)]
        out: PathBuf,
        /// Also write the dequantized features here.
        #[arg(long)]
        reconstruct: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> respeq::Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = config.resolve()?;
            let manifest = cmd_simulate(&cfg, &out)?;
            println!("wrote {}", manifest.display());
        }
        Command::TrainCodebook {
            config,
            manifest,
            out,
        } => {
            let cfg = config.resolve()?;
            let stats = cmd_train_codebook(&cfg, &manifest, &out)?;
            println!(
                "wrote {} (training mse {:.6e}, {} trained stages)",
                out.display(),
                stats.final_mse,
                stats.stages.len()
            );
        }
        Command::Run {
            config,
            manifest,
            wav,
            codebook,
            out,
        } => {
            let cfg = config.resolve()?;
            let input = match (manifest, wav) {
                (Some(m), None) => RunInput::Manifest(m),
                (None, Some(w)) => RunInput::SingleWav(w),
                _ => {
                    return Err(respeq::Error::Config(
                        "run needs exactly one of --manifest or --wav".into(),
                    ))
                }
            };
            let report = cmd_run(&cfg, &input, codebook.as_deref(), &out)?;
            println!("wrote {}", report.display());
        }
        Command::Eval {
            config,
            estimates,
            manifest,
            out,
        } => {
            let cfg = config.resolve()?;
            let report = cmd_eval(&cfg, &estimates, &manifest, &out)?;
            println!("wrote {}", report.display());
        }
        Command::Rir { config, out } => {
            let cfg = config.resolve()?;
            let summary = cmd_rir(&cfg, &out)?;
            println!(
                "wrote {} ({} taps, direct path at sample {})",
                summary.wav_path.display(),
                summary.taps,
                summary.direct_path_index
            );
            match summary.estimated_rt60 {
                Some(rt60) => println!("schroeder rt60 estimate: {rt60:.3} s"),
                None => println!("schroeder rt60 estimate: insufficient decay"),
            }
        }
        Command::Quantize {
            config,
            features,
            codebook,
            out,
            reconstruct,
        } => {
            let cfg = config.resolve()?;
            let summary =
                cmd_quantize(&cfg, &features, &codebook, &out, reconstruct.as_deref())?;
            println!(
                "wrote {} (feature mse {:.6e})",
                summary.codes_path.display(),
                summary.feature_mse
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
