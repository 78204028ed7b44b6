//! Flat key-value run configuration.
//!
//! Config files hold one `key = value` pair per line; `#` starts a comment.
//! Unknown keys are rejected up front, command-line overrides win over the
//! file, and an explicit seed override wins over both. The fully resolved
//! table is echoed into every report header.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dsp::{FusionConfig, StftConfig, WindowKind};
use crate::error::{Error, Result};
use crate::pipeline::{
    CodecAdapterConfig, FeatureDomain, MaskSource, PhaseSource, Projection,
};
use crate::quantize::{Scheme, StackConfig, TrainConfig};
use crate::simulate::{DatasetConfig, NoisePool, RoomSpec, Rt60Policy, SnrPolicy, SourcePool};

/// Every key the config understands, with its default. Defaults are the
/// documented desk-scale settings; quantizer.N/D keep their production
/// values and are overridden per run as needed.
const KNOWN_KEYS: &[(&str, &str)] = &[
    ("sample_rate", "16000"),
    ("seed", "0"),
    ("stft.fft_size", "512"),
    ("stft.hop", "128"),
    ("stft.window", "sqrt_hann"),
    ("stft.center", "true"),
    ("quantizer.scheme", "sq-rvq"),
    ("quantizer.n_q", "8"),
    ("quantizer.N", "1024"),
    // 0 = derive from the adapter (identity projection: the bin count)
    ("quantizer.D", "0"),
    ("quantizer.K", "8"),
    ("quantizer.group_count", "2"),
    ("quantizer.fsq_levels", "5"),
    ("quantizer.lfq_delta", "1"),
    ("quantizer.parallel_weight", "0.5"),
    ("quantizer.reserved_zero", "true"),
    ("train.epochs", "10"),
    ("train.ema_decay", "0.99"),
    ("train.kmeans_iters", "2"),
    ("train.target", "reverberant"),
    ("fusion.beta", "off"),
    ("fusion.params_path", ""),
    ("adapter.projection", "identity"),
    ("adapter.projection_seed", "0"),
    ("adapter.feature_domain", "log_magnitude"),
    ("adapter.phase_source", "from_input"),
    ("adapter.log_floor", "1e-7"),
    ("mask.source", "oracle"),
    ("mask.path", ""),
    ("sim.count", "4"),
    ("sim.segment_secs", "6"),
    ("sim.snr_levels", ""),
    ("sim.snr_range", "-6,6"),
    ("sim.rt60_levels", ""),
    ("sim.rt60_range", "0.15,0.6"),
    ("sim.max_order", "30"),
    ("sim.room_length", "4,10"),
    ("sim.room_width", "3,8"),
    ("sim.room_height", "2.4,3.5"),
    ("sim.wall_margin", "0.5"),
    ("sim.source_wavs", ""),
    ("sim.noise_wavs", ""),
    ("rir.room", "6,5,3"),
    ("rir.source", "1,1,1.5"),
    ("rir.mic", "4.4,1,1.5"),
    ("rir.rt60", "0.3"),
    ("rir.order", "30"),
];

/// Resolved configuration: defaults, then file entries, then overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            entries: KNOWN_KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    /// Load a config file (optional) and apply `key=value` overrides, then
    /// the seed override. Unknown keys anywhere are an error.
    pub fn load(
        file: Option<&Path>,
        overrides: &[(String, String)],
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "{}:{}: expected 'key = value'",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                cfg.set(key.trim(), value.trim())?;
            }
        }
        for (key, value) in overrides {
            cfg.set(key.trim(), value.trim())?;
        }
        if let Some(seed) = seed {
            cfg.entries.insert("seed".into(), seed.to_string());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("unknown config key {key:?}")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Resolved entries in sorted order, for report headers.
    pub fn echo(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn raw(&self, key: &str) -> &str {
        self.entries
            .get(key)
            .map(String::as_str)
            .expect("all known keys have defaults")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.raw(key)
            .parse()
            .map_err(|_| Error::Config(format!("bad value for {key}: {:?}", self.raw(key))))
    }

    fn parse_bool(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(Error::Config(format!("bad boolean for {key}: {other:?}"))),
        }
    }

    fn parse_pair(&self, key: &str) -> Result<(f64, f64)> {
        let list = self.parse_list(key)?;
        if list.len() != 2 {
            return Err(Error::Config(format!(
                "{key} expects 'lo,hi', got {:?}",
                self.raw(key)
            )));
        }
        Ok((list[0], list[1]))
    }

    fn parse_list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)
            .split(',')
            .map(|p| p.trim())
            .filter(|p| !p.is_empty())
            .map(|p| match p {
                "inf" | "+inf" => Ok(f64::INFINITY),
                _ => p
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number {p:?} in {key}"))),
            })
            .collect()
    }

    fn parse_triple(&self, key: &str) -> Result<[f64; 3]> {
        let list = self.parse_list(key)?;
        if list.len() != 3 {
            return Err(Error::Config(format!(
                "{key} expects 'x,y,z', got {:?}",
                self.raw(key)
            )));
        }
        Ok([list[0], list[1], list[2]])
    }

    fn parse_paths(&self, key: &str) -> Vec<PathBuf> {
        self.raw(key)
            .split(';')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(PathBuf::from)
            .collect()
    }

    pub fn sample_rate(&self) -> Result<u32> {
        self.parse("sample_rate")
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("seed")
    }

    pub fn stft_config(&self) -> Result<StftConfig> {
        let window = match self.raw("stft.window") {
            "hann" => WindowKind::Hann,
            "sqrt_hann" => WindowKind::SqrtHann,
            other => {
                return Err(Error::Config(format!(
                    "stft.window must be hann or sqrt_hann, got {other:?}"
                )))
            }
        };
        StftConfig::new(
            self.parse("stft.fft_size")?,
            self.parse("stft.hop")?,
            window,
            self.parse_bool("stft.center")?,
        )
    }

    pub fn adapter_config(&self) -> Result<CodecAdapterConfig> {
        let stft = self.stft_config()?;
        let projection = match self.raw("adapter.projection") {
            "identity" => Projection::Identity,
            "random" => {
                let dim: usize = self.parse("quantizer.D")?;
                let dim = if dim == 0 { stft.bins() } else { dim };
                Projection::RandomOrthonormal {
                    dim,
                    seed: self.parse("adapter.projection_seed")?,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "adapter.projection must be identity or random, got {other:?}"
                )))
            }
        };
        let feature_domain = match self.raw("adapter.feature_domain") {
            "log_magnitude" => FeatureDomain::LogMagnitude,
            "magnitude" => FeatureDomain::Magnitude,
            other => {
                return Err(Error::Config(format!(
                    "adapter.feature_domain must be log_magnitude or magnitude, got {other:?}"
                )))
            }
        };
        let phase_source = match self.raw("adapter.phase_source") {
            "from_input" => PhaseSource::FromInput,
            "from_mixture" => PhaseSource::FromMixture,
            other => {
                return Err(Error::Config(format!(
                    "adapter.phase_source must be from_input or from_mixture, got {other:?}"
                )))
            }
        };
        Ok(CodecAdapterConfig {
            stft,
            projection,
            feature_domain,
            phase_source,
            log_floor: self.parse("adapter.log_floor")?,
        })
    }

    /// Stack parameters; `dim` comes from the adapter when quantizer.D = 0.
    pub fn stack_config(&self, adapter_dim: usize) -> Result<StackConfig> {
        let configured: usize = self.parse("quantizer.D")?;
        let dim = if configured == 0 { adapter_dim } else { configured };
        if dim != adapter_dim {
            return Err(Error::Config(format!(
                "quantizer.D = {dim} does not match the adapter dimensionality {adapter_dim}"
            )));
        }
        Ok(StackConfig {
            scheme: Scheme::parse(self.raw("quantizer.scheme"))?,
            dim,
            n_q: self.parse("quantizer.n_q")?,
            codebook_size: self.parse("quantizer.N")?,
            scalar_k: self.parse("quantizer.K")?,
            fsq_levels: self.parse("quantizer.fsq_levels")?,
            lfq_delta: self.parse("quantizer.lfq_delta")?,
            group_count: self.parse("quantizer.group_count")?,
            parallel_weight: self.parse("quantizer.parallel_weight")?,
            reserved_zero: self.parse_bool("quantizer.reserved_zero")?,
            init_seed: self.seed()?,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.parse("train.epochs")?,
            ema_decay: self.parse("train.ema_decay")?,
            kmeans_init_iters: self.parse("train.kmeans_iters")?,
            seed: self.seed()?,
        })
    }

    /// Which manifest waveform codebooks are trained on.
    pub fn train_target(&self) -> Result<&str> {
        match self.raw("train.target") {
            t @ ("dry" | "reverberant" | "mixture") => Ok(t),
            other => Err(Error::Config(format!(
                "train.target must be dry, reverberant, or mixture, got {other:?}"
            ))),
        }
    }

    pub fn mask_source(&self) -> Result<MaskSource> {
        match self.raw("mask.source") {
            "oracle" => Ok(MaskSource::Oracle),
            "passthrough" => Ok(MaskSource::Passthrough),
            "file" => {
                let path = self.raw("mask.path");
                if path.is_empty() {
                    return Err(Error::Config(
                        "mask.source = file requires mask.path".into(),
                    ));
                }
                Ok(MaskSource::File(PathBuf::from(path)))
            }
            other => Err(Error::Config(format!(
                "mask.source must be oracle, passthrough, or file, got {other:?}"
            ))),
        }
    }

    pub fn fusion(&self) -> Result<Option<FusionConfig>> {
        let params_path = self.raw("fusion.params_path");
        if !params_path.is_empty() {
            let params = crate::dsp::load_affine_params(Path::new(params_path))?;
            return Ok(Some(FusionConfig::Affine(params)));
        }
        match self.raw("fusion.beta") {
            "off" | "" => Ok(None),
            raw => {
                let beta: f64 = raw
                    .parse()
                    .map_err(|_| Error::Config(format!("bad fusion.beta {raw:?}")))?;
                Ok(Some(FusionConfig::convex(beta)?))
            }
        }
    }

    pub fn dataset_config(&self) -> Result<DatasetConfig> {
        let snr_levels = self.parse_list("sim.snr_levels")?;
        let snr = if snr_levels.is_empty() {
            let (lo, hi) = self.parse_pair("sim.snr_range")?;
            SnrPolicy::Range(lo, hi)
        } else {
            SnrPolicy::Levels(snr_levels)
        };
        let rt60_levels = self.parse_list("sim.rt60_levels")?;
        let rt60 = if rt60_levels.is_empty() {
            let (lo, hi) = self.parse_pair("sim.rt60_range")?;
            Rt60Policy::Range(lo, hi)
        } else {
            Rt60Policy::Levels(rt60_levels)
        };
        let source_wavs = self.parse_paths("sim.source_wavs");
        let noise_wavs = self.parse_paths("sim.noise_wavs");
        let cfg = DatasetConfig {
            count: self.parse("sim.count")?,
            sample_rate: self.sample_rate()?,
            segment_secs: self.parse("sim.segment_secs")?,
            snr,
            rt60,
            room_length: self.parse_pair("sim.room_length")?,
            room_width: self.parse_pair("sim.room_width")?,
            room_height: self.parse_pair("sim.room_height")?,
            wall_margin: self.parse("sim.wall_margin")?,
            max_reflection_order: self.parse("sim.max_order")?,
            sources: if source_wavs.is_empty() {
                SourcePool::Synthetic
            } else {
                SourcePool::Wavs(source_wavs)
            },
            noise: if noise_wavs.is_empty() {
                NoisePool::WhiteGaussian
            } else {
                NoisePool::Wavs(noise_wavs)
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn rir_room(&self) -> Result<RoomSpec> {
        RoomSpec::new(
            self.parse_triple("rir.room")?,
            self.parse_triple("rir.source")?,
            self.parse_triple("rir.mic")?,
            self.parse("rir.rt60")?,
            self.parse("rir.order")?,
        )
    }

    /// Check every path-valued entry up front, before any command runs.
    pub fn validate_paths(&self) -> Result<()> {
        let mut paths: Vec<PathBuf> = Vec::new();
        for key in ["fusion.params_path", "mask.path"] {
            let raw = self.raw(key);
            if !raw.is_empty() {
                paths.push(PathBuf::from(raw));
            }
        }
        paths.extend(self.parse_paths("sim.source_wavs"));
        paths.extend(self.parse_paths("sim.noise_wavs"));
        for path in paths {
            if !path.exists() {
                return Err(Error::MissingInput(format!(
                    "configured path {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_cleanly() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.sample_rate().unwrap(), 16000);
        assert_eq!(cfg.seed().unwrap(), 0);
        let stft = cfg.stft_config().unwrap();
        assert_eq!(stft.fft_size, 512);
        let adapter = cfg.adapter_config().unwrap();
        assert_eq!(adapter.stft.bins(), 257);
        let stack = cfg.stack_config(257).unwrap();
        assert_eq!(stack.scheme, Scheme::SqRvq);
        assert_eq!(stack.dim, 257);
        assert!(cfg.fusion().unwrap().is_none());
        assert!(matches!(cfg.mask_source().unwrap(), MaskSource::Oracle));
        cfg.dataset_config().unwrap();
        cfg.rir_room().unwrap();
        cfg.validate_paths().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("quantizer.n_q", "4").is_ok());
        assert!(matches!(
            cfg.set("quantizer.bogus", "1"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn file_and_overrides_and_seed_priority() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "seed = 5\nquantizer.scheme = rvq # comment\n").unwrap();
        let cfg = RunConfig::load(
            Some(&path),
            &[("quantizer.scheme".into(), "sq".into())],
            Some(99),
        )
        .unwrap();
        assert_eq!(cfg.seed().unwrap(), 99);
        assert_eq!(cfg.stack_config(257).unwrap().scheme, Scheme::Sq);
    }

    #[test]
    fn bad_file_line_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "this is not a pair\n").unwrap();
        assert!(RunConfig::load(Some(&path), &[], None).is_err());
    }

    #[test]
    fn snr_levels_beat_range() {
        let mut cfg = RunConfig::default();
        cfg.set("sim.snr_levels", "-5,0,5").unwrap();
        match cfg.dataset_config().unwrap().snr {
            SnrPolicy::Levels(l) => assert_eq!(l, vec![-5.0, 0.0, 5.0]),
            other => panic!("expected levels, got {other:?}"),
        }
    }

    #[test]
    fn negative_rt60_is_config_error() {
        let mut cfg = RunConfig::default();
        cfg.set("sim.rt60_range", "-0.1,0.3").unwrap();
        assert!(matches!(cfg.dataset_config(), Err(Error::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.set("rir.rt60", "-1").unwrap();
        assert!(cfg.rir_room().is_err());
    }

    #[test]
    fn missing_configured_path_caught_up_front() {
        let mut cfg = RunConfig::default();
        cfg.set("sim.source_wavs", "/no/such/file.wav").unwrap();
        assert!(matches!(cfg.validate_paths(), Err(Error::MissingInput(_))));
    }

    #[test]
    fn quantizer_dim_mismatch_rejected() {
        let mut cfg = RunConfig::default();
        cfg.set("quantizer.D", "100").unwrap();
        assert!(cfg.stack_config(257).is_err());
    }
}
