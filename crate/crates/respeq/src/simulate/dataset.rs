//! Deterministic dataset synthesis and the tab-separated manifest format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::wav::{read_wav, write_wav, WavEncoding};
use crate::Waveform;

use super::{apply_rir, generate_rir, mix_at_snr, pseudo_speech, white_noise};
use super::{MixtureRecord, RoomSpec};

/// Manifest header line; one record per line below it, tab-separated.
pub const MANIFEST_HEADER: &str =
    "#id\tdry_path\treverb_path\tnoise_path\tmix_path\tsnr_db\trt60_s\tseed";

/// How per-record SNRs are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SnrPolicy {
    /// Fixed levels assigned round-robin: record `i` gets `levels[i % len]`.
    Levels(Vec<f64>),
    /// Uniform draw from `[lo, hi]` per record.
    Range(f64, f64),
}

/// How per-record RT60 targets are chosen; same conventions as [`SnrPolicy`].
#[derive(Debug, Clone, PartialEq)]
pub enum Rt60Policy {
    Levels(Vec<f64>),
    Range(f64, f64),
}

/// Where dry source segments come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourcePool {
    /// Built-in harmonic-plus-noise pseudo-speech, seeded per record.
    Synthetic,
    /// User WAV files; record `i` draws file `i % len`, cropped or looped
    /// to the segment length at a seeded offset.
    Wavs(Vec<PathBuf>),
}

/// Where noise segments come from.
#[derive(Debug, Clone, PartialEq)]
pub enum NoisePool {
    /// Seeded Gaussian white noise.
    WhiteGaussian,
    /// User WAV files, same assignment rule as [`SourcePool::Wavs`].
    Wavs(Vec<PathBuf>),
}

/// Full recipe for one synthesized dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub count: usize,
    pub sample_rate: u32,
    pub segment_secs: f64,
    pub snr: SnrPolicy,
    pub rt60: Rt60Policy,
    /// Sampling ranges for room length, width, height in meters.
    pub room_length: (f64, f64),
    pub room_width: (f64, f64),
    pub room_height: (f64, f64),
    /// Source and mic keep at least this distance from every wall.
    pub wall_margin: f64,
    pub max_reflection_order: u32,
    pub sources: SourcePool,
    pub noise: NoisePool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 4,
            sample_rate: 16000,
            segment_secs: 6.0,
            snr: SnrPolicy::Range(-6.0, 6.0),
            rt60: Rt60Policy::Range(0.15, 0.6),
            room_length: (4.0, 10.0),
            room_width: (3.0, 8.0),
            room_height: (2.4, 3.5),
            wall_margin: 0.5,
            max_reflection_order: 30,
            sources: SourcePool::Synthetic,
            noise: NoisePool::WhiteGaussian,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("dataset count must be >= 1".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if !self.segment_secs.is_finite() || self.segment_secs <= 0.0 {
            return Err(Error::Config("segment_secs must be positive".into()));
        }
        match &self.snr {
            SnrPolicy::Levels(levels) if levels.is_empty() => {
                return Err(Error::Config("snr levels list is empty".into()))
            }
            SnrPolicy::Levels(levels) => {
                if levels.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
                    return Err(Error::Config("snr level must be finite or +inf".into()));
                }
            }
            SnrPolicy::Range(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::Config(format!("bad snr range [{lo}, {hi}]")));
                }
            }
        }
        match &self.rt60 {
            Rt60Policy::Levels(levels) if levels.is_empty() => {
                return Err(Error::Config("rt60 levels list is empty".into()))
            }
            Rt60Policy::Levels(levels) => {
                if levels.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Config("rt60 level must be finite and >= 0".into()));
                }
            }
            Rt60Policy::Range(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= *lo && lo <= hi) {
                    return Err(Error::Config(format!("bad rt60 range [{lo}, {hi}]")));
                }
            }
        }
        for (name, (lo, hi)) in [
            ("room_length", self.room_length),
            ("room_width", self.room_width),
            ("room_height", self.room_height),
        ] {
            if !(lo > 0.0 && hi >= lo) {
                return Err(Error::Config(format!("bad {name} range [{lo}, {hi}]")));
            }
            if lo <= 2.0 * self.wall_margin {
                return Err(Error::Config(format!(
                    "{name} lower bound {lo} leaves no interior at wall_margin {}",
                    self.wall_margin
                )));
            }
        }
        if let SourcePool::Wavs(paths) = &self.sources {
            if paths.is_empty() {
                return Err(Error::Config("source WAV pool is empty".into()));
            }
        }
        if let NoisePool::Wavs(paths) = &self.noise {
            if paths.is_empty() {
                return Err(Error::Config("noise WAV pool is empty".into()));
            }
        }
        Ok(())
    }

    fn segment_len(&self) -> usize {
        ((self.segment_secs * f64::from(self.sample_rate)).round() as usize).max(1)
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub dry_path: PathBuf,
    pub reverb_path: PathBuf,
    pub noise_path: PathBuf,
    pub mix_path: PathBuf,
    pub snr_db: f64,
    pub rt60_s: f64,
    pub seed: u64,
}

/// Parsed manifest: the records plus the directory they are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        text.push_str(MANIFEST_HEADER);
        text.push('\n');
        for r in &self.records {
            writeln!(
                text,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.id,
                r.dry_path.display(),
                r.reverb_path.display(),
                r.noise_path.display(),
                r.mix_path.display(),
                r.snr_db,
                r.rt60_s,
                r.seed
            )
            .expect("string write");
        }
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 8 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    detail: format!("line {}: expected 8 columns, got {}", lineno + 1, fields.len()),
                });
            }
            let parse_f64 = |s: &str, what: &str| -> Result<f64> {
                match s {
                    "inf" | "+inf" => Ok(f64::INFINITY),
                    _ => s.parse().map_err(|_| Error::Parse {
                        path: path.to_path_buf(),
                        detail: format!("line {}: bad {what} {s:?}", lineno + 1),
                    }),
                }
            };
            records.push(ManifestRecord {
                id: fields[0].to_string(),
                dry_path: fields[1].into(),
                reverb_path: fields[2].into(),
                noise_path: fields[3].into(),
                mix_path: fields[4].into(),
                snr_db: parse_f64(fields[5], "snr_db")?,
                rt60_s: parse_f64(fields[6], "rt60_s")?,
                seed: fields[7].parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    detail: format!("line {}: bad seed {:?}", lineno + 1, fields[7]),
                })?,
            });
        }
        Ok(Self {
            records,
            base_dir,
        })
    }

    /// Resolve a record path against the manifest directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// SplitMix64 finalizer; decorrelates per-record seeds from the master.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-record seed derived from the master seed and record index, so
/// records are independent of synthesis order.
pub(crate) fn record_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

fn crop_or_loop(wave: &Waveform, len: usize, offset: usize) -> Vec<f64> {
    (0..len)
        .map(|i| wave.samples[(offset + i) % wave.len()])
        .collect()
}

fn load_pool_wav(paths: &[PathBuf], index: usize, sample_rate: u32) -> Result<Waveform> {
    let path = &paths[index % paths.len()];
    let wave = read_wav(path)?;
    if wave.sample_rate != sample_rate {
        return Err(Error::SampleRateMismatch {
            left: wave.sample_rate,
            right: sample_rate,
        });
    }
    Ok(wave)
}

fn synthesize_record(cfg: &DatasetConfig, index: usize, seed: u64) -> Result<MixtureRecord> {
    let per_seed = record_seed(seed, index as u64);
    let mut rng = ChaCha12Rng::seed_from_u64(per_seed);
    let len = cfg.segment_len();

    let snr_db = match &cfg.snr {
        SnrPolicy::Levels(levels) => levels[index % levels.len()],
        SnrPolicy::Range(lo, hi) => {
            if lo == hi {
                *lo
            } else {
                rng.random_range(*lo..*hi)
            }
        }
    };
    let rt60 = match &cfg.rt60 {
        Rt60Policy::Levels(levels) => levels[index % levels.len()],
        Rt60Policy::Range(lo, hi) => {
            if lo == hi {
                *lo
            } else {
                rng.random_range(*lo..*hi)
            }
        }
    };

    // Room draw; retry on infeasible rt60/absorption pairs with fresh
    // geometry (small rooms need shorter rt60 targets).
    let mut room = None;
    for _ in 0..64 {
        let dims = [
            rng.random_range(cfg.room_length.0..=cfg.room_length.1),
            rng.random_range(cfg.room_width.0..=cfg.room_width.1),
            rng.random_range(cfg.room_height.0..=cfg.room_height.1),
        ];
        let place = |rng: &mut ChaCha12Rng| {
            [
                rng.random_range(cfg.wall_margin..dims[0] - cfg.wall_margin),
                rng.random_range(cfg.wall_margin..dims[1] - cfg.wall_margin),
                rng.random_range(cfg.wall_margin..dims[2] - cfg.wall_margin),
            ]
        };
        let src = place(&mut rng);
        let mut mic = place(&mut rng);
        let mut guard = 0;
        while src
            .iter()
            .zip(&mic)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            < 0.3
        {
            mic = place(&mut rng);
            guard += 1;
            if guard > 32 {
                break;
            }
        }
        let candidate = RoomSpec::new(dims, src, mic, rt60, cfg.max_reflection_order)?;
        match generate_rir(&candidate, cfg.sample_rate) {
            Ok(_) => {
                room = Some(candidate);
                break;
            }
            Err(Error::InfeasibleRoom(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let room = room.ok_or_else(|| {
        Error::InfeasibleRoom(format!(
            "no feasible room found for rt60 {rt60} within the configured size ranges"
        ))
    })?;
    let rir = generate_rir(&room, cfg.sample_rate)?;

    let dry_seed = splitmix64(per_seed ^ 0x5e_ed_01);
    let dry = match &cfg.sources {
        SourcePool::Synthetic => pseudo_speech(len, cfg.sample_rate, dry_seed)?,
        SourcePool::Wavs(paths) => {
            let pool_wave = load_pool_wav(paths, index, cfg.sample_rate)?;
            let offset =
                ChaCha12Rng::seed_from_u64(dry_seed).random_range(0..pool_wave.len());
            Waveform::new(crop_or_loop(&pool_wave, len, offset), cfg.sample_rate)?
        }
    };

    let reverberant = apply_rir(&dry, &rir)?;

    let noise_seed = splitmix64(per_seed ^ 0x5e_ed_02);
    let noise_raw = match &cfg.noise {
        NoisePool::WhiteGaussian => white_noise(len, cfg.sample_rate, noise_seed)?,
        NoisePool::Wavs(paths) => load_pool_wav(paths, index, cfg.sample_rate)?,
    };
    let mix = mix_at_snr(&reverberant, &noise_raw, snr_db, noise_seed)?;

    let record = MixtureRecord {
        dry,
        reverberant,
        noise: mix.noise,
        mixture: mix.mixture,
        snr_db,
        rir,
        seed: per_seed,
    };
    record.validate()?;
    Ok(record)
}

/// Synthesize `cfg.count` records under `out_dir` and return the manifest.
///
/// Layout: `out_dir/wav/<id>_{dry,reverb,noise,mix}.wav` (binary32 WAV) and
/// `out_dir/manifest.tsv` with paths relative to the manifest. The whole
/// tree is a pure function of `(cfg, seed)`.
pub fn synthesize_dataset(
    cfg: &DatasetConfig,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;

    let mut records = Vec::with_capacity(cfg.count);
    for index in 0..cfg.count {
        let record = synthesize_record(cfg, index, seed)?;
        let id = format!("utt{index:05}");
        let rel = |suffix: &str| PathBuf::from("wav").join(format!("{id}_{suffix}.wav"));
        let entry = ManifestRecord {
            id: id.clone(),
            dry_path: rel("dry"),
            reverb_path: rel("reverb"),
            noise_path: rel("noise"),
            mix_path: rel("mix"),
            snr_db: record.snr_db,
            rt60_s: record.rir.room.rt60_target,
            seed: record.seed,
        };
        for (path, wave) in [
            (&entry.dry_path, &record.dry),
            (&entry.reverb_path, &record.reverberant),
            (&entry.noise_path, &record.noise),
            (&entry.mix_path, &record.mixture),
        ] {
            write_wav(out_dir.join(path), wave, WavEncoding::Float32)?;
        }
        records.push(entry);
    }

    let manifest = Manifest {
        records,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.write(out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}

/// Load the four waveforms of a manifest record.
pub fn load_record_waves(
    manifest: &Manifest,
    record: &ManifestRecord,
) -> Result<(Waveform, Waveform, Waveform, Waveform)> {
    Ok((
        read_wav(manifest.resolve(&record.dry_path))?,
        read_wav(manifest.resolve(&record.reverb_path))?,
        read_wav(manifest.resolve(&record.noise_path))?,
        read_wav(manifest.resolve(&record.mix_path))?,
    ))
}
