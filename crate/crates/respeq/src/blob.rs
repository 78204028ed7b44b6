//! Binary intermediate artifacts: features, complex masks, waveforms, and
//! quantizer codes.
//!
//! All four share the codebook container conventions — a four-byte magic,
//! `u16` version, little-endian payload, trailing CRC-32 — with payloads in
//! binary64 so a pipeline split across files reproduces the in-process run
//! bit for bit.
//!
//! | magic  | payload                                                      |
//! |--------|--------------------------------------------------------------|
//! | `RSEF` | frames u64, dim u64, row-major f64 values                    |
//! | `RSEM` | frames u64, bins u64, row-major (re, im) f64 pairs           |
//! | `RSEW` | sample_rate u32, length u64, f64 samples                     |
//! | `RSEC` | scheme u8, frames u64, dim u64, chains (see below)           |
//!
//! Code chains: chain count u8, then per chain a stage count u8 and per
//! stage a kind tag u8 with `0` scalar (K u32, count u64, i32 grid),
//! `1` vq (count u64, u32 indices), `2` fsq (count u64, u32 levels),
//! `3` lfq (count u64, u8 signs, count u64, u8 escapes).

use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantize::format::{open_container, Cursor, FORMAT_VERSION};
use crate::quantize::{Codes, FeatureMatrix, Scheme, StageCodes};
use crate::simulate::write_atomic_bytes;
use crate::Waveform;

const FEATURES_MAGIC: &[u8; 4] = b"RSEF";
const MASK_MAGIC: &[u8; 4] = b"RSEM";
const WAVE_MAGIC: &[u8; 4] = b"RSEW";
const CODES_MAGIC: &[u8; 4] = b"RSEC";

fn seal(magic: &[u8; 4], payload: Vec<u8>, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(payload.len() + 10);
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&payload);
    bytes.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    write_atomic_bytes(path, &bytes)
}

pub fn write_features(features: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut payload = Vec::new();
    payload.extend_from_slice(&(features.frames() as u64).to_le_bytes());
    payload.extend_from_slice(&(features.dim() as u64).to_le_bytes());
    for v in features.data.iter() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    seal(FEATURES_MAGIC, payload, path.as_ref())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let payload = open_container(&bytes, path, FEATURES_MAGIC)?;
    let mut cur = Cursor::new(payload, path);
    let frames = cur.u64()? as usize;
    let dim = cur.u64()? as usize;
    let mut data = Array2::<f64>::zeros((frames, dim));
    for v in data.iter_mut() {
        *v = cur.f64()?;
    }
    if cur.remaining() != 0 {
        return Err(cur.bad("trailing bytes after feature payload"));
    }
    FeatureMatrix::new(data)
}

/// Complex frames x bins matrix (mask or raw spectrogram data).
pub fn write_complex_matrix(data: &Array2<Complex64>, path: impl AsRef<Path>) -> Result<()> {
    let mut payload = Vec::new();
    payload.extend_from_slice(&(data.nrows() as u64).to_le_bytes());
    payload.extend_from_slice(&(data.ncols() as u64).to_le_bytes());
    for c in data.iter() {
        payload.extend_from_slice(&c.re.to_le_bytes());
        payload.extend_from_slice(&c.im.to_le_bytes());
    }
    seal(MASK_MAGIC, payload, path.as_ref())
}

pub fn read_complex_matrix(path: impl AsRef<Path>) -> Result<Array2<Complex64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let payload = open_container(&bytes, path, MASK_MAGIC)?;
    let mut cur = Cursor::new(payload, path);
    let frames = cur.u64()? as usize;
    let bins = cur.u64()? as usize;
    let mut data = Array2::<Complex64>::zeros((frames, bins));
    for c in data.iter_mut() {
        let re = cur.f64()?;
        let im = cur.f64()?;
        *c = Complex64::new(re, im);
    }
    if cur.remaining() != 0 {
        return Err(cur.bad("trailing bytes after mask payload"));
    }
    Ok(data)
}

/// Waveform at full binary64 precision (unlike WAV export).
pub fn write_waveform(wave: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let mut payload = Vec::new();
    payload.extend_from_slice(&wave.sample_rate.to_le_bytes());
    payload.extend_from_slice(&(wave.len() as u64).to_le_bytes());
    for s in &wave.samples {
        payload.extend_from_slice(&s.to_le_bytes());
    }
    seal(WAVE_MAGIC, payload, path.as_ref())
}

pub fn read_waveform(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let payload = open_container(&bytes, path, WAVE_MAGIC)?;
    let mut cur = Cursor::new(payload, path);
    let sample_rate = cur.u32()?;
    let len = cur.u64()? as usize;
    let mut samples = Vec::with_capacity(len);
    for _ in 0..len {
        samples.push(cur.f64()?);
    }
    if cur.remaining() != 0 {
        return Err(cur.bad("trailing bytes after waveform payload"));
    }
    Waveform::new(samples, sample_rate)
}

pub fn write_codes(codes: &Codes, path: impl AsRef<Path>) -> Result<()> {
    let mut payload = Vec::new();
    payload.push(codes.scheme.tag());
    payload.extend_from_slice(&(codes.frames as u64).to_le_bytes());
    payload.extend_from_slice(&(codes.dim as u64).to_le_bytes());
    payload.push(codes.chains.len() as u8);
    for chain in &codes.chains {
        payload.push(chain.len() as u8);
        for stage in chain {
            match stage {
                StageCodes::Scalar { k, grid } => {
                    payload.push(0);
                    payload.extend_from_slice(&k.to_le_bytes());
                    payload.extend_from_slice(&(grid.len() as u64).to_le_bytes());
                    for g in grid {
                        payload.extend_from_slice(&g.to_le_bytes());
                    }
                }
                StageCodes::Vq { indices } => {
                    payload.push(1);
                    payload.extend_from_slice(&(indices.len() as u64).to_le_bytes());
                    for i in indices {
                        payload.extend_from_slice(&i.to_le_bytes());
                    }
                }
                StageCodes::Fsq { levels } => {
                    payload.push(2);
                    payload.extend_from_slice(&(levels.len() as u64).to_le_bytes());
                    for l in levels {
                        payload.extend_from_slice(&l.to_le_bytes());
                    }
                }
                StageCodes::Lfq { signs, escaped } => {
                    payload.push(3);
                    payload.extend_from_slice(&(signs.len() as u64).to_le_bytes());
                    payload.extend_from_slice(signs);
                    payload.extend_from_slice(&(escaped.len() as u64).to_le_bytes());
                    payload.extend_from_slice(escaped);
                }
            }
        }
    }
    seal(CODES_MAGIC, payload, path.as_ref())
}

pub fn read_codes(path: impl AsRef<Path>) -> Result<Codes> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let payload = open_container(&bytes, path, CODES_MAGIC)?;
    let mut cur = Cursor::new(payload, path);
    let tag = cur.u8()?;
    let scheme =
        Scheme::from_tag(tag).ok_or_else(|| cur.bad(format!("unknown scheme tag {tag}")))?;
    let frames = cur.u64()? as usize;
    let dim = cur.u64()? as usize;
    let chain_count = usize::from(cur.u8()?);
    let mut chains = Vec::with_capacity(chain_count);
    for _ in 0..chain_count {
        let stage_count = usize::from(cur.u8()?);
        let mut chain = Vec::with_capacity(stage_count);
        for _ in 0..stage_count {
            let kind = cur.u8()?;
            let stage = match kind {
                0 => {
                    let k = cur.u32()?;
                    let count = cur.u64()? as usize;
                    let mut grid = Vec::with_capacity(count);
                    for _ in 0..count {
                        grid.push(i32::from_le_bytes(cur.take(4)?.try_into().unwrap()));
                    }
                    StageCodes::Scalar { k, grid }
                }
                1 => {
                    let count = cur.u64()? as usize;
                    let mut indices = Vec::with_capacity(count);
                    for _ in 0..count {
                        indices.push(cur.u32()?);
                    }
                    StageCodes::Vq { indices }
                }
                2 => {
                    let count = cur.u64()? as usize;
                    let mut levels = Vec::with_capacity(count);
                    for _ in 0..count {
                        levels.push(cur.u32()?);
                    }
                    StageCodes::Fsq { levels }
                }
                3 => {
                    let count = cur.u64()? as usize;
                    let signs = cur.take(count)?.to_vec();
                    let count = cur.u64()? as usize;
                    let escaped = cur.take(count)?.to_vec();
                    StageCodes::Lfq { signs, escaped }
                }
                other => return Err(cur.bad(format!("unknown stage-code kind {other}"))),
            };
            chain.push(stage);
        }
        chains.push(chain);
    }
    if cur.remaining() != 0 {
        return Err(cur.bad("trailing bytes after code payload"));
    }
    Ok(Codes {
        scheme,
        frames,
        dim,
        chains,
    })
}
