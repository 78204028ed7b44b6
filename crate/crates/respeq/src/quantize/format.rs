//! Codebook file format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   "RSEQ" (4 bytes)
//! version u16 = 1
//! payload:
//!   scheme tag      u8
//!   n_q             u8    stage count of the residual chain
//!   flags           u8    bit 0: reserved_zero
//!   group_count     u8
//!   parallel_weight f64
//!   dim             u32   total feature dimensionality D
//!   chain_count     u8
//!   per chain: stage_count u8, then per stage:
//!     kind u8 = 0 scalar: K u32
//!     kind u8 = 1 vq:     N u32, D u32, N*D binary32 row-major vectors
//!     kind u8 = 2 fsq:    D u32, D level counts u32
//!     kind u8 = 3 lfq:    D u32, delta f64
//! crc     u32 CRC-32 (IEEE) of the payload bytes
//! ```
//!
//! Codebook vectors are stored (and held in memory) as binary32, so
//! `load(save(stack))` reproduces every vector and configuration field
//! bit-exactly. EMA training state is runtime-only and not serialized.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::simulate::write_atomic_bytes;

use super::stack::QuantizerStack;
use super::stage::{Codebook, FsqStage, LfqStage, ScalarStage, Stage};
use super::Scheme;

pub(crate) const CODEBOOK_MAGIC: &[u8; 4] = b"RSEQ";
pub(crate) const FORMAT_VERSION: u16 = 1;

/// Serialize a stack to its on-disk form.
pub fn save_codebooks(stack: &QuantizerStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut payload = vec![stack.scheme().tag()];
    payload.push(stack.n_stages() as u8);
    payload.push(u8::from(stack.reserved_zero()));
    payload.push(stack.group_count() as u8);
    payload.extend_from_slice(&stack.parallel_weight().to_le_bytes());
    payload.extend_from_slice(&(stack.dim() as u32).to_le_bytes());
    payload.push(stack.chains().len() as u8);
    for chain in stack.chains() {
        payload.push(chain.len() as u8);
        for stage in chain {
            match stage {
                Stage::Scalar(s) => {
                    payload.push(0);
                    payload.extend_from_slice(&s.k().to_le_bytes());
                }
                Stage::Vq(cb) => {
                    payload.push(1);
                    payload.extend_from_slice(&(cb.n_codes() as u32).to_le_bytes());
                    payload.extend_from_slice(&(cb.dim() as u32).to_le_bytes());
                    for v in cb.vectors().iter() {
                        payload.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Stage::Fsq(s) => {
                    payload.push(2);
                    payload.extend_from_slice(&(s.dim() as u32).to_le_bytes());
                    for level in s.levels() {
                        payload.extend_from_slice(&level.to_le_bytes());
                    }
                }
                Stage::Lfq(s) => {
                    payload.push(3);
                    payload.extend_from_slice(&(s.dim() as u32).to_le_bytes());
                    payload.extend_from_slice(&s.delta().to_le_bytes());
                }
            }
        }
    }

    let mut bytes = Vec::with_capacity(payload.len() + 10);
    bytes.extend_from_slice(CODEBOOK_MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&payload);
    bytes.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    write_atomic_bytes(path, &bytes)
}

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self {
            bytes,
            pos: 0,
            path,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::BadFormat {
                path: self.path.to_path_buf(),
                detail: format!("truncated at byte {} (wanted {n} more)", self.pos),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn bad(&self, detail: impl Into<String>) -> Error {
        Error::BadFormat {
            path: self.path.to_path_buf(),
            detail: detail.into(),
        }
    }
}

/// Validate magic, version, and trailing CRC; returns the payload slice.
pub(crate) fn open_container<'a>(
    bytes: &'a [u8],
    path: &'a Path,
    magic: &[u8; 4],
) -> Result<&'a [u8]> {
    if bytes.len() < 10 {
        return Err(Error::BadFormat {
            path: path.to_path_buf(),
            detail: "file too short for header".into(),
        });
    }
    if &bytes[0..4] != magic {
        return Err(Error::BadFormat {
            path: path.to_path_buf(),
            detail: format!(
                "bad magic {:?}, expected {:?}",
                &bytes[0..4],
                std::str::from_utf8(magic).unwrap_or("?")
            ),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let payload = &bytes[6..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32fast::hash(payload) != stored {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
        });
    }
    Ok(payload)
}

/// Load a stack saved by [`save_codebooks`].
pub fn load_codebooks(path: impl AsRef<Path>) -> Result<QuantizerStack> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let payload = open_container(&bytes, path, CODEBOOK_MAGIC)?;
    let mut cur = Cursor::new(payload, path);

    let scheme_tag = cur.u8()?;
    let scheme = Scheme::from_tag(scheme_tag)
        .ok_or_else(|| cur.bad(format!("unknown scheme tag {scheme_tag}")))?;
    let _n_q = cur.u8()?;
    let flags = cur.u8()?;
    let reserved_zero = flags & 1 == 1;
    let group_count = usize::from(cur.u8()?);
    let parallel_weight = cur.f64()?;
    let dim = cur.u32()? as usize;
    let chain_count = usize::from(cur.u8()?);

    let mut chains = Vec::with_capacity(chain_count);
    for _ in 0..chain_count {
        let stage_count = usize::from(cur.u8()?);
        let mut chain = Vec::with_capacity(stage_count);
        for _ in 0..stage_count {
            let kind = cur.u8()?;
            let stage = match kind {
                0 => Stage::Scalar(ScalarStage::new(cur.u32()?)?),
                1 => {
                    let n = cur.u32()? as usize;
                    let d = cur.u32()? as usize;
                    if n == 0 || d == 0 || n.saturating_mul(d) > 1 << 28 {
                        return Err(cur.bad(format!("implausible codebook {n} x {d}")));
                    }
                    let mut vectors = Array2::<f32>::zeros((n, d));
                    for v in vectors.iter_mut() {
                        *v = cur.f32()?;
                    }
                    Stage::Vq(Codebook::new(vectors, reserved_zero)?)
                }
                2 => {
                    let d = cur.u32()? as usize;
                    let mut levels = Vec::with_capacity(d);
                    for _ in 0..d {
                        levels.push(cur.u32()?);
                    }
                    Stage::Fsq(FsqStage::new(levels)?)
                }
                3 => {
                    let d = cur.u32()? as usize;
                    let delta = cur.f64()?;
                    Stage::Lfq(LfqStage::new(d, delta, reserved_zero)?)
                }
                other => return Err(cur.bad(format!("unknown stage kind {other}"))),
            };
            chain.push(stage);
        }
        chains.push(chain);
    }
    if cur.remaining() != 0 {
        return Err(cur.bad(format!("{} trailing payload bytes", cur.remaining())));
    }

    QuantizerStack::from_parts(
        scheme,
        dim,
        group_count,
        parallel_weight,
        reserved_zero,
        chains,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{quantize, FeatureMatrix, StackConfig};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn sample_stack(scheme: Scheme) -> QuantizerStack {
        QuantizerStack::build(&StackConfig {
            init_seed: 77,
            ..StackConfig::desk(scheme, 8, 16)
        })
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_quantize_output() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let z = FeatureMatrix::new(Array2::from_shape_fn((7, 8), |_| {
            rng.random_range(-2.0..2.0)
        }))
        .unwrap();
        for scheme in Scheme::ALL {
            let path = dir.path().join(format!("{scheme}.rseq"));
            let stack = sample_stack(scheme);
            save_codebooks(&stack, &path).unwrap();
            let loaded = load_codebooks(&path).unwrap();
            assert_eq!(loaded, stack, "scheme {scheme}");
            let a = quantize(&stack, &z).unwrap();
            let b = quantize(&loaded, &z).unwrap();
            assert_eq!(a.quantized.data, b.quantized.data);
            assert_eq!(a.codes, b.codes);
        }
    }

    #[test]
    fn corrupted_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.rseq");
        save_codebooks(&sample_stack(Scheme::Rvq), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_codebooks(&path),
            Err(Error::BadFormat { .. })
        ));
    }

    #[test]
    fn future_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.rseq");
        save_codebooks(&sample_stack(Scheme::Sq), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_codebooks(&path),
            Err(Error::UnsupportedVersion { version: 99, .. })
        ));
    }

    #[test]
    fn flipped_payload_bit_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.rseq");
        save_codebooks(&sample_stack(Scheme::SqRvq), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_codebooks(&path),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.rseq");
        save_codebooks(&sample_stack(Scheme::Rvq), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 3]).unwrap();
        let err = load_codebooks(&path).unwrap_err();
        assert!(
            matches!(err, Error::BadFormat { .. } | Error::ChecksumMismatch { .. }),
            "got {err:?}"
        );
    }
}
