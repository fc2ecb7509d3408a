//! `.tsfck` checkpoint container.
//!
//! ```text
//! magic            8 bytes   "TSFCKPT\n"
//! format_version   u32 LE
//! header_len       u64 LE
//! header           JSON: architecture, block sizes, manifest, scaler, ...
//! n_values         u64 LE
//! payload          n_values x f64 LE, blocks in header order
//! sha256           32 bytes over everything above
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsf_core::neural::model::{Architecture, ModelParams, BLOCK_NAMES};
use tsf_core::neural::Parameters;
use tsf_core::preprocess::ScalerParams;
use tsf_core::trainer::{Checkpoint, CHECKPOINT_FORMAT_VERSION, GATE_ORDER};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MAGIC: &[u8; 8] = b"TSFCKPT\n";
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ArchitectureHeader {
    input_size: usize,
    hidden1: usize,
    hidden2: usize,
    lookback: usize,
    dropout_rate: f64,
    gate_order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    architecture: ArchitectureHeader,
    blocks: Vec<BlockHeader>,
    manifest: Vec<String>,
    target_column: String,
    scaler: ScalerParams,
    train_fraction: f64,
    best_val_loss: f64,
    best_epoch: usize,
}

pub fn encode(c: &Checkpoint) -> Vec<u8> {
    let arch = c.architecture();
    let blocks = c.params.blocks();
    let header = Header {
        format_version: c.format_version,
        architecture: ArchitectureHeader {
            input_size: arch.input_size,
            hidden1: arch.hidden1,
            hidden2: arch.hidden2,
            lookback: c.lookback,
            dropout_rate: arch.dropout_rate,
            gate_order: GATE_ORDER.iter().map(|s| s.to_string()).collect(),
        },
        blocks: blocks
            .iter()
            .map(|(name, b)| BlockHeader {
                name: name.to_string(),
                len: b.len(),
            })
            .collect(),
        manifest: c.manifest.clone(),
        target_column: c.target_column.clone(),
        scaler: c.scaler.clone(),
        train_fraction: c.train_fraction,
        best_val_loss: c.best_val_loss,
        best_epoch: c.best_epoch,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let n_values: usize = blocks.iter().map(|(_, b)| b.len()).sum();

    let mut out = Vec::with_capacity(8 + 4 + 8 + json.len() + 8 + 8 * n_values + DIGEST_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&c.format_version.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(n_values as u64).to_le_bytes());
    for (_, b) in &blocks {
        for v in b.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Truncated {
            path: self.path.into(),
            what,
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Parses and verifies a checkpoint. `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let inconsistent = |message: String| Error::Inconsistent {
        path: path.into(),
        message,
    };
    let mut cur = Cursor { bytes, pos: 0, path };
    if cur.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Version {
            path: path.into(),
            found: version,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let header_len = cur.u64("header length")? as usize;
    let header_bytes = cur.take(header_len, "header")?;
    let n_values = cur.u64("payload length")? as usize;
    let payload = cur.take(n_values.checked_mul(8).ok_or_else(|| inconsistent("payload length overflows".into()))?, "payload")?;
    let body_end = cur.pos;
    let digest = cur.take(DIGEST_LEN, "checksum")?;
    if cur.pos != bytes.len() {
        return Err(inconsistent(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    if Sha256::digest(&bytes[..body_end]).as_slice() != digest {
        return Err(Error::Checksum { path: path.into() });
    }

    let header: Header = serde_json::from_slice(header_bytes).map_err(|e| Error::json(path, e))?;
    if header.format_version != version {
        return Err(inconsistent(format!(
            "header version {} disagrees with file version {version}",
            header.format_version
        )));
    }
    let a = &header.architecture;
    if a.gate_order != GATE_ORDER {
        return Err(inconsistent(format!("unsupported gate order {:?}", a.gate_order)));
    }
    let arch = Architecture {
        input_size: a.input_size,
        hidden1: a.hidden1,
        hidden2: a.hidden2,
        dropout_rate: a.dropout_rate,
    };
    arch.validate()?;
    let mut params = ModelParams::zeros(&arch);
    {
        let mut blocks = params.blocks_mut();
        if header.blocks.len() != blocks.len() {
            return Err(inconsistent(format!("{} weight blocks, expected {}", header.blocks.len(), blocks.len())));
        }
        let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let mut total = 0;
        for ((name, dst), h) in blocks.iter_mut().zip(&header.blocks) {
            if h.name != *name || h.len != dst.len() {
                return Err(inconsistent(format!(
                    "block `{}` of length {} where `{name}` of length {} was expected",
                    h.name,
                    h.len,
                    dst.len()
                )));
            }
            for slot in dst.iter_mut() {
                *slot = values.next().ok_or_else(|| inconsistent("payload shorter than blocks".into()))?;
            }
            total += h.len;
        }
        if total != n_values {
            return Err(inconsistent(format!("payload holds {n_values} values, blocks need {total}")));
        }
    }
    debug_assert_eq!(BLOCK_NAMES.len(), header.blocks.len());
    let checkpoint = Checkpoint {
        format_version: version,
        lookback: a.lookback,
        train_fraction: header.train_fraction,
        params,
        scaler: header.scaler,
        manifest: header.manifest,
        target_column: header.target_column,
        best_val_loss: header.best_val_loss,
        best_epoch: header.best_epoch,
    };
    checkpoint.validate().map_err(|e| inconsistent(e.to_string()))?;
    Ok(checkpoint)
}

pub fn save_checkpoint(c: &Checkpoint, path: &Path) -> Result<()> {
    c.validate()?;
    write_atomic(path, &encode(c))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsf_core::neural::model::init_params_for;
    use tsf_core::preprocess::ColumnRange;
    use tsf_core::rng::RngSeed;

    fn sample() -> Checkpoint {
        let arch = Architecture {
            input_size: 2,
            hidden1: 3,
            hidden2: 4,
            dropout_rate: 0.2,
        };
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            lookback: 5,
            train_fraction: 0.8,
            params: init_params_for(&arch, RngSeed(9)).unwrap(),
            scaler: ScalerParams {
                columns: vec![
                    ColumnRange {
                        name: "close".into(),
                        min: 0.1,
                        max: 1.0 / 3.0,
                    },
                    ColumnRange {
                        name: "volume".into(),
                        min: 1e-300,
                        max: 1e300,
                    },
                ],
            },
            manifest: vec!["close".into(), "volume".into()],
            target_column: "close".into(),
            best_val_loss: 0.1 + 0.2,
            best_epoch: 3,
        }
    }

    fn p() -> &'static Path {
        Path::new("mem.tsfck")
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        assert_eq!(decode(&encode(&c), p()).unwrap(), c);
    }

    #[test]
    fn payload_corruption_is_detected() {
        let c = sample();
        let mut bytes = encode(&c);
        let i = bytes.len() - DIGEST_LEN - 5;
        bytes[i] ^= 0x01;
        assert!(matches!(decode(&bytes, p()), Err(Error::Checksum { .. })));
    }

    #[test]
    fn newer_version_is_rejected_explicitly() {
        let mut bytes = encode(&sample());
        bytes[8..12].copy_from_slice(&(CHECKPOINT_FORMAT_VERSION + 1).to_le_bytes());
        match decode(&bytes, p()) {
            Err(Error::Version { found, expected, .. }) => {
                assert_eq!((found, expected), (CHECKPOINT_FORMAT_VERSION + 1, CHECKPOINT_FORMAT_VERSION))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_and_garbage_are_rejected() {
        let bytes = encode(&sample());
        for cut in [3, 10, 30, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut], p()), Err(Error::Truncated { .. })), "cut {cut}");
        }
        assert!(matches!(decode(b"not a checkpoint", p()), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn inconsistent_manifest_is_rejected() {
        let mut c = sample();
        c.manifest.pop();
        assert!(matches!(decode(&encode(&c), p()), Err(Error::Inconsistent { .. })));
    }
}
