//! Binary dataset files and their content hash.
//!
//! Layout (little-endian): magic `SVAEDATA`, `u32` version, `u64` rows,
//! `u64` columns, `u8` label flag, `rows × cols` `f64` values in row-major
//! order, then `rows` `u32` labels when the flag is 1.

use std::path::Path;

use sha2::{Digest, Sha256};
use shellvae_core::Matrix;

use crate::binio::{put_f64s, put_u32, put_u64, write_atomic, Reader};
use crate::error::{format_err, io_err, Result};

const MAGIC: &[u8; 8] = b"SVAEDATA";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub data: Matrix,
    pub labels: Option<Vec<u32>>,
}

impl Dataset {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(29 + 8 * self.data.as_slice().len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u64(&mut out, self.data.rows() as u64);
        put_u64(&mut out, self.data.cols() as u64);
        out.push(u8::from(self.labels.is_some()));
        put_f64s(&mut out, self.data.as_slice());
        if let Some(labels) = &self.labels {
            for &l in labels {
                put_u32(&mut out, l);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        r.expect_magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(format_err(path, format!("unsupported dataset version {version}")));
        }
        let rows = r.usize()?;
        let cols = r.usize()?;
        let has_labels = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(format_err(path, format!("bad label flag {v}"))),
        };
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| format_err(path, "shape overflows"))?;
        let data = Matrix::new(rows, cols, r.f64s(n)?)?;
        let labels = if has_labels {
            Some((0..rows).map(|_| r.u32()).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        r.finish()?;
        if let Some(l) = &labels {
            debug_assert_eq!(l.len(), rows);
        }
        Ok(Self { data, labels })
    }

    /// Hex SHA-256 of the encoded file.
    pub fn content_hash(&self) -> String {
        hash_bytes(&self.encode())
    }

    pub fn write(&self, path: &Path) -> Result<String> {
        let bytes = self.encode();
        write_atomic(path, &bytes)?;
        Ok(hash_bytes(&bytes))
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Loads a dataset file and returns it with the hash of its bytes.
pub fn read_dataset(path: &Path) -> Result<(Dataset, String)> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let ds = Dataset::decode(&bytes, path)?;
    Ok((ds, hash_bytes(&bytes)))
}
