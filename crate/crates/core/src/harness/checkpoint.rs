//! Binary container for named tensors.
//!
//! ```text
//! magic     8 bytes  "AOIUAV1\0"
//! version   u32
//! count     u32
//! record*   name_len u32, name bytes, rank u32, dims u32 * rank,
//!           values f64 * product(dims)
//! crc32     u32 over every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use thiserror::Error;

use crate::nets::PolicyBundle;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 8] = *b"AOIUAV1\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    Crc { stored: u32, computed: u32 },
    #[error("malformed record `{name}`: {message}")]
    Record { name: String, message: String },
    #[error("checkpoint does not match the network: {0}")]
    Mismatch(String),
}

impl CheckpointError {
    /// Integrity failures, as opposed to a valid file for another network.
    pub fn is_corruption(&self) -> bool {
        !matches!(self, CheckpointError::Mismatch(_))
    }
}

pub fn encode_tensors<'a>(records: impl IntoIterator<Item = (&'a str, &'a Tensor<f64>)>) -> Vec<u8> {
    let records: Vec<_> = records.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, t) in records {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor<f64>)>, CheckpointError> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::Magic);
    }
    if bytes.len() < MAGIC.len() + 12 {
        return Err(CheckpointError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::Crc { stored, computed });
    }
    let mut r = Reader {
        bytes: body,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| CheckpointError::Record {
            name: "?".into(),
            message: "name is not UTF-8".into(),
        })?;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(CheckpointError::Truncated)?;
        if n.saturating_mul(8) > body.len() {
            return Err(CheckpointError::Truncated);
        }
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let t = Tensor::new(&shape, data).map_err(|e| CheckpointError::Record {
            name: name.clone(),
            message: e.to_string(),
        })?;
        out.push((name, t));
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Record {
            name: "<end>".into(),
            message: format!("{} trailing bytes", body.len() - r.pos),
        });
    }
    Ok(out)
}

/// Live actors and critic of `bundle`, in parameter order.
pub fn save_bundle(bundle: &PolicyBundle<f64>) -> Vec<u8> {
    let names = bundle.names();
    let tensors = bundle.tensors();
    encode_tensors(names.iter().map(String::as_str).zip(tensors))
}

/// Loads a checkpoint into `bundle`, which must have the same architecture.
/// The old actors are synced to the loaded actors.
pub fn load_bundle(bundle: &mut PolicyBundle<f64>, bytes: &[u8]) -> Result<(), CheckpointError> {
    let records = decode_tensors(bytes)?;
    let names = bundle.names();
    if records.len() != names.len() {
        return Err(CheckpointError::Mismatch(format!(
            "{} tensors in file, network has {}",
            records.len(),
            names.len()
        )));
    }
    for ((name, t), (expected, slot)) in records.iter().zip(names.iter().zip(bundle.tensors())) {
        if name != expected || t.shape() != slot.shape() {
            return Err(CheckpointError::Mismatch(format!(
                "record `{name}` {:?} where `{expected}` {:?} was expected",
                t.shape(),
                slot.shape()
            )));
        }
    }
    for ((_, t), slot) in records.into_iter().zip(bundle.tensors_mut()) {
        *slot = t;
    }
    bundle.sync_old();
    Ok(())
}
