//! Named-tensor container shared by model and trainer checkpoints.
//!
//! ```text
//! "LFCK" | u16 version | u32 group count
//! per group:  u16 tensor count
//! per tensor: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | f32 payload
//! ```
//!
//! All integers and floats are little-endian. A group holds the tensors of
//! one network layer.

use std::path::Path;

use crate::error::{LfError, Result};

pub const LFCK_MAGIC: &[u8; 4] = b"LFCK";
pub const LFCK_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            shape,
            data,
        }
    }
}

pub(crate) fn put_tensor(out: &mut Vec<u8>, t: &NamedTensor) {
    out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
    out.extend_from_slice(t.name.as_bytes());
    out.push(t.shape.len() as u8);
    for &d in &t.shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_lfck(groups: &[Vec<NamedTensor>]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(LFCK_MAGIC);
    out.extend_from_slice(&LFCK_VERSION.to_le_bytes());
    out.extend_from_slice(&(groups.len() as u32).to_le_bytes());
    for group in groups {
        out.extend_from_slice(&(group.len() as u16).to_le_bytes());
        for t in group {
            put_tensor(&mut out, t);
        }
    }
    out
}

/// Bounds-checked little-endian reader over a byte slice.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, pos: 0, path }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn corrupt(&self, detail: impl Into<String>) -> LfError {
        LfError::Checkpoint {
            path: self.path.to_path_buf(),
            detail: format!("{} (at byte {})", detail.into(), self.pos),
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.corrupt(format!("truncated: need {n} more bytes")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self, len: usize) -> Result<String> {
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.corrupt("name is not UTF-8"))
    }

    pub(crate) fn tensor(&mut self) -> Result<NamedTensor> {
        let len = self.u16()? as usize;
        let name = self.string(len)?;
        let rank = self.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32()? as usize);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| self.corrupt(format!("tensor {name} shape {shape:?} overflows")))?;
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| self.corrupt(format!("tensor {name} too large")))?;
        let raw = self.take(bytes)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(self.corrupt(format!("tensor {name} has a non-finite value at element {i}")));
        }
        Ok(NamedTensor { name, shape, data })
    }
}

/// Parses the LFCK section at the start of `cursor`.
pub(crate) fn read_lfck(cursor: &mut Cursor<'_>) -> Result<Vec<Vec<NamedTensor>>> {
    let magic = cursor.take(4).map_err(|_| cursor.corrupt("file too short for a checkpoint"))?;
    if magic != LFCK_MAGIC {
        return Err(cursor.corrupt(format!("bad magic {magic:?}, expected \"LFCK\"")));
    }
    let version = cursor.u16()?;
    if version != LFCK_VERSION {
        return Err(cursor.corrupt(format!("unsupported checkpoint version {version}, expected {LFCK_VERSION}")));
    }
    let groups = cursor.u32()? as usize;
    let mut out = Vec::with_capacity(groups.min(1024));
    for _ in 0..groups {
        let n = cursor.u16()? as usize;
        let mut group = Vec::with_capacity(n);
        for _ in 0..n {
            group.push(cursor.tensor()?);
        }
        out.push(group);
    }
    Ok(out)
}

/// Decodes a buffer holding exactly one LFCK section.
pub fn decode_lfck(bytes: &[u8], path: &Path) -> Result<Vec<Vec<NamedTensor>>> {
    let mut cursor = Cursor::new(bytes, path);
    let groups = read_lfck(&mut cursor)?;
    if !cursor.is_empty() {
        return Err(cursor.corrupt("trailing bytes after checkpoint"));
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Vec<NamedTensor>> {
        vec![
            vec![
                NamedTensor::new("depth.0.weight", vec![2, 1, 3, 3], (0..18).map(|i| i as f32 * 0.5).collect()),
                NamedTensor::new("depth.0.bias", vec![2], vec![-1.0, 2.5]),
            ],
            vec![NamedTensor::new("scalar", vec![], vec![7.0])],
        ]
    }

    #[test]
    fn round_trip_is_identity() {
        let bytes = encode_lfck(&sample());
        assert_eq!(decode_lfck(&bytes, Path::new("t")).unwrap(), sample());
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = encode_lfck(&sample());
        for cut in 0..bytes.len() {
            assert!(decode_lfck(&bytes[..cut], Path::new("t")).is_err(), "cut {cut}");
        }
    }

    #[test]
    fn version_and_magic_are_checked() {
        let mut bytes = encode_lfck(&sample());
        bytes[4] = 9;
        let err = decode_lfck(&bytes, Path::new("t")).unwrap_err().to_string();
        assert!(err.contains("version 9"), "{err}");
        bytes[0] = b'X';
        assert!(decode_lfck(&bytes, Path::new("t")).is_err());
    }
}
