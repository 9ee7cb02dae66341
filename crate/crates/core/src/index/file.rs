//! Little-endian index file:
//!
//! ```text
//! "PVIX" | version u32 | dimension u32 | count u64
//! count * dimension f32 vectors
//! count * (u32 byte length, UTF-8 id)
//! CRC32C of everything above, u32
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{FlatIndex, IndexError, NORM_TOLERANCE};
use crate::embedding::EmbeddingVector;

pub const MAGIC: &[u8; 4] = b"PVIX";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

pub fn to_bytes(index: &FlatIndex) -> Vec<u8> {
    let id_bytes: usize = index.ids.iter().map(|id| 4 + id.len()).sum();
    let mut buf = Vec::with_capacity(HEADER_LEN + index.data.len() * 4 + id_bytes + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(index.dimension as u32).to_le_bytes());
    buf.extend_from_slice(&(index.ids.len() as u64).to_le_bytes());
    for x in &index.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for id in &index.ids {
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
    }
    let crc = crc32c::crc32c(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).ok_or(IndexError::TruncatedFile)?;
        let slice = self.bytes.get(self.pos..end).ok_or(IndexError::TruncatedFile)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<FlatIndex, IndexError> {
    if bytes.len() < MAGIC.len() {
        return Err(IndexError::TruncatedFile);
    }
    if &bytes[..4] != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::UnsupportedVersion(version));
    }
    let dimension = r.u32()? as usize;
    let count = usize::try_from(r.u64()?).map_err(|_| IndexError::TruncatedFile)?;
    if dimension == 0 {
        return Err(IndexError::Corrupt("zero dimension".into()));
    }
    let floats = count.checked_mul(dimension).ok_or(IndexError::TruncatedFile)?;
    let block = r.take(floats.checked_mul(4).ok_or(IndexError::TruncatedFile)?)?;
    let mut ids = Vec::with_capacity(count.min(bytes.len() / 4));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        ids.push(raw);
    }
    let body_end = r.pos;
    let stored = r.u32()?;
    let computed = crc32c::crc32c(&bytes[..body_end]);
    if stored != computed {
        return Err(IndexError::ChecksumMismatch { stored, computed });
    }
    if r.pos != bytes.len() {
        return Err(IndexError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let mut index = FlatIndex::with_capacity(dimension, count)?;
    for (i, raw) in ids.into_iter().enumerate() {
        let id = std::str::from_utf8(raw)
            .map_err(|_| IndexError::Corrupt(format!("id #{i} is not UTF-8")))?;
        let row: Vec<f32> = block[i * dimension * 4..(i + 1) * dimension * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let vector = EmbeddingVector::from_normalized(row);
        if (vector.norm() - 1.0).abs() > NORM_TOLERANCE {
            return Err(IndexError::Corrupt(format!("vector for {id:?} is not unit-norm")));
        }
        index.add(id, &vector).map_err(|e| match e {
            IndexError::DuplicateId(id) => IndexError::Corrupt(format!("duplicate id {id:?}")),
            other => other,
        })?;
    }
    Ok(index)
}

/// Writes the index atomically (temp file + rename) so a rerun overwrites cleanly.
pub fn save(index: &FlatIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let path = path.as_ref();
    let bytes = to_bytes(index);
    let tmp = path.with_extension("pvix.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<FlatIndex, IndexError> {
    from_bytes(&fs::read(path)?)
}
