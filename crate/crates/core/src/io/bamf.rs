//! BAMF: little-endian binary feature dump.
//!
//! ```text
//! header:  "BAMF" | version u16 | dimension u32 | record_count u64 | layer_tag
//! record:  class_key | label u8 (0 ID, 1 OOD, 2 unlabeled) | score f32 | dimension x f32
//! ```
//! Strings are a `u32` byte length followed by UTF-8 bytes. Values are
//! promoted to `f64` on read; writing rejects anything that is not exactly
//! representable as `f32`.

use std::io::{ErrorKind, Read, Write};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{FeatureRecord, FeatureSet, Label};

pub const MAGIC: [u8; 4] = *b"BAMF";
pub const VERSION: u16 = 1;

/// Largest string accepted on read (class keys, layer tags).
const MAX_STRING: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureDumpHeader {
    pub format_version: u16,
    pub dimension: u32,
    pub record_count: u64,
    pub layer_tag: String,
}

fn to_f32(v: f64, what: &str) -> Result<f32> {
    let f = v as f32;
    if f as f64 != v && !v.is_nan() {
        return Err(Error::Format(format!(
            "{what} {v} is not exactly representable as a 32-bit float"
        )));
    }
    Ok(f)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let len = u32::try_from(s.len())
        .ok()
        .filter(|&l| l <= MAX_STRING)
        .ok_or_else(|| Error::Format(format!("string of {} bytes is too long", s.len())))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn write<W: Write>(w: &mut W, set: &FeatureSet) -> Result<()> {
    let dim = u32::try_from(set.dimension())
        .map_err(|_| Error::Format("dimension does not fit in u32".into()))?;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&dim.to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    write_str(w, set.layer_tag())?;
    let mut payload = Vec::with_capacity(set.dimension() * 4);
    for r in set.records() {
        write_str(w, &r.class_key)?;
        w.write_all(&[r.label.to_byte()])?;
        w.write_all(&to_f32(r.score, "score")?.to_le_bytes())?;
        payload.clear();
        for &v in &r.values {
            payload.extend_from_slice(&to_f32(v, "feature value")?.to_le_bytes());
        }
        w.write_all(&payload)?;
    }
    Ok(())
}

pub fn to_bytes(set: &FeatureSet) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write(&mut out, set)?;
    Ok(out)
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Format("BAMF stream ends early".into())
    } else {
        Error::Io(e)
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(truncated)?;
    Ok(buf)
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = u32::from_le_bytes(read_array(r)?);
    if len > MAX_STRING {
        return Err(Error::Format(format!("string length {len} exceeds limit")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("invalid UTF-8: {e}")))
}

pub fn read_header<R: Read>(r: &mut R) -> Result<FeatureDumpHeader> {
    let magic: [u8; 4] = read_array(r)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected \"BAMF\""
        )));
    }
    let format_version = u16::from_le_bytes(read_array(r)?);
    if format_version != VERSION {
        return Err(Error::Schema(format!(
            "BAMF version {format_version} is not supported (expected {VERSION})"
        )));
    }
    let dimension = u32::from_le_bytes(read_array(r)?);
    if dimension == 0 {
        return Err(Error::Format("BAMF dimension is zero".into()));
    }
    let record_count = u64::from_le_bytes(read_array(r)?);
    let layer_tag = read_str(r)?;
    Ok(FeatureDumpHeader {
        format_version,
        dimension,
        record_count,
        layer_tag,
    })
}

/// Reads a complete dump. Trailing bytes after the declared records are an error.
pub fn read<R: Read>(mut r: R) -> Result<FeatureSet> {
    let header = read_header(&mut r)?;
    let dim = header.dimension as usize;
    let mut set = FeatureSet::new(dim, header.layer_tag)?;
    let mut payload = vec![0u8; dim * 4];
    for i in 0..header.record_count {
        let class_key = read_str(&mut r)?;
        let [label] = read_array::<_, 1>(&mut r)?;
        let label = Label::from_byte(label)?;
        let score = f32::from_le_bytes(read_array(&mut r)?) as f64;
        r.read_exact(&mut payload).map_err(truncated)?;
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        set.push(FeatureRecord::new(class_key, label, score, values))
            .map_err(|e| Error::Format(format!("record {i}: {e}")))?;
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(set),
        Ok(_) => Err(Error::Format(format!(
            "data after the {} declared records",
            header.record_count
        ))),
        Err(e) => Err(Error::Io(e)),
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<FeatureSet> {
    read(bytes)
}

/// SHA-256 (hex) over the set's content: layer tag, dimension and every
/// record with its values as `f64`. Independent of the file encoding the
/// set was read from.
pub fn digest(set: &FeatureSet) -> String {
    let mut h = Sha256::new();
    h.update(MAGIC);
    h.update((set.dimension() as u64).to_le_bytes());
    h.update((set.layer_tag().len() as u64).to_le_bytes());
    h.update(set.layer_tag().as_bytes());
    h.update((set.len() as u64).to_le_bytes());
    for r in set.records() {
        h.update((r.class_key.len() as u64).to_le_bytes());
        h.update(r.class_key.as_bytes());
        h.update([r.label.to_byte()]);
        h.update(r.score.to_le_bytes());
        for v in &r.values {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
