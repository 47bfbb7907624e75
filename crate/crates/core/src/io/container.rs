//! Little-endian binary containers for codebooks and code batches.
//!
//! Codebook (`MEC1`):
//!
//! ```text
//! magic "MEC1" | u16 version=1 | u16 flags | u32 m | u32 N | i32 class_id (-1 = agnostic)
//! f64 mean[m*m]
//! f64 scale[m*m]        if flags & 1
//! f64 eigenvalues[N]
//! f64 T[N*m*m]          row-major
//! f64 W[m*m*N]          row-major, if flags & 4
//! u32 len | len bytes of JSON metadata
//! ```
//!
//! Flag bit 1 marks eigenvalue whitening. Without it `W = T^T` and W is not
//! stored.
//!
//! Codes (`MECC`):
//!
//! ```text
//! magic "MECC" | u16 version=1 | u16 flags=0 | u32 N | u64 count
//! count x { u64 id | u64 image_id | i64 category_id | u32 height | u32 width
//!           | u32 x0 | u32 y0 | u32 w | u32 h | f64 code[N] }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codebook::{Codebook, CodebookParts, MaskCode, WhitenMode};
use crate::error::{Error, Result};
use crate::mask::BBox;

pub const CODEBOOK_MAGIC: &[u8; 4] = b"MEC1";
pub const CODES_MAGIC: &[u8; 4] = b"MECC";
pub const VERSION: u16 = 1;
pub const CODEBOOK_HEADER_LEN: usize = 20;

const FLAG_SCALE: u16 = 1;
const FLAG_WHITEN: u16 = 1 << 1;
const FLAG_EXPLICIT_W: u16 = 1 << 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Metadata {
    samples: u64,
}

pub fn codebook_to_bytes(cb: &Codebook) -> Vec<u8> {
    let mut flags = 0;
    if cb.scale().is_some() {
        flags |= FLAG_SCALE;
    }
    if cb.whiten() == WhitenMode::Eigen {
        flags |= FLAG_WHITEN;
    }
    if cb.explicit_reconstruction().is_some() {
        flags |= FLAG_EXPLICIT_W;
    }
    let mut out = Vec::new();
    out.extend_from_slice(CODEBOOK_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(cb.side() as u32).to_le_bytes());
    out.extend_from_slice(&(cb.components() as u32).to_le_bytes());
    out.extend_from_slice(&cb.class_id().unwrap_or(-1).to_le_bytes());
    put_f64s(&mut out, cb.mean());
    if let Some(s) = cb.scale() {
        put_f64s(&mut out, s);
    }
    put_f64s(&mut out, cb.eigenvalues());
    put_f64s(&mut out, cb.projection());
    if let Some(w) = cb.explicit_reconstruction() {
        put_f64s(&mut out, w);
    }
    let meta = serde_json::to_vec(&Metadata {
        samples: cb.samples(),
    })
    .expect("metadata serializes");
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out
}

pub fn codebook_from_bytes(bytes: &[u8]) -> Result<Codebook> {
    let mut r = Cursor::new(bytes);
    r.magic(CODEBOOK_MAGIC)?;
    let flags = r.u16()?;
    if flags & !(FLAG_SCALE | FLAG_WHITEN | FLAG_EXPLICIT_W) != 0 {
        return Err(Error::Format(format!("unknown flag bits {flags:#06x}")));
    }
    let side = r.u32()? as usize;
    let n = r.u32()? as usize;
    let class_id = r.i32()?;
    let dim = side
        .checked_mul(side)
        .ok_or_else(|| Error::Format(format!("grid side {side} overflows")))?;
    let mean = r.f64s(dim)?;
    let scale = if flags & FLAG_SCALE != 0 {
        Some(r.f64s(dim)?)
    } else {
        None
    };
    let eigenvalues = r.f64s(n)?;
    let projection = r.f64s(n * dim)?;
    let reconstruction = if flags & FLAG_EXPLICIT_W != 0 {
        Some(r.f64s(n * dim)?)
    } else {
        None
    };
    let meta_len = r.u32()? as usize;
    let meta: Metadata = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| Error::Format(format!("bad metadata block: {e}")))?;
    r.finish()?;
    let whiten = if flags & FLAG_WHITEN != 0 {
        WhitenMode::Eigen
    } else {
        WhitenMode::None
    };
    if whiten == WhitenMode::Eigen && reconstruction.is_none() {
        return Err(Error::Format("whitened codebook without reconstruction matrix".into()));
    }
    Codebook::from_parts(CodebookParts {
        side,
        mean,
        scale,
        projection,
        reconstruction,
        eigenvalues,
        class_id: (class_id >= 0).then_some(class_id),
        whiten,
        samples: meta.samples,
    })
}

pub fn save_codebook(cb: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, codebook_to_bytes(cb))?;
    Ok(())
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    codebook_from_bytes(&fs::read(path)?)
}

/// Identifies where a code came from, enough to paste its mask back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordKey {
    pub id: u64,
    pub image_id: u64,
    pub category_id: i64,
    pub height: u32,
    pub width: u32,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeRecord {
    pub key: RecordKey,
    pub code: MaskCode,
}

/// Serializes a batch of codes. All codes must share one length; `components`
/// is recorded even for an empty batch.
pub fn codes_to_bytes(components: usize, records: &[CodeRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + records.len() * (48 + 8 * components));
    out.extend_from_slice(CODES_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(components as u32).to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for rec in records {
        if rec.code.len() != components {
            return Err(Error::DimensionMismatch {
                expected: components,
                actual: rec.code.len(),
            });
        }
        let k = &rec.key;
        out.extend_from_slice(&k.id.to_le_bytes());
        out.extend_from_slice(&k.image_id.to_le_bytes());
        out.extend_from_slice(&k.category_id.to_le_bytes());
        for v in [k.height, k.width, k.bbox.x0 as u32, k.bbox.y0 as u32, k.bbox.w as u32, k.bbox.h as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_f64s(&mut out, rec.code.values());
    }
    Ok(out)
}

/// Returns the code length and the records.
pub fn codes_from_bytes(bytes: &[u8]) -> Result<(usize, Vec<CodeRecord>)> {
    let mut r = Cursor::new(bytes);
    r.magic(CODES_MAGIC)?;
    let flags = r.u16()?;
    if flags != 0 {
        return Err(Error::Format(format!("unknown flag bits {flags:#06x}")));
    }
    let n = r.u32()? as usize;
    let count = r.u64()?;
    let per_record = 48 + 8 * n as u64;
    let needed = 20 + count.saturating_mul(per_record);
    if needed > bytes.len() as u64 {
        return Err(Error::Truncated {
            needed,
            found: bytes.len() as u64,
        });
    }
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let id = r.u64()?;
        let image_id = r.u64()?;
        let category_id = r.u64()? as i64;
        let height = r.u32()?;
        let width = r.u32()?;
        let bbox = BBox::new(r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let code = MaskCode(r.f64s(n)?);
        records.push(CodeRecord {
            key: RecordKey {
                id,
                image_id,
                category_id,
                height,
                width,
                bbox,
            },
            code,
        });
    }
    r.finish()?;
    Ok((n, records))
}

pub fn save_codes(components: usize, records: &[CodeRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, codes_to_bytes(components, records)?)?;
    Ok(())
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<(usize, Vec<CodeRecord>)> {
    codes_from_bytes(&fs::read(path)?)
}

/// Loads codes and checks they fit `cb`.
pub fn load_codes_for(cb: &Codebook, path: impl AsRef<Path>) -> Result<Vec<CodeRecord>> {
    let (n, records) = load_codes(path)?;
    if n != cb.components() {
        return Err(Error::Validation(format!(
            "codes have {n} components but the codebook has {}",
            cb.components()
        )));
    }
    Ok(records)
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Truncated {
                needed: self.pos as u64 + n as u64,
                found: self.bytes.len() as u64,
            });
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u16()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format(format!("array length {n} overflows")))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
