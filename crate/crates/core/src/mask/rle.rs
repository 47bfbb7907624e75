//! COCO-compatible run-length encoding.
//!
//! Runs walk the mask in column-major order and alternate between zeros and
//! ones, always starting with a (possibly empty) zero run. The compressed
//! string form packs each count, delta-coded against the count two places
//! back, into 6-bit little-endian groups offset into printable ASCII.

use super::BinaryMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunLengthEncoding {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u32>,
}

impl RunLengthEncoding {
    /// Builds an encoding, checking that the runs cover the image exactly.
    pub fn new(height: usize, width: usize, counts: Vec<u32>) -> Result<Self> {
        let rle = Self {
            height,
            width,
            counts,
        };
        rle.validate()?;
        Ok(rle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::MalformedRle(format!(
                "dimensions must be positive, got {}x{}",
                self.height, self.width
            )));
        }
        let total: u64 = self.counts.iter().map(|&c| u64::from(c)).sum();
        let expected = (self.height * self.width) as u64;
        if total != expected {
            return Err(Error::MalformedRle(format!(
                "counts sum to {total}, expected {expected}"
            )));
        }
        Ok(())
    }

    /// Parses the compressed string form for an image of the given size.
    pub fn from_compressed(height: usize, width: usize, s: &str) -> Result<Self> {
        let counts = decompress_counts(s)?;
        Self::new(height, width, counts)
    }

    pub fn to_compressed(&self) -> String {
        compress_counts(&self.counts)
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }
}

pub fn rle_encode(mask: &BinaryMask) -> RunLengthEncoding {
    let (h, w) = (mask.height(), mask.width());
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for c in 0..w {
        for r in 0..h {
            let v = mask.get(r, c);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RunLengthEncoding {
        height: h,
        width: w,
        counts,
    }
}

pub fn rle_decode(rle: &RunLengthEncoding) -> Result<BinaryMask> {
    rle.validate()?;
    let (h, w) = (rle.height, rle.width);
    let mut mask = BinaryMask::zeros(h, w)?;
    let mut idx = 0usize;
    for (i, &run) in rle.counts.iter().enumerate() {
        let run = run as usize;
        if i % 2 == 1 {
            for k in idx..idx + run {
                mask.set(k % h, k / h, true);
            }
        }
        idx += run;
    }
    Ok(mask)
}

/// Decodes a compressed string directly to a mask.
pub fn rle_decode_compressed(height: usize, width: usize, s: &str) -> Result<BinaryMask> {
    rle_decode(&RunLengthEncoding::from_compressed(height, width, s)?)
}

fn compress_counts(counts: &[u32]) -> String {
    let mut out = String::new();
    for (i, &count) in counts.iter().enumerate() {
        // The reference toolkit starts delta coding at the fourth count.
        let mut x = i64::from(count);
        if i > 2 {
            x -= i64::from(counts[i - 2]);
        }
        loop {
            let mut c = (x & 0x1f) as u8;
            x >>= 5;
            let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            out.push(char::from(c + 48));
            if !more {
                break;
            }
        }
    }
    out
}

fn decompress_counts(s: &str) -> Result<Vec<u32>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<u32> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            let Some(&b) = bytes.get(p) else {
                return Err(Error::RleParse {
                    position: p,
                    message: "string ends inside a continued value".into(),
                });
            };
            if !(48..48 + 64).contains(&b) {
                return Err(Error::RleParse {
                    position: p,
                    message: format!("invalid character {:?}", char::from(b)),
                });
            }
            if k >= 12 {
                return Err(Error::RleParse {
                    position: p,
                    message: "value exceeds 60 bits".into(),
                });
            }
            let c = i64::from(b - 48);
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        let idx = counts.len();
        if idx > 2 {
            x += i64::from(counts[idx - 2]);
        }
        let count = u32::try_from(x).map_err(|_| Error::RleParse {
            position: p,
            message: format!("run length {x} out of range"),
        })?;
        counts.push(count);
    }
    Ok(counts)
}
