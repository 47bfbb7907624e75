use super::BinaryMask;
use crate::error::{Error, Result};

/// A closed polygon in image coordinates, vertices as `[x, y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon(pub Vec<[f64; 2]>);

impl Polygon {
    /// Parses the COCO flat layout `[x0, y0, x1, y1, ...]`.
    pub fn from_flat(xy: &[f64]) -> Result<Self> {
        if xy.len() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "polygon has an odd number of coordinates ({})",
                xy.len()
            )));
        }
        Ok(Self(xy.chunks_exact(2).map(|p| [p[0], p[1]]).collect()))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.0
    }

    /// Absolute shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.0.len();
        let mut acc = 0.0;
        for i in 0..n {
            let [x0, y0] = self.0[i];
            let [x1, y1] = self.0[(i + 1) % n];
            acc += x0 * y1 - x1 * y0;
        }
        acc.abs() * 0.5
    }

    fn validate(&self) -> Result<()> {
        if self.0.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "polygon needs at least 3 vertices, got {}",
                self.0.len()
            )));
        }
        if self.0.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("polygon has non-finite coordinates".into()));
        }
        Ok(())
    }
}

/// Fills the union of `polygons` into a `height x width` mask.
///
/// A pixel is set when its center lies inside at least one polygon under the
/// even-odd rule. Edges use a half-open convention in both axes, so shared
/// edges never double-cover and vertex order does not matter.
pub fn polygon_rasterize(polygons: &[Polygon], height: usize, width: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::zeros(height, width)?;
    for poly in polygons {
        poly.validate()?;
    }
    let mut crossings: Vec<f64> = Vec::new();
    for poly in polygons {
        let verts = poly.vertices();
        let n = verts.len();
        let (ymin, ymax) = verts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
        let row_lo = (ymin - 0.5).ceil().max(0.0) as usize;
        let row_hi = ((ymax - 0.5).ceil().max(0.0) as usize).min(height);
        for row in row_lo..row_hi {
            let y = row as f64 + 0.5;
            crossings.clear();
            for i in 0..n {
                let [x0, y0] = verts[i];
                let [x1, y1] = verts[(i + 1) % n];
                if (y0 <= y && y < y1) || (y1 <= y && y < y0) {
                    crossings.push(x0 + (y - y0) * (x1 - x0) / (y1 - y0));
                }
            }
            crossings.sort_by(f64::total_cmp);
            for span in crossings.chunks_exact(2) {
                let lo = (span[0] - 0.5).ceil().max(0.0);
                let hi = (span[1] - 0.5).ceil().min(width as f64);
                if hi <= lo {
                    continue;
                }
                for col in lo as usize..hi as usize {
                    mask.set(row, col, true);
                }
            }
        }
    }
    Ok(mask)
}
