//! Instance records and the path from an annotation to a grid target.

pub mod coco;
pub mod container;
pub mod synth;

use std::fmt;

use crate::error::Error;
use crate::mask::{
    crop_resize, polygon_rasterize, rle_decode, tight_bbox, BBox, BinaryMask, GridMask, Polygon,
    RunLengthEncoding,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Segmentation {
    Polygons(Vec<Polygon>),
    Rle(RunLengthEncoding),
}

/// One instance annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub id: u64,
    pub image_id: u64,
    pub height: usize,
    pub width: usize,
    pub category_id: i64,
    pub iscrowd: bool,
    pub segmentation: Segmentation,
    /// Annotation box `[x, y, w, h]` as given in the source file.
    pub bbox: Option<[f64; 4]>,
    pub area: Option<f64>,
}

impl InstanceRecord {
    /// Full-resolution mask. Polygons with fewer than three vertices are
    /// skipped, as the reference toolkit renders them empty.
    pub fn to_mask(&self) -> Result<BinaryMask, Error> {
        match &self.segmentation {
            Segmentation::Polygons(polys) => {
                let usable: Vec<Polygon> =
                    polys.iter().filter(|p| p.vertices().len() >= 3).cloned().collect();
                polygon_rasterize(&usable, self.height, self.width)
            }
            Segmentation::Rle(rle) => {
                if (rle.height, rle.width) != (self.height, self.width) {
                    return Err(Error::Validation(format!(
                        "RLE size {}x{} differs from image size {}x{}",
                        rle.height, rle.width, self.height, self.width
                    )));
                }
                rle_decode(rle)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExclusionReason {
    /// The mask has no set pixels.
    Empty,
    Crowd,
    Invalid(String),
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExclusionReason::Empty => write!(f, "empty mask"),
            ExclusionReason::Crowd => write!(f, "crowd annotation"),
            ExclusionReason::Invalid(msg) => write!(f, "invalid segmentation: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub record_id: u64,
    pub reason: ExclusionReason,
}

/// A record turned into its training target, with the crop it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub grid: GridMask,
    pub bbox: BBox,
}

/// Rasterizes/decodes the record, crops to the tight mask box and resamples
/// to `m x m`.
pub fn record_to_grid(rec: &InstanceRecord, m: usize) -> Result<GridSample, Exclusion> {
    let exclude = |reason| Exclusion {
        record_id: rec.id,
        reason,
    };
    let mask = rec
        .to_mask()
        .map_err(|e| exclude(ExclusionReason::Invalid(e.to_string())))?;
    let bbox = tight_bbox(&mask).map_err(|_| exclude(ExclusionReason::Empty))?;
    let grid = crop_resize(&mask, bbox, m).map_err(|e| exclude(ExclusionReason::Invalid(e.to_string())))?;
    if grid.is_empty() {
        return Err(exclude(ExclusionReason::Empty));
    }
    Ok(GridSample { grid, bbox })
}

/// Counts of exclusions by reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionTally {
    pub empty: u64,
    pub crowd: u64,
    pub invalid: u64,
}

impl ExclusionTally {
    pub fn add(&mut self, reason: &ExclusionReason) {
        match reason {
            ExclusionReason::Empty => self.empty += 1,
            ExclusionReason::Crowd => self.crowd += 1,
            ExclusionReason::Invalid(_) => self.invalid += 1,
        }
    }

    pub fn merge(&mut self, other: &ExclusionTally) {
        self.empty += other.empty;
        self.crowd += other.crowd;
        self.invalid += other.invalid;
    }

    pub fn total(&self) -> u64 {
        self.empty + self.crowd + self.invalid
    }
}
