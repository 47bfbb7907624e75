//! Binary masks, the fixed-size grid targets derived from them, and the raster
//! operations that move between the two.
//!
//! Coordinates follow the image convention: `x` grows along columns, `y` along
//! rows, and the center of pixel `(row, col)` sits at `(col + 0.5, row + 0.5)`.

mod raster;
mod resample;
pub mod rle;

pub use raster::{polygon_rasterize, Polygon};
pub use resample::{crop_resize, paste, tight_bbox};
pub use rle::{rle_decode, rle_decode_compressed, rle_encode, RunLengthEncoding};

use crate::error::{Error, Result};

/// Full-resolution binary occupancy of one instance, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "mask dimensions must be positive, got {height}x{width}"
            )));
        }
        Ok(Self {
            height,
            width,
            data: vec![0; height * width],
        })
    }

    /// Builds a mask from row-major values; any nonzero value counts as set.
    pub fn from_vec(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "mask dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: height * width,
                actual: data.len(),
            });
        }
        let data = data.into_iter().map(|v| u8::from(v != 0)).collect();
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut mask = Self::zeros(height, width)?;
        for r in 0..height {
            for c in 0..width {
                mask.data[r * width + c] = u8::from(f(r, c));
            }
        }
        Ok(mask)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = u8::from(value);
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

/// The `m x m` resampled mask target. Its row-major flattening is the vector
/// that gets projected into a code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMask {
    side: usize,
    data: Vec<u8>,
}

impl GridMask {
    pub fn zeros(side: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidInput("grid side must be positive".into()));
        }
        Ok(Self {
            side,
            data: vec![0; side * side],
        })
    }

    pub fn from_vec(side: usize, data: Vec<u8>) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidInput("grid side must be positive".into()));
        }
        if data.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                actual: data.len(),
            });
        }
        let data = data.into_iter().map(|v| u8::from(v != 0)).collect();
        Ok(Self { side, data })
    }

    pub fn from_fn(side: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut grid = Self::zeros(side)?;
        for r in 0..side {
            for c in 0..side {
                grid.data[r * side + c] = u8::from(f(r, c));
            }
        }
        Ok(grid)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.side + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.side + col] = u8::from(value);
    }

    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Flattened values as reals, the vector the codebook operates on.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    /// Views the grid as a square full-resolution mask.
    pub fn to_binary_mask(&self) -> BinaryMask {
        BinaryMask {
            height: self.side,
            width: self.side,
            data: self.data.clone(),
        }
    }
}

/// Axis-aligned pixel box: top-left corner plus extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl BBox {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    /// Checks the box is nonempty and lies inside a `height x width` image.
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.w == 0 || self.h == 0 {
            return Err(Error::InvalidInput(format!("degenerate box {self:?}")));
        }
        if self.x0 + self.w > width || self.y0 + self.h > height {
            return Err(Error::InvalidInput(format!(
                "box {self:?} exceeds {height}x{width} image"
            )));
        }
        Ok(())
    }
}

/// Read access shared by full masks and grids, so IoU and component
/// counting work on either.
pub trait Occupancy {
    fn dims(&self) -> (usize, usize);
    fn cells(&self) -> &[u8];
}

impl Occupancy for BinaryMask {
    fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn cells(&self) -> &[u8] {
        &self.data
    }
}

impl Occupancy for GridMask {
    fn dims(&self) -> (usize, usize) {
        (self.side, self.side)
    }

    fn cells(&self) -> &[u8] {
        &self.data
    }
}

/// Intersection over union. Two empty masks score 1.
pub fn iou<M: Occupancy + ?Sized>(a: &M, b: &M) -> Result<f64> {
    if a.dims() != b.dims() {
        let (ah, aw) = a.dims();
        let (bh, bw) = b.dims();
        return Err(Error::DimensionMismatch {
            expected: ah * aw,
            actual: bh * bw,
        });
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.cells().iter().zip(b.cells()) {
        let (x, y) = (x != 0, y != 0);
        inter += u64::from(x && y);
        union += u64::from(x || y);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Number of 8-connected components of set cells.
pub fn connected_components<M: Occupancy + ?Sized>(mask: &M) -> usize {
    label_components(mask).1
}

/// Labels 8-connected components; label 0 is background, components are
/// numbered from 1 in row-major order of their first cell.
pub fn label_components<M: Occupancy + ?Sized>(mask: &M) -> (Vec<u32>, usize) {
    let (h, w) = mask.dims();
    let cells = mask.cells();
    let mut labels = vec![0u32; h * w];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..h * w {
        if cells[start] == 0 || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (r, c) = ((idx / w) as isize, (idx % w) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                        continue;
                    }
                    let n = nr as usize * w + nc as usize;
                    if cells[n] != 0 && labels[n] == 0 {
                        labels[n] = next;
                        stack.push(n);
                    }
                }
            }
        }
    }
    (labels, next as usize)
}
