//! Compact linear codes for instance masks.
//!
//! Masks are cropped to their tight box and resampled to an `m x m` grid,
//! then projected onto a PCA dictionary learned offline. The crate covers the
//! whole loop: raster primitives and COCO RLE ([`mask`]), dictionary fitting
//! and coding ([`codebook`]), code-space losses ([`losses`]), a polar-ray
//! contour baseline ([`polar`]), corpus evaluation ([`eval`]) and dataset and
//! container I/O ([`io`]).

pub mod codebook;
pub mod error;
pub mod eval;
pub mod io;
pub mod losses;
pub mod mask;
pub mod polar;

pub use codebook::{solve, Codebook, FitAccumulator, MaskCode, ScaleMode, WhitenMode};
pub use error::{Error, Result};
pub use mask::{BBox, BinaryMask, GridMask};

/// Grid side used for mask targets unless configured otherwise.
pub const DEFAULT_GRID_SIDE: usize = 28;
/// Code length used unless configured otherwise.
pub const DEFAULT_COMPONENTS: usize = 60;
