//! Polar-ray contour codec, the baseline the linear codes are compared with.
//!
//! A shape is summarized by its mass center and `K` ray lengths at uniform
//! angles. Decoding fills the star polygon through the ray tips, so anything
//! a single star-shaped outline cannot express (holes, separate parts, the
//! far side of a concavity) is lost.
//!
//! Cell `(r, c)` has center `(r, c)` in the shape's coordinates. Angles are
//! measured from the +column axis towards +row.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::mask::{label_components, polygon_rasterize, GridMask, Polygon};

#[derive(Debug, Clone, PartialEq)]
pub struct PolarShape {
    /// `(row, col)` in cell coordinates.
    pub center: (f64, f64),
    pub rays: Vec<f64>,
}

impl PolarShape {
    pub fn ray_count(&self) -> usize {
        self.rays.len()
    }

    pub fn ray_angle(&self, k: usize) -> f64 {
        TAU * k as f64 / self.rays.len() as f64
    }
}

/// Mean `(row, col)` of the set cells.
pub fn mass_center(grid: &GridMask) -> Result<(f64, f64)> {
    let m = grid.side();
    let (mut sr, mut sc, mut n) = (0u64, 0u64, 0u64);
    for r in 0..m {
        for c in 0..m {
            if grid.get(r, c) {
                sr += r as u64;
                sc += c as u64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((sr as f64 / n as f64, sc as f64 / n as f64))
}

/// Ray `k` is the largest distance from the mass center to a set cell whose
/// center falls in the angular bin of width `2*pi/K` centered on the ray.
pub fn polar_encode(grid: &GridMask, rays: usize) -> Result<PolarShape> {
    if rays < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 rays, got {rays}")));
    }
    let center = mass_center(grid)?;
    let m = grid.side();
    let step = TAU / rays as f64;
    let mut out = vec![0.0f64; rays];
    for r in 0..m {
        for c in 0..m {
            if !grid.get(r, c) {
                continue;
            }
            let (dy, dx) = (r as f64 - center.0, c as f64 - center.1);
            let dist = dy.hypot(dx);
            if dist == 0.0 {
                continue;
            }
            let theta = dy.atan2(dx).rem_euclid(TAU);
            let bin = ((theta / step).round() as usize) % rays;
            out[bin] = out[bin].max(dist);
        }
    }
    Ok(PolarShape { center, rays: out })
}

/// Fills the polygon through the ray tips with the pixel-center rule. Each
/// nonzero ray is lengthened by half a cell so the outline passes along the
/// outer edge of the cell it was measured to.
///
/// The star polygon is connected, but its pixel-center sampling can split
/// into pieces where it is thinner than a cell (near the center, between
/// long and empty rays). Such pieces are joined back to the center cell along
/// the segment to their nearest cell; that segment lies inside the polygon
/// because it is star-shaped about the center. The result is therefore always
/// a single 8-connected region, or empty.
pub fn polar_decode(shape: &PolarShape, m: usize) -> Result<GridMask> {
    let k = shape.ray_count();
    if k < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 rays, got {k}")));
    }
    if shape.rays.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidInput("ray lengths must be finite and nonnegative".into()));
    }
    let mut grid = GridMask::zeros(m)?;
    if shape.rays.iter().all(|&r| r == 0.0) {
        return Ok(grid);
    }
    let (cr, cc) = shape.center;
    let verts = (0..k)
        .map(|i| {
            let t = shape.ray_angle(i);
            let r = ray_extent(shape.rays[i]);
            [cc + 0.5 + r * t.cos(), cr + 0.5 + r * t.sin()]
        })
        .collect();
    let filled = polygon_rasterize(&[Polygon(verts)], m, m)?;
    for (dst, &src) in (0..m * m).zip(filled.data()) {
        if src != 0 {
            grid.set(dst / m, dst % m, true);
        }
    }
    bridge_to_center(&mut grid, shape.center);
    Ok(grid)
}

/// Rays end at the outermost cell center; the outline they stand for runs
/// along that cell's outer edge, half a cell further out.
fn ray_extent(ray: f64) -> f64 {
    if ray > 0.0 {
        ray + CONTOUR_MARGIN
    } else {
        0.0
    }
}

const CONTOUR_MARGIN: f64 = 0.5;

fn bridge_to_center(grid: &mut GridMask, center: (f64, f64)) {
    let (labels, count) = label_components(grid);
    if count <= 1 {
        return;
    }
    let m = grid.side();
    let clamp = |v: f64| (v.round().max(0.0) as usize).min(m - 1);
    let anchor = (clamp(center.0), clamp(center.1));
    let anchor_label = labels[anchor.0 * m + anchor.1];

    // Nearest cell of each component to the center, first in row-major order on ties.
    let mut nearest: Vec<Option<(f64, usize)>> = vec![None; count + 1];
    for (idx, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let (r, c) = ((idx / m) as f64, (idx % m) as f64);
        let d = (r - center.0).powi(2) + (c - center.1).powi(2);
        let slot = &mut nearest[l as usize];
        if slot.map_or(true, |(best, _)| d < best) {
            *slot = Some((d, idx));
        }
    }
    grid.set(anchor.0, anchor.1, true);
    for (label, entry) in nearest.iter().enumerate().skip(1) {
        if label as u32 == anchor_label {
            continue;
        }
        if let Some((_, idx)) = entry {
            draw_line(grid, anchor, (idx / m, idx % m));
        }
    }
}

/// 8-connected Bresenham segment, endpoints included.
fn draw_line(grid: &mut GridMask, from: (usize, usize), to: (usize, usize)) {
    let (mut r, mut c) = (from.0 as i64, from.1 as i64);
    let (r1, c1) = (to.0 as i64, to.1 as i64);
    let dr = (r1 - r).abs();
    let dc = -(c1 - c).abs();
    let sr = if r < r1 { 1 } else { -1 };
    let sc = if c < c1 { 1 } else { -1 };
    let mut err = dr + dc;
    loop {
        grid.set(r as usize, c as usize, true);
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
    }
}
