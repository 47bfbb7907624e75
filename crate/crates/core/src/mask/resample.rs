use super::{BBox, BinaryMask, GridMask};
use crate::error::{Error, Result};

/// Smallest box containing every set pixel.
pub fn tight_bbox(mask: &BinaryMask) -> Result<BBox> {
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    if r0 == usize::MAX {
        return Err(Error::EmptyMask);
    }
    Ok(BBox::new(c0, r0, c1 - c0 + 1, r1 - r0 + 1))
}

/// Maps output index `i` of an `n_out`-long axis onto an `n_in`-long axis,
/// aligning cell centers, and returns the two neighbours plus the weight of
/// the second one.
fn axis_sample(i: usize, n_out: usize, n_in: usize) -> (usize, usize, f64) {
    let pos = ((i as f64 + 0.5) * n_in as f64) / n_out as f64 - 0.5;
    let pos = pos.clamp(0.0, (n_in - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n_in - 1);
    (lo, hi, pos - lo as f64)
}

/// Bilinearly resamples a binary field and thresholds at 0.5 (ties set).
fn resample(
    src_h: usize,
    src_w: usize,
    sample: impl Fn(usize, usize) -> bool,
    dst_h: usize,
    dst_w: usize,
    mut emit: impl FnMut(usize, usize),
) {
    let cols: Vec<_> = (0..dst_w).map(|j| axis_sample(j, dst_w, src_w)).collect();
    for i in 0..dst_h {
        let (y0, y1, fy) = axis_sample(i, dst_h, src_h);
        for (j, &(x0, x1, fx)) in cols.iter().enumerate() {
            let v = |y, x| f64::from(u8::from(sample(y, x)));
            let top = v(y0, x0) * (1.0 - fx) + v(y0, x1) * fx;
            let bottom = v(y1, x0) * (1.0 - fx) + v(y1, x1) * fx;
            if top * (1.0 - fy) + bottom * fy >= 0.5 {
                emit(i, j);
            }
        }
    }
}

/// Crops `mask` to `bbox` and resamples the crop onto an `m x m` grid.
pub fn crop_resize(mask: &BinaryMask, bbox: BBox, m: usize) -> Result<GridMask> {
    bbox.validate(mask.height(), mask.width())?;
    if m < 2 {
        return Err(Error::InvalidInput(format!("grid side must be at least 2, got {m}")));
    }
    let mut grid = GridMask::zeros(m)?;
    resample(
        bbox.h,
        bbox.w,
        |r, c| mask.get(bbox.y0 + r, bbox.x0 + c),
        m,
        m,
        |r, c| grid.set(r, c, true),
    );
    Ok(grid)
}

/// Resamples `grid` to the size of `bbox` and places it on a zeroed
/// `height x width` canvas; the geometric inverse of [`crop_resize`].
pub fn paste(grid: &GridMask, bbox: BBox, height: usize, width: usize) -> Result<BinaryMask> {
    let mut mask = BinaryMask::zeros(height, width)?;
    bbox.validate(height, width)?;
    let m = grid.side();
    resample(
        m,
        m,
        |r, c| grid.get(r, c),
        bbox.h,
        bbox.w,
        |r, c| mask.set(bbox.y0 + r, bbox.x0 + c, true),
    );
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::iou;

    #[test]
    fn bbox_single_pixel() {
        let mut m = BinaryMask::zeros(6, 6).unwrap();
        m.set(2, 3, true);
        assert_eq!(tight_bbox(&m).unwrap(), BBox::new(3, 2, 1, 1));
    }

    #[test]
    fn bbox_full_and_two_pixels() {
        let full = BinaryMask::from_fn(5, 7, |_, _| true).unwrap();
        assert_eq!(tight_bbox(&full).unwrap(), BBox::new(0, 0, 7, 5));
        let mut m = BinaryMask::zeros(10, 10).unwrap();
        m.set(0, 0, true);
        m.set(5, 7, true);
        assert_eq!(tight_bbox(&m).unwrap(), BBox::new(0, 0, 8, 6));
    }

    #[test]
    fn bbox_empty_errors() {
        let m = BinaryMask::zeros(4, 4).unwrap();
        assert!(matches!(tight_bbox(&m), Err(Error::EmptyMask)));
    }

    #[test]
    fn crop_identity_when_box_matches_grid() {
        let m = BinaryMask::from_fn(40, 40, |r, c| (r * 7 + c * 3) % 5 < 2).unwrap();
        let bbox = BBox::new(5, 9, 28, 28);
        let g = crop_resize(&m, bbox, 28).unwrap();
        for r in 0..28 {
            for c in 0..28 {
                assert_eq!(g.get(r, c), m.get(r + 9, c + 5));
            }
        }
    }

    #[test]
    fn all_one_crop_any_size() {
        let m = BinaryMask::from_fn(50, 13, |_, _| true).unwrap();
        for m_side in [2, 7, 28, 64] {
            let g = crop_resize(&m, BBox::new(0, 0, 13, 50), m_side).unwrap();
            assert_eq!(g.area(), m_side * m_side);
        }
    }

    #[test]
    fn crop_rejects_out_of_bounds_and_tiny_grid() {
        let m = BinaryMask::zeros(10, 10).unwrap();
        assert!(crop_resize(&m, BBox::new(5, 5, 6, 2), 28).is_err());
        assert!(crop_resize(&m, BBox::new(0, 0, 2, 2), 1).is_err());
    }

    #[test]
    fn paste_exact_copy_at_offset() {
        let g = GridMask::from_fn(28, |r, c| (r + 2 * c) % 3 == 0).unwrap();
        let m = paste(&g, BBox::new(10, 4, 28, 28), 40, 50).unwrap();
        for r in 0..40 {
            for c in 0..50 {
                let inside = (4..32).contains(&r) && (10..38).contains(&c);
                let expected = inside && g.get(r - 4, c - 10);
                assert_eq!(m.get(r, c), expected);
            }
        }
    }

    #[test]
    fn paste_all_zero_grid() {
        let g = GridMask::zeros(28).unwrap();
        assert_eq!(paste(&g, BBox::new(0, 0, 30, 30), 30, 30).unwrap().area(), 0);
    }

    #[test]
    fn crop_then_paste_blob() {
        let m = BinaryMask::from_fn(100, 80, |r, c| {
            let (y, x) = (r as f64 - 48.0, c as f64 - 41.0);
            (y / 38.0).powi(2) + (x / 27.0).powi(2) + 0.2 * (x / 27.0).powi(3) <= 1.0
        })
        .unwrap();
        let bbox = tight_bbox(&m).unwrap();
        let g = crop_resize(&m, bbox, 28).unwrap();
        let back = paste(&g, bbox, 100, 80).unwrap();
        assert!(iou(&m, &back).unwrap() >= 0.9);
    }
}
