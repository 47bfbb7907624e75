use maskcode_core::losses::LossKind;
use maskcode_core::mask::{
    connected_components, crop_resize, iou, polygon_rasterize, rle_decode, rle_decode_compressed, rle_encode, tight_bbox,
    BBox, BinaryMask, GridMask, Polygon,
};
use maskcode_core::polar::{polar_decode, polar_encode};
use maskcode_core::{solve, FitAccumulator, MaskCode, ScaleMode, WhitenMode};
use proptest::prelude::*;

fn binary_mask(max_h: usize, max_w: usize) -> impl Strategy<Value = BinaryMask> {
    (1..=max_h, 1..=max_w).prop_flat_map(|(h, w)| {
        prop::collection::vec(prop::bool::weighted(0.4), h * w)
            .prop_map(move |bits| BinaryMask::from_vec(h, w, bits.into_iter().map(u8::from).collect()).unwrap())
    })
}

fn grid(side: usize) -> impl Strategy<Value = GridMask> {
    // Mix dense noise with sparse masks so long runs appear too.
    (0.02f64..0.98).prop_flat_map(move |p| {
        prop::collection::vec(prop::bool::weighted(p), side * side)
            .prop_map(move |bits| GridMask::from_vec(side, bits.into_iter().map(u8::from).collect()).unwrap())
    })
}

fn polygon() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.0f64..30.0, 0.0f64..30.0).prop_map(|(x, y)| [x, y]), 3..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn rle_roundtrip_28(g in grid(28)) {
        let m = g.to_binary_mask();
        let rle = rle_encode(&m);
        prop_assert_eq!(rle.counts.iter().map(|&c| u64::from(c)).sum::<u64>(), 28 * 28);
        prop_assert_eq!(&rle_decode(&rle).unwrap(), &m);
        prop_assert_eq!(&rle_decode_compressed(28, 28, &rle.to_compressed()).unwrap(), &m);
    }
}

proptest! {
    #[test]
    fn rle_roundtrip_any_shape(m in binary_mask(40, 40)) {
        let rle = rle_encode(&m);
        prop_assert!(rle.counts.iter().skip(1).all(|&c| c > 0));
        prop_assert_eq!(&rle_decode(&rle).unwrap(), &m);
        prop_assert_eq!(&rle_decode_compressed(m.height(), m.width(), &rle.to_compressed()).unwrap(), &m);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in grid(12), b in grid(12)) {
        let ab = iou(&a, &b).unwrap();
        prop_assert_eq!(ab, iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn raster_ignores_vertex_rotation_and_direction(verts in polygon(), shift in 0usize..10) {
        let base = polygon_rasterize(&[Polygon(verts.clone())], 32, 32).unwrap();
        let mut rotated = verts.clone();
        rotated.rotate_left(shift % verts.len());
        prop_assert_eq!(&polygon_rasterize(&[Polygon(rotated)], 32, 32).unwrap(), &base);
        let mut reversed = verts;
        reversed.reverse();
        prop_assert_eq!(&polygon_rasterize(&[Polygon(reversed)], 32, 32).unwrap(), &base);
    }

    #[test]
    fn raster_union_is_commutative(a in polygon(), b in polygon()) {
        let ab = polygon_rasterize(&[Polygon(a.clone()), Polygon(b.clone())], 32, 32).unwrap();
        let ba = polygon_rasterize(&[Polygon(b), Polygon(a)], 32, 32).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn crop_of_square_box_is_identity(m in binary_mask(20, 20), side in 2usize..8) {
        prop_assume!(m.height() >= side && m.width() >= side);
        let bbox = BBox::new(m.width() - side, m.height() - side, side, side);
        let g = crop_resize(&m, bbox, side).unwrap();
        for r in 0..side {
            for c in 0..side {
                prop_assert_eq!(g.get(r, c), m.get(bbox.y0 + r, bbox.x0 + c));
            }
        }
    }

    #[test]
    fn tight_bbox_contains_every_pixel(m in binary_mask(20, 20)) {
        prop_assume!(m.area() > 0);
        let b = tight_bbox(&m).unwrap();
        for r in 0..m.height() {
            for c in 0..m.width() {
                if m.get(r, c) {
                    prop_assert!(r >= b.y0 && r < b.y0 + b.h && c >= b.x0 && c < b.x0 + b.w);
                }
            }
        }
    }

    #[test]
    fn polar_decode_is_one_region(g in grid(16), rays in 3usize..40) {
        prop_assume!(!g.is_empty());
        let back = polar_decode(&polar_encode(&g, rays).unwrap(), 16).unwrap();
        prop_assert!(connected_components(&back) <= 1);
    }

    #[test]
    fn accumulator_ignores_order(gs in prop::collection::vec(grid(5), 1..30), cut in 0usize..30) {
        let mut forward = FitAccumulator::new(5);
        for g in &gs {
            forward.accumulate(g).unwrap();
        }
        let cut = cut.min(gs.len());
        let mut left = FitAccumulator::new(5);
        let mut right = FitAccumulator::new(5);
        for g in gs[..cut].iter().rev() {
            left.accumulate(g).unwrap();
        }
        for g in &gs[cut..] {
            right.accumulate(g).unwrap();
        }
        right.merge(&left).unwrap();
        prop_assert_eq!(right, forward);
    }

    #[test]
    fn mean_encodes_to_zero(gs in prop::collection::vec(grid(4), 6..40)) {
        let mut acc = FitAccumulator::new(4);
        for g in &gs {
            acc.accumulate(g).unwrap();
        }
        let cb = solve(&acc, 3, WhitenMode::None, ScaleMode::None).unwrap();
        let code = cb.encode_vector(&acc.mean());
        prop_assert!(code.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn losses_are_nonnegative(p in prop::collection::vec(-5.0f64..5.0, 8), t in prop::collection::vec(-5.0f64..5.0, 8)) {
        prop_assume!(t.iter().any(|x| x.abs() > 1e-3));
        for kind in [LossKind::L2, LossKind::L1, LossKind::SmoothL1 { beta: 0.5 }, LossKind::Cosine] {
            let l = kind.evaluate(&MaskCode(p.clone()), &MaskCode(t.clone())).unwrap();
            prop_assert!(l.value >= 0.0, "{:?}", kind);
        }
    }
}
