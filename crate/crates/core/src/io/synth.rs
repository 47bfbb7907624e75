//! Seeded synthetic instance corpora.
//!
//! Every record draws from its own ChaCha stream keyed by `(seed, family,
//! index)`, so a corpus is reproducible record by record and independent of
//! iteration order. Families are interleaved: record `i` of each family in
//! spec order, then record `i + 1`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{record_to_grid, InstanceRecord, Segmentation};
use crate::error::{Error, Result};
use crate::mask::{
    connected_components, label_components, polygon_rasterize, rle_encode, BinaryMask, GridMask,
    Polygon,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ShapeFamily {
    Blob,
    Disk,
    Bar,
    Donut,
    TwoBlob,
    Crescent,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 6] = [
        ShapeFamily::Blob,
        ShapeFamily::Disk,
        ShapeFamily::Bar,
        ShapeFamily::Donut,
        ShapeFamily::TwoBlob,
        ShapeFamily::Crescent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Blob => "blob",
            ShapeFamily::Disk => "disk",
            ShapeFamily::Bar => "bar",
            ShapeFamily::Donut => "donut",
            ShapeFamily::TwoBlob => "two-blob",
            ShapeFamily::Crescent => "crescent",
        }
    }

    /// Category id used in emitted records.
    pub fn category_id(self) -> i64 {
        match self {
            ShapeFamily::Blob => 1,
            ShapeFamily::Disk => 2,
            ShapeFamily::Bar => 3,
            ShapeFamily::Donut => 4,
            ShapeFamily::TwoBlob => 5,
            ShapeFamily::Crescent => 6,
        }
    }

    pub fn from_category_id(id: i64) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.category_id() == id)
    }

    /// Families whose masks are not a single simply connected region are
    /// stored as RLE rather than polygons.
    pub fn uses_rle(self) -> bool {
        matches!(self, ShapeFamily::Donut | ShapeFamily::TwoBlob)
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown shape family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub families: Vec<ShapeFamily>,
    pub count_per_family: usize,
    /// Side of the grid targets the family guarantees are checked at.
    pub grid_side: usize,
    /// Side of the square synthetic images.
    pub image_size: usize,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(families: Vec<ShapeFamily>, count_per_family: usize, seed: u64) -> Self {
        Self {
            families,
            count_per_family,
            grid_side: 28,
            image_size: 96,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidInput("corpus needs at least one family".into()));
        }
        if self.count_per_family == 0 {
            return Err(Error::InvalidInput("count per family must be at least 1".into()));
        }
        if self.grid_side < 8 || self.image_size < 32 {
            return Err(Error::InvalidInput(format!(
                "grid side {} / image size {} too small",
                self.grid_side, self.image_size
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.families.len() * self.count_per_family
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Synthetic records in corpus order.
pub fn synth_records(spec: &CorpusSpec) -> Result<impl Iterator<Item = InstanceRecord> + '_> {
    spec.validate()?;
    let nf = spec.families.len();
    Ok((0..spec.len()).map(move |i| {
        let family = spec.families[i % nf];
        generate(spec, family, i / nf, i as u64 + 1)
    }))
}

/// Synthetic grid targets with their category ids.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<impl Iterator<Item = (GridMask, i64)> + '_> {
    Ok(synth_records(spec)?.map(move |rec| {
        let sample = record_to_grid(&rec, spec.grid_side).expect("generator validates its records");
        (sample.grid, rec.category_id)
    }))
}

/// Shape as filled regions minus holes, in image coordinates.
struct Shape {
    fill: Vec<Polygon>,
    holes: Vec<Polygon>,
}

fn generate(spec: &CorpusSpec, family: ShapeFamily, index: usize, id: u64) -> InstanceRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((family.category_id() as u64) << 48) | index as u64);
    let s = spec.image_size as f64;
    loop {
        let shape = match family {
            ShapeFamily::Blob => blob(&mut rng, s),
            ShapeFamily::Disk => disk(&mut rng, s),
            ShapeFamily::Bar => bar(&mut rng, s),
            ShapeFamily::Donut => donut(&mut rng, s),
            ShapeFamily::TwoBlob => two_blob(&mut rng, s),
            ShapeFamily::Crescent => crescent(&mut rng, s),
        };
        let shape = place(&mut rng, shape, s);
        let mask = render(&shape, spec.image_size);
        let segmentation = if family.uses_rle() {
            Segmentation::Rle(rle_encode(&mask))
        } else {
            Segmentation::Polygons(shape.fill)
        };
        let rec = InstanceRecord {
            id,
            image_id: id,
            height: spec.image_size,
            width: spec.image_size,
            category_id: family.category_id(),
            iscrowd: false,
            segmentation,
            bbox: None,
            area: Some(mask.area() as f64),
        };
        let Ok(sample) = record_to_grid(&rec, spec.grid_side) else {
            continue;
        };
        let ok = match family {
            ShapeFamily::TwoBlob => connected_components(&sample.grid) == 2,
            ShapeFamily::Donut => has_hole(&sample.grid),
            _ => connected_components(&sample.grid) == 1,
        };
        if ok {
            return rec;
        }
    }
}

fn render(shape: &Shape, size: usize) -> BinaryMask {
    let mut mask = polygon_rasterize(&shape.fill, size, size).expect("generated polygons are valid");
    if !shape.holes.is_empty() {
        let holes = polygon_rasterize(&shape.holes, size, size).expect("generated polygons are valid");
        for r in 0..size {
            for c in 0..size {
                if holes.get(r, c) {
                    mask.set(r, c, false);
                }
            }
        }
    }
    mask
}

/// True when some background component does not touch the border.
pub fn has_hole(grid: &GridMask) -> bool {
    let m = grid.side();
    let inverted = GridMask::from_fn(m, |r, c| !grid.get(r, c)).expect("side is positive");
    let (labels, count) = label_components(&inverted);
    let mut touches = vec![false; count + 1];
    for i in 0..m {
        for idx in [i, (m - 1) * m + i, i * m, i * m + m - 1] {
            touches[labels[idx] as usize] = true;
        }
    }
    touches.iter().skip(1).any(|&t| !t)
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, angle: f64, n: usize) -> Polygon {
    radial(cx, cy, angle, n, |t| (rx * t.cos(), ry * t.sin()))
}

/// Polygon through `f(theta)` offsets, rotated by `angle` about `(cx, cy)`.
fn radial(cx: f64, cy: f64, angle: f64, n: usize, f: impl Fn(f64) -> (f64, f64)) -> Polygon {
    let (sa, ca) = angle.sin_cos();
    Polygon(
        (0..n)
            .map(|k| {
                let (x, y) = f(TAU * k as f64 / n as f64);
                [cx + x * ca - y * sa, cy + x * sa + y * ca]
            })
            .collect(),
    )
}

fn blob(rng: &mut ChaCha8Rng, s: f64) -> Shape {
    let radius = rng.gen_range(0.18..0.38) * s;
    let harmonics: Vec<(f64, f64, f64)> = (2..=5)
        .map(|h| (h as f64, rng.gen_range(0.0..0.22) / (h as f64 - 1.0), rng.gen_range(0.0..TAU)))
        .collect();
    let aspect = rng.gen_range(0.6..1.0);
    let angle = rng.gen_range(0.0..PI);
    let fill = radial(0.0, 0.0, angle, 64, |t| {
        let r = radius * (1.0 + harmonics.iter().map(|(h, a, p)| a * (h * t + p).cos()).sum::<f64>());
        (r * t.cos(), aspect * r * t.sin())
    });
    Shape {
        fill: vec![fill],
        holes: vec![],
    }
}

fn disk(rng: &mut ChaCha8Rng, s: f64) -> Shape {
    let r = rng.gen_range(0.12..0.42) * s;
    Shape {
        fill: vec![ellipse(0.0, 0.0, r, r, 0.0, 64)],
        holes: vec![],
    }
}

fn bar(rng: &mut ChaCha8Rng, s: f64) -> Shape {
    let half_len = rng.gen_range(0.25..0.45) * s;
    let half_wid = rng.gen_range(0.04..0.12) * s;
    let (sa, ca) = rng.gen_range(0.0..PI).sin_cos();
    let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let fill = Polygon(
        corners
            .iter()
            .map(|(u, v)| {
                let (x, y) = (u * half_len, v * half_wid);
                [x * ca - y * sa, x * sa + y * ca]
            })
            .collect(),
    );
    Shape {
        fill: vec![fill],
        holes: vec![],
    }
}

fn donut(rng: &mut ChaCha8Rng, s: f64) -> Shape {
    let r = rng.gen_range(0.25..0.45) * s;
    let aspect = rng.gen_range(0.8..1.0);
    let angle = rng.gen_range(0.0..PI);
    let hole = rng.gen_range(0.55..0.7);
    let shift = rng.gen_range(0.0..0.08) * r;
    let dir = rng.gen_range(0.0..TAU);
    let (dx, dy) = (shift * dir.cos(), shift * dir.sin());
    Shape {
        fill: vec![ellipse(0.0, 0.0, r, aspect * r, angle, 72)],
        holes: vec![ellipse(dx, dy, hole * r, hole * aspect * r, angle, 72)],
    }
}

fn two_blob(rng: &mut ChaCha8Rng, s: f64) -> Shape {
    let r1 = rng.gen_range(0.1..0.2) * s;
    let r2 = rng.gen_range(0.1..0.2) * s;
    let gap = rng.gen_range(0.12..0.25) * s;
    let dir = rng.gen_range(0.0..TAU);
    let d = r1 + r2 + gap;
    let (dx, dy) = (d * dir.cos(), d * dir.sin());
    Shape {
        fill: vec![
            ellipse(0.0, 0.0, r1, r1, 0.0, 48),
            ellipse(dx, dy, r2, r2, 0.0, 48),
        ],
        holes: vec![],
    }
}

/// Disk `A` minus an overlapping disk `B`, traced as one polygon: the arc of
/// `A` outside `B`, then the arc of `B` inside `A`.
fn crescent(rng: &mut ChaCha8Rng, s: f64) -> Shape {
    let ra = rng.gen_range(0.25..0.42) * s;
    let rb = rng.gen_range(0.75..1.0) * ra;
    let d = rng.gen_range(0.35..0.7) * ra;
    let psi = rng.gen_range(0.0..TAU);
    let alpha = ((d * d + ra * ra - rb * rb) / (2.0 * d * ra)).clamp(-1.0, 1.0).acos();
    let beta = ((d * d + rb * rb - ra * ra) / (2.0 * d * rb)).clamp(-1.0, 1.0).acos();
    let (bx, by) = (d * psi.cos(), d * psi.sin());
    let n = 48;
    let mut pts = Vec::with_capacity(2 * n + 2);
    // Outer arc of A, away from B.
    for k in 0..=n {
        let t = psi + alpha + (TAU - 2.0 * alpha) * k as f64 / n as f64;
        pts.push([ra * t.cos(), ra * t.sin()]);
    }
    // Inner arc of B, facing A's center, walked back to the start.
    for k in 1..n {
        let t = psi + PI - beta + 2.0 * beta * k as f64 / n as f64;
        pts.push([bx + rb * t.cos(), by + rb * t.sin()]);
    }
    Shape {
        fill: vec![Polygon(pts)],
        holes: vec![],
    }
}

/// Scales the shape down if it does not fit and translates it to a random
/// position fully inside the image, one pixel from the border.
fn place(rng: &mut ChaCha8Rng, shape: Shape, s: f64) -> Shape {
    let pts = shape.fill.iter().flat_map(|p| p.vertices().iter());
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in pts {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let room = s - 2.0;
    let k = (room / (x1 - x0).max(y1 - y0)).min(1.0);
    let (w, h) = ((x1 - x0) * k, (y1 - y0) * k);
    let ox = 1.0 + rng.gen_range(0.0..=(room - w).max(0.0));
    let oy = 1.0 + rng.gen_range(0.0..=(room - h).max(0.0));
    let map = |p: &Polygon| {
        Polygon(
            p.vertices()
                .iter()
                .map(|v| [ox + (v[0] - x0) * k, oy + (v[1] - y0) * k])
                .collect(),
        )
    };
    Shape {
        fill: shape.fill.iter().map(map).collect(),
        holes: shape.holes.iter().map(map).collect(),
    }
}
