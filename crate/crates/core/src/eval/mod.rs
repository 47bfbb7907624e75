//! Corpus-level reconstruction quality.
//!
//! Reconstruction error is `1 - mIoU` between each grid target and its
//! encode/decode roundtrip. Per-mask scores are computed in parallel but
//! always summed in corpus order, so results do not depend on thread count.

mod report;

pub use report::{emit_class_split, emit_codec_report, emit_curve, ReportFormat};

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::mask::{iou, GridMask};
use crate::polar::{polar_decode, polar_encode};

pub const HISTOGRAM_BINS: usize = 20;

/// Something that maps a grid target through a lossy representation and back.
pub trait GridCodec: Sync {
    fn roundtrip(&self, grid: &GridMask) -> Result<GridMask>;
}

/// Linear codebook codec, binarizing at `threshold`.
pub struct PcaCodec<'a> {
    pub codebook: &'a Codebook,
    pub threshold: f64,
}

impl<'a> PcaCodec<'a> {
    pub fn new(codebook: &'a Codebook) -> Self {
        Self {
            codebook,
            threshold: 0.5,
        }
    }
}

impl GridCodec for PcaCodec<'_> {
    fn roundtrip(&self, grid: &GridMask) -> Result<GridMask> {
        let code = self.codebook.encode(grid)?;
        self.codebook.decode(&code, self.threshold)
    }
}

/// Polar-ray contour codec with `rays` rays.
pub struct PolarCodec {
    pub rays: usize,
}

impl GridCodec for PolarCodec {
    fn roundtrip(&self, grid: &GridMask) -> Result<GridMask> {
        polar_decode(&polar_encode(grid, self.rays)?, grid.side())
    }
}

/// Lossless reference codec.
pub struct IdentityCodec;

impl GridCodec for IdentityCodec {
    fn roundtrip(&self, grid: &GridMask) -> Result<GridMask> {
        Ok(grid.clone())
    }
}

/// Per-mask roundtrip IoUs, in corpus order.
pub fn roundtrip_ious(corpus: &[GridMask], codec: &dyn GridCodec) -> Result<Vec<f64>> {
    corpus
        .par_iter()
        .map(|g| iou(g, &codec.roundtrip(g)?))
        .collect()
}

fn ordered_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean roundtrip IoU over the corpus.
pub fn corpus_miou(corpus: &[GridMask], codec: &dyn GridCodec) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("corpus is empty".into()));
    }
    Ok(ordered_mean(&roundtrip_ious(corpus, codec)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub components: usize,
    pub miou: f64,
    pub err: f64,
}

/// Reconstruction error against component count.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconCurve {
    pub points: Vec<CurvePoint>,
}

impl ReconCurve {
    /// True when `err` never rises by more than `tol` from one point to the next.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.points.windows(2).all(|w| w[1].err <= w[0].err + tol)
    }

    pub fn miou_at(&self, components: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.components == components)
            .map(|p| p.miou)
    }
}

/// Streaming accumulator for [`recon_curve`]: feed batches in corpus order.
#[derive(Debug, Clone)]
pub struct CurveAccumulator {
    ns: Vec<usize>,
    sums: Vec<f64>,
    count: u64,
}

impl CurveAccumulator {
    pub fn new(codebook: &Codebook, ns: &[usize]) -> Result<Self> {
        if ns.is_empty() {
            return Err(Error::InvalidInput("no component counts given".into()));
        }
        if ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("component counts must be strictly increasing".into()));
        }
        if ns[0] == 0 || *ns.last().unwrap() > codebook.components() {
            return Err(Error::InvalidInput(format!(
                "component counts must lie in 1..={}",
                codebook.components()
            )));
        }
        Ok(Self {
            ns: ns.to_vec(),
            sums: vec![0.0; ns.len()],
            count: 0,
        })
    }

    pub fn add_batch(&mut self, codebook: &Codebook, grids: &[GridMask]) -> Result<()> {
        let per_mask: Vec<Vec<f64>> = grids
            .par_iter()
            .map(|g| prefix_ious(codebook, g, &self.ns))
            .collect::<Result<_>>()?;
        for scores in per_mask {
            for (s, v) in self.sums.iter_mut().zip(scores) {
                *s += v;
            }
            self.count += 1;
        }
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(self) -> Result<ReconCurve> {
        if self.count == 0 {
            return Err(Error::InvalidInput("corpus is empty".into()));
        }
        let n = self.count as f64;
        Ok(ReconCurve {
            points: self
                .ns
                .iter()
                .zip(&self.sums)
                .map(|(&components, &s)| {
                    let miou = s / n;
                    CurvePoint {
                        components,
                        miou,
                        err: 1.0 - miou,
                    }
                })
                .collect(),
        })
    }
}

fn prefix_ious(codebook: &Codebook, grid: &GridMask, ns: &[usize]) -> Result<Vec<f64>> {
    let code = codebook.encode(grid)?;
    codebook
        .decode_soft_prefixes(&code, ns)?
        .into_iter()
        .map(|soft| {
            let rec = GridMask::from_vec(grid.side(), soft.iter().map(|&x| u8::from(x >= 0.5)).collect())?;
            iou(grid, &rec)
        })
        .collect()
}

/// mIoU after truncating `codebook` to each of `ns` components.
pub fn recon_curve(corpus: &[GridMask], codebook: &Codebook, ns: &[usize]) -> Result<ReconCurve> {
    let mut acc = CurveAccumulator::new(codebook, ns)?;
    acc.add_batch(codebook, corpus)?;
    acc.finish()
}

/// Summary of one codec's roundtrip IoUs.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecStats {
    pub count: u64,
    pub mean: f64,
    pub median: f64,
    /// `HISTOGRAM_BINS` equal-width bins over `[0, 1]`; 1.0 falls in the last.
    pub histogram: Vec<u64>,
}

impl CodecStats {
    pub fn from_ious(ious: &[f64]) -> Result<Self> {
        if ious.is_empty() {
            return Err(Error::InvalidInput("no scores".into()));
        }
        let mut sorted = ious.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        let mut histogram = vec![0u64; HISTOGRAM_BINS];
        for &v in ious {
            let bin = ((v * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            histogram[bin] += 1;
        }
        Ok(Self {
            count: ious.len() as u64,
            mean: ordered_mean(ious),
            median,
            histogram,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecReport {
    /// Keyed by codec name, so iteration order is by name.
    pub codecs: BTreeMap<String, CodecStats>,
    /// Mean IoU per codec and category, when categories were supplied.
    pub per_category: BTreeMap<String, BTreeMap<i64, (u64, f64)>>,
}

/// Evaluates every codec on the same corpus. `categories`, when given, must
/// parallel `corpus`.
pub fn compare_codecs(
    corpus: &[GridMask],
    categories: Option<&[i64]>,
    codecs: &[(String, &dyn GridCodec)],
) -> Result<CodecReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("corpus is empty".into()));
    }
    if let Some(cats) = categories {
        if cats.len() != corpus.len() {
            return Err(Error::DimensionMismatch {
                expected: corpus.len(),
                actual: cats.len(),
            });
        }
    }
    let mut report = CodecReport {
        codecs: BTreeMap::new(),
        per_category: BTreeMap::new(),
    };
    for (name, codec) in codecs {
        if report.codecs.contains_key(name) {
            return Err(Error::InvalidInput(format!("duplicate codec name {name:?}")));
        }
        let ious = roundtrip_ious(corpus, *codec)?;
        report.codecs.insert(name.clone(), CodecStats::from_ious(&ious)?);
        if let Some(cats) = categories {
            let mut by_cat: BTreeMap<i64, (u64, f64)> = BTreeMap::new();
            for (&c, &v) in cats.iter().zip(&ious) {
                let e = by_cat.entry(c).or_default();
                e.0 += 1;
                e.1 += v;
            }
            for e in by_cat.values_mut() {
                e.1 /= e.0 as f64;
            }
            report.per_category.insert(name.clone(), by_cat);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRow {
    pub category: i64,
    pub count: u64,
    pub agnostic: f64,
    pub specific: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSplit {
    pub components: usize,
    pub agnostic: f64,
    pub specific: f64,
    pub per_category: Vec<CategoryRow>,
}

/// Streaming form of [`class_split_eval`]: feed batches in corpus order.
pub struct ClassSplitAccumulator<'a> {
    components: usize,
    shared: Codebook,
    specific: &'a BTreeMap<i64, Codebook>,
    truncated: BTreeMap<i64, Codebook>,
    rows: BTreeMap<i64, CategoryRow>,
    sums: (f64, f64),
    count: u64,
}

impl<'a> ClassSplitAccumulator<'a> {
    pub fn new(agnostic: &Codebook, specific: &'a BTreeMap<i64, Codebook>, components: usize) -> Result<Self> {
        Ok(Self {
            components,
            shared: agnostic.truncate(components)?,
            specific,
            truncated: BTreeMap::new(),
            rows: BTreeMap::new(),
            sums: (0.0, 0.0),
            count: 0,
        })
    }

    pub fn add_batch(&mut self, batch: &[(GridMask, i64)]) -> Result<()> {
        for (_, cat) in batch {
            if !self.truncated.contains_key(cat) {
                let cb = self
                    .specific
                    .get(cat)
                    .ok_or_else(|| Error::Validation(format!("no codebook for category {cat}")))?;
                self.truncated.insert(*cat, cb.truncate(self.components)?);
            }
        }
        let (shared, per_class) = (&self.shared, &self.truncated);
        let scores: Vec<(f64, f64)> = batch
            .par_iter()
            .map(|(g, cat)| {
                let a = PcaCodec::new(shared).roundtrip(g)?;
                let s = PcaCodec::new(&per_class[cat]).roundtrip(g)?;
                Ok((iou(g, &a)?, iou(g, &s)?))
            })
            .collect::<Result<_>>()?;
        for ((_, cat), (a, s)) in batch.iter().zip(scores) {
            self.sums.0 += a;
            self.sums.1 += s;
            self.count += 1;
            let row = self.rows.entry(*cat).or_insert(CategoryRow {
                category: *cat,
                count: 0,
                agnostic: 0.0,
                specific: 0.0,
            });
            row.count += 1;
            row.agnostic += a;
            row.specific += s;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<ClassSplit> {
        if self.count == 0 {
            return Err(Error::InvalidInput("corpus is empty".into()));
        }
        let n = self.count as f64;
        let per_category = self
            .rows
            .into_values()
            .map(|mut r| {
                r.agnostic /= r.count as f64;
                r.specific /= r.count as f64;
                r
            })
            .collect();
        Ok(ClassSplit {
            components: self.components,
            agnostic: self.sums.0 / n,
            specific: self.sums.1 / n,
            per_category,
        })
    }
}

/// Compares one shared codebook with per-category codebooks at equal size.
pub fn class_split_eval(
    corpus: &[(GridMask, i64)],
    agnostic: &Codebook,
    specific: &BTreeMap<i64, Codebook>,
    components: usize,
) -> Result<ClassSplit> {
    let mut acc = ClassSplitAccumulator::new(agnostic, specific, components)?;
    acc.add_batch(corpus)?;
    acc.finish()
}
