//! Linear mask dictionary learned by principal component analysis.
//!
//! A grid mask flattens to `u`. Its code is `v = T * normalize(u)` and the
//! soft reconstruction is `denormalize(W * v)`. `T` holds the top eigenvectors
//! of the corpus covariance as rows; without whitening `W = T^T`, which makes
//! `W * T` the orthogonal projection minimizing the summed squared
//! reconstruction error over the training corpus.
//!
//! Fitting goes through [`FitAccumulator`], whose statistics are integer
//! counts. Shards can be merged in any order and still yield bit-identical
//! codebooks.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::mask::GridMask;

/// Floor applied to eigenvalues before whitening.
pub const WHITEN_EPS: f64 = 1e-6;
/// Floor applied to per-dimension standard deviations.
pub const SCALE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WhitenMode {
    #[default]
    None,
    /// Codes are divided by the square root of their eigenvalue.
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    #[default]
    None,
    /// Each grid cell is divided by its standard deviation over the corpus.
    Std,
}

/// A compact mask representation: one real per component.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskCode(pub Vec<f64>);

impl MaskCode {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sufficient statistics for the PCA fit: sample count, per-cell sums and the
/// upper triangle of `sum(u * u^T)`, all as exact integer counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FitAccumulator {
    side: usize,
    count: u64,
    sum: Vec<u64>,
    cross: Vec<u64>,
}

impl FitAccumulator {
    pub fn new(side: usize) -> Self {
        let dim = side * side;
        Self {
            side,
            count: 0,
            sum: vec![0; dim],
            cross: vec![0; dim * (dim + 1) / 2],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> &[u64] {
        &self.sum
    }

    /// Entry `(i, j)` of `sum(u * u^T)`.
    pub fn cross(&self, i: usize, j: usize) -> u64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.cross[packed_index(self.dim(), a, b)]
    }

    pub fn accumulate(&mut self, grid: &GridMask) -> Result<()> {
        if grid.side() != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                actual: grid.side(),
            });
        }
        let dim = self.dim();
        let set: Vec<usize> = grid
            .data()
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (v != 0).then_some(i))
            .collect();
        self.count += 1;
        for (a, &i) in set.iter().enumerate() {
            self.sum[i] += 1;
            let row = row_start(dim, i) - i;
            for &j in &set[a..] {
                self.cross[row + j] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &FitAccumulator) -> Result<()> {
        if other.side != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                actual: other.side,
            });
        }
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            *a += b;
        }
        Ok(())
    }

    /// Population covariance `cross / n - mean * mean^T`, computed from the
    /// exact integer numerator `n * cross - sum * sum^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let n = i128::from(self.count);
        let denom = (self.count as f64) * (self.count as f64);
        let mut cov = DMatrix::zeros(dim, dim);
        if self.count == 0 {
            return cov;
        }
        for i in 0..dim {
            for j in i..dim {
                let num = n * i128::from(self.cross(i, j))
                    - i128::from(self.sum[i]) * i128::from(self.sum[j]);
                let v = num as f64 / denom;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum.iter().map(|&s| s as f64 / n).collect()
    }
}

/// Offset of `(i, j)`, `i <= j`, in a row-major packed upper triangle.
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    row_start(dim, i) + (j - i)
}

fn row_start(dim: usize, i: usize) -> usize {
    i * dim - i * i.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    side: usize,
    mean: Vec<f64>,
    scale: Option<Vec<f64>>,
    /// `N x D`, row-major.
    projection: Vec<f64>,
    /// `D x N`, row-major; `None` means the transpose of `projection`.
    reconstruction: Option<Vec<f64>>,
    eigenvalues: Vec<f64>,
    class_id: Option<i32>,
    whiten: WhitenMode,
    samples: u64,
}

/// Raw parts of a codebook, used by serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookParts {
    pub side: usize,
    pub mean: Vec<f64>,
    pub scale: Option<Vec<f64>>,
    pub projection: Vec<f64>,
    pub reconstruction: Option<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub class_id: Option<i32>,
    pub whiten: WhitenMode,
    pub samples: u64,
}

/// Fits a codebook with `components` principal directions.
pub fn solve(
    acc: &FitAccumulator,
    components: usize,
    whiten: WhitenMode,
    scale: ScaleMode,
) -> Result<Codebook> {
    let dim = acc.dim();
    if components == 0 || components > dim {
        return Err(Error::InvalidInput(format!(
            "component count must be in 1..={dim}, got {components}"
        )));
    }
    if acc.count() < components as u64 {
        return Err(Error::Underdetermined {
            count: acc.count(),
            components,
        });
    }

    let mean = acc.mean();
    let mut cov = acc.covariance();
    let scale = match scale {
        ScaleMode::None => None,
        ScaleMode::Std => {
            let s: Vec<f64> = (0..dim).map(|i| cov[(i, i)].max(0.0).sqrt().max(SCALE_EPS)).collect();
            for i in 0..dim {
                for j in 0..dim {
                    cov[(i, j)] /= s[i] * s[j];
                }
            }
            Some(s)
        }
    };

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut projection = Vec::with_capacity(components * dim);
    let mut eigenvalues = Vec::with_capacity(components);
    for &k in order.iter().take(components) {
        let col = eig.eigenvectors.column(k);
        let mut pivot = 0;
        for i in 1..dim {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        projection.extend(col.iter().map(|&x| sign * x));
        eigenvalues.push(eig.eigenvalues[k].max(0.0));
    }

    let reconstruction = match whiten {
        WhitenMode::None => None,
        WhitenMode::Eigen => {
            let roots: Vec<f64> = eigenvalues.iter().map(|&l| l.max(WHITEN_EPS).sqrt()).collect();
            let mut w = vec![0.0; dim * components];
            for (k, &root) in roots.iter().enumerate() {
                let row = &mut projection[k * dim..(k + 1) * dim];
                for (i, t) in row.iter_mut().enumerate() {
                    w[i * components + k] = *t * root;
                    *t /= root;
                }
            }
            Some(w)
        }
    };

    Ok(Codebook {
        side: acc.side(),
        mean,
        scale,
        projection,
        reconstruction,
        eigenvalues,
        class_id: None,
        whiten,
        samples: acc.count(),
    })
}

impl Codebook {
    pub fn from_parts(parts: CodebookParts) -> Result<Self> {
        let dim = parts.side * parts.side;
        let n = parts.eigenvalues.len();
        let check = |what: &str, expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{what} has length {actual}, expected {expected}"
                )))
            }
        };
        if n == 0 || n > dim {
            return Err(Error::Validation(format!(
                "component count {n} outside 1..={dim}"
            )));
        }
        check("mean", dim, parts.mean.len())?;
        check("projection", n * dim, parts.projection.len())?;
        if let Some(s) = &parts.scale {
            check("scale", dim, s.len())?;
        }
        if let Some(w) = &parts.reconstruction {
            check("reconstruction", n * dim, w.len())?;
        }
        Ok(Self {
            side: parts.side,
            mean: parts.mean,
            scale: parts.scale,
            projection: parts.projection,
            reconstruction: parts.reconstruction,
            eigenvalues: parts.eigenvalues,
            class_id: parts.class_id,
            whiten: parts.whiten,
            samples: parts.samples,
        })
    }

    pub fn into_parts(self) -> CodebookParts {
        CodebookParts {
            side: self.side,
            mean: self.mean,
            scale: self.scale,
            projection: self.projection,
            reconstruction: self.reconstruction,
            eigenvalues: self.eigenvalues,
            class_id: self.class_id,
            whiten: self.whiten,
            samples: self.samples,
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.side * self.side
    }

    pub fn components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> Option<&[f64]> {
        self.scale.as_deref()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Row `k` of the projection matrix `T`.
    pub fn projection_row(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.projection[k * d..(k + 1) * d]
    }

    pub fn projection(&self) -> &[f64] {
        &self.projection
    }

    /// The stored reconstruction matrix, if it differs from `T^T`.
    pub fn explicit_reconstruction(&self) -> Option<&[f64]> {
        self.reconstruction.as_deref()
    }

    /// Entry `(i, k)` of the reconstruction matrix `W`.
    pub fn reconstruction_at(&self, i: usize, k: usize) -> f64 {
        match &self.reconstruction {
            Some(w) => w[i * self.components() + k],
            None => self.projection[k * self.dim() + i],
        }
    }

    pub fn class_id(&self) -> Option<i32> {
        self.class_id
    }

    pub fn with_class_id(mut self, class_id: Option<i32>) -> Self {
        self.class_id = class_id;
        self
    }

    pub fn whiten(&self) -> WhitenMode {
        self.whiten
    }

    /// Number of training samples the codebook was fitted on.
    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Centers `u` and applies the per-cell scale, if any.
    pub fn normalize(&self, u: &[f64]) -> Vec<f64> {
        match &self.scale {
            None => u.iter().zip(&self.mean).map(|(x, m)| x - m).collect(),
            Some(s) => u
                .iter()
                .zip(&self.mean)
                .zip(s)
                .map(|((x, m), s)| (x - m) / s)
                .collect(),
        }
    }

    pub fn denormalize(&self, mut x: Vec<f64>) -> Vec<f64> {
        match &self.scale {
            None => x.iter_mut().zip(&self.mean).for_each(|(x, m)| *x += m),
            Some(s) => x
                .iter_mut()
                .zip(&self.mean)
                .zip(s)
                .for_each(|((x, m), s)| *x = *x * s + m),
        }
        x
    }

    pub fn encode(&self, grid: &GridMask) -> Result<MaskCode> {
        if grid.side() != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                actual: grid.side(),
            });
        }
        Ok(self.encode_vector(&grid.to_f64()))
    }

    /// Projects an arbitrary length-`D` vector (not necessarily binary).
    pub fn encode_vector(&self, u: &[f64]) -> MaskCode {
        let x = self.normalize(u);
        let d = self.dim();
        MaskCode(
            self.projection
                .chunks_exact(d)
                .map(|row| row.iter().zip(&x).map(|(t, x)| t * x).sum())
                .collect(),
        )
    }

    pub fn decode_soft(&self, code: &MaskCode) -> Result<Vec<f64>> {
        self.check_code(code)?;
        let mut out = vec![0.0; self.dim()];
        self.add_components(&mut out, code.values(), 0..self.components());
        Ok(self.denormalize(out))
    }

    pub fn decode(&self, code: &MaskCode, threshold: f64) -> Result<GridMask> {
        let soft = self.decode_soft(code)?;
        GridMask::from_vec(self.side, soft.iter().map(|&x| u8::from(x >= threshold)).collect())
    }

    /// Soft reconstructions using only the first `n` components, for each `n`
    /// in the nondecreasing list `ns`. Bit-identical to decoding with
    /// [`Codebook::truncate`]d codebooks, at the cost of a single full decode.
    pub fn decode_soft_prefixes(&self, code: &MaskCode, ns: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.check_code(code)?;
        if ns.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("prefix sizes must be nondecreasing".into()));
        }
        if let Some(&n) = ns.last() {
            if n > self.components() {
                return Err(Error::InvalidInput(format!(
                    "prefix {n} exceeds {} components",
                    self.components()
                )));
            }
        }
        let mut acc = vec![0.0; self.dim()];
        let mut done = 0;
        let mut out = Vec::with_capacity(ns.len());
        for &n in ns {
            self.add_components(&mut acc, code.values(), done..n);
            done = n;
            out.push(self.denormalize(acc.clone()));
        }
        Ok(out)
    }

    fn add_components(&self, out: &mut [f64], v: &[f64], range: std::ops::Range<usize>) {
        for k in range {
            let vk = v[k];
            match &self.reconstruction {
                None => {
                    for (o, t) in out.iter_mut().zip(self.projection_row(k)) {
                        *o += t * vk;
                    }
                }
                Some(w) => {
                    let n = self.components();
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += w[i * n + k] * vk;
                    }
                }
            }
        }
    }

    fn check_code(&self, code: &MaskCode) -> Result<()> {
        if code.len() != self.components() {
            return Err(Error::DimensionMismatch {
                expected: self.components(),
                actual: code.len(),
            });
        }
        Ok(())
    }

    /// Keeps the leading `components` directions.
    pub fn truncate(&self, components: usize) -> Result<Codebook> {
        let n = self.components();
        if components == 0 || components > n {
            return Err(Error::InvalidInput(format!(
                "cannot truncate {n} components to {components}"
            )));
        }
        let d = self.dim();
        let reconstruction = self.reconstruction.as_ref().map(|w| {
            w.chunks_exact(n)
                .flat_map(|row| row[..components].iter().copied())
                .collect()
        });
        Ok(Codebook {
            side: self.side,
            mean: self.mean.clone(),
            scale: self.scale.clone(),
            projection: self.projection[..components * d].to_vec(),
            reconstruction,
            eigenvalues: self.eigenvalues[..components].to_vec(),
            class_id: self.class_id,
            whiten: self.whiten,
            samples: self.samples,
        })
    }
}
