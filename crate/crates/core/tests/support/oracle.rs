//! Brute-force PCA reference shared by the oracle tests.

use maskcode_core::GridMask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIDE: usize = 4;
pub const DIM: usize = SIDE * SIDE;
pub const MASKS: usize = 200;

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes. Returns
/// eigenvalues and eigenvectors (as columns of `v`).
pub fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// Masks whose cells switch on with cell-specific, correlated probabilities,
/// so the spectrum has distinct eigenvalues.
pub fn corpus(seed: u64) -> Vec<GridMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..DIM).map(|_| rng.gen_range(0.1..0.9)).collect();
    (0..MASKS)
        .map(|_| {
            let shift: f64 = rng.gen_range(-0.3..0.3);
            let tilt: f64 = rng.gen_range(-0.2..0.2);
            let cells: Vec<u8> = (0..DIM)
                .map(|i| {
                    let p = base[i] + shift + tilt * ((i % SIDE) as f64 - 1.5);
                    u8::from(rng.gen::<f64>() < p)
                })
                .collect();
            GridMask::from_vec(SIDE, cells).unwrap()
        })
        .collect()
}

pub struct Oracle {
    pub mean: Vec<f64>,
    /// Eigenpairs, largest eigenvalue first.
    pub pairs: Vec<(f64, Vec<f64>)>,
}

pub fn oracle(masks: &[GridMask]) -> Oracle {
    let n = masks.len() as f64;
    let vecs: Vec<Vec<f64>> = masks.iter().map(|m| m.to_f64()).collect();
    let mean: Vec<f64> = (0..DIM).map(|i| vecs.iter().map(|u| u[i]).sum::<f64>() / n).collect();
    let cov: Vec<Vec<f64>> = (0..DIM)
        .map(|i| {
            (0..DIM)
                .map(|j| vecs.iter().map(|u| (u[i] - mean[i]) * (u[j] - mean[j])).sum::<f64>() / n)
                .collect()
        })
        .collect();
    let (vals, vecs) = jacobi(cov);
    let mut pairs: Vec<(f64, Vec<f64>)> =
        (0..DIM).map(|k| (vals[k], (0..DIM).map(|i| vecs[i][k]).collect())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Oracle { mean, pairs }
}

/// `P = Σ_k t_k t_kᵀ` over the given rows.
pub fn projector<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut p = vec![0.0; DIM * DIM];
    for t in rows {
        for i in 0..DIM {
            for j in 0..DIM {
                p[i * DIM + j] += t[i] * t[j];
            }
        }
    }
    p
}

