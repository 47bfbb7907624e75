//! Code-space regression losses with analytic gradients.

use crate::codebook::MaskCode;
use crate::error::{Error, Result};

/// Stabilizer in the cosine denominator.
pub const COSINE_EPS: f64 = 1e-8;

/// A loss value with its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    L2,
    L1,
    SmoothL1 { beta: f64 },
    Cosine,
}

impl LossKind {
    pub fn evaluate(self, pred: &MaskCode, target: &MaskCode) -> Result<LossValue> {
        match self {
            LossKind::L2 => l2_loss(pred, target),
            LossKind::L1 => l1_loss(pred, target),
            LossKind::SmoothL1 { beta } => smooth_l1_loss(pred, target, beta),
            LossKind::Cosine => cosine_loss(pred, target),
        }
    }
}

fn check_lengths(pred: &MaskCode, target: &MaskCode) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            actual: pred.len(),
        });
    }
    Ok(())
}

fn elementwise(
    pred: &MaskCode,
    target: &MaskCode,
    f: impl Fn(f64) -> (f64, f64),
) -> Result<LossValue> {
    check_lengths(pred, target)?;
    let mut value = 0.0;
    let gradient = pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| {
            let (v, g) = f(p - t);
            value += v;
            g
        })
        .collect();
    Ok(LossValue { value, gradient })
}

/// Sum of squared differences.
pub fn l2_loss(pred: &MaskCode, target: &MaskCode) -> Result<LossValue> {
    elementwise(pred, target, |d| (d * d, 2.0 * d))
}

/// Sum of absolute differences; the subgradient is 0 where they tie.
pub fn l1_loss(pred: &MaskCode, target: &MaskCode) -> Result<LossValue> {
    elementwise(pred, target, |d| {
        let g = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        (d.abs(), g)
    })
}

/// Huber-style loss: quadratic below `beta`, linear above.
pub fn smooth_l1_loss(pred: &MaskCode, target: &MaskCode, beta: f64) -> Result<LossValue> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    elementwise(pred, target, |d| {
        if d.abs() < beta {
            (0.5 * d * d / beta, d / beta)
        } else {
            (d.abs() - 0.5 * beta, d.signum())
        }
    })
}

/// `1 - cos(pred, target)` with an epsilon-stabilized denominator.
pub fn cosine_loss(pred: &MaskCode, target: &MaskCode) -> Result<LossValue> {
    check_lengths(pred, target)?;
    let (p, t) = (pred.values(), target.values());
    let norm_t = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_t == 0.0 {
        return Err(Error::InvalidInput("cosine loss needs a nonzero target".into()));
    }
    let norm_p = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot: f64 = p.iter().zip(t).map(|(a, b)| a * b).sum();
    let denom = norm_p * norm_t + COSINE_EPS;
    let sim = dot / denom;
    // d(sim)/dp = t / denom - dot * norm_t * p / (norm_p * denom^2)
    let radial = if norm_p > 0.0 {
        dot * norm_t / (norm_p * denom * denom)
    } else {
        0.0
    };
    let gradient = p
        .iter()
        .zip(t)
        .map(|(pi, ti)| -(ti / denom - radial * pi))
        .collect();
    Ok(LossValue {
        value: 1.0 - sim,
        gradient,
    })
}

/// Loss over a batch, with one gradient per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub value: f64,
    pub gradients: Vec<Vec<f64>>,
}

/// Per-sample code loss summed over positive samples and averaged by
/// `max(1, positives)`. Negative samples contribute nothing, gradient included.
pub fn mask_loss(
    preds: &[MaskCode],
    targets: &[MaskCode],
    positive: &[bool],
    kind: LossKind,
) -> Result<BatchLoss> {
    if preds.len() != targets.len() || preds.len() != positive.len() {
        return Err(Error::InvalidInput(format!(
            "batch lengths differ: {} predictions, {} targets, {} flags",
            preds.len(),
            targets.len(),
            positive.len()
        )));
    }
    let positives = positive.iter().filter(|&&p| p).count();
    let norm = positives.max(1) as f64;
    let mut value = 0.0;
    let mut gradients = Vec::with_capacity(preds.len());
    for ((pred, target), &pos) in preds.iter().zip(targets).zip(positive) {
        if pos {
            let l = kind.evaluate(pred, target)?;
            value += l.value;
            gradients.push(l.gradient.into_iter().map(|g| g / norm).collect());
        } else {
            check_lengths(pred, target)?;
            gradients.push(vec![0.0; pred.len()]);
        }
    }
    Ok(BatchLoss {
        value: value / norm,
        gradients,
    })
}

/// Weighted sum of the detection and mask terms.
pub fn total_loss(det_loss: f64, mask_loss: f64, lambda_det: f64, lambda_mask: f64) -> f64 {
    lambda_det * det_loss + lambda_mask * mask_loss
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(v: &[f64]) -> MaskCode {
        MaskCode(v.to_vec())
    }

    #[test]
    fn l2_analytic_pair() {
        let l = l2_loss(&code(&[0.0, 0.0]), &code(&[3.0, 4.0])).unwrap();
        assert_eq!(l.value, 25.0);
        assert_eq!(l.gradient, vec![-6.0, -8.0]);
    }

    #[test]
    fn identical_inputs_are_zero() {
        let a = code(&[0.3, -1.2, 4.0]);
        for kind in [LossKind::L2, LossKind::L1, LossKind::SmoothL1 { beta: 1.0 }] {
            let l = kind.evaluate(&a, &a).unwrap();
            assert_eq!(l.value, 0.0);
            assert!(l.gradient.iter().all(|&g| g == 0.0));
        }
        // Only the stabilizing epsilon in the denominator remains.
        assert!(cosine_loss(&a, &a).unwrap().value.abs() < 1e-8);
    }

    #[test]
    fn l1_simple() {
        assert_eq!(l1_loss(&code(&[1.0, -1.0]), &code(&[0.0, 0.0])).unwrap().value, 2.0);
    }

    #[test]
    fn smooth_l1_linear_branch() {
        let beta = 0.7;
        let l = smooth_l1_loss(&code(&[2.0 * beta, 0.0]), &code(&[0.0, -2.0 * beta]), beta).unwrap();
        assert!((l.value - 2.0 * 1.5 * beta).abs() < 1e-12);
    }

    #[test]
    fn smooth_l1_rejects_nonpositive_beta() {
        let a = code(&[1.0]);
        assert!(smooth_l1_loss(&a, &a, 0.0).is_err());
        assert!(smooth_l1_loss(&a, &a, -1.0).is_err());
        assert!(smooth_l1_loss(&a, &a, f64::NAN).is_err());
    }

    #[test]
    fn cosine_scale_invariant_and_orthogonal() {
        let t = code(&[1.0, 2.0, -0.5]);
        let p = code(&[3.0, 6.0, -1.5]);
        assert!(cosine_loss(&p, &t).unwrap().value.abs() < 1e-9);
        let l = cosine_loss(&code(&[1.0, 0.0]), &code(&[0.0, 2.0])).unwrap();
        assert!((l.value - 1.0).abs() < 1e-12);
        let opposite = cosine_loss(&code(&[-1.0, 0.0]), &code(&[2.0, 0.0])).unwrap();
        assert!((opposite.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn cosine_zero_target_errors_zero_pred_ok() {
        assert!(cosine_loss(&code(&[1.0, 1.0]), &code(&[0.0, 0.0])).is_err());
        let l = cosine_loss(&code(&[0.0, 0.0]), &code(&[1.0, 0.0])).unwrap();
        assert_eq!(l.value, 1.0);
        assert!(l.gradient.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn length_mismatch_errors() {
        assert!(l2_loss(&code(&[1.0]), &code(&[1.0, 2.0])).is_err());
        assert!(cosine_loss(&code(&[1.0]), &code(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn mask_loss_no_positives() {
        let p = vec![code(&[1.0, 2.0])];
        let l = mask_loss(&p, &p.clone(), &[false], LossKind::L2).unwrap();
        assert_eq!(l.value, 0.0);
    }

    #[test]
    fn mask_loss_one_positive_composes() {
        let preds = vec![code(&[0.0, 0.0]), code(&[9.0, 9.0])];
        let targets = vec![code(&[3.0, 4.0]), code(&[0.0, 0.0])];
        let l = mask_loss(&preds, &targets, &[true, false], LossKind::L2).unwrap();
        assert_eq!(l.value, 25.0);
        assert_eq!(l.gradients[1], vec![0.0, 0.0]);
    }

    #[test]
    fn mask_loss_permutation_invariant() {
        let preds = vec![code(&[0.0, 1.0]), code(&[2.0, -1.0]), code(&[0.5, 0.5])];
        let targets = vec![code(&[1.0, 1.0]), code(&[0.0, 0.0]), code(&[3.0, 0.0])];
        let flags = [true, true, false];
        let a = mask_loss(&preds, &targets, &flags, LossKind::L1).unwrap();
        let perm = [2, 0, 1];
        let pp: Vec<_> = perm.iter().map(|&i| preds[i].clone()).collect();
        let tp: Vec<_> = perm.iter().map(|&i| targets[i].clone()).collect();
        let fp: Vec<_> = perm.iter().map(|&i| flags[i]).collect();
        let b = mask_loss(&pp, &tp, &fp, LossKind::L1).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn mask_loss_batch_mismatch() {
        let p = vec![code(&[1.0])];
        assert!(mask_loss(&p, &[], &[true], LossKind::L2).is_err());
    }

    #[test]
    fn total_loss_combines() {
        assert_eq!(total_loss(2.0, 0.5, 1.0, 1.0), 2.5);
        assert_eq!(total_loss(2.0, 0.5, 1.0, 0.0), 2.0);
        let (a, b, c, d) = (0.25, 1.5, 3.0, 0.125);
        assert_eq!(
            total_loss(a, b, 0.5, 2.0) + total_loss(c, d, 0.5, 2.0),
            total_loss(a + c, b + d, 0.5, 2.0)
        );
    }
}
