//! Analytic loss gradients against central finite differences.

use maskcode_core::losses::{mask_loss, LossKind};
use maskcode_core::MaskCode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-5;
const PAIRS: usize = 100;
const LEN: usize = 60;
/// Differences closer than this to a kink are resampled.
const KINK_MARGIN: f64 = 1e-3;

const KINDS: [LossKind; 5] = [
    LossKind::L2,
    LossKind::L1,
    LossKind::SmoothL1 { beta: 1.0 },
    LossKind::SmoothL1 { beta: 0.1 },
    LossKind::Cosine,
];

fn kinks(kind: LossKind) -> Vec<f64> {
    match kind {
        LossKind::L1 => vec![0.0],
        LossKind::SmoothL1 { beta } => vec![-beta, 0.0, beta],
        _ => vec![],
    }
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

fn random_pair(rng: &mut ChaCha8Rng, kind: LossKind) -> (Vec<f64>, Vec<f64>) {
    let kinks = kinks(kind);
    let target: Vec<f64> = (0..LEN).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let pred = target
        .iter()
        .map(|&t| loop {
            let p = t + rng.gen_range(-2.0..2.0);
            if kinks.iter().all(|k| ((p - t) - k).abs() > KINK_MARGIN) {
                break p;
            }
        })
        .collect();
    (pred, target)
}

fn loss_at(kind: LossKind, pred: &[f64], target: &[f64]) -> f64 {
    kind.evaluate(&MaskCode(pred.to_vec()), &MaskCode(target.to_vec())).unwrap().value
}

#[test]
fn every_loss_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for kind in KINDS {
        let mut worst = 0.0f64;
        for _ in 0..PAIRS {
            let (pred, target) = random_pair(&mut rng, kind);
            let analytic = kind
                .evaluate(&MaskCode(pred.clone()), &MaskCode(target.clone()))
                .unwrap()
                .gradient;
            for i in 0..LEN {
                let mut up = pred.clone();
                let mut down = pred.clone();
                up[i] += H;
                down[i] -= H;
                let numeric = (loss_at(kind, &up, &target) - loss_at(kind, &down, &target)) / (2.0 * H);
                worst = worst.max(relative_error(analytic[i], numeric));
            }
        }
        assert!(worst <= REL_TOL, "{kind:?}: worst relative error {worst}");
    }
}

#[test]
fn batch_loss_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kind in KINDS {
        let batch: Vec<(Vec<f64>, Vec<f64>)> = (0..6).map(|_| random_pair(&mut rng, kind)).collect();
        let positive = [true, false, true, true, false, true];
        let run = |preds: &[Vec<f64>]| {
            let p: Vec<MaskCode> = preds.iter().cloned().map(MaskCode).collect();
            let t: Vec<MaskCode> = batch.iter().map(|b| MaskCode(b.1.clone())).collect();
            mask_loss(&p, &t, &positive, kind).unwrap()
        };
        let preds: Vec<Vec<f64>> = batch.iter().map(|b| b.0.clone()).collect();
        let analytic = run(&preds).gradients;
        for s in 0..preds.len() {
            for i in (0..LEN).step_by(7) {
                let mut up = preds.clone();
                let mut down = preds.clone();
                up[s][i] += H;
                down[s][i] -= H;
                let numeric = (run(&up).value - run(&down).value) / (2.0 * H);
                let err = relative_error(analytic[s][i], numeric);
                assert!(err <= REL_TOL, "{kind:?} sample {s} coord {i}: {err}");
            }
        }
    }
}
