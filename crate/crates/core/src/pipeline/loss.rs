use crate::error::{Error, Result};
use crate::Tensor;

pub const SMOOTH_L1_BETA: f64 = 1.0;
pub const FOCAL_ALPHA: f64 = 0.25;
pub const FOCAL_GAMMA: f64 = 2.0;

/// Mean Huber-style box loss: `0.5d²/β` inside `|d| < β`, `|d| − 0.5β` outside.
pub fn smooth_l1(pred: &Tensor, target: &Tensor, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("smooth_l1 beta must be positive, got {beta}")));
    }
    if pred.shape() != target.shape() {
        return Err(Error::dim("smooth_l1", pred.shape(), target.shape()));
    }
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = (p - t).abs();
            if d < beta {
                0.5 * d * d / beta
            } else {
                d - 0.5 * beta
            }
        })
        .sum();
    Ok(total / pred.numel() as f64)
}

/// Mean binary focal loss. `label` entries must be exactly 0 or 1; negatives
/// are weighted by `1 − α`.
pub fn focal_loss(prob: &Tensor, label: &Tensor, alpha: f64, gamma: f64) -> Result<f64> {
    if prob.shape() != label.shape() {
        return Err(Error::dim("focal_loss", prob.shape(), label.shape()));
    }
    if !(0.0..=1.0).contains(&alpha) || !(gamma >= 0.0) {
        return Err(Error::Domain(format!("focal_loss needs alpha in [0,1] and gamma >= 0, got {alpha}, {gamma}")));
    }
    let mut total = 0.0;
    for (&p, &y) in prob.data().iter().zip(label.data()) {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability {p} outside (0, 1)")));
        }
        let (pt, a) = if y == 1.0 {
            (p, alpha)
        } else if y == 0.0 {
            (1.0 - p, 1.0 - alpha)
        } else {
            return Err(Error::Domain(format!("label {y} is not 0 or 1")));
        };
        total += -a * (1.0 - pt).powf(gamma) * pt.ln();
    }
    Ok(total / prob.numel() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Tensor {
        Tensor::scalar(v)
    }

    #[test]
    fn smooth_l1_branches() {
        assert_eq!(smooth_l1(&s(0.5), &s(0.0), 1.0).unwrap(), 0.125);
        assert_eq!(smooth_l1(&s(2.0), &s(0.0), 1.0).unwrap(), 1.5);
        assert_eq!(smooth_l1(&s(-2.0), &s(0.0), 1.0).unwrap(), 1.5);
        for beta in [0.1, 1.0, 3.0] {
            assert_eq!(smooth_l1(&s(beta), &s(0.0), beta).unwrap(), 0.5 * beta);
        }
    }

    #[test]
    fn smooth_l1_continuous_and_differentiable_at_beta() {
        let beta = 0.7;
        let f = |d: f64| smooth_l1(&s(d), &s(0.0), beta).unwrap();
        let h = 1e-7;
        assert!((f(beta - h) - f(beta + h)).abs() < 3e-7);
        let left = (f(beta) - f(beta - h)) / h;
        let right = (f(beta + h) - f(beta)) / h;
        assert!((left - 1.0).abs() < 1e-6 && (right - 1.0).abs() < 1e-6);
    }

    #[test]
    fn smooth_l1_errors() {
        assert!(matches!(smooth_l1(&s(1.0), &s(0.0), 0.0), Err(Error::Domain(_))));
        let a = Tensor::zeros(&[2]);
        let b = Tensor::zeros(&[3]);
        assert!(matches!(smooth_l1(&a, &b, 1.0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn focal_closed_form() {
        let v = focal_loss(&s(0.5), &s(1.0), 0.5, 2.0).unwrap();
        assert!((v - 0.086643).abs() < 1e-6);
        assert!((v - (-0.5 * 0.25 * 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn focal_gamma_zero_is_half_bce() {
        let p = Tensor::new(&[4], vec![0.1, 0.4, 0.7, 0.95]).unwrap();
        let y = Tensor::new(&[4], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let bce: f64 = p
            .data()
            .iter()
            .zip(y.data())
            .map(|(p, y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
            .sum::<f64>()
            / 4.0;
        assert!((focal_loss(&p, &y, 0.5, 0.0).unwrap() - 0.5 * bce).abs() <= 1e-12);
    }

    #[test]
    fn focal_vanishes_for_confident_positive() {
        let v = focal_loss(&s(1.0 - 1e-9), &s(1.0), FOCAL_ALPHA, FOCAL_GAMMA).unwrap();
        assert!(v < 1e-20);
    }

    #[test]
    fn focal_domain() {
        assert!(focal_loss(&s(0.0), &s(1.0), 0.25, 2.0).is_err());
        assert!(focal_loss(&s(1.0), &s(1.0), 0.25, 2.0).is_err());
        assert!(focal_loss(&s(0.5), &s(0.5), 0.25, 2.0).is_err());
        assert!(focal_loss(&s(0.5), &s(1.0), 1.5, 2.0).is_err());
    }
}
