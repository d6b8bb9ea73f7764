//! Fused softmax cross-entropy.

use super::scalar::Scalar;
use super::tensor::Tensor;
use super::TensorError;

/// Cross-entropy of a softmax over `logits` against `label`.
///
/// Returns `(loss, grad_logits)` with loss = -log p_label and gradient
/// p - onehot(label), computed with max subtraction so large logits never
/// overflow.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    label: usize,
) -> Result<(T, Tensor<T>), TensorError> {
    if logits.rank() != 1 {
        return Err(TensorError::ShapeMismatch {
            context: "softmax_cross_entropy expects rank-1 logits",
            expected: vec![logits.len()],
            got: logits.shape().to_vec(),
        });
    }
    if label >= logits.len() {
        return Err(TensorError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits
        .data()
        .iter()
        .fold(T::from_f64(f64::NEG_INFINITY), |m, &v| m.max_of(v));
    let mut grad = logits.map(|v| (v - max).exp());
    let sum = grad.data().iter().fold(T::ZERO, |s, &v| s + v);
    let log_sum = sum.ln();
    let loss = log_sum - (logits.data()[label] - max);
    for v in grad.data_mut() {
        *v = *v / sum;
    }
    grad.data_mut()[label] -= T::ONE;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_logits() {
        let logits = Tensor::from_vec(&[2], vec![0.0f64, 0.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, 0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((grad.data()[0] - (-0.5)).abs() < 1e-12);
        assert!((grad.data()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_do_not_overflow() {
        let logits = Tensor::from_vec(&[2], vec![50.0f64, -50.0]).unwrap();
        let (loss, grad) = softmax_cross_entropy(&logits, 0).unwrap();
        assert!(loss.is_finite());
        assert!(loss.abs() < 1e-12, "loss {loss}");
        assert!(grad.data().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let base = [0.3f64, -1.2, 0.7, 0.1];
        let label = 2;
        let logits = Tensor::from_vec(&[4], base.to_vec()).unwrap();
        let (_, grad) = softmax_cross_entropy(&logits, label).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut plus = base;
            plus[i] += h;
            let mut minus = base;
            minus[i] -= h;
            let (lp, _) =
                softmax_cross_entropy(&Tensor::from_vec(&[4], plus.to_vec()).unwrap(), label)
                    .unwrap();
            let (lm, _) =
                softmax_cross_entropy(&Tensor::from_vec(&[4], minus.to_vec()).unwrap(), label)
                    .unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad.data()[i] - fd).abs() / grad.data()[i].abs().max(1e-6);
            assert!(rel < 1e-6, "coord {i}: grad {} vs fd {fd}", grad.data()[i]);
        }
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor::from_vec(&[2], vec![0.0f64, 0.0]).unwrap();
        assert!(matches!(
            softmax_cross_entropy(&logits, 2),
            Err(TensorError::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }
}
