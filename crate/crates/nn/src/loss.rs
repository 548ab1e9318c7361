use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Mean squared error over every element, with its gradient
/// `2 (pred - target) / count`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(NnError::ShapeMismatch {
            layer: "mse_loss".into(),
            expected: target.shape().to_vec(),
            got: pred.shape().to_vec(),
        });
    }
    let n = pred.len().max(1) as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut sum = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += d * d;
        *g = 2.0 * d / n;
    }
    let loss = sum / n;
    if !loss.is_finite() {
        return Err(NnError::NonFinite {
            layer: "mse_loss".into(),
            stage: "forward",
        });
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_tensors_have_zero_loss() {
        let t = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let (loss, grad) = mse_loss(&t, &t).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn unit_offsets_give_unit_loss() {
        let p = Tensor::from_vec(&[2], vec![2.0, 3.0]).unwrap();
        let t = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        assert_eq!(mse_loss(&p, &t).unwrap().0, 1.0);
    }
}
