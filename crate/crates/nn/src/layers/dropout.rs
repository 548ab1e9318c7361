use rand::Rng;

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` during
/// training so inference is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    rate: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::InvalidRate(rate));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        x.clone()
    }

    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Tensor, rng: &mut R) -> Tensor {
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> = if self.rate == 0.0 {
            vec![1.0; x.len()]
        } else {
            (0..x.len())
                .map(|_| if rng.random::<f64>() < self.rate { 0.0 } else { 1.0 / keep })
                .collect()
        };
        let mut y = x.clone();
        for (v, m) in y.data_mut().iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        y
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mask = self.mask.as_ref().ok_or_else(|| NnError::NoCache {
            layer: "dropout".into(),
        })?;
        if mask.len() != grad_out.len() {
            return Err(super::shape_err("dropout", &[mask.len()], &[grad_out.len()]));
        }
        let mut g = grad_out.clone();
        for (v, m) in g.data_mut().iter_mut().zip(mask) {
            *v *= m;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn rate_outside_unit_interval_is_rejected() {
        assert!(matches!(Dropout::new(1.0), Err(NnError::InvalidRate(_))));
        assert!(matches!(Dropout::new(-0.1), Err(NnError::InvalidRate(_))));
    }

    #[test]
    fn zero_rate_is_identity_in_both_modes() {
        let mut layer = Dropout::new(0.0).unwrap();
        let x = Tensor::from_vec(&[1, 3], vec![1.0, -2.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(layer.forward_train(&x, &mut rng), x);
        assert_eq!(layer.forward(&x), x);
    }

    #[test]
    fn inference_is_identity_at_any_rate() {
        let layer = Dropout::new(0.7).unwrap();
        let x = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(layer.forward(&x), x);
    }

    #[test]
    fn half_rate_preserves_mean() {
        let mut layer = Dropout::new(0.5).unwrap();
        let x = Tensor::from_vec(&[1, 100_000], vec![1.0; 100_000]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let y = layer.forward_train(&x, &mut rng);
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((0.98..=1.02).contains(&mean), "mean {mean}");
    }
}
