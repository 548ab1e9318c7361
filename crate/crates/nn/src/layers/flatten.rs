use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Row-major flatten of every axis after the batch axis.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let batch = x.dim(0);
        let width = x.shape()[1..].iter().product::<usize>();
        x.clone().reshape(&[batch, width])
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        self.input_shape = Some(x.shape().to_vec());
        self.forward(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self.input_shape.as_ref().ok_or_else(|| NnError::NoCache {
            layer: "flatten".into(),
        })?;
        grad_out.clone().reshape(shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flattens_trailing_axes() {
        let x = Tensor::from_vec(&[2, 3, 4], (0..24).map(f64::from).collect()).unwrap();
        let y = Flatten::new().forward(&x).unwrap();
        assert_eq!(y.shape(), &[2, 12]);
        assert_eq!(y.data(), x.data());

        let x = Tensor::zeros(&[1, 1, 5]);
        assert_eq!(Flatten::new().forward(&x).unwrap().shape(), &[1, 5]);
    }

    #[test]
    fn backward_restores_shape() {
        let mut layer = Flatten::new();
        let x = Tensor::from_vec(&[2, 3, 4], (0..24).map(f64::from).collect()).unwrap();
        let y = layer.forward_train(&x).unwrap();
        assert_eq!(layer.backward(&y).unwrap(), x);
    }
}
