use rand::Rng;
use serde::{Deserialize, Serialize};

use super::shape_err;
use crate::error::{NnError, Result};
use crate::init::glorot_uniform;
use crate::linalg::{gemm, View};
use crate::tensor::{Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub(crate) fn apply(self, values: &mut [f64]) {
        if self == Activation::Relu {
            values.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activated output.
    pub(crate) fn backprop(self, output: &[f64], grad: &mut [f64]) {
        if self == Activation::Relu {
            for (g, &y) in grad.iter_mut().zip(output) {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }
        }
    }
}

/// Fully connected layer `y = act(x·W + b)` over `batch × in` inputs.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    pub activation: Activation,
    cache: Option<(Tensor, Tensor)>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let weight = glorot_uniform(&[inputs, outputs], inputs, outputs, rng);
        Self::from_params(weight, Tensor::zeros(&[outputs]), activation)
    }

    pub fn from_params(weight: Tensor, bias: Tensor, activation: Activation) -> Self {
        Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            activation,
            cache: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.dim(0)
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.dim(1)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (inp, out) = (self.inputs(), self.outputs());
        if x.shape().len() != 2 || x.dim(1) != inp {
            return Err(shape_err("dense", &[0, inp], x.shape()));
        }
        let batch = x.dim(0);
        let mut y = Tensor::zeros(&[batch, out]);
        let bias = self.bias.value.data();
        for row in y.data_mut().chunks_exact_mut(out) {
            row.copy_from_slice(bias);
        }
        gemm(
            1.0,
            View::new(x.data(), batch, inp),
            View::new(self.weight.value.data(), inp, out),
            1.0,
            y.data_mut(),
            out,
        );
        self.activation.apply(y.data_mut());
        Ok(y)
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.forward(x)?;
        self.cache = Some((x.clone(), y.clone()));
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (x, y) = self.cache.as_ref().ok_or_else(|| NnError::NoCache {
            layer: "dense".into(),
        })?;
        if grad_out.shape() != y.shape() {
            return Err(shape_err("dense", y.shape(), grad_out.shape()));
        }
        let (inp, out) = (self.inputs(), self.outputs());
        let batch = x.dim(0);
        let mut g = grad_out.data().to_vec();
        self.activation.backprop(y.data(), &mut g);

        gemm(
            1.0,
            View::new(x.data(), batch, inp).t(),
            View::new(&g, batch, out),
            1.0,
            self.weight.grad.data_mut(),
            out,
        );
        let db = self.bias.grad.data_mut();
        for row in g.chunks_exact(out) {
            for (d, v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        let mut dx = Tensor::zeros(&[batch, inp]);
        gemm(
            1.0,
            View::new(&g, batch, out),
            View::new(self.weight.value.data(), inp, out).t(),
            0.0,
            dx.data_mut(),
            inp,
        );
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity2() -> Dense {
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        Dense::from_params(w, Tensor::zeros(&[2]), Activation::Identity)
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let x = Tensor::from_vec(&[2, 2], vec![0.3, -1.5, 2.0, 7.0]).unwrap();
        assert_eq!(identity2().forward(&x).unwrap(), x);
    }

    #[test]
    fn relu_clamps_negatives() {
        let mut layer = identity2();
        layer.activation = Activation::Relu;
        let x = Tensor::from_vec(&[1, 2], vec![-1.0, 2.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().data(), &[0.0, 2.0]);
    }

    #[test]
    fn wrong_input_width_is_rejected() {
        let x = Tensor::zeros(&[1, 3]);
        assert!(matches!(
            identity2().forward(&x),
            Err(NnError::ShapeMismatch { .. })
        ));
    }
}
