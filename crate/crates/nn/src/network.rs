use std::io::{Read, Write};

use rand::Rng;

use crate::error::{NnError, Result};
use crate::layers::{Conv1d, Dense, Dropout, Flatten, Lstm};
use crate::tensor::{Param, Tensor};

#[derive(Debug, Clone)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    Lstm(Lstm),
    Dropout(Dropout),
    Flatten(Flatten),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv1d(_) => "conv1d",
            Layer::Lstm(_) => "lstm",
            Layer::Dropout(_) => "dropout",
            Layer::Flatten(_) => "flatten",
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv1d(l) => l.forward(x),
            Layer::Lstm(l) => l.forward(x),
            Layer::Dropout(l) => Ok(l.forward(x)),
            Layer::Flatten(l) => l.forward(x),
        }
    }

    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Tensor, rng: &mut R) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.forward_train(x),
            Layer::Conv1d(l) => l.forward_train(x),
            Layer::Lstm(l) => l.forward_train(x),
            Layer::Dropout(l) => Ok(l.forward_train(x, rng)),
            Layer::Flatten(l) => l.forward_train(x),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.backward(grad_out),
            Layer::Conv1d(l) => l.backward(grad_out),
            Layer::Lstm(l) => l.backward(grad_out),
            Layer::Dropout(l) => l.backward(grad_out),
            Layer::Flatten(l) => l.backward(grad_out),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Dense(l) => l.params(),
            Layer::Conv1d(l) => l.params(),
            Layer::Lstm(l) => l.params(),
            Layer::Dropout(_) | Layer::Flatten(_) => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Dense(l) => l.params_mut(),
            Layer::Conv1d(l) => l.params_mut(),
            Layer::Lstm(l) => l.params_mut(),
            Layer::Dropout(_) | Layer::Flatten(_) => Vec::new(),
        }
    }
}

/// A feed-forward stack of layers trained end to end.
///
/// Every forward and backward output is checked for NaN/Inf; the first
/// offending layer is reported by kind and position.
#[derive(Debug, Clone, Default)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn label(&self, idx: usize) -> String {
        format!("{}#{}", self.layers[idx].kind(), idx)
    }

    fn tag(&self, idx: usize, err: NnError) -> NnError {
        match err {
            NnError::ShapeMismatch { expected, got, .. } => NnError::ShapeMismatch {
                layer: self.label(idx),
                expected,
                got,
            },
            other => other,
        }
    }

    fn check(&self, idx: usize, t: &Tensor, stage: &'static str) -> Result<()> {
        if t.is_finite() {
            Ok(())
        } else {
            Err(NnError::NonFinite {
                layer: self.label(idx),
                stage,
            })
        }
    }

    /// Inference pass; dropout is the identity and nothing is cached.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.forward(&cur).map_err(|e| self.tag(i, e))?;
            self.check(i, &cur, "forward")?;
        }
        Ok(cur)
    }

    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Tensor, rng: &mut R) -> Result<Tensor> {
        let mut cur = x.clone();
        for i in 0..self.layers.len() {
            cur = self.layers[i].forward_train(&cur, rng).map_err(|e| self.tag(i, e))?;
            self.check(i, &cur, "forward")?;
        }
        Ok(cur)
    }

    /// Backpropagates `grad_out` through the cached pass, accumulating
    /// parameter gradients, and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mut cur = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            cur = self.layers[i].backward(&cur).map_err(|e| self.tag(i, e))?;
            self.check(i, &cur, "backward")?;
            for p in self.layers[i].params() {
                if !p.grad.is_finite() {
                    return Err(NnError::NonFinite {
                        layer: self.label(i),
                        stage: "backward",
                    });
                }
            }
        }
        Ok(cur)
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Param::zero_grad);
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Copies parameter values (not gradients) out, in layer order.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params().into_iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Tensor]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(NnError::Corrupt(format!(
                "expected {} parameter tensors, got {}",
                params.len(),
                values.len()
            )));
        }
        for (p, v) in params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(NnError::ShapeMismatch {
                    layer: "restore".into(),
                    expected: p.value.shape().to_vec(),
                    got: v.shape().to_vec(),
                });
            }
            p.value = v.clone();
        }
        Ok(())
    }

    /// Writes one section per layer: a `u32` tensor count, then per tensor
    /// a `u32` rank, `u64` dims and little-endian `f64` values.
    pub fn write_params<W: Write>(&self, w: &mut W) -> Result<()> {
        for layer in &self.layers {
            let params = layer.params();
            w.write_all(&(params.len() as u32).to_le_bytes())?;
            for p in params {
                crate::io::write_tensor(w, &p.value)?;
            }
        }
        Ok(())
    }

    /// Reads sections written by [`Network::write_params`] into an
    /// identically-shaped network.
    pub fn read_params<R: Read>(&mut self, r: &mut R) -> Result<()> {
        for i in 0..self.layers.len() {
            let count = crate::io::read_u32(r)? as usize;
            let label = self.label(i);
            let mut params = self.layers[i].params_mut();
            if count != params.len() {
                return Err(NnError::Corrupt(format!(
                    "{label}: expected {} tensors, found {count}",
                    params.len()
                )));
            }
            for p in params.iter_mut() {
                let t = crate::io::read_tensor(r)?;
                if t.shape() != p.value.shape() {
                    return Err(NnError::Corrupt(format!(
                        "{label}: tensor shape {:?} does not match {:?}",
                        t.shape(),
                        p.value.shape()
                    )));
                }
                p.value = t;
            }
        }
        Ok(())
    }
}
