use rand::Rng;

use super::shape_err;
use crate::error::{NnError, Result};
use crate::init::glorot_uniform;
use crate::layers::Activation;
use crate::linalg::{gemm, View};
use crate::tensor::{Param, Tensor};

/// Valid (unpadded) 1-D cross-correlation over the time axis of
/// `batch × time × channels` inputs, followed by relu.
///
/// The kernel is stored as `kernel × channels × filters`, so the window
/// `x[b, t..t+k, :]` is a contiguous slice that multiplies the kernel viewed
/// as a `(k·channels) × filters` matrix.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub kernel: Param,
    pub bias: Param,
    cache: Option<(Tensor, Tensor)>,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(channels: usize, filters: usize, kernel_size: usize, rng: &mut R) -> Self {
        let kernel = glorot_uniform(
            &[kernel_size, channels, filters],
            kernel_size * channels,
            kernel_size * filters,
            rng,
        );
        Self::from_params(kernel, Tensor::zeros(&[filters]))
    }

    pub fn from_params(kernel: Tensor, bias: Tensor) -> Self {
        Self {
            kernel: Param::new(kernel),
            bias: Param::new(bias),
            cache: None,
        }
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.value.dim(0)
    }

    pub fn channels(&self) -> usize {
        self.kernel.value.dim(1)
    }

    pub fn filters(&self) -> usize {
        self.kernel.value.dim(2)
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        let (k, c) = (self.kernel_size(), self.channels());
        if x.shape().len() != 3 || x.dim(2) != c {
            return Err(shape_err("conv1d", &[0, 0, c], x.shape()));
        }
        let time = x.dim(1);
        if k > time {
            return Err(NnError::KernelTooLarge { kernel: k, time });
        }
        Ok((x.dim(0), time, time - k + 1))
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (batch, time, out_time) = self.check_input(x)?;
        let (k, c, f) = (self.kernel_size(), self.channels(), self.filters());
        let mut y = Tensor::zeros(&[batch, out_time, f]);
        let bias = self.bias.value.data();
        for row in y.data_mut().chunks_exact_mut(f) {
            row.copy_from_slice(bias);
        }
        for b in 0..batch {
            let xb = &x.data()[b * time * c..(b + 1) * time * c];
            let yb = &mut y.data_mut()[b * out_time * f..(b + 1) * out_time * f];
            gemm(
                1.0,
                View::strided(xb, out_time, k * c, c, 1),
                View::new(self.kernel.value.data(), k * c, f),
                1.0,
                yb,
                f,
            );
        }
        Activation::Relu.apply(y.data_mut());
        Ok(y)
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.forward(x)?;
        self.cache = Some((x.clone(), y.clone()));
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (x, y) = self.cache.as_ref().ok_or_else(|| NnError::NoCache {
            layer: "conv1d".into(),
        })?;
        if grad_out.shape() != y.shape() {
            return Err(shape_err("conv1d", y.shape(), grad_out.shape()));
        }
        let (batch, time, out_time) = (x.dim(0), x.dim(1), y.dim(1));
        let (k, c, f) = (self.kernel_size(), self.channels(), self.filters());
        let mut g = grad_out.data().to_vec();
        Activation::Relu.backprop(y.data(), &mut g);

        let mut dx = Tensor::zeros(x.shape());
        let mut window_grad = vec![0.0; out_time * k * c];
        for b in 0..batch {
            let xb = &x.data()[b * time * c..(b + 1) * time * c];
            let gb = &g[b * out_time * f..(b + 1) * out_time * f];
            gemm(
                1.0,
                View::strided(xb, out_time, k * c, c, 1).t(),
                View::new(gb, out_time, f),
                1.0,
                self.kernel.grad.data_mut(),
                f,
            );
            gemm(
                1.0,
                View::new(gb, out_time, f),
                View::new(self.kernel.value.data(), k * c, f).t(),
                0.0,
                &mut window_grad,
                k * c,
            );
            // overlapping windows scatter-add back onto the input rows
            let dxb = &mut dx.data_mut()[b * time * c..(b + 1) * time * c];
            for (t, wg) in window_grad.chunks_exact(k * c).enumerate() {
                for (d, v) in dxb[t * c..t * c + k * c].iter_mut().zip(wg) {
                    *d += v;
                }
            }
        }
        let db = self.bias.grad.data_mut();
        for row in g.chunks_exact(f) {
            for (d, v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.kernel, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.kernel, &mut self.bias]
    }
}
