use rand::Rng;

use super::shape_err;
use crate::error::{NnError, Result};
use crate::init::glorot_uniform;
use crate::linalg::{gemm, View};
use crate::tensor::{Param, Tensor};

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Unidirectional LSTM returning the full hidden sequence.
///
/// Gate columns are laid out `[input | forget | cell | output]`, each `hidden`
/// wide, in `input_weight` (`channels × 4H`), `recurrent_weight` (`H × 4H`)
/// and `bias` (`4H`). Initial hidden and cell states are zero.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub input_weight: Param,
    pub recurrent_weight: Param,
    pub bias: Param,
    cache: Option<LstmCache>,
}

#[derive(Debug, Clone)]
struct LstmCache {
    input: Tensor,
    /// Activated gates per step, `time × batch × 4H`.
    gates: Vec<f64>,
    /// Cell states per step, `time × batch × H`.
    cells: Vec<f64>,
    /// tanh of the cell states.
    cells_tanh: Vec<f64>,
    /// Hidden outputs, `batch × time × H`.
    output: Tensor,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(channels: usize, hidden: usize, rng: &mut R) -> Self {
        let input_weight = glorot_uniform(&[channels, 4 * hidden], channels, 4 * hidden, rng);
        let recurrent_weight = glorot_uniform(&[hidden, 4 * hidden], hidden, 4 * hidden, rng);
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        Self::from_params(input_weight, recurrent_weight, bias)
    }

    pub fn from_params(input_weight: Tensor, recurrent_weight: Tensor, bias: Tensor) -> Self {
        Self {
            input_weight: Param::new(input_weight),
            recurrent_weight: Param::new(recurrent_weight),
            bias: Param::new(bias),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.input_weight.value.dim(0)
    }

    pub fn hidden(&self) -> usize {
        self.recurrent_weight.value.dim(0)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.run(x)?.output)
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let cache = self.run(x)?;
        let out = cache.output.clone();
        self.cache = Some(cache);
        Ok(out)
    }

    fn run(&self, x: &Tensor) -> Result<LstmCache> {
        let (c, h) = (self.channels(), self.hidden());
        if x.shape().len() != 3 || x.dim(2) != c {
            return Err(shape_err("lstm", &[0, 0, c], x.shape()));
        }
        let (batch, time) = (x.dim(0), x.dim(1));
        let g4 = 4 * h;
        let mut gates = vec![0.0; time * batch * g4];
        let mut cells = vec![0.0; time * batch * h];
        let mut cells_tanh = vec![0.0; time * batch * h];
        let mut output = Tensor::zeros(&[batch, time, h]);
        let mut prev_h = vec![0.0; batch * h];
        let zero_cell = vec![0.0; batch * h];

        for t in 0..time {
            let z = &mut gates[t * batch * g4..(t + 1) * batch * g4];
            for row in z.chunks_exact_mut(g4) {
                row.copy_from_slice(self.bias.value.data());
            }
            gemm(
                1.0,
                View::strided(&x.data()[t * c..], batch, c, time * c, 1),
                View::new(self.input_weight.value.data(), c, g4),
                1.0,
                z,
                g4,
            );
            if t > 0 {
                gemm(
                    1.0,
                    View::new(&prev_h, batch, h),
                    View::new(self.recurrent_weight.value.data(), h, g4),
                    1.0,
                    z,
                    g4,
                );
            }
            let (done, rest) = cells.split_at_mut(t * batch * h);
            let prev_c: &[f64] = if t == 0 { &zero_cell } else { &done[(t - 1) * batch * h..] };
            let cur_c = &mut rest[..batch * h];
            let cur_tc = &mut cells_tanh[t * batch * h..(t + 1) * batch * h];
            for b in 0..batch {
                let zr = &mut z[b * g4..(b + 1) * g4];
                for j in 0..h {
                    let i = sigmoid(zr[j]);
                    let f = sigmoid(zr[h + j]);
                    let g = zr[2 * h + j].tanh();
                    let o = sigmoid(zr[3 * h + j]);
                    zr[j] = i;
                    zr[h + j] = f;
                    zr[2 * h + j] = g;
                    zr[3 * h + j] = o;
                    let cell = f * prev_c[b * h + j] + i * g;
                    let tc = cell.tanh();
                    cur_c[b * h + j] = cell;
                    cur_tc[b * h + j] = tc;
                    let hv = o * tc;
                    prev_h[b * h + j] = hv;
                    output.data_mut()[(b * time + t) * h + j] = hv;
                }
            }
        }
        Ok(LstmCache {
            input: x.clone(),
            gates,
            cells,
            cells_tanh,
            output,
        })
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or_else(|| NnError::NoCache {
            layer: "lstm".into(),
        })?;
        if grad_out.shape() != cache.output.shape() {
            return Err(shape_err("lstm", cache.output.shape(), grad_out.shape()));
        }
        let (c, h) = (self.channels(), self.hidden());
        let (batch, time) = (cache.input.dim(0), cache.input.dim(1));
        let g4 = 4 * h;
        let x = cache.input.data();
        let hs = cache.output.data();

        let mut dx = Tensor::zeros(cache.input.shape());
        let mut dh_next = vec![0.0; batch * h];
        let mut dc_next = vec![0.0; batch * h];
        let mut dz = vec![0.0; batch * g4];
        let mut prev_h = vec![0.0; batch * h];
        let mut dx_t = vec![0.0; batch * c];

        for t in (0..time).rev() {
            let gates = &cache.gates[t * batch * g4..(t + 1) * batch * g4];
            let tc = &cache.cells_tanh[t * batch * h..(t + 1) * batch * h];
            for b in 0..batch {
                let gr = &gates[b * g4..(b + 1) * g4];
                let dzr = &mut dz[b * g4..(b + 1) * g4];
                for j in 0..h {
                    let k = b * h + j;
                    let (i, f, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let prev_c = if t == 0 { 0.0 } else { cache.cells[(t - 1) * batch * h + k] };
                    let dh = grad_out.data()[(b * time + t) * h + j] + dh_next[k];
                    let d_o = dh * tc[k];
                    let dc = dh * o * (1.0 - tc[k] * tc[k]) + dc_next[k];
                    dc_next[k] = dc * f;
                    dzr[j] = dc * g * i * (1.0 - i);
                    dzr[h + j] = dc * prev_c * f * (1.0 - f);
                    dzr[2 * h + j] = dc * i * (1.0 - g * g);
                    dzr[3 * h + j] = d_o * o * (1.0 - o);
                }
            }

            gemm(
                1.0,
                View::strided(&x[t * c..], batch, c, time * c, 1).t(),
                View::new(&dz, batch, g4),
                1.0,
                self.input_weight.grad.data_mut(),
                g4,
            );
            for row in dz.chunks_exact(g4) {
                for (d, v) in self.bias.grad.data_mut().iter_mut().zip(row) {
                    *d += v;
                }
            }
            gemm(
                1.0,
                View::new(&dz, batch, g4),
                View::new(self.input_weight.value.data(), c, g4).t(),
                0.0,
                &mut dx_t,
                c,
            );
            for b in 0..batch {
                let dst = &mut dx.data_mut()[(b * time + t) * c..(b * time + t + 1) * c];
                dst.copy_from_slice(&dx_t[b * c..(b + 1) * c]);
            }

            if t > 0 {
                for b in 0..batch {
                    let src = &hs[(b * time + t - 1) * h..(b * time + t) * h];
                    prev_h[b * h..(b + 1) * h].copy_from_slice(src);
                }
                gemm(
                    1.0,
                    View::new(&prev_h, batch, h).t(),
                    View::new(&dz, batch, g4),
                    1.0,
                    self.recurrent_weight.grad.data_mut(),
                    g4,
                );
                gemm(
                    1.0,
                    View::new(&dz, batch, g4),
                    View::new(self.recurrent_weight.value.data(), h, g4).t(),
                    0.0,
                    &mut dh_next,
                    h,
                );
            }
        }
        Ok(dx)
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.input_weight, &self.recurrent_weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.input_weight, &mut self.recurrent_weight, &mut self.bias]
    }
}
