//! Central finite-difference oracle for layer gradients.
//!
//! The probe loss is `L = Σ r ∘ layer(x)` for a fixed random projection `r`,
//! so `∂L/∂y = r` feeds the analytic backward pass while the numeric side
//! only ever calls the inference forward pass.

use rand::Rng;

use crate::error::Result;
use crate::network::Layer;
use crate::tensor::Tensor;

/// Denominator floor for the relative error, so gradients that are zero on
/// both sides do not divide by zero.
pub const REL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn probe_loss(layer: &Layer, x: &Tensor, proj: &[f64]) -> Result<f64> {
    let y = layer.forward(x)?;
    Ok(y.data().iter().zip(proj).map(|(a, b)| a * b).sum())
}

/// Checks every parameter and every input element of `layer` at `x`.
pub fn check_layer<R: Rng + ?Sized>(layer: &mut Layer, x: &Tensor, h: f64, rng: &mut R) -> Result<GradReport> {
    let y = layer.forward_train(x, rng)?;
    let proj: Vec<f64> = (0..y.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let grad_out = Tensor::from_vec(y.shape(), proj.clone())?;
    for p in layer.params_mut() {
        p.zero_grad();
    }
    let dx = layer.backward(&grad_out)?;
    let analytic: Vec<Vec<f64>> = layer.params().iter().map(|p| p.grad.data().to_vec()).collect();

    let mut worst = 0.0f64;
    let mut checked = 0;
    for (pi, grads) in analytic.iter().enumerate() {
        for (ei, &a) in grads.iter().enumerate() {
            let original = layer.params()[pi].value.data()[ei];
            layer.params_mut()[pi].value.data_mut()[ei] = original + h;
            let up = probe_loss(layer, x, &proj)?;
            layer.params_mut()[pi].value.data_mut()[ei] = original - h;
            let down = probe_loss(layer, x, &proj)?;
            layer.params_mut()[pi].value.data_mut()[ei] = original;
            worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
            checked += 1;
        }
    }
    let mut probe = x.clone();
    for (ei, &a) in dx.data().iter().enumerate() {
        let original = probe.data()[ei];
        probe.data_mut()[ei] = original + h;
        let up = probe_loss(layer, &probe, &proj)?;
        probe.data_mut()[ei] = original - h;
        let down = probe_loss(layer, &probe, &proj)?;
        probe.data_mut()[ei] = original;
        worst = worst.max(relative_error(a, (up - down) / (2.0 * h)));
        checked += 1;
    }
    Ok(GradReport {
        max_rel_error: worst,
        checked,
    })
}
