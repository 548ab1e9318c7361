//! Linear support vector regression, one predictor per look-ahead hour.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// `f(x) = <w, x> + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearPredictor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// Minimizes `Σ (y - <w,x> - b)² + λ‖w‖²` in closed form. The intercept is
/// not penalized, so the system is solved on centered data.
///
/// `x` is `n × d` row-major.
pub fn fit_ridge(x: &[f64], y: &[f64], d: usize, lambda: f64) -> Result<LinearPredictor> {
    let n = y.len();
    assert_eq!(x.len(), n * d, "design matrix shape");
    if n == 0 {
        return Err(ModelError::SingularSystem);
    }
    let mean_x: Vec<f64> = (0..d).map(|j| x.iter().skip(j).step_by(d).sum::<f64>() / n as f64).collect();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let xc = DMatrix::from_fn(n, d, |i, j| x[i * d + j] - mean_x[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - mean_y));
    let mut gram = xc.tr_mul(&xc);
    for j in 0..d {
        gram[(j, j)] += lambda;
    }
    let rhs = xc.tr_mul(&yc);
    let scale = (0..d).map(|j| gram[(j, j)]).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or(ModelError::SingularSystem)?;
    let l = chol.l_dirty();
    // a rank-deficient Gram matrix can still factor with rounding-level pivots
    if (0..d).any(|j| l[(j, j)] * l[(j, j)] <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(ModelError::SingularSystem);
    }
    let w = chol.solve(&rhs);
    let bias = mean_y - w.iter().zip(&mean_x).map(|(a, b)| a * b).sum::<f64>();
    Ok(LinearPredictor {
        weights: w.iter().copied().collect(),
        bias,
    })
}

/// Minimizes `½(‖w‖² + b²) + C Σ max(0, |y - <w,x> - b| - ε)` on centered
/// inputs and targets, so `b` is the intercept in centered coordinates.
///
/// Newton's method runs on a Huber-smoothed loss whose quadratic band of
/// width `δ` shrinks tenfold per stage, warm-starting each stage. Setting
/// `β_i = C·loss'(r_i)` gives a feasible point of the dual, so every stage
/// ends with a duality-gap certificate for the exact (unsmoothed)
/// objective; the fit is returned once that gap is below `tol` relative to
/// the primal. `max_iter` bounds the total number of Newton steps.
pub fn fit_epsilon(x: &[f64], y: &[f64], d: usize, epsilon: f64, c: f64, max_iter: usize, tol: f64) -> Result<LinearPredictor> {
    let n = y.len();
    assert_eq!(x.len(), n * d, "design matrix shape");
    let mean_x: Vec<f64> = (0..d).map(|j| x.iter().skip(j).step_by(d).sum::<f64>() / n.max(1) as f64).collect();
    let mean_y = y.iter().sum::<f64>() / n.max(1) as f64;
    // centered features plus a constant column carrying the intercept
    let xa = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[i * d + j] - mean_x[j] } else { 1.0 });
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - mean_y));
    let spread = yc.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(epsilon).max(f64::MIN_POSITIVE);

    let mut theta = DVector::zeros(d + 1);
    let mut delta = spread;
    let floor = spread * 1e-7;
    let mut steps = 0;
    loop {
        let huber = Huber { epsilon, delta };
        let objective = |r: &DVector<f64>, t: &DVector<f64>| 0.5 * t.norm_squared() + c * r.iter().map(|&v| huber.loss(v)).sum::<f64>();
        let mut r = &yc - &xa * &theta;
        loop {
            let slope = DVector::from_iterator(n, r.iter().map(|&v| huber.slope(v)));
            let grad = &theta - xa.tr_mul(&slope) * c;
            if grad.amax() <= 1e-12 * (1.0 + theta.amax()) {
                break;
            }
            if steps == max_iter {
                return Err(ModelError::NonConvergence { iterations: max_iter });
            }
            steps += 1;
            let band: Vec<usize> = (0..n).filter(|&i| huber.curvature(r[i]) > 0.0).collect();
            let xb = xa.select_rows(&band);
            let mut hess = xb.tr_mul(&xb) * (c / delta);
            for j in 0..=d {
                hess[(j, j)] += 1.0;
            }
            let step = -hess.cholesky().ok_or(ModelError::SingularSystem)?.solve(&grad);
            if step.amax() <= 1e-12 * (1.0 + theta.amax()) {
                break;
            }
            let moved = &xa * &step;
            let (f0, decrease) = (objective(&r, &theta), grad.dot(&step));
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let r_new = &r - &moved * t;
                let theta_new = &theta + &step * t;
                if objective(&r_new, &theta_new) <= f0 + 1e-4 * t * decrease {
                    theta = theta_new;
                    r = r_new;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        let beta = DVector::from_iterator(n, r.iter().map(|&v| c * Huber { epsilon, delta }.slope(v)));
        let w_beta = xa.tr_mul(&beta);
        let exact = Huber { epsilon, delta: 0.0 };
        let primal = 0.5 * theta.norm_squared() + c * r.iter().map(|&v| exact.loss(v)).sum::<f64>();
        let dual = -0.5 * w_beta.norm_squared() + beta.dot(&yc) - epsilon * beta.iter().map(|b| b.abs()).sum::<f64>();
        if primal - dual <= tol * primal.max(1.0) {
            let w: Vec<f64> = theta.iter().take(d).copied().collect();
            let bias = theta[d] + mean_y - dot(&w, &mean_x);
            return Ok(LinearPredictor { weights: w, bias });
        }
        if delta <= floor {
            return Err(ModelError::NonConvergence { iterations: steps });
        }
        delta *= 0.1;
    }
}

/// ε-insensitive loss with a quadratic band of width `delta` joining the
/// flat and linear parts; `delta = 0` is the exact loss.
#[derive(Clone, Copy)]
struct Huber {
    epsilon: f64,
    delta: f64,
}

impl Huber {
    fn loss(self, r: f64) -> f64 {
        let u = r.abs() - self.epsilon;
        if u <= 0.0 {
            0.0
        } else if u <= self.delta {
            u * u / (2.0 * self.delta)
        } else {
            u - self.delta / 2.0
        }
    }

    fn slope(self, r: f64) -> f64 {
        let u = r.abs() - self.epsilon;
        if u <= 0.0 {
            0.0
        } else if u <= self.delta {
            r.signum() * u / self.delta
        } else {
            r.signum()
        }
    }

    fn curvature(self, r: f64) -> f64 {
        let u = r.abs() - self.epsilon;
        if u > 0.0 && u <= self.delta {
            1.0 / self.delta
        } else {
            0.0
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_constant_targets_give_flat_function() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = vec![3.5; 20];
        let p = fit_ridge(&x, &y, 1, 0.1).unwrap();
        assert!(p.weights[0].abs() < 1e-12);
        assert!((p.bias - 3.5).abs() < 1e-12);
    }

    #[test]
    fn ridge_rank_deficient_is_singular() {
        // second column duplicates the first
        let x: Vec<f64> = (0..10).flat_map(|i| [i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_ridge(&x, &y, 2, 0.0), Err(ModelError::SingularSystem)));
        assert!(fit_ridge(&x, &y, 2, 1e-3).is_ok());
    }

    #[test]
    fn epsilon_recovers_line() {
        let x: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let p = fit_epsilon(&x, &y, 1, 0.01, 10.0, 1000, 1e-6).unwrap();
        assert!((p.weights[0] - 2.0).abs() < 0.05, "{p:?}");
        assert!((p.bias - 1.0).abs() < 0.05, "{p:?}");
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.predict(&[*xi]) - yi).abs() <= 0.01 + 1e-4);
        }
    }

    #[test]
    fn epsilon_reports_non_convergence() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1.3).sin() * 100.0).collect();
        assert!(matches!(
            fit_epsilon(&x, &y, 1, 0.0, 1e3, 1, 1e-12),
            Err(ModelError::NonConvergence { iterations: 1 })
        ));
    }
}
