//! Gradient descent with Armijo backtracking, and a central-difference
//! gradient used to cross-check analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Starting point; an empty vector means "zeros of the problem dimension".
    pub init: Vec<f64>,
    pub backtrack_shrink: f64,
    pub armijo_c: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { max_iters: 2000, grad_tol: 1e-6, init: Vec::new(), backtrack_shrink: 0.5, armijo_c: 1e-4 }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(validation("grad_tol must be > 0"));
        }
        if !(self.backtrack_shrink > 0.0 && self.backtrack_shrink < 1.0) {
            return Err(validation("backtrack_shrink must lie in (0, 1)"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(validation("armijo_c must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Same settings, different starting point.
    pub fn with_init(&self, init: Vec<f64>) -> Self {
        Self { init, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptReport {
    pub iters: usize,
    pub final_grad_norm: f64,
    pub converged: bool,
    /// Loss at the start and after every accepted step.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub beta: Vec<f64>,
    pub loss: f64,
    pub report: OptReport,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimise a differentiable function given as `beta -> (loss, grad)`.
///
/// `dim` fixes the problem dimension when `config.init` is empty.
pub fn minimize<F>(mut loss_grad: F, dim: usize, config: &OptConfig) -> Result<OptResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    let mut beta = if config.init.is_empty() { vec![0.0; dim] } else { config.init.clone() };
    if beta.len() != dim {
        return Err(validation(format!("init has length {}, expected {dim}", beta.len())));
    }
    let (mut loss, mut grad) = loss_grad(&beta)?;
    let mut trace = vec![loss];
    let non_finite = |what: &str, trace: &[f64]| {
        Error::NonFinite(format!("{what} during optimisation; loss trace so far: {trace:?}"))
    };
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(non_finite("loss or gradient at the starting point", &trace));
    }
    let mut step: f64 = 1.0;
    let mut iters = 0;
    let mut gnorm = norm(&grad);
    while gnorm > config.grad_tol && iters < config.max_iters {
        iters += 1;
        let g2 = gnorm * gnorm;
        // try a longer step than last time before backtracking
        let mut t = (2.0 * step).min(1e12);
        let mut accepted = None;
        for _ in 0..200 {
            let cand: Vec<f64> = beta.iter().zip(&grad).map(|(b, g)| b - t * g).collect();
            let (l, g) = loss_grad(&cand)?;
            if l.is_finite() && l <= loss - config.armijo_c * t * g2 {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(non_finite("gradient", &trace));
                }
                accepted = Some((cand, l, g));
                break;
            }
            t *= config.backtrack_shrink;
        }
        match accepted {
            Some((b, l, g)) => {
                beta = b;
                loss = l;
                grad = g;
                step = t;
                trace.push(loss);
                gnorm = norm(&grad);
            }
            // no decrease representable in floating point: stationary to machine precision
            None => break,
        }
    }
    let converged = gnorm <= config.grad_tol;
    Ok(OptResult {
        beta,
        loss,
        report: OptReport { iters, final_grad_norm: gnorm, converged, loss_trace: trace },
    })
}

/// Central differences `(f(β + h e_k) − f(β − h e_k)) / 2h` per coordinate.
pub fn finite_diff_gradient<F>(mut loss: F, beta: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(validation("finite-difference step must be > 0"));
    }
    let mut b = beta.to_vec();
    let mut out = Vec::with_capacity(beta.len());
    for k in 0..beta.len() {
        b[k] = beta[k] + step;
        let up = loss(&b)?;
        b[k] = beta[k] - step;
        let down = loss(&b)?;
        b[k] = beta[k];
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Relative error `‖a − b‖ / max(‖a‖, ‖b‖, floor)` used by gradient checks.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(floor)
}
