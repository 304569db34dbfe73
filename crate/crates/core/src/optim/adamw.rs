use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::check_step_inputs;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWHyper {
    pub eta0: f64,
    pub lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWHyper {
    fn default() -> Self {
        Self {
            eta0: 0.01,
            lambda: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamWHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad(format!("adamw.eta0 must be positive, got {}", self.eta0));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("adamw.lambda must be >= 0, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adamw betas must be in [0, 1)".into());
        }
        if !(self.eps > 0.0) {
            return bad(format!("adamw.eps must be positive, got {}", self.eps));
        }
        Ok(())
    }
}

/// First and second moments for one parameter.
#[derive(Clone, Debug)]
pub struct AdamWState {
    pub name: String,
    pub m: Matrix,
    pub v: Matrix,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamWState {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, hyper: &AdamWHyper) -> Self {
        Self {
            name: name.into(),
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step_count: 0,
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            eps: hyper.eps,
        }
    }

    pub fn aux_scalars(&self) -> usize {
        self.m.len() + self.v.len()
    }
}

/// Bias-corrected Adam step with decay decoupled from the adaptive term:
/// `W ← W − η_t·(m̂ / (√v̂ + ε) + λ·W)`.
pub fn adamw_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut AdamWState,
    eta_t: f64,
    lambda: f64,
) -> Result<Matrix> {
    check_step_inputs(&state.name, w, g, &state.m)?;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let t = state.step_count + 1;
    let bias1 = 1.0 - b1.powi(t as i32);
    let bias2 = 1.0 - b2.powi(t as i32);

    let mut next = w.clone();
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (i, out) in next.as_mut_slice().iter_mut().enumerate() {
        let gi = g.as_slice()[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        let wi = w.as_slice()[i];
        *out = wi - eta_t * (m_hat / (v_hat.sqrt() + eps) + lambda * wi);
    }
    state.step_count = t;
    Ok(next)
}
