use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::msign::{msign_exact, newton_schulz_iterate, CoeffPreset};

use super::check_step_inputs;

/// Below this Frobenius norm the momentum is treated as zero and the
/// orthogonalized direction is the zero matrix.
pub const ZERO_MOMENTUM_NORM: f64 = 1e-12;

/// How the momentum is turned into an update direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    NewtonSchulz,
    /// SVD polar factor; oracle path.
    Exact,
    /// `M / ‖M‖_F`, no orthogonalization.
    MomentumOnly,
}

/// Which dimension `n` enters the RMS scale `rms_factor · √n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RmsDim {
    /// Second dimension under the `fan_in × fan_out` weight convention.
    #[default]
    FanOut,
    MaxDim,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuonHyper {
    pub eta0: f64,
    pub lambda: f64,
    pub beta: f64,
    pub k_iters: usize,
    pub coeffs: CoeffPreset,
    pub rms_factor: f64,
    pub rms_matching: bool,
    pub direction: Direction,
    pub rms_dim: RmsDim,
}

impl Default for MuonHyper {
    fn default() -> Self {
        Self {
            eta0: 0.02,
            lambda: 0.1,
            beta: 0.9,
            k_iters: 5,
            coeffs: CoeffPreset::default(),
            rms_factor: 0.2,
            rms_matching: true,
            direction: Direction::NewtonSchulz,
            rms_dim: RmsDim::FanOut,
        }
    }
}

impl MuonHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return bad(format!("muon.eta0 must be positive, got {}", self.eta0));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("muon.lambda must be >= 0, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("muon.beta must be in [0, 1), got {}", self.beta));
        }
        if self.k_iters == 0 {
            return bad("muon.k_iters must be >= 1".into());
        }
        if !(self.rms_factor >= 0.0 && self.rms_factor.is_finite()) {
            return bad(format!("muon.rms_factor must be >= 0, got {}", self.rms_factor));
        }
        Ok(())
    }
}

/// One momentum matrix per parameter.
#[derive(Clone, Debug)]
pub struct MuonState {
    pub name: String,
    pub momentum: Matrix,
}

impl MuonState {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            momentum: Matrix::zeros(rows, cols),
        }
    }

    pub fn aux_scalars(&self) -> usize {
        self.momentum.len()
    }
}

/// `s` in `s · U`; 1 when RMS matching is off.
pub fn rms_scale(shape: (usize, usize), hyper: &MuonHyper) -> f64 {
    if !hyper.rms_matching {
        return 1.0;
    }
    let n = match hyper.rms_dim {
        RmsDim::FanOut => shape.1,
        RmsDim::MaxDim => shape.0.max(shape.1),
    };
    hyper.rms_factor * (n as f64).sqrt()
}

/// The pre-scaling update direction `U` for a momentum matrix.
pub fn muon_direction(momentum: &Matrix, hyper: &MuonHyper) -> Result<Matrix> {
    let norm = momentum.frobenius_norm();
    if norm < ZERO_MOMENTUM_NORM {
        return Ok(Matrix::zeros(momentum.rows(), momentum.cols()));
    }
    let dir = match hyper.direction {
        Direction::NewtonSchulz => {
            let coeffs = hyper.coeffs.coefficients();
            newton_schulz_iterate(momentum.scaled(1.0 / norm), &coeffs, hyper.k_iters)
        }
        Direction::Exact => msign_exact(momentum, None)?,
        Direction::MomentumOnly => momentum.scaled(1.0 / norm),
    };
    if !dir.is_finite() {
        return Err(Error::NonFinite("Muon update direction".into()));
    }
    Ok(dir)
}

/// Momentum update, orthogonalization, RMS scaling and decoupled decay:
///
/// ```text
/// M ← β·M + (1 − β)·G
/// U ← msign(M)
/// W ← W − η_t·(s·U + λ·W)
/// ```
///
/// On error the state is left untouched.
pub fn muon_step(
    w: &Matrix,
    g: &Matrix,
    state: &mut MuonState,
    hyper: &MuonHyper,
    eta_t: f64,
) -> Result<Matrix> {
    check_step_inputs(&state.name, w, g, &state.momentum)?;
    let beta = hyper.beta;
    let mut momentum = state.momentum.scaled(beta);
    momentum.axpy(1.0 - beta, g)?;
    let dir = muon_direction(&momentum, hyper)?;
    let s = rms_scale(w.shape(), hyper);
    let lambda = hyper.lambda;
    let mut next = w.clone();
    for ((out, &wi), &ui) in next
        .as_mut_slice()
        .iter_mut()
        .zip(w.as_slice())
        .zip(dir.as_slice())
    {
        *out = wi - eta_t * (s * ui + lambda * wi);
    }
    state.momentum = momentum;
    Ok(next)
}
