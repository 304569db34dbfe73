//! Synthetic differentiable tasks with analytic gradients.
//!
//! "Tokens" are samples here: a batch of `B` rows consumes `B` tokens.

mod gradcheck;
mod mlp;
mod quadratic;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_ERROR_FLOOR};
pub use mlp::{Activation, MlpSpec, MlpTask, VALIDATION_FRACTION};
pub use quadratic::{gradient_descent, QuadraticSpec, QuadraticTask};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{Matrix, Rng};
use crate::optim::{global_norm, Param};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Quadratic(QuadraticSpec),
    Mlp(MlpSpec),
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TaskSpec::Quadratic(s) => s.validate(),
            TaskSpec::Mlp(s) => s.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Quadratic(_) => "quadratic",
            TaskSpec::Mlp(_) => "mlp",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Task {
    Quadratic(QuadraticTask),
    Mlp(MlpTask),
}

impl Task {
    /// Data generation is a pure function of `(spec, data_seed)`.
    pub fn build(spec: &TaskSpec, data_seed: u64) -> Result<Self> {
        let mut rng = Rng::new(data_seed);
        Ok(match spec {
            TaskSpec::Quadratic(s) => Task::Quadratic(QuadraticTask::generate(s, &mut rng)?),
            TaskSpec::Mlp(s) => Task::Mlp(MlpTask::generate(s, &mut rng)?),
        })
    }

    pub fn num_train(&self) -> usize {
        match self {
            Task::Quadratic(t) => t.samples(),
            Task::Mlp(t) => t.num_train(),
        }
    }

    pub fn init_params(&self, rng: &mut Rng) -> Vec<Param> {
        match self {
            Task::Quadratic(t) => t.init_params(rng),
            Task::Mlp(t) => t.init_params(rng),
        }
    }

    /// Noise-free minibatch loss and gradients.
    pub fn loss_grad(&self, params: &[Param], batch: &[usize]) -> Result<(f64, Vec<Matrix>)> {
        match self {
            Task::Quadratic(t) => {
                let (l, g) = t.batch_loss_grad(&params[0].value, batch)?;
                Ok((l, vec![g]))
            }
            Task::Mlp(t) => t.loss_grad(params, batch),
        }
    }

    /// Training-time gradient: [`Self::loss_grad`] plus any configured
    /// injected gradient noise, drawn from `rng`.
    pub fn stochastic_loss_grad(
        &self,
        params: &[Param],
        batch: &[usize],
        rng: &mut Rng,
    ) -> Result<(f64, Vec<Matrix>)> {
        let (loss, mut grads) = self.loss_grad(params, batch)?;
        if let Task::Quadratic(t) = self {
            if t.grad_noise_std > 0.0 {
                for g in &mut grads {
                    for x in g.as_mut_slice() {
                        *x += t.grad_noise_std * rng.normal();
                    }
                }
            }
        }
        Ok((loss, grads))
    }

    /// Held-out loss. For the quadratic task this is the full objective.
    pub fn val_loss(&self, params: &[Param]) -> Result<f64> {
        match self {
            Task::Quadratic(t) => t.loss(&params[0].value),
            Task::Mlp(t) => t.val_loss(params),
        }
    }

    /// Global norm of the noise-free full-training-set gradient.
    pub fn full_grad_norm(&self, params: &[Param]) -> Result<f64> {
        let grads = match self {
            Task::Quadratic(t) => vec![t.loss_grad(&params[0].value)?.1],
            Task::Mlp(t) => t.full_train_loss_grad(params)?.1,
        };
        Ok(global_norm(&grads))
    }

    /// Central-difference check on a fixed batch.
    pub fn grad_check(
        &self,
        params: &[Param],
        batch: &[usize],
        probes: usize,
        h: f64,
        rng: &mut Rng,
    ) -> Result<Vec<GradCheckReport>> {
        grad_check(|p| self.loss_grad(p, batch), params, probes, h, rng)
    }
}
