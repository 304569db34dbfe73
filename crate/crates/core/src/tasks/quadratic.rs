use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix, Rng};
use crate::optim::Param;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticSpec {
    /// Rows of the design matrix; one row is one sample ("token").
    pub samples: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub lambda_reg: f64,
    /// Std of the noise added to targets `B = A·W* + noise`.
    pub label_noise: f64,
    /// Std of Gaussian noise injected into every stochastic gradient entry.
    pub grad_noise_std: f64,
    /// Design columns are scaled geometrically from 1 down to `1/condition`.
    pub condition: f64,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            samples: 4096,
            in_dim: 32,
            out_dim: 16,
            lambda_reg: 1e-2,
            label_noise: 0.5,
            grad_noise_std: 0.0,
            condition: 10.0,
        }
    }
}

impl QuadraticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("quadratic dimensions must be positive".into()));
        }
        if !(self.lambda_reg >= 0.0) || !(self.label_noise >= 0.0) || !(self.grad_noise_std >= 0.0)
        {
            return Err(Error::Config("quadratic noise/regularization must be >= 0".into()));
        }
        if !(self.condition >= 1.0) {
            return Err(Error::Config(format!(
                "quadratic condition must be >= 1, got {}",
                self.condition
            )));
        }
        Ok(())
    }
}

/// `L(W) = ½‖AW − B‖_F² + (λ/2)‖W‖_F²`.
#[derive(Clone, Debug)]
pub struct QuadraticTask {
    pub a: Matrix,
    pub b: Matrix,
    pub lambda_reg: f64,
    pub grad_noise_std: f64,
}

impl QuadraticTask {
    pub fn new(a: Matrix, b: Matrix, lambda_reg: f64) -> Result<Self> {
        if a.rows() != b.rows() {
            return Err(Error::Shape {
                op: "quadratic task (A rows vs B rows)",
                left: a.shape(),
                right: b.shape(),
            });
        }
        if !(lambda_reg >= 0.0) {
            return Err(Error::Config(format!("lambda_reg must be >= 0, got {lambda_reg}")));
        }
        Ok(Self {
            a,
            b,
            lambda_reg,
            grad_noise_std: 0.0,
        })
    }

    pub fn generate(spec: &QuadraticSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let (p, m, n) = (spec.samples, spec.in_dim, spec.out_dim);
        let decay = if m > 1 {
            spec.condition.powf(-1.0 / (m - 1) as f64)
        } else {
            1.0
        };
        let col_scale: Vec<f64> = (0..m).map(|j| decay.powi(j as i32)).collect();
        let a = Matrix::from_fn(p, m, |_, j| rng.normal() * col_scale[j]);
        let w_true = rng.normal_matrix(m, n);
        let mut b = a.matmul(&w_true)?;
        for x in b.as_mut_slice() {
            *x += spec.label_noise * rng.normal();
        }
        let mut task = Self::new(a, b, spec.lambda_reg)?;
        task.grad_noise_std = spec.grad_noise_std;
        Ok(task)
    }

    pub fn param_shape(&self) -> (usize, usize) {
        (self.a.cols(), self.b.cols())
    }

    pub fn samples(&self) -> usize {
        self.a.rows()
    }

    fn check(&self, w: &Matrix) -> Result<()> {
        if w.shape() != self.param_shape() {
            return Err(Error::Shape {
                op: "quadratic loss",
                left: w.shape(),
                right: self.param_shape(),
            });
        }
        Ok(())
    }

    /// Full objective and its gradient `Aᵀ(AW − B) + λW`.
    pub fn loss_grad(&self, w: &Matrix) -> Result<(f64, Matrix)> {
        self.check(w)?;
        let resid = self.a.matmul(w)?.sub(&self.b)?;
        let loss = 0.5 * resid.sum_squares() + 0.5 * self.lambda_reg * w.sum_squares();
        let mut grad = self.a.transpose().matmul(&resid)?;
        grad.axpy(self.lambda_reg, w)?;
        Ok((loss, grad))
    }

    pub fn loss(&self, w: &Matrix) -> Result<f64> {
        self.check(w)?;
        let resid = self.a.matmul(w)?.sub(&self.b)?;
        Ok(0.5 * resid.sum_squares() + 0.5 * self.lambda_reg * w.sum_squares())
    }

    /// Unbiased minibatch estimate of [`Self::loss_grad`]: the data term over
    /// `batch` rows is rescaled by `samples / |batch|`.
    pub fn batch_loss_grad(&self, w: &Matrix, batch: &[usize]) -> Result<(f64, Matrix)> {
        self.check(w)?;
        if batch.is_empty() {
            return Err(Error::Range("empty batch".into()));
        }
        let (m, n) = self.param_shape();
        let scale = self.samples() as f64 / batch.len() as f64;
        let mut grad = Matrix::zeros(m, n);
        let mut data_loss = 0.0;
        let mut resid = vec![0.0; n];
        for &i in batch {
            if i >= self.samples() {
                return Err(Error::Range(format!("sample index {i} out of range")));
            }
            let ai = self.a.row(i);
            for (k, r) in resid.iter_mut().enumerate() {
                let pred: f64 = ai.iter().enumerate().map(|(j, &x)| x * w[(j, k)]).sum();
                *r = pred - self.b[(i, k)];
            }
            data_loss += resid.iter().map(|r| r * r).sum::<f64>();
            let g = grad.as_mut_slice();
            for (j, &x) in ai.iter().enumerate() {
                for (k, &r) in resid.iter().enumerate() {
                    g[j * n + k] += x * r;
                }
            }
        }
        grad.as_mut_slice().iter_mut().for_each(|g| *g *= scale);
        grad.axpy(self.lambda_reg, w)?;
        let loss = 0.5 * scale * data_loss + 0.5 * self.lambda_reg * w.sum_squares();
        Ok((loss, grad))
    }

    /// Closed-form minimizer `V·diag(σ/(σ² + λ))·Uᵀ·B` from the SVD of `A`.
    pub fn minimizer(&self) -> Result<Matrix> {
        let dec = svd(&self.a, None)?;
        if self.lambda_reg == 0.0 && dec.rank < self.a.cols() {
            return Err(Error::Degenerate("unregularized quadratic with rank-deficient design".into()));
        }
        let lam = self.lambda_reg;
        let mut ut_b = dec.u.transpose().matmul(&self.b)?;
        for (k, &s) in dec.singular_values.iter().enumerate() {
            let f = s / (s * s + lam);
            for j in 0..ut_b.cols() {
                ut_b[(k, j)] *= f;
            }
        }
        dec.v.matmul(&ut_b)
    }

    pub fn optimum_loss(&self) -> Result<f64> {
        self.loss(&self.minimizer()?)
    }

    /// `σ_max(AᵀA) + λ`, the smoothness constant of the objective.
    pub fn smoothness(&self) -> Result<f64> {
        let s = svd(&self.a, None)?.singular_values[0];
        Ok(s * s + self.lambda_reg)
    }

    pub fn init_params(&self, rng: &mut Rng) -> Vec<Param> {
        let (m, n) = self.param_shape();
        let std = 1.0 / (m as f64).sqrt();
        vec![Param::matrix("w", Matrix::from_fn(m, n, |_, _| std * rng.normal()))]
    }
}

/// Plain full-batch gradient descent; returns the loss before every step
/// and after the last one.
pub fn gradient_descent(task: &QuadraticTask, w0: &Matrix, eta: f64, steps: usize) -> Result<Vec<f64>> {
    let mut w = w0.clone();
    let mut losses = Vec::with_capacity(steps + 1);
    for _ in 0..steps {
        let (loss, grad) = task.loss_grad(&w)?;
        losses.push(loss);
        w.axpy(-eta, &grad)?;
    }
    losses.push(task.loss(&w)?);
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> QuadraticTask {
        let spec = QuadraticSpec {
            samples: 40,
            in_dim: 6,
            out_dim: 3,
            ..Default::default()
        };
        QuadraticTask::generate(&spec, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn minimizer_is_stationary() {
        let t = small(1);
        let (_, g) = t.loss_grad(&t.minimizer().unwrap()).unwrap();
        assert!(g.max_abs() < 1e-8, "{}", g.max_abs());
    }

    #[test]
    fn identity_design() {
        let w = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 0.5]]).unwrap();
        let t = QuadraticTask::new(Matrix::identity(2), Matrix::zeros(2, 2), 0.0).unwrap();
        let (loss, g) = t.loss_grad(&w).unwrap();
        assert!((loss - 0.5 * w.sum_squares()).abs() < 1e-15);
        assert_eq!(g, w);
    }

    #[test]
    fn full_batch_matches_full_gradient() {
        let t = small(2);
        let w = Rng::new(3).normal_matrix(6, 3);
        let all: Vec<usize> = (0..t.samples()).collect();
        let (l1, g1) = t.loss_grad(&w).unwrap();
        let (l2, g2) = t.batch_loss_grad(&w, &all).unwrap();
        assert!((l1 - l2).abs() < 1e-10 * l1);
        assert!(g1.rel_diff(&g2).unwrap() < 1e-12);
    }

    #[test]
    fn batch_errors() {
        let t = small(2);
        let w = Matrix::zeros(6, 3);
        assert!(matches!(t.batch_loss_grad(&w, &[]), Err(Error::Range(_))));
        assert!(matches!(t.loss_grad(&Matrix::zeros(3, 3)), Err(Error::Shape { .. })));
    }

    #[test]
    fn gd_monotone_with_small_step() {
        let t = small(4);
        let eta = 0.9 / t.smoothness().unwrap();
        let w0 = Rng::new(5).normal_matrix(6, 3);
        let losses = gradient_descent(&t, &w0, eta, 200).unwrap();
        assert!(losses.windows(2).all(|p| p[1] <= p[0]));
        assert!(losses.iter().all(|&l| l >= 0.0));
    }
}
