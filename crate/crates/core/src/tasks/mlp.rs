use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::optim::Param;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Gaussian-mixture classification with a fully connected network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub activation: Activation,
    /// Generated samples, before the 10% validation split.
    pub samples: usize,
    /// Expected Euclidean distance between two class means (unit-variance clusters).
    pub separation: f64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            input_dim: 64,
            hidden: vec![128, 128],
            classes: 8,
            activation: Activation::Tanh,
            samples: 4096,
            separation: 3.0,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.classes < 2 || self.hidden.contains(&0) {
            return Err(Error::Config(
                "mlp needs input_dim >= 1, classes >= 2, nonzero hidden widths".into(),
            ));
        }
        if self.samples < 20 {
            return Err(Error::Config("mlp needs at least 20 samples".into()));
        }
        if !(self.separation >= 0.0) {
            return Err(Error::Config("mlp separation must be >= 0".into()));
        }
        Ok(())
    }

    /// Layer widths from input to logits.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden);
        w.push(self.classes);
        w
    }
}

/// Fraction of generated samples held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct MlpTask {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub x_train: Matrix,
    pub y_train: Vec<usize>,
    pub x_val: Matrix,
    pub y_val: Vec<usize>,
}

impl MlpTask {
    pub fn generate(spec: &MlpSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let d = spec.input_dim;
        let c = spec.classes;
        let mean_std = spec.separation / (2.0 * d as f64).sqrt();
        let means = Matrix::from_fn(c, d, |_, _| mean_std * rng.normal());
        let labels: Vec<usize> = (0..spec.samples).map(|_| rng.below(c)).collect();
        let x = Matrix::from_fn(spec.samples, d, |i, j| means[(labels[i], j)] + rng.normal());

        let n_val = ((spec.samples as f64) * VALIDATION_FRACTION).round() as usize;
        let order = rng.sample_indices(spec.samples, spec.samples);
        let (val_idx, train_idx) = order.split_at(n_val);
        let take = |idx: &[usize]| {
            let xs = Matrix::from_fn(idx.len(), d, |i, j| x[(idx[i], j)]);
            let ys = idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
            (xs, ys)
        };
        let (x_train, y_train) = take(train_idx);
        let (x_val, y_val) = take(val_idx);
        Ok(Self {
            widths: spec.widths(),
            activation: spec.activation,
            x_train,
            y_train,
            x_val,
            y_val,
        })
    }

    pub fn num_train(&self) -> usize {
        self.y_train.len()
    }

    pub fn classes(&self) -> usize {
        *self.widths.last().expect("widths")
    }

    /// Weights `N(0, 1/fan_in)` stored `fan_in × fan_out`, zero biases.
    pub fn init_params(&self, rng: &mut Rng) -> Vec<Param> {
        let mut params = Vec::with_capacity(2 * (self.widths.len() - 1));
        for (l, pair) in self.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = 1.0 / (fan_in as f64).sqrt();
            params.push(Param::matrix(
                format!("layer{l}.weight"),
                Matrix::from_fn(fan_in, fan_out, |_, _| std * rng.normal()),
            ));
            params.push(Param::vector(format!("layer{l}.bias"), vec![0.0; fan_out]).expect("nonempty"));
        }
        params
    }

    fn check_params(&self, params: &[Param]) -> Result<()> {
        let layers = self.widths.len() - 1;
        if params.len() != 2 * layers {
            return Err(Error::Shape {
                op: "mlp parameters",
                left: (params.len(), 1),
                right: (2 * layers, 1),
            });
        }
        for (l, pair) in self.widths.windows(2).enumerate() {
            let (w, b) = (&params[2 * l].value, &params[2 * l + 1].value);
            if w.shape() != (pair[0], pair[1]) || b.shape() != (1, pair[1]) {
                return Err(Error::Shape {
                    op: "mlp layer",
                    left: w.shape(),
                    right: (pair[0], pair[1]),
                });
            }
        }
        Ok(())
    }

    fn gather(x: &Matrix, idx: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::Range(format!("sample index {bad} out of range")));
        }
        Ok(Matrix::from_fn(idx.len(), x.cols(), |i, j| x[(idx[i], j)]))
    }

    /// Hidden pre-activations and the logits.
    fn forward(&self, params: &[Param], x: &Matrix) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
        let layers = self.widths.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut h = x.clone();
        for l in 0..layers {
            let mut z = h.matmul(&params[2 * l].value)?;
            let bias = params[2 * l + 1].value.as_slice();
            let cols = z.cols();
            for (k, v) in z.as_mut_slice().iter_mut().enumerate() {
                *v += bias[k % cols];
            }
            let next = if l + 1 < layers {
                z.map(|v| self.activation.apply(v))
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }
        Ok((inputs, pre))
    }

    /// Mean cross-entropy and `(softmax − onehot) / batch` for the logits.
    fn cross_entropy(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
        let n = logits.rows();
        let mut dlogits = Matrix::zeros(n, logits.cols());
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = logits.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|z| (z - max).exp()).sum();
            let log_z = max + sum.ln();
            loss += log_z - row[y];
            for (j, &z) in row.iter().enumerate() {
                let p = (z - log_z).exp();
                dlogits[(i, j)] = (p - if j == y { 1.0 } else { 0.0 }) / n as f64;
            }
        }
        (loss / n as f64, dlogits)
    }

    fn loss_grad_on(&self, params: &[Param], x: &Matrix, y: &[usize]) -> Result<(f64, Vec<Matrix>)> {
        let (inputs, pre) = self.forward(params, x)?;
        let layers = inputs.len();
        let (loss, mut delta) = Self::cross_entropy(&pre[layers - 1], y);
        let mut grads = vec![Matrix::zeros(1, 1); 2 * layers];
        for l in (0..layers).rev() {
            grads[2 * l] = inputs[l].transpose().matmul(&delta)?;
            let mut db = vec![0.0; delta.cols()];
            for i in 0..delta.rows() {
                for (b, d) in db.iter_mut().zip(delta.row(i)) {
                    *b += d;
                }
            }
            grads[2 * l + 1] = Matrix::new(1, db.len(), db)?;
            if l > 0 {
                let dh = delta.matmul(&params[2 * l].value.transpose())?;
                let z = &pre[l - 1];
                delta = Matrix::from_fn(dh.rows(), dh.cols(), |i, j| {
                    dh[(i, j)] * self.activation.derivative(z[(i, j)])
                });
            }
        }
        Ok((loss, grads))
    }

    /// Mean cross-entropy over the training rows in `batch` with exact
    /// backpropagated gradients, ordered like [`Self::init_params`].
    pub fn loss_grad(&self, params: &[Param], batch: &[usize]) -> Result<(f64, Vec<Matrix>)> {
        if batch.is_empty() {
            return Err(Error::Range("empty batch".into()));
        }
        self.check_params(params)?;
        let x = Self::gather(&self.x_train, batch)?;
        let y: Vec<usize> = batch.iter().map(|&i| self.y_train[i]).collect();
        self.loss_grad_on(params, &x, &y)
    }

    pub fn full_train_loss_grad(&self, params: &[Param]) -> Result<(f64, Vec<Matrix>)> {
        self.check_params(params)?;
        self.loss_grad_on(params, &self.x_train, &self.y_train)
    }

    pub fn val_loss(&self, params: &[Param]) -> Result<f64> {
        self.check_params(params)?;
        let (_, pre) = self.forward(params, &self.x_val)?;
        Ok(Self::cross_entropy(pre.last().expect("layers"), &self.y_val).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> MlpSpec {
        MlpSpec {
            input_dim: 6,
            hidden: vec![5, 4],
            classes: 3,
            samples: 60,
            ..Default::default()
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let spec = tiny_spec();
        let a = MlpTask::generate(&spec, &mut Rng::new(1)).unwrap();
        let b = MlpTask::generate(&spec, &mut Rng::new(1)).unwrap();
        assert_eq!(a.num_train(), 54);
        assert_eq!(a.y_val.len(), 6);
        assert_eq!(a.x_train, b.x_train);
        assert_eq!(a.y_val, b.y_val);
    }

    #[test]
    fn near_uniform_loss_with_small_output_layer() {
        let spec = MlpSpec::default();
        let task = MlpTask::generate(&spec, &mut Rng::new(2)).unwrap();
        let mut params = task.init_params(&mut Rng::new(3));
        let last = params.len() - 2;
        params[last].value = params[last].value.scaled(0.1);
        let batch: Vec<usize> = (0..256).collect();
        let (loss, _) = task.loss_grad(&params, &batch).unwrap();
        let ln_c = (spec.classes as f64).ln();
        assert!((loss - ln_c).abs() <= 0.05 * ln_c, "{loss} vs {ln_c}");
    }

    #[test]
    fn duplicated_sample_doubles_contribution() {
        let task = MlpTask::generate(&tiny_spec(), &mut Rng::new(4)).unwrap();
        let params = task.init_params(&mut Rng::new(5));
        // mean over [i, i, j] = (2 g_i + g_j) / 3
        let (_, gi) = task.loss_grad(&params, &[3]).unwrap();
        let (_, gj) = task.loss_grad(&params, &[7]).unwrap();
        let (_, gd) = task.loss_grad(&params, &[3, 3, 7]).unwrap();
        for k in 0..gd.len() {
            let expected = gi[k].scaled(2.0 / 3.0).add(&gj[k].scaled(1.0 / 3.0)).unwrap();
            assert!(gd[k].sub(&expected).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn loss_nonnegative_and_errors() {
        let task = MlpTask::generate(&tiny_spec(), &mut Rng::new(6)).unwrap();
        let params = task.init_params(&mut Rng::new(7));
        assert!(task.val_loss(&params).unwrap() >= 0.0);
        assert!(matches!(task.loss_grad(&params, &[]), Err(Error::Range(_))));
        assert!(task.loss_grad(&params[..2], &[0]).is_err());
        assert!(task.loss_grad(&params, &[10_000]).is_err());
    }
}
