//! One-sided (Hestenes) Jacobi SVD.
//!
//! Rotations are applied to the columns of the taller orientation, so the
//! implicit Gram matrix is always on the smaller side. Jacobi is slow
//! compared to bidiagonalization but gives high relative accuracy, which is
//! what the oracle role needs.

use crate::error::{Error, Result};

use super::Matrix;

/// Sweep budget before reporting non-convergence.
pub const MAX_SWEEPS: usize = 60;

/// Thin, rank-truncated SVD `a = u · diag(σ) · vᵀ`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `m × r`, orthonormal columns.
    pub u: Matrix,
    /// Nonincreasing, all above the truncation threshold.
    pub singular_values: Vec<f64>,
    /// `n × r`, orthonormal columns.
    pub v: Matrix,
    pub rank: usize,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.singular_values.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        // Shapes are conformable by construction.
        us.matmul(&self.v.transpose()).expect("conformable")
    }

    /// `u · f(σ) · vᵀ` for a spectral function `f`.
    pub fn apply_spectral(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let mut us = self.u.clone();
        let fs: Vec<f64> = self.singular_values.iter().map(|&s| f(s)).collect();
        for i in 0..us.rows() {
            for (j, s) in fs.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("conformable")
    }
}

/// Default relative rank cutoff: `max(m, n) · ε`; multiplied by `σ_max`.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Column-major working copy of the taller orientation.
struct Work {
    len: usize,
    count: usize,
    cols: Vec<f64>,
}

impl Work {
    fn from_matrix(a: &Matrix) -> (Self, bool) {
        let transposed = a.rows() < a.cols();
        let (len, count) = if transposed {
            (a.cols(), a.rows())
        } else {
            (a.rows(), a.cols())
        };
        let mut cols = vec![0.0; len * count];
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let (c, r) = if transposed { (i, j) } else { (j, i) };
                cols[c * len + r] = a[(i, j)];
            }
        }
        (Self { len, count, cols }, transposed)
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.len..(j + 1) * self.len]
    }

    fn col_norm(&self, j: usize) -> f64 {
        self.col(j).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

fn pair_mut(data: &mut [f64], len: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (lo, hi) = data.split_at_mut(q * len);
    (&mut lo[p * len..(p + 1) * len], &mut hi[..len])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Orthogonalizes the working columns in place; returns `V` (column-major,
/// `count × count`) when requested.
fn jacobi(work: &mut Work, accumulate_v: bool) -> Result<Option<Vec<f64>>> {
    let n = work.count;
    let len = work.len;
    let mut v = accumulate_v.then(|| {
        let mut v = vec![0.0; n * n];
        for j in 0..n {
            v[j * n + j] = 1.0;
        }
        v
    });
    let tol = (len as f64).sqrt() * f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (cp, cq) = pair_mut(&mut work.cols, len, p, q);
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for (&x, &y) in cp.iter().zip(cq.iter()) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cp, cq, c, s);
                if let Some(v) = v.as_mut() {
                    let (vp, vq) = pair_mut(v, n, p, q);
                    rotate(vp, vq, c, s);
                }
            }
        }
        if !rotated {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

fn descending_order(norms: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    order
}

/// Thin SVD truncated at `rank_tol · σ_max` (relative cutoff).
/// `None` selects [`default_rank_tol`].
pub fn svd(a: &Matrix, rank_tol: Option<f64>) -> Result<SvdResult> {
    let rank_tol = rank_tol.unwrap_or_else(|| default_rank_tol(a.rows(), a.cols()));
    if !(rank_tol >= 0.0) {
        return Err(Error::Range(format!("rank_tol must be >= 0, got {rank_tol}")));
    }
    if a.max_abs() == 0.0 {
        return Err(Error::Degenerate("SVD of the zero matrix".into()));
    }
    let (mut work, transposed) = Work::from_matrix(a);
    let v = jacobi(&mut work, true)?.expect("accumulated");
    let n = work.count;
    let norms: Vec<f64> = (0..n).map(|j| work.col_norm(j)).collect();
    let order = descending_order(&norms);
    let cutoff = rank_tol * norms[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&j| norms[j] > cutoff && norms[j] > 0.0)
        .collect();
    let r = kept.len();

    let mut left = Matrix::zeros(work.len, r);
    let mut right = Matrix::zeros(n, r);
    let mut sigma = Vec::with_capacity(r);
    for (k, &j) in kept.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        for (i, x) in work.col(j).iter().enumerate() {
            left[(i, k)] = x / s;
        }
        for i in 0..n {
            right[(i, k)] = v[j * n + i];
        }
    }
    let (u, v) = if transposed {
        (right, left)
    } else {
        (left, right)
    };
    Ok(SvdResult {
        u,
        singular_values: sigma,
        v,
        rank: r,
    })
}

/// All `min(m, n)` singular values, nonincreasing, without forming `U`/`V`.
/// The zero matrix yields all zeros.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let (mut work, _) = Work::from_matrix(a);
    jacobi(&mut work, false)?;
    let norms: Vec<f64> = (0..work.count).map(|j| work.col_norm(j)).collect();
    Ok(descending_order(&norms).into_iter().map(|j| norms[j]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    fn orthonormality_error(q: &Matrix) -> f64 {
        q.gram().sub(&Matrix::identity(q.cols())).unwrap().max_abs()
    }

    #[test]
    fn diagonal_case() {
        let s = svd(&Matrix::diag(&[2.0, 1.0]), None).unwrap();
        assert_eq!(s.singular_values, vec![2.0, 1.0]);
        for i in 0..2 {
            assert_eq!(s.u[(i, i)].abs(), 1.0);
            assert_eq!(s.v[(i, i)].abs(), 1.0);
        }
    }

    #[test]
    fn unsorted_diagonal_is_sorted() {
        let s = svd(&Matrix::diag(&[1.0, 3.0, 2.0]), None).unwrap();
        assert_eq!(s.singular_values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn rank_one_outer_product() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let y = [2.0, 1.0, -1.0];
        let a = Matrix::from_fn(4, 3, |i, j| x[i] * y[j]);
        let s = svd(&a, None).unwrap();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_eq!(s.rank, 1);
        assert!((s.singular_values[0] - nx * ny).abs() < 1e-12 * nx * ny);
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = Rng::new(12);
        for (m, n) in [(12, 8), (8, 12), (10, 10)] {
            let a = rng.normal_matrix(m, n);
            let s = svd(&a, None).unwrap();
            assert!(s.reconstruct().rel_diff(&a).unwrap() <= 1e-10);
            assert!(orthonormality_error(&s.u) < 1e-10);
            assert!(orthonormality_error(&s.v) < 1e-10);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        assert!(matches!(
            svd(&Matrix::zeros(3, 3), None),
            Err(Error::Degenerate(_))
        ));
        assert_eq!(singular_values(&Matrix::zeros(2, 3)).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn values_only_matches_full() {
        let mut rng = Rng::new(4);
        let a = rng.normal_matrix(7, 5);
        let full = svd(&a, Some(0.0)).unwrap().singular_values;
        let vals = singular_values(&a).unwrap();
        for (x, y) in full.iter().zip(&vals) {
            assert!((x - y).abs() < 1e-12 * full[0]);
        }
    }
}
