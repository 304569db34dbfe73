use crate::error::{Error, Result};

use super::{Matrix, Rng};

fn mat_vec(a: &Matrix, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = a.row(i).iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

fn mat_t_vec(a: &Matrix, y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &yi) in y.iter().enumerate() {
        for (o, &aij) in out.iter_mut().zip(a.row(i)) {
            *o += aij * yi;
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Power-iteration estimate of `σ_max(a)` on `aᵀa`, started from an
/// `rng`-seeded unit vector. Never exceeds `‖a‖_F`.
pub fn spectral_norm_estimate(a: &Matrix, iters: usize, rng: &mut Rng) -> Result<f64> {
    if iters == 0 {
        return Err(Error::Range("power iteration needs iters >= 1".into()));
    }
    let frob = a.frobenius_norm();
    if frob == 0.0 {
        return Ok(0.0);
    }
    let mut v = rng.unit_vector(a.cols());
    let mut av = vec![0.0; a.rows()];
    let mut estimate = 0.0;
    for _ in 0..iters {
        mat_vec(a, &v, &mut av);
        estimate = norm(&av);
        if estimate == 0.0 {
            // Start vector landed in the null space; restart.
            v = rng.unit_vector(a.cols());
            continue;
        }
        mat_t_vec(a, &av, &mut v);
        let n = norm(&v);
        if n == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= n);
    }
    mat_vec(a, &v, &mut av);
    estimate = f64::max(estimate, norm(&av));
    // σ_max ≤ ‖a‖_F exactly; rounding in ‖a v‖ must not cross it.
    Ok(estimate.min(frob))
}
