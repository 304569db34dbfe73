use crate::linalg::Matrix;

/// L2 norm over all entries of all matrices, summed in slice order.
pub fn global_norm(grads: &[Matrix]) -> f64 {
    grads.iter().map(Matrix::sum_squares).sum::<f64>().sqrt()
}

/// Rescales every gradient by `max_norm / global_norm` when the global norm
/// exceeds `max_norm`. Returns the pre-clip global norm.
pub fn clip_global_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            g.as_mut_slice().iter_mut().for_each(|x| *x *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn under_threshold_unchanged() {
        let mut g = vec![Matrix::from_rows(&[vec![0.3, 0.4]]).unwrap()];
        let before = g.clone();
        assert!((clip_global_norm(&mut g, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(g, before);
    }

    #[test]
    fn single_rescale() {
        let mut g = vec![Matrix::diag(&[4.0])];
        assert_eq!(clip_global_norm(&mut g, 1.0), 4.0);
        assert_eq!(g[0][(0, 0)], 1.0);
        assert!((global_norm(&g) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pythagorean_pair() {
        let mut g = vec![Matrix::diag(&[3.0]), Matrix::from_rows(&[vec![0.0, 4.0]]).unwrap()];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0][(0, 0)] - 0.6).abs() < 1e-15);
        assert!((g[1][(0, 1)] - 0.8).abs() < 1e-15);
    }
}
