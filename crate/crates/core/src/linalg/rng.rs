use rand::seq::index;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Matrix;

/// Seeded, platform-independent random stream.
///
/// Single-owner: parallel code derives child streams with [`Rng::split`]
/// instead of sharing one.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer; mixes a base seed with a stream index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, a pure function of this stream's seed and `index`.
    pub fn split(&self, index: u64) -> Rng {
        Rng::new(derive_seed(self.seed, index))
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.normal())
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// Uniformly distributed point on the unit sphere in `R^n`.
    pub fn unit_vector(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v = self.normal_vec(n);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-300 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }

    /// `k` distinct indices from `0..n`, in sampled order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        index::sample(&mut self.inner, n, k).into_vec()
    }

    /// Random matrix with orthonormal columns (`rows ≥ cols`), via
    /// modified Gram–Schmidt on a Gaussian matrix.
    pub fn orthonormal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        assert!(rows >= cols, "need rows >= cols for orthonormal columns");
        loop {
            let g = self.normal_matrix(rows, cols);
            let mut q = g.transpose();
            let mut ok = true;
            for j in 0..cols {
                for p in 0..j {
                    let d: f64 = (0..rows).map(|i| q[(j, i)] * q[(p, i)]).sum();
                    for i in 0..rows {
                        q[(j, i)] -= d * q[(p, i)];
                    }
                }
                let n: f64 = (0..rows).map(|i| q[(j, i)].powi(2)).sum::<f64>().sqrt();
                if n < 1e-8 {
                    ok = false;
                    break;
                }
                for i in 0..rows {
                    q[(j, i)] /= n;
                }
            }
            if ok {
                return q.transpose();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
        assert_eq!(a.sample_indices(1000, 10), b.sample_indices(1000, 10));
    }

    #[test]
    fn split_is_deterministic_and_distinct() {
        let base = Rng::new(5);
        assert_eq!(base.split(3).seed(), base.split(3).seed());
        assert_ne!(base.split(3).seed(), base.split(4).seed());
    }

    #[test]
    fn orthonormal_columns() {
        let mut rng = Rng::new(9);
        let q = rng.orthonormal_matrix(6, 4);
        let g = q.gram();
        assert!(g.rel_diff(&Matrix::identity(4)).unwrap() < 1e-12);
    }
}
