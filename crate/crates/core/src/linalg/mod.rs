//! Dense row-major matrix kernels, a seeded RNG, and the SVD oracle.

mod matrix;
mod power;
mod rng;
mod svd;

pub use matrix::{matmul, Matrix};
pub use power::spectral_norm_estimate;
pub use rng::{derive_seed, Rng};
pub use svd::{default_rank_tol, singular_values, svd, SvdResult, MAX_SWEEPS};
