use crate::error::{Error, Result};
use crate::linalg::{svd, Matrix};

/// `(GGᵀ)^{−1/4} · G · (GᵀG)^{−1/4}` via eigendecompositions of the two Gram
/// matrices (pseudo-inverse roots on the rank space). Test oracle only.
pub fn shampoo_direction(g: &Matrix) -> Result<Matrix> {
    let full_rank = g.rows().min(g.cols());
    let left = g.matmul(&g.transpose())?;
    let right = g.gram();
    let root = |s: &Matrix| -> Result<Matrix> {
        let dec = svd(s, None)?;
        if dec.rank < full_rank {
            return Err(Error::Degenerate(format!(
                "Shampoo oracle needs full rank {full_rank}, Gram rank is {}",
                dec.rank
            )));
        }
        Ok(dec.apply_spectral(|x| x.powf(-0.25)))
    };
    let l = root(&left)?;
    let r = root(&right)?;
    l.matmul(g)?.matmul(&r)
}

pub fn shampoo_step_oracle(w: &Matrix, g: &Matrix, eta_t: f64) -> Result<Matrix> {
    let dir = shampoo_direction(g)?;
    let mut out = w.clone();
    out.axpy(-eta_t, &dir)?;
    Ok(out)
}
