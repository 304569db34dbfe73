//! Matrix sign (polar factor): exact via SVD, approximate via the quintic
//! Newton–Schulz iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{singular_values, svd, Matrix};

/// Coefficients of the odd polynomial `p(t) = a·t + b·t³ + c·t⁵`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NsCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub label: &'static str,
}

impl NsCoefficients {
    /// Tuned for five iterations; drives singular values into roughly (0.7, 1.3).
    pub const OPTIMIZED: Self = Self {
        a: 3.4445,
        b: -4.7750,
        c: 2.0315,
        label: "optimized",
    };

    /// Second-order Taylor expansion of `(1 − u)^{−1/2}`; converges to 1 but slowly.
    pub const TAYLOR: Self = Self {
        a: 15.0 / 8.0,
        b: -5.0 / 4.0,
        c: 3.0 / 8.0,
        label: "taylor",
    };

    pub fn custom(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            b,
            c,
            label: "custom",
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t2 = t * t;
        t * (self.a + t2 * (self.b + self.c * t2))
    }
}

impl Default for NsCoefficients {
    fn default() -> Self {
        Self::OPTIMIZED
    }
}

/// Serializable selector for [`NsCoefficients`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum CoeffPreset {
    Named(PresetName),
    Custom { a: f64, b: f64, c: f64 },
}

impl Default for CoeffPreset {
    fn default() -> Self {
        CoeffPreset::Named(PresetName::Optimized)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Optimized,
    Taylor,
}

impl CoeffPreset {
    pub fn coefficients(self) -> NsCoefficients {
        match self {
            CoeffPreset::Named(PresetName::Optimized) => NsCoefficients::OPTIMIZED,
            CoeffPreset::Named(PresetName::Taylor) => NsCoefficients::TAYLOR,
            CoeffPreset::Custom { a, b, c } => NsCoefficients::custom(a, b, c),
        }
    }
}

impl From<PresetName> for CoeffPreset {
    fn from(p: PresetName) -> Self {
        CoeffPreset::Named(p)
    }
}

/// Smallest and largest singular value of a result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumBand {
    pub min: f64,
    pub max: f64,
}

impl SpectrumBand {
    pub fn of(m: &Matrix) -> Result<Self> {
        let s = singular_values(m)?;
        Ok(Self {
            min: *s.last().expect("nonempty"),
            max: s[0],
        })
    }

    /// Strictly inside `(lo, hi)`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.min > lo && self.max < hi
    }
}

/// Which diagnostics [`msign_newton_schulz`] computes alongside the result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Diagnostics {
    #[default]
    None,
    Spectrum,
    SpectrumAndOracle,
}

#[derive(Clone, Debug)]
pub struct MsignReport {
    pub result: Matrix,
    pub iterations_used: usize,
    pub spectrum: Option<SpectrumBand>,
    /// Relative Frobenius distance to [`msign_exact`].
    pub deviation_from_oracle: Option<f64>,
}

/// `U_r V_rᵀ` from the thin SVD.
pub fn msign_exact(m: &Matrix, rank_tol: Option<f64>) -> Result<Matrix> {
    if m.max_abs() == 0.0 {
        return Err(Error::Degenerate("msign of the zero matrix".into()));
    }
    let s = svd(m, rank_tol)?;
    s.u.matmul(&s.v.transpose())
}

/// One quintic step `aX + bX(XᵀX) + cX(XᵀX)²`, with the Gram product formed
/// on the smaller side.
pub fn newton_schulz_step(x: &Matrix, coeffs: &NsCoefficients) -> Matrix {
    if x.rows() < x.cols() {
        return newton_schulz_step(&x.transpose(), coeffs).transpose();
    }
    let gram = x.gram();
    let mut poly = gram.matmul(&gram).expect("square");
    for (p, &g) in poly.as_mut_slice().iter_mut().zip(gram.as_slice()) {
        *p = coeffs.b * g + coeffs.c * *p;
    }
    let mut out = x.matmul(&poly).expect("conformable");
    out.axpy(coeffs.a, x).expect("same shape");
    out
}

/// Runs `k` steps from an already normalized start, transposing once for
/// wide inputs instead of on every step.
pub(crate) fn newton_schulz_iterate(x0: Matrix, coeffs: &NsCoefficients, k: usize) -> Matrix {
    let wide = x0.rows() < x0.cols();
    let mut x = if wide { x0.transpose() } else { x0 };
    for _ in 0..k {
        x = newton_schulz_step(&x, coeffs);
    }
    if wide {
        x.transpose()
    } else {
        x
    }
}

/// `X₀ = m / ‖m‖_F` followed by `k` Newton–Schulz steps.
pub fn msign_newton_schulz(
    m: &Matrix,
    coeffs: &NsCoefficients,
    k: usize,
    diagnostics: Diagnostics,
) -> Result<MsignReport> {
    if k == 0 {
        return Err(Error::Range("Newton-Schulz needs k >= 1".into()));
    }
    let norm = m.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("msign of the zero matrix".into()));
    }
    let result = newton_schulz_iterate(m.scaled(1.0 / norm), coeffs, k);
    if !result.is_finite() {
        return Err(Error::NonFinite("Newton-Schulz iterate".into()));
    }
    let spectrum = match diagnostics {
        Diagnostics::None => None,
        _ => Some(SpectrumBand::of(&result)?),
    };
    let deviation_from_oracle = match diagnostics {
        Diagnostics::SpectrumAndOracle => Some(result.rel_diff(&msign_exact(m, None)?)?),
        _ => None,
    };
    Ok(MsignReport {
        result,
        iterations_used: k,
        spectrum,
        deviation_from_oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;

    #[test]
    fn presets_are_exact() {
        let o = NsCoefficients::OPTIMIZED;
        assert_eq!((o.a, o.b, o.c), (3.4445, -4.7750, 2.0315));
        let t = NsCoefficients::TAYLOR;
        assert_eq!((t.a, t.b, t.c), (1.875, -1.25, 0.375));
    }

    #[test]
    fn exact_diag_signs() {
        let out = msign_exact(&Matrix::diag(&[2.0, -3.0]), None).unwrap();
        assert!(out.sub(&Matrix::diag(&[1.0, -1.0])).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn exact_orthogonal_fixed_point() {
        let q = Rng::new(3).orthonormal_matrix(5, 5);
        assert!(msign_exact(&q, None).unwrap().rel_diff(&q).unwrap() < 1e-12);
    }

    #[test]
    fn exact_rejects_zero() {
        assert!(matches!(
            msign_exact(&Matrix::zeros(2, 2), None),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn step_scalar_one() {
        let x = Matrix::new(1, 1, vec![1.0]).unwrap();
        let c = NsCoefficients::OPTIMIZED;
        let y = newton_schulz_step(&x, &c);
        // p(1) = a + b + c = 3.4445 - 4.7750 + 2.0315
        assert!((y[(0, 0)] - 0.7010).abs() < 1e-12);
        assert!((y[(0, 0)] - (c.a + c.b + c.c)).abs() < 1e-15);
    }

    #[test]
    fn step_zero_and_diag() {
        let z = newton_schulz_step(&Matrix::zeros(3, 2), &NsCoefficients::OPTIMIZED);
        assert_eq!(z.max_abs(), 0.0);
        let c = NsCoefficients::OPTIMIZED;
        let y = newton_schulz_step(&Matrix::diag(&[0.3, 0.8]), &c);
        let scalar = |t: f64| c.a * t + c.b * t.powi(3) + c.c * t.powi(5);
        assert!((y[(0, 0)] - scalar(0.3)).abs() < 1e-14);
        assert!((y[(1, 1)] - scalar(0.8)).abs() < 1e-14);
        assert_eq!(y[(0, 1)], 0.0);
    }

    #[test]
    fn wide_step_matches_transposed() {
        let x = Rng::new(8).normal_matrix(3, 7).scaled(0.1);
        let c = NsCoefficients::OPTIMIZED;
        let wide = newton_schulz_step(&x, &c);
        let tall = newton_schulz_step(&x.transpose(), &c).transpose();
        assert_eq!(wide, tall);
        // X·(XᵀX) on the large side agrees with (XXᵀ)·X on the small side.
        let g = x.gram();
        let direct = x
            .scaled(c.a)
            .add(&x.matmul(&g.scaled(c.b).add(&g.matmul(&g).unwrap().scaled(c.c)).unwrap()).unwrap())
            .unwrap();
        assert!(wide.rel_diff(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn ns_orthogonal_in_band() {
        let q = Rng::new(1).orthonormal_matrix(16, 16);
        let r = msign_newton_schulz(&q, &NsCoefficients::OPTIMIZED, 5, Diagnostics::Spectrum).unwrap();
        let band = r.spectrum.unwrap();
        assert!(band.within(0.7, 1.3), "{band:?}");
        assert!(band.min <= band.max);
        assert_eq!(r.iterations_used, 5);
    }

    #[test]
    fn ns_rejects_zero_and_k0() {
        let c = NsCoefficients::OPTIMIZED;
        assert!(msign_newton_schulz(&Matrix::zeros(2, 2), &c, 5, Diagnostics::None).is_err());
        assert!(msign_newton_schulz(&Matrix::identity(2), &c, 0, Diagnostics::None).is_err());
    }

    #[test]
    fn preset_serde() {
        let p: CoeffPreset = serde_json::from_str("\"taylor\"").unwrap();
        assert_eq!(p.coefficients(), NsCoefficients::TAYLOR);
        let p: CoeffPreset = serde_json::from_str(r#"{"a":1.0,"b":0.0,"c":0.0}"#).unwrap();
        assert_eq!(p.coefficients().a, 1.0);
        assert!(serde_json::from_str::<CoeffPreset>("\"bogus\"").is_err());
    }
}
