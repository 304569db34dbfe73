use crate::error::{Error, Result};
use crate::linalg::{derive_seed, Rng};
use crate::msign::{msign_newton_schulz, Diagnostics, NsCoefficients};

pub const BAND: (f64, f64) = (0.7, 1.3);

#[derive(Clone, Debug, PartialEq)]
pub struct MsignCheckReport {
    pub shape: (usize, usize),
    pub k: usize,
    pub trials: usize,
    pub min_singular: f64,
    pub max_singular: f64,
    pub max_oracle_deviation: f64,
    pub violations: usize,
    /// Seed of the trial farthest outside (or closest to the edge of) the band.
    pub worst_seed: u64,
}

impl MsignCheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Seed of trial `i`; the matrix is `Rng::new(seed).normal_matrix(rows, cols)`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, trial as u64)
}

/// Runs Newton–Schulz against the SVD oracle on `trials` standard-normal matrices.
pub fn msign_check(
    shape: (usize, usize),
    coeffs: &NsCoefficients,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MsignCheckReport> {
    if trials == 0 {
        return Err(Error::Range("msign check needs trials >= 1".into()));
    }
    if shape.0 == 0 || shape.1 == 0 {
        return Err(Error::Range(format!("invalid shape {}x{}", shape.0, shape.1)));
    }
    let (lo, hi) = BAND;
    let mut report = MsignCheckReport {
        shape,
        k,
        trials,
        min_singular: f64::INFINITY,
        max_singular: f64::NEG_INFINITY,
        max_oracle_deviation: 0.0,
        violations: 0,
        worst_seed: trial_seed(seed, 0),
    };
    let mut worst_margin = f64::INFINITY;
    for t in 0..trials {
        let s = trial_seed(seed, t);
        let m = Rng::new(s).normal_matrix(shape.0, shape.1);
        let r = msign_newton_schulz(&m, coeffs, k, Diagnostics::SpectrumAndOracle)?;
        let band = r.spectrum.expect("requested");
        report.min_singular = report.min_singular.min(band.min);
        report.max_singular = report.max_singular.max(band.max);
        report.max_oracle_deviation = report
            .max_oracle_deviation
            .max(r.deviation_from_oracle.expect("requested"));
        if !band.within(lo, hi) {
            report.violations += 1;
        }
        let margin = (band.min - lo).min(hi - band.max);
        if margin < worst_margin {
            worst_margin = margin;
            report.worst_seed = s;
        }
    }
    Ok(report)
}
