use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::optim::Param;

/// Absolute floor in the relative-error denominator, so coordinates whose
/// true gradient is ~0 are judged against round-off rather than 0/0.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub parameter: String,
    pub max_rel_error: f64,
    pub probes: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients from `f` against central differences at
/// `probes` random coordinates of every parameter.
pub fn grad_check<F>(
    f: F,
    params: &[Param],
    probes: usize,
    h: f64,
    rng: &mut Rng,
) -> Result<Vec<GradCheckReport>>
where
    F: Fn(&[Param]) -> Result<(f64, Vec<Matrix>)>,
{
    if probes == 0 {
        return Err(Error::Range("grad_check needs probes >= 1".into()));
    }
    if !(h > 0.0) {
        return Err(Error::Range(format!("grad_check needs h > 0, got {h}")));
    }
    let (_, analytic) = f(params)?;
    let mut work: Vec<Param> = params.to_vec();
    let mut reports = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let len = params[p].value.len();
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let k = rng.below(len);
            let orig = params[p].value.as_slice()[k];
            work[p].value.as_mut_slice()[k] = orig + h;
            let (plus, _) = f(&work)?;
            work[p].value.as_mut_slice()[k] = orig - h;
            let (minus, _) = f(&work)?;
            work[p].value.as_mut_slice()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(analytic[p].as_slice()[k], numeric));
        }
        reports.push(GradCheckReport {
            parameter: params[p].name.clone(),
            max_rel_error: worst,
            probes,
        });
    }
    Ok(reports)
}
