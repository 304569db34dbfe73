use crate::error::{Error, Result};
use crate::optim::ScheduleKind;

use super::config::{StopRule, TrainConfig};
use super::train::RunRecord;

pub const MIN_RATE_ROWS: usize = 20;

/// Ordinary least-squares slope of `y` on `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Range("slope fit needs >= 2 paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("slope fit with constant abscissa".into()));
    }
    Ok(sxy / sxx)
}

/// Slope of `log((1/T) Σ_{t≤T} ‖∇L_t‖²)` against `log T`, over the points
/// `(step_t, norm_t)` with `step ≥ 1`.
pub fn rate_slope(points: &[(usize, f64)]) -> Result<f64> {
    let pts: Vec<(usize, f64)> = points.iter().copied().filter(|p| p.0 >= 1).collect();
    if pts.len() < MIN_RATE_ROWS {
        return Err(Error::Range(format!(
            "rate check needs >= {MIN_RATE_ROWS} eval rows past step 0, got {}",
            pts.len()
        )));
    }
    let mut sum = 0.0;
    let mut x = Vec::with_capacity(pts.len());
    let mut y = Vec::with_capacity(pts.len());
    for (i, &(step, norm)) in pts.iter().enumerate() {
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("gradient norm at step {step}")));
        }
        sum += norm * norm;
        let mean = sum / (i + 1) as f64;
        x.push((step as f64).ln());
        y.push(mean.max(f64::MIN_POSITIVE).ln());
    }
    least_squares_slope(&x, &y)
}

pub fn rate_check(record: &RunRecord) -> Result<f64> {
    let pts: Vec<(usize, f64)> = record
        .rows
        .iter()
        .map(|r| (r.step, r.grad_global_norm))
        .collect();
    rate_slope(&pts)
}

/// `base` with the `eta0/√t` schedule, an eval row every step and no early stop.
pub fn rate_check_config(base: &TrainConfig) -> TrainConfig {
    let mut c = base.clone();
    c.schedule.kind = ScheduleKind::InverseSqrt;
    c.eval_every = 1;
    c.stop_rule = StopRule::FixedSteps;
    c
}
