use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Linear ramp to `eta0`, then cosine down to `eta_min`.
    #[default]
    CosineWarmup,
    /// `eta0 / √t`, counting from `t = 1`.
    InverseSqrt,
    Constant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub warmup_fraction: f64,
    pub total_steps: usize,
    pub eta0: f64,
    pub eta_min: f64,
}

pub const WARMUP_FRACTION_RANGE: (f64, f64) = (0.005, 0.02);

impl Schedule {
    pub fn new(
        kind: ScheduleKind,
        warmup_fraction: f64,
        total_steps: usize,
        eta0: f64,
        eta_min: f64,
    ) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::Config("schedule needs total_steps >= 1".into()));
        }
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::Config(format!("eta0 must be positive, got {eta0}")));
        }
        if kind == ScheduleKind::CosineWarmup {
            let (lo, hi) = WARMUP_FRACTION_RANGE;
            if !(lo..=hi).contains(&warmup_fraction) {
                return Err(Error::Config(format!(
                    "warmup_fraction must be in [{lo}, {hi}], got {warmup_fraction}"
                )));
            }
            if !(0.0..=0.01 * eta0).contains(&eta_min) {
                return Err(Error::Config(format!(
                    "eta_min must be in [0, 0.01 * eta0], got {eta_min}"
                )));
            }
        }
        Ok(Self {
            kind,
            warmup_fraction,
            total_steps,
            eta0,
            eta_min,
        })
    }

    pub fn cosine(eta0: f64, total_steps: usize, warmup_fraction: f64) -> Result<Self> {
        Self::new(ScheduleKind::CosineWarmup, warmup_fraction, total_steps, eta0, 0.0)
    }

    pub fn warmup_steps(&self) -> usize {
        match self.kind {
            ScheduleKind::CosineWarmup => {
                ((self.warmup_fraction * self.total_steps as f64).ceil() as usize)
                    .clamp(1, self.total_steps)
            }
            _ => 0,
        }
    }

    pub fn eta(&self, step: usize) -> Result<f64> {
        schedule_eta(self, step)
    }
}

/// Learning rate at `step ∈ [0, total_steps]`.
pub fn schedule_eta(sched: &Schedule, step: usize) -> Result<f64> {
    if step > sched.total_steps {
        return Err(Error::Range(format!(
            "step {step} beyond total_steps {}",
            sched.total_steps
        )));
    }
    Ok(match sched.kind {
        ScheduleKind::Constant => sched.eta0,
        ScheduleKind::InverseSqrt => sched.eta0 / (step.max(1) as f64).sqrt(),
        ScheduleKind::CosineWarmup => {
            let warm = sched.warmup_steps();
            if step <= warm {
                sched.eta0 * step as f64 / warm as f64
            } else {
                let span = (sched.total_steps - warm) as f64;
                let progress = (step - warm) as f64 / span;
                sched.eta_min + 0.5 * (sched.eta0 - sched.eta_min) * (1.0 + (PI * progress).cos())
            }
        }
    })
}
