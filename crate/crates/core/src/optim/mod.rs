//! Per-parameter optimizer state machines and the training-step plumbing
//! around them: schedules, global-norm clipping, matrix/vector routing.

mod adamw;
mod clip;
mod muon;
mod param;
mod schedule;
mod shampoo;

pub use adamw::{adamw_step, AdamWHyper, AdamWState};
pub use clip::{clip_global_norm, global_norm};
pub use muon::{muon_direction, muon_step, rms_scale, Direction, MuonHyper, MuonState, RmsDim};
pub use param::{
    route_parameter, state_scalar_count, OptimizerKind, OptimizerSet, Param, ParamShape, Route,
};
pub use schedule::{schedule_eta, Schedule, ScheduleKind};
pub use shampoo::{shampoo_direction, shampoo_step_oracle};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub(crate) fn check_step_inputs(name: &str, w: &Matrix, g: &Matrix, state: &Matrix) -> Result<()> {
    if w.shape() != g.shape() {
        return Err(Error::Shape {
            op: "optimizer step (weight vs gradient)",
            left: w.shape(),
            right: g.shape(),
        });
    }
    if w.shape() != state.shape() {
        return Err(Error::Shape {
            op: "optimizer step (weight vs state)",
            left: w.shape(),
            right: state.shape(),
        });
    }
    if !g.is_finite() {
        return Err(Error::NonFinite(format!("gradient of parameter `{name}`")));
    }
    Ok(())
}
