use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::{adamw_step, muon_step, AdamWHyper, AdamWState, MuonHyper, MuonState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamShape {
    Matrix { rows: usize, cols: usize },
    Vector(usize),
}

impl ParamShape {
    /// Storage dimensions; vectors are kept as `1 × n`.
    pub fn dims(self) -> (usize, usize) {
        match self {
            ParamShape::Matrix { rows, cols } => (rows, cols),
            ParamShape::Vector(n) => (1, n),
        }
    }

    pub fn len(self) -> usize {
        let (r, c) = self.dims();
        r * c
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Muon,
    AdamW,
}

/// Matrices with both dimensions ≥ 2 go to Muon; vectors and `1 × n` /
/// `m × 1` shapes go to AdamW.
pub fn route_parameter(shape: ParamShape) -> Route {
    match shape {
        ParamShape::Matrix { rows, cols } if rows >= 2 && cols >= 2 => Route::Muon,
        _ => Route::AdamW,
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub shape: ParamShape,
    pub value: Matrix,
}

impl Param {
    pub fn matrix(name: impl Into<String>, value: Matrix) -> Self {
        let (rows, cols) = value.shape();
        Self {
            name: name.into(),
            shape: ParamShape::Matrix { rows, cols },
            value,
        }
    }

    pub fn vector(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Ok(Self {
            name: name.into(),
            shape: ParamShape::Vector(n),
            value: Matrix::new(1, n, values)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Muon,
    #[serde(rename = "adamw")]
    AdamW,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Muon => "muon",
            OptimizerKind::AdamW => "adamw",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
enum Slot {
    Muon(MuonState),
    AdamW(AdamWState),
}

impl Slot {
    fn aux_scalars(&self) -> usize {
        match self {
            Slot::Muon(s) => s.aux_scalars(),
            Slot::AdamW(s) => s.aux_scalars(),
        }
    }
}

/// Auxiliary optimizer scalars for a parameter set: `(total, matrix params only)`.
pub fn state_scalar_count(shapes: &[ParamShape], kind: OptimizerKind) -> (usize, usize) {
    let mut total = 0;
    let mut matrix = 0;
    for &s in shapes {
        let per = match (kind, route_parameter(s)) {
            (OptimizerKind::Muon, Route::Muon) => s.len(),
            _ => 2 * s.len(),
        };
        total += per;
        if matches!(s, ParamShape::Matrix { .. }) {
            matrix += per;
        }
    }
    (total, matrix)
}

/// One state slot per parameter. Under [`OptimizerKind::Muon`], parameters
/// that [`route_parameter`] sends to AdamW use the AdamW moments with Muon's
/// learning rate and decay.
#[derive(Clone, Debug)]
pub struct OptimizerSet {
    kind: OptimizerKind,
    muon: MuonHyper,
    lambda: f64,
    slots: Vec<Slot>,
}

impl OptimizerSet {
    pub fn new(kind: OptimizerKind, muon: &MuonHyper, adamw: &AdamWHyper, params: &[Param]) -> Self {
        let slots = params
            .iter()
            .map(|p| {
                let (r, c) = p.shape.dims();
                match (kind, route_parameter(p.shape)) {
                    (OptimizerKind::Muon, Route::Muon) => Slot::Muon(MuonState::new(&p.name, r, c)),
                    _ => Slot::AdamW(AdamWState::new(&p.name, r, c, adamw)),
                }
            })
            .collect();
        let lambda = match kind {
            OptimizerKind::Muon => muon.lambda,
            OptimizerKind::AdamW => adamw.lambda,
        };
        Self {
            kind,
            muon: muon.clone(),
            lambda,
            slots,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn aux_scalars(&self) -> usize {
        self.slots.iter().map(Slot::aux_scalars).sum()
    }

    /// Applies one step to every parameter in order. Returns the sum of
    /// squared entries of the applied change `w − w'`.
    pub fn step(&mut self, params: &mut [Param], grads: &[Matrix], eta_t: f64) -> Result<f64> {
        if params.len() != self.slots.len() || grads.len() != params.len() {
            return Err(Error::Shape {
                op: "optimizer set",
                left: (params.len(), self.slots.len()),
                right: (grads.len(), 1),
            });
        }
        let mut change_sq = 0.0;
        for ((p, g), slot) in params.iter_mut().zip(grads).zip(self.slots.iter_mut()) {
            let next = match slot {
                Slot::Muon(st) => muon_step(&p.value, g, st, &self.muon, eta_t)?,
                Slot::AdamW(st) => adamw_step(&p.value, g, st, eta_t, self.lambda)?,
            };
            change_sq += next.sub(&p.value)?.sum_squares();
            p.value = next;
        }
        Ok(change_sq)
    }

    pub fn round_to_f32(&mut self) {
        for slot in &mut self.slots {
            match slot {
                Slot::Muon(s) => s.momentum.round_to_f32(),
                Slot::AdamW(s) => {
                    s.m.round_to_f32();
                    s.v.round_to_f32();
                }
            }
        }
    }
}
