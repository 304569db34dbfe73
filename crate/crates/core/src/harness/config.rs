use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::derive_seed;
use crate::optim::{AdamWHyper, MuonHyper, OptimizerKind, Schedule, ScheduleKind};
use crate::tasks::TaskSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    #[default]
    FixedSteps,
    /// Stop at the first eval row whose smoothed validation loss reaches the target.
    TokensToTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub warmup_fraction: f64,
    pub eta_min: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::CosineWarmup,
            warmup_fraction: 0.01,
            eta_min: 0.0,
        }
    }
}

/// One training run. Everything except `task` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub task: TaskSpec,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub muon: MuonHyper,
    #[serde(default)]
    pub adamw: AdamWHyper,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    /// Samples ("tokens") per step.
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::total_steps")]
    pub total_steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Seed for dataset generation; derived from `seed` when absent.
    #[serde(default)]
    pub data_seed: Option<u64>,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub target_loss: Option<f64>,
    #[serde(default = "defaults::eval_every")]
    pub eval_every: usize,
    #[serde(default)]
    pub stop_rule: StopRule,
    #[serde(default = "defaults::clip_norm")]
    pub clip_norm: f64,
    /// Trailing window (eval rows) for the target-crossing detector.
    #[serde(default = "defaults::smoothing_window")]
    pub smoothing_window: usize,
    /// Divergence when validation loss exceeds this multiple of its initial value.
    #[serde(default = "defaults::divergence_factor")]
    pub divergence_factor: f64,
    #[serde(default = "defaults::spike_ratio")]
    pub spike_ratio: f64,
    /// Off by default so run CSVs are byte-reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub run_id: Option<String>,
}

mod defaults {
    pub fn batch_size() -> usize {
        64
    }
    pub fn total_steps() -> usize {
        500
    }
    pub fn eval_every() -> usize {
        10
    }
    pub fn clip_norm() -> f64 {
        1.0
    }
    pub fn smoothing_window() -> usize {
        5
    }
    pub fn divergence_factor() -> f64 {
        10.0
    }
    pub fn spike_ratio() -> f64 {
        1.25
    }
}

const DATA_STREAM: u64 = 0xDA7A;

impl TrainConfig {
    pub fn new(task: TaskSpec) -> Self {
        Self {
            task,
            optimizer: OptimizerKind::default(),
            muon: MuonHyper::default(),
            adamw: AdamWHyper::default(),
            schedule: ScheduleConfig::default(),
            batch_size: defaults::batch_size(),
            total_steps: defaults::total_steps(),
            seed: 0,
            data_seed: None,
            precision: Precision::default(),
            target_loss: None,
            eval_every: defaults::eval_every(),
            stop_rule: StopRule::default(),
            clip_norm: defaults::clip_norm(),
            smoothing_window: defaults::smoothing_window(),
            divergence_factor: defaults::divergence_factor(),
            spike_ratio: defaults::spike_ratio(),
            record_wall_time: false,
            run_id: None,
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data_seed
            .unwrap_or_else(|| derive_seed(self.seed, DATA_STREAM))
    }

    pub fn eta0(&self) -> f64 {
        match self.optimizer {
            OptimizerKind::Muon => self.muon.eta0,
            OptimizerKind::AdamW => self.adamw.eta0,
        }
    }

    pub fn set_eta0(&mut self, eta0: f64) {
        match self.optimizer {
            OptimizerKind::Muon => self.muon.eta0 = eta0,
            OptimizerKind::AdamW => self.adamw.eta0 = eta0,
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(
            self.schedule.kind,
            self.schedule.warmup_fraction,
            self.total_steps,
            self.eta0(),
            self.schedule.eta_min,
        )
    }

    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-{}-b{}", self.task.name(), self.optimizer, self.batch_size))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        self.task.validate()?;
        self.muon.validate()?;
        self.adamw.validate()?;
        self.schedule()?;
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1");
        }
        if self.smoothing_window == 0 {
            return bad("smoothing_window must be >= 1");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if !(self.divergence_factor > 1.0) {
            return bad("divergence_factor must be > 1");
        }
        if !(self.spike_ratio > 1.0) {
            return bad("spike_ratio must be > 1");
        }
        if self.stop_rule == StopRule::TokensToTarget && self.target_loss.is_none() {
            return bad("stop_rule tokens_to_target requires target_loss");
        }
        if let Some(t) = self.target_loss {
            if !t.is_finite() {
                return bad("target_loss must be finite");
            }
        }
        if let Some(id) = &self.run_id {
            if id.is_empty() || id.contains(['/', '\\', ',']) {
                return bad("run_id must be nonempty without path separators or commas");
            }
        }
        Ok(())
    }
}
