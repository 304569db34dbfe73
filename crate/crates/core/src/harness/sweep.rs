use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::derive_seed;
use crate::optim::OptimizerKind;
use crate::tasks::Task;

use super::config::{StopRule, TrainConfig};
use super::parallel::{run_cells, worker_threads};
use super::report::{write_run_csv, write_summary_csv, write_atomic};
use super::svg::{self, Panel, Series};
use super::train::{train_on, RunRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Strictly increasing batch sizes.
    pub batch_grid: Vec<usize>,
    pub optimizers: Vec<OptimizerKind>,
    /// Multipliers on each optimizer's base `eta0`, tried at every batch size.
    pub lr_factors: Vec<f64>,
    /// When set, each cell runs `ceil(token_budget / B)` steps instead of `total_steps`.
    pub token_budget: Option<u64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            batch_grid: vec![32, 128, 512, 2048],
            optimizers: vec![OptimizerKind::AdamW, OptimizerKind::Muon],
            lr_factors: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            token_budget: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.batch_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep batch_grid must be strictly increasing".into()));
        }
        if self.batch_grid.contains(&0) {
            return Err(Error::Config("sweep batch sizes must be >= 1".into()));
        }
        if self.optimizers.is_empty() {
            return Err(Error::Config("sweep needs at least one optimizer".into()));
        }
        let n = self.optimizers.len();
        if n > 2 || (n == 2 && self.optimizers[0] == self.optimizers[1]) {
            return Err(Error::Config("sweep optimizers must be distinct".into()));
        }
        if self.lr_factors.is_empty() || self.lr_factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::Config("sweep lr_factors must be nonempty and positive".into()));
        }
        if self.token_budget == Some(0) {
            return Err(Error::Config("sweep token_budget must be >= 1".into()));
        }
        Ok(())
    }

    fn steps_for(&self, base: &TrainConfig, batch: usize) -> usize {
        match self.token_budget {
            Some(t) => t.div_ceil(batch as u64) as usize,
            None => base.total_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuningPoint {
    pub eta0: f64,
    pub final_val_loss: f64,
    pub diverged: bool,
}

/// The best-tuned run for one `(B, optimizer)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub eta0: f64,
    pub total_steps: usize,
    pub tuning: Vec<TuningPoint>,
    pub record: RunRecord,
}

impl SweepCell {
    pub fn tokens_to_target(&self) -> Option<u64> {
        self.record.summary.tokens_to_target
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioPoint {
    pub batch_size: usize,
    pub t_adamw: Option<u64>,
    pub t_muon: Option<u64>,
    /// Present only when both optimizers reached the target.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct MonotonicityReport {
    pub points: Vec<(usize, f64)>,
    pub nondecreasing: bool,
    /// Consecutive batch sizes `(B_i, B_{i+1})` where the ratio drops.
    pub decreases: Vec<(usize, usize)>,
}

impl MonotonicityReport {
    pub fn from_ratios(ratios: &[RatioPoint]) -> Self {
        let points: Vec<(usize, f64)> = ratios
            .iter()
            .filter_map(|r| r.ratio.map(|v| (r.batch_size, v)))
            .collect();
        let decreases: Vec<(usize, usize)> = points
            .windows(2)
            .filter(|w| w[1].1 < w[0].1)
            .map(|w| (w[0].0, w[1].0))
            .collect();
        Self {
            nondecreasing: decreases.is_empty(),
            points,
            decreases,
        }
    }
}

impl fmt::Display for MonotonicityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.points.len() < 2 {
            return write!(
                f,
                "R_L(B) monotonicity: undetermined ({} batch size(s) with a ratio)",
                self.points.len()
            );
        }
        if self.nondecreasing {
            write!(f, "R_L(B) monotonicity: nondecreasing over {} batch sizes", self.points.len())
        } else {
            let drops: Vec<String> = self.decreases.iter().map(|(a, b)| format!("{a}->{b}")).collect();
            write!(f, "R_L(B) monotonicity: decreases at {}", drops.join(", "))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub target_loss: f64,
    pub base_seed: u64,
    pub data_seed: u64,
    pub cells: Vec<SweepCell>,
    pub ratios: Vec<RatioPoint>,
    pub monotonicity: MonotonicityReport,
}

impl SweepResult {
    pub fn cell(&self, batch_size: usize, optimizer: OptimizerKind) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.batch_size == batch_size && c.optimizer == optimizer)
    }
}

/// `R = T_adamw / T_muon`.
pub fn token_ratio(t_adamw: f64, t_muon: f64) -> Result<f64> {
    if !(t_adamw > 0.0 && t_muon > 0.0) {
        return Err(Error::Range(format!(
            "token counts must be positive, got {t_adamw} and {t_muon}"
        )));
    }
    Ok(t_adamw / t_muon)
}

pub fn ratio_points(cells: &[SweepCell], batch_grid: &[usize]) -> Vec<RatioPoint> {
    batch_grid
        .iter()
        .map(|&b| {
            let t = |kind| {
                cells
                    .iter()
                    .find(|c| c.batch_size == b && c.optimizer == kind)
                    .and_then(SweepCell::tokens_to_target)
            };
            let (t_adamw, t_muon) = (t(OptimizerKind::AdamW), t(OptimizerKind::Muon));
            let ratio = match (t_adamw, t_muon) {
                (Some(a), Some(m)) => token_ratio(a as f64, m as f64).ok(),
                _ => None,
            };
            RatioPoint {
                batch_size: b,
                t_adamw,
                t_muon,
                ratio,
            }
        })
        .collect()
}

pub fn batch_sweep(base: &TrainConfig, spec: &SweepSpec) -> Result<SweepResult> {
    batch_sweep_with(base, spec, worker_threads()?)
}

/// [`batch_sweep`] with an explicit worker count; output is independent of it.
pub fn batch_sweep_with(base: &TrainConfig, spec: &SweepSpec, threads: usize) -> Result<SweepResult> {
    base.validate()?;
    spec.validate()?;
    let target = base
        .target_loss
        .ok_or_else(|| Error::Config("sweep requires target_loss".into()))?;
    if spec.batch_grid.is_empty() {
        return Err(Error::Config("sweep batch_grid must be nonempty".into()));
    }
    let data_seed = base.data_seed();
    let task = Task::build(&base.task, data_seed)?;

    let mut jobs = Vec::new();
    for (bi, &b) in spec.batch_grid.iter().enumerate() {
        for &opt in &spec.optimizers {
            for (fi, &factor) in spec.lr_factors.iter().enumerate() {
                let mut cfg = base.clone();
                cfg.optimizer = opt;
                cfg.batch_size = b;
                cfg.seed = derive_seed(base.seed, bi as u64);
                cfg.data_seed = Some(data_seed);
                cfg.total_steps = spec.steps_for(base, b);
                cfg.stop_rule = StopRule::FixedSteps;
                let base_eta = match opt {
                    OptimizerKind::Muon => base.muon.eta0,
                    OptimizerKind::AdamW => base.adamw.eta0,
                };
                cfg.set_eta0(base_eta * factor);
                cfg.run_id = Some(format!("{}-{}-b{}-lr{}", base.task.name(), opt, b, fi));
                jobs.push(cfg);
            }
        }
    }
    let records = run_cells(&jobs, threads, |cfg| train_on(&task, cfg))?;

    let per_cell = spec.lr_factors.len();
    let mut cells = Vec::new();
    for (chunk_cfgs, chunk_recs) in jobs.chunks(per_cell).zip(records.chunks(per_cell)) {
        let tuning: Vec<TuningPoint> = chunk_cfgs
            .iter()
            .zip(chunk_recs)
            .map(|(c, r)| TuningPoint {
                eta0: c.eta0(),
                final_val_loss: r.summary.final_val_loss,
                diverged: r.summary.diverged,
            })
            .collect();
        let score = |t: &TuningPoint| {
            if t.diverged || !t.final_val_loss.is_finite() {
                f64::INFINITY
            } else {
                t.final_val_loss
            }
        };
        // First minimum wins ties, so the choice is deterministic.
        let best = (0..tuning.len())
            .min_by(|&i, &j| score(&tuning[i]).total_cmp(&score(&tuning[j])).then(i.cmp(&j)))
            .expect("nonempty lr grid");
        let cfg = &chunk_cfgs[best];
        let mut record = chunk_recs[best].clone();
        record.run_id = format!("{}-{}-b{}", base.task.name(), cfg.optimizer, cfg.batch_size);
        cells.push(SweepCell {
            batch_size: cfg.batch_size,
            optimizer: cfg.optimizer,
            seed: cfg.seed,
            eta0: cfg.eta0(),
            total_steps: cfg.total_steps,
            tuning,
            record,
        });
    }
    let ratios = ratio_points(&cells, &spec.batch_grid);
    let monotonicity = MonotonicityReport::from_ratios(&ratios);
    Ok(SweepResult {
        target_loss: target,
        base_seed: base.seed,
        data_seed,
        cells,
        ratios,
        monotonicity,
    })
}

fn loss_panels<'a>(records: impl Iterator<Item = &'a RunRecord>) -> Vec<Panel> {
    let mut panels: Vec<Panel> = Vec::new();
    for r in records {
        let title = format!("validation loss vs tokens, B = {}", r.batch_size);
        let series = Series {
            label: r.optimizer.to_string(),
            points: r.rows.iter().map(|x| (x.tokens_seen as f64, x.val_loss)).collect(),
        };
        match panels.iter_mut().find(|p| p.title == title) {
            Some(p) => p.series.push(series),
            None => panels.push(Panel {
                title,
                x_label: "tokens".into(),
                y_label: "val_loss".into(),
                series: vec![series],
            }),
        }
    }
    panels
}

pub(crate) fn loss_vs_tokens_svg<'a>(records: impl Iterator<Item = &'a RunRecord>) -> String {
    svg::render(&loss_panels(records), &[])
}

/// Writes `runs/<run_id>.csv` per cell, `summary.csv`, `ratio.svg` and
/// `loss_vs_tokens.svg` under `out_dir`.
pub fn emit_sweep_reports(result: &SweepResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for c in &result.cells {
        let p = out_dir.join("runs").join(format!("{}.csv", c.record.run_id));
        write_run_csv(&c.record, &p)?;
        written.push(p);
    }
    let p = out_dir.join("summary.csv");
    write_summary_csv(&result.cells.iter().map(|c| &c.record).collect::<Vec<_>>(), &p)?;
    written.push(p);

    let ratio_panel = Panel {
        title: format!("token consumption ratio at target loss {}", result.target_loss),
        x_label: "batch size B".into(),
        y_label: "R_L(B) = T_adamw / T_muon".into(),
        series: vec![Series {
            label: "R_L(B)".into(),
            points: result
                .monotonicity
                .points
                .iter()
                .map(|&(b, r)| (b as f64, r))
                .collect(),
        }],
    };
    let mut notes = vec![result.monotonicity.to_string()];
    for r in &result.ratios {
        if r.ratio.is_none() {
            notes.push(format!("B = {}: ratio omitted (a cell did not reach the target)", r.batch_size));
        }
    }
    let p = out_dir.join("ratio.svg");
    write_atomic(&p, svg::render(&[ratio_panel], &notes).as_bytes())?;
    written.push(p);

    let p = out_dir.join("loss_vs_tokens.svg");
    write_atomic(&p, loss_vs_tokens_svg(result.cells.iter().map(|c| &c.record)).as_bytes())?;
    written.push(p);
    Ok(written)
}
