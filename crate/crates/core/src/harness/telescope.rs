use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::derive_seed;
use crate::optim::OptimizerKind;
use crate::tasks::{Task, TaskSpec};

use super::config::TrainConfig;
use super::parallel::{run_cells, worker_threads};
use super::report::{fmt_f64, write_atomic, write_summary_csv, write_table};
use super::svg::{self, Panel, Series};
use super::train::{train_on, RunRecord};

/// Width-doubling search over `(eta0, lambda)` on a log₂ grid. Centers default
/// to the base Muon hyperparameters; extents are full log₂ spans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TelescopeSpec {
    pub start_width: usize,
    pub end_width: usize,
    pub grid_points: usize,
    pub eta_center: Option<f64>,
    pub lambda_center: Option<f64>,
    pub eta_extent: f64,
    pub lambda_extent: f64,
    /// Extents shrink by `4^(-1/shrink_k)` per doubling.
    pub shrink_k: f64,
}

impl Default for TelescopeSpec {
    fn default() -> Self {
        Self {
            start_width: 64,
            end_width: 256,
            grid_points: 5,
            eta_center: None,
            lambda_center: None,
            eta_extent: 4.0,
            lambda_extent: 4.0,
            shrink_k: 2.0,
        }
    }
}

impl TelescopeSpec {
    pub fn shrink(&self) -> f64 {
        4f64.powf(-1.0 / self.shrink_k)
    }

    /// Widths `start, 2·start, …, end`.
    pub fn widths(&self) -> Result<Vec<usize>> {
        let (s, e) = (self.start_width, self.end_width);
        if s == 0 || e <= s || e % s != 0 || !(e / s).is_power_of_two() {
            return Err(Error::Config(format!(
                "telescope end_width must be start_width * 2^j with j >= 1, got {s} -> {e}"
            )));
        }
        let mut w = vec![s];
        while *w.last().expect("nonempty") < e {
            w.push(w.last().expect("nonempty") * 2);
        }
        Ok(w)
    }

    fn validate(&self) -> Result<()> {
        self.widths()?;
        if self.grid_points == 0 {
            return Err(Error::Config("telescope grid_points must be >= 1".into()));
        }
        for (name, v) in [("eta_extent", self.eta_extent), ("lambda_extent", self.lambda_extent)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("telescope {name} must be >= 0")));
            }
        }
        if !(self.shrink_k > 0.0) {
            return Err(Error::Config("telescope shrink_k must be positive".into()));
        }
        Ok(())
    }
}

/// `n` points `center · 2^t` with `t` evenly spanning `[-extent/2, extent/2]`.
pub fn log2_grid(center: f64, extent: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![center];
    }
    (0..n)
        .map(|i| center * (extent * (i as f64 / (n - 1) as f64 - 0.5)).exp2())
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TelescopeCell {
    pub eta0: f64,
    pub lambda: f64,
    pub record: RunRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TelescopeStage {
    pub width: usize,
    pub eta_center: f64,
    pub lambda_center: f64,
    pub eta_extent: f64,
    pub lambda_extent: f64,
    pub cells: Vec<TelescopeCell>,
    pub best: usize,
}

impl TelescopeStage {
    pub fn best_cell(&self) -> &TelescopeCell {
        &self.cells[self.best]
    }

    /// log₂ distance between neighbouring η grid points.
    pub fn eta_spacing(&self, grid_points: usize) -> f64 {
        if grid_points > 1 {
            self.eta_extent / (grid_points - 1) as f64
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TelescopeResult {
    pub grid_points: usize,
    pub stages: Vec<TelescopeStage>,
}

impl TelescopeResult {
    pub fn total_cells(&self) -> usize {
        self.stages.iter().map(|s| s.cells.len()).sum()
    }

    /// For each doubling, whether the new best η lies within one grid cell
    /// of the previous best.
    pub fn eta_transfers(&self) -> Vec<bool> {
        self.stages
            .windows(2)
            .map(|w| {
                let d = (w[1].best_cell().eta0 / w[0].best_cell().eta0).log2().abs();
                d <= w[1].eta_spacing(self.grid_points) * (1.0 + 1e-9)
            })
            .collect()
    }
}

fn with_width(task: &TaskSpec, width: usize) -> Result<TaskSpec> {
    match task {
        TaskSpec::Mlp(s) => {
            let mut s = s.clone();
            s.hidden.iter_mut().for_each(|h| *h = width);
            Ok(TaskSpec::Mlp(s))
        }
        TaskSpec::Quadratic(_) => Err(Error::Config("telescope requires an mlp task".into())),
    }
}

pub fn telescope_sweep(base: &TrainConfig, spec: &TelescopeSpec) -> Result<TelescopeResult> {
    telescope_sweep_with(base, spec, worker_threads()?)
}

pub fn telescope_sweep_with(
    base: &TrainConfig,
    spec: &TelescopeSpec,
    threads: usize,
) -> Result<TelescopeResult> {
    base.validate()?;
    spec.validate()?;
    if base.optimizer != OptimizerKind::Muon {
        return Err(Error::Config("telescope base config must use optimizer muon".into()));
    }
    let mut eta_c = spec.eta_center.unwrap_or(base.muon.eta0);
    let mut lam_c = spec.lambda_center.unwrap_or(base.muon.lambda);
    if !(eta_c > 0.0 && lam_c > 0.0) {
        return Err(Error::Config("telescope needs positive eta and lambda centers".into()));
    }
    let (mut eta_e, mut lam_e) = (spec.eta_extent, spec.lambda_extent);
    let n = spec.grid_points;

    let mut stages = Vec::new();
    for (si, width) in spec.widths()?.into_iter().enumerate() {
        let task_spec = with_width(&base.task, width)?;
        let task = Task::build(&task_spec, base.data_seed())?;
        let mut jobs = Vec::new();
        for (i, &eta) in log2_grid(eta_c, eta_e, n).iter().enumerate() {
            for (j, &lam) in log2_grid(lam_c, lam_e, n).iter().enumerate() {
                let mut cfg = base.clone();
                cfg.task = task_spec.clone();
                cfg.seed = derive_seed(base.seed, si as u64);
                cfg.data_seed = Some(base.data_seed());
                cfg.muon.eta0 = eta;
                cfg.muon.lambda = lam;
                cfg.run_id = Some(format!("telescope-w{width}-e{i}-l{j}"));
                cfg.validate()?;
                jobs.push(cfg);
            }
        }
        let records = run_cells(&jobs, threads, |c| train_on(&task, c))?;
        let cells: Vec<TelescopeCell> = jobs
            .iter()
            .zip(records)
            .map(|(c, record)| TelescopeCell {
                eta0: c.muon.eta0,
                lambda: c.muon.lambda,
                record,
            })
            .collect();
        let best = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.record.summary.diverged && c.record.summary.final_val_loss.is_finite())
            .min_by(|a, b| a.1.record.summary.final_val_loss.total_cmp(&b.1.record.summary.final_val_loss))
            .map(|(i, _)| i)
            .ok_or_else(|| {
                Error::Config(format!("telescope stage at width {width}: every grid cell diverged"))
            })?;
        stages.push(TelescopeStage {
            width,
            eta_center: eta_c,
            lambda_center: lam_c,
            eta_extent: eta_e,
            lambda_extent: lam_e,
            best,
            cells,
        });
        let b = stages.last().expect("pushed").best_cell();
        eta_c = b.eta0;
        lam_c = b.lambda;
        eta_e *= spec.shrink();
        lam_e *= spec.shrink();
    }
    Ok(TelescopeResult {
        grid_points: n,
        stages,
    })
}

pub const TELESCOPE_HEADER: [&str; 8] = [
    "stage",
    "width",
    "eta0",
    "lambda",
    "eta_extent",
    "final_val_loss",
    "diverged",
    "best",
];

/// Writes `summary.csv` over all cells, the `telescope.csv` grid and `telescope.svg`.
pub fn emit_telescope_reports(result: &TelescopeResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let all: Vec<&RunRecord> = result
        .stages
        .iter()
        .flat_map(|s| s.cells.iter().map(|c| &c.record))
        .collect();
    let p = out_dir.join("summary.csv");
    write_summary_csv(&all, &p)?;
    written.push(p);

    let mut rows = Vec::new();
    for (si, s) in result.stages.iter().enumerate() {
        for (ci, c) in s.cells.iter().enumerate() {
            rows.push(vec![
                si.to_string(),
                s.width.to_string(),
                fmt_f64(c.eta0),
                fmt_f64(c.lambda),
                fmt_f64(s.eta_extent),
                fmt_f64(c.record.summary.final_val_loss),
                c.record.summary.diverged.to_string(),
                (ci == s.best).to_string(),
            ]);
        }
    }
    let p = out_dir.join("telescope.csv");
    write_table(&p, &TELESCOPE_HEADER, rows)?;
    written.push(p);

    let series = |label: &str, f: &dyn Fn(&TelescopeStage) -> f64| Series {
        label: label.into(),
        points: result.stages.iter().map(|s| (s.width as f64, f(s))).collect(),
    };
    let panels = [
        Panel {
            title: "best learning rate per width".into(),
            x_label: "hidden width".into(),
            y_label: "eta0".into(),
            series: vec![series("muon", &|s| s.best_cell().eta0)],
        },
        Panel {
            title: "best validation loss per width".into(),
            x_label: "hidden width".into(),
            y_label: "val_loss".into(),
            series: vec![series("muon", &|s| s.best_cell().record.summary.final_val_loss)],
        },
    ];
    let notes: Vec<String> = result
        .eta_transfers()
        .iter()
        .zip(result.stages.windows(2))
        .map(|(t, w)| {
            format!(
                "eta transfer {} -> {}: {}",
                w[0].width,
                w[1].width,
                if *t { "within one cell" } else { "moved more than one cell" }
            )
        })
        .collect();
    let p = out_dir.join("telescope.svg");
    write_atomic(&p, svg::render(&panels, &notes).as_bytes())?;
    written.push(p);
    Ok(written)
}
