use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::msign::{CoeffPreset, PresetName};
use crate::optim::{Direction, OptimizerKind};
use crate::tasks::Task;

use super::config::TrainConfig;
use super::parallel::{run_cells, worker_threads};
use super::report::{fmt_f64, write_atomic, write_run_csv, write_summary_csv, write_table};
use super::sweep::loss_vs_tokens_svg;
use super::train::{train_on, RunRecord};

/// Which cells to run. The full-Muon reference cell is always included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationSpec {
    /// Newton–Schulz iteration counts; the base `k_iters` is the reference cell.
    pub k_values: Vec<usize>,
    pub momentum_only: bool,
    pub taylor: bool,
    pub no_weight_decay: bool,
    pub no_rms_matching: bool,
    /// Multipliers on the base batch size.
    pub batch_multipliers: Vec<f64>,
    pub adamw_baseline: bool,
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            k_values: vec![3, 5, 10],
            momentum_only: true,
            taylor: true,
            no_weight_decay: true,
            no_rms_matching: true,
            batch_multipliers: vec![0.5, 2.0, 8.0],
            adamw_baseline: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationCell {
    pub name: String,
    pub config: TrainConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub record: RunRecord,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub const FULL_CELL: &str = "full";

/// Expands `spec` into per-cell configs, all sharing `base.seed`.
pub fn ablation_cells(base: &TrainConfig, spec: &AblationSpec) -> Result<Vec<AblationCell>> {
    if base.optimizer != OptimizerKind::Muon {
        return Err(Error::Config("ablation base config must use optimizer muon".into()));
    }
    let mut reference = base.clone();
    reference.muon.direction = Direction::NewtonSchulz;
    let mut cells = vec![(FULL_CELL.to_string(), reference.clone())];
    let mut push = |name: String, edit: &dyn Fn(&mut TrainConfig)| {
        let mut c = reference.clone();
        edit(&mut c);
        cells.push((name, c));
    };
    if spec.momentum_only {
        push("momentum_only".into(), &|c| c.muon.direction = Direction::MomentumOnly);
    }
    for &k in &spec.k_values {
        if k == 0 {
            return Err(Error::Config("ablation k_values must be >= 1".into()));
        }
        if k != reference.muon.k_iters {
            push(format!("k{k}"), &|c| c.muon.k_iters = k);
        }
    }
    if spec.taylor {
        push("taylor".into(), &|c| c.muon.coeffs = CoeffPreset::Named(PresetName::Taylor));
    }
    if spec.no_weight_decay {
        push("no_weight_decay".into(), &|c| c.muon.lambda = 0.0);
    }
    if spec.no_rms_matching {
        push("no_rms_matching".into(), &|c| c.muon.rms_matching = false);
    }
    for &m in &spec.batch_multipliers {
        let b = (base.batch_size as f64 * m).round();
        if !(b >= 1.0) {
            return Err(Error::Config(format!("batch multiplier {m} gives an empty batch")));
        }
        let b = b as usize;
        push(format!("batch_{b}"), &|c| c.batch_size = b);
    }
    if spec.adamw_baseline {
        push("adamw".into(), &|c| c.optimizer = OptimizerKind::AdamW);
    }
    if cells.len() == 1 {
        return Err(Error::Config("ablation axes are empty".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    cells
        .into_iter()
        .map(|(name, mut config)| {
            if !seen.insert(name.clone()) {
                return Err(Error::Config(format!("duplicate ablation cell `{name}`")));
            }
            config.run_id = Some(format!("ablate-{name}"));
            config.validate()?;
            Ok(AblationCell { name, config })
        })
        .collect()
}

pub fn ablate(base: &TrainConfig, spec: &AblationSpec) -> Result<AblationTable> {
    ablate_with(base, spec, worker_threads()?)
}

pub fn ablate_with(base: &TrainConfig, spec: &AblationSpec, threads: usize) -> Result<AblationTable> {
    base.validate()?;
    let cells = ablation_cells(base, spec)?;
    let task = Task::build(&base.task, base.data_seed())?;
    let records = run_cells(&cells, threads, |c| train_on(&task, &c.config))?;
    Ok(AblationTable {
        rows: cells
            .into_iter()
            .zip(records)
            .map(|(c, record)| AblationRow { name: c.name, record })
            .collect(),
    })
}

pub const ABLATION_HEADER: [&str; 8] = [
    "cell",
    "optimizer",
    "batch_size",
    "final_val_loss",
    "steps_to_target",
    "loss_spike_count",
    "state_scalar_count",
    "diverged",
];

/// Writes run CSVs, `summary.csv`, the `ablation.csv` table and `loss_vs_tokens.svg`.
pub fn emit_ablation_reports(table: &AblationTable, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for r in &table.rows {
        let p = out_dir.join("runs").join(format!("{}.csv", r.record.run_id));
        write_run_csv(&r.record, &p)?;
        written.push(p);
    }
    let p = out_dir.join("summary.csv");
    write_summary_csv(&table.rows.iter().map(|r| &r.record).collect::<Vec<_>>(), &p)?;
    written.push(p);

    let rows = table
        .rows
        .iter()
        .map(|r| {
            let s = &r.record.summary;
            vec![
                r.name.clone(),
                r.record.optimizer.to_string(),
                r.record.batch_size.to_string(),
                fmt_f64(s.final_val_loss),
                s.steps_to_target.map(|t| t.to_string()).unwrap_or_default(),
                s.loss_spike_count.to_string(),
                s.state_scalar_count.to_string(),
                s.diverged.to_string(),
            ]
        })
        .collect();
    let p = out_dir.join("ablation.csv");
    write_table(&p, &ABLATION_HEADER, rows)?;
    written.push(p);

    let p = out_dir.join("loss_vs_tokens.svg");
    write_atomic(&p, loss_vs_tokens_svg(table.rows.iter().map(|r| &r.record)).as_bytes())?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::{QuadraticSpec, TaskSpec};

    fn base() -> TrainConfig {
        let mut c = TrainConfig::new(TaskSpec::Quadratic(QuadraticSpec {
            samples: 256,
            in_dim: 8,
            out_dim: 4,
            ..Default::default()
        }));
        c.total_steps = 20;
        c.eval_every = 5;
        c.batch_size = 16;
        c
    }

    #[test]
    fn default_axes_give_eleven_cells() {
        let cells = ablation_cells(&base(), &AblationSpec::default()).unwrap();
        let names: Vec<&str> = cells.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "full",
                "momentum_only",
                "k3",
                "k10",
                "taylor",
                "no_weight_decay",
                "no_rms_matching",
                "batch_8",
                "batch_32",
                "batch_128",
                "adamw"
            ]
        );
        assert!(cells.iter().all(|c| c.config.seed == base().seed));
    }

    #[test]
    fn empty_axes_rejected() {
        let spec = AblationSpec {
            k_values: vec![5],
            momentum_only: false,
            taylor: false,
            no_weight_decay: false,
            no_rms_matching: false,
            batch_multipliers: vec![],
            adamw_baseline: false,
        };
        assert!(matches!(ablation_cells(&base(), &spec), Err(Error::Config(_))));
    }

    #[test]
    fn state_counts_halve() {
        let t = ablate_with(&base(), &AblationSpec::default(), 1).unwrap();
        assert_eq!(t.rows.len(), 11);
        let muon = t.row("full").unwrap().record.summary.matrix_state_scalar_count;
        let adamw = t.row("adamw").unwrap().record.summary.matrix_state_scalar_count;
        assert_eq!(2 * muon, adamw);
    }
}
