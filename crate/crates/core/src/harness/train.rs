use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Rng};
use crate::optim::{clip_global_norm, state_scalar_count, OptimizerKind, OptimizerSet, ParamShape};
use crate::tasks::Task;

use super::config::{Precision, StopRule, TrainConfig};

const RUN_STREAM: u64 = 0x5EED;

/// One evaluation point.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub step: usize,
    pub tokens_seen: u64,
    /// Mean minibatch loss since the previous row; full-training-set loss at step 0.
    pub train_loss: f64,
    pub val_loss: f64,
    /// Norm of the noise-free full-training-set gradient at this point.
    pub grad_global_norm: f64,
    /// RMS over all parameters of the last applied change `w − w'`.
    pub update_rms: f64,
    pub eta_t: f64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub tokens_to_target: Option<u64>,
    pub steps_to_target: Option<usize>,
    pub loss_spike_count: usize,
    pub initial_val_loss: f64,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub diverged: bool,
    pub state_scalar_count: usize,
    /// Auxiliary scalars attributable to matrix-shaped parameters.
    pub matrix_state_scalar_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub rows: Vec<EvalRow>,
    pub summary: RunSummary,
}

/// Trailing mean of the last `window` values (fewer at the start).
pub fn trailing_mean(values: &[f64], window: usize) -> f64 {
    let start = values.len().saturating_sub(window);
    let tail = &values[start..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Index of the first row whose trailing-mean validation loss is ≤ `target`.
pub fn first_crossing(val_losses: &[f64], window: usize, target: f64) -> Option<usize> {
    (0..val_losses.len()).find(|&i| trailing_mean(&val_losses[..=i], window) <= target)
}

/// Rows whose validation loss exceeds `spike_ratio` times the running minimum.
pub fn loss_spike_count(record: &RunRecord, spike_ratio: f64) -> Result<usize> {
    if record.rows.len() < 2 {
        return Err(Error::Range("loss_spike_count needs at least 2 eval rows".into()));
    }
    Ok(count_spikes(
        &record.rows.iter().map(|r| r.val_loss).collect::<Vec<_>>(),
        spike_ratio,
    ))
}

pub(crate) fn count_spikes(losses: &[f64], spike_ratio: f64) -> usize {
    let mut min = f64::INFINITY;
    let mut spikes = 0;
    for &l in losses {
        min = min.min(l);
        if l > spike_ratio * min {
            spikes += 1;
        }
    }
    spikes
}

fn sample_batch(task: &Task, batch_size: usize, rng: &mut Rng) -> Vec<usize> {
    let n = task.num_train();
    if batch_size == n {
        (0..n).collect()
    } else {
        rng.sample_indices(n, batch_size)
    }
}

fn is_divergent(val: f64, initial: f64, factor: f64) -> bool {
    !val.is_finite() || val > factor * initial
}

/// Runs one training configuration. Deterministic in `config`; divergence
/// ends the run with `summary.diverged` set rather than an error.
pub fn train(config: &TrainConfig) -> Result<RunRecord> {
    config.validate()?;
    let task = Task::build(&config.task, config.data_seed())?;
    train_on(&task, config)
}

/// [`train`] on a prebuilt task (shared across cells of a sweep).
pub fn train_on(task: &Task, config: &TrainConfig) -> Result<RunRecord> {
    config.validate()?;
    if config.batch_size > task.num_train() {
        return Err(Error::Config(format!(
            "batch_size {} exceeds the {} training samples",
            config.batch_size,
            task.num_train()
        )));
    }
    let schedule = config.schedule()?;
    let started = Instant::now();
    let wall = || {
        if config.record_wall_time {
            started.elapsed().as_millis() as u64
        } else {
            0
        }
    };
    let f32_mode = config.precision == Precision::F32;

    let mut rng = Rng::new(config.seed).split(RUN_STREAM);
    let mut params = task.init_params(&mut rng);
    if f32_mode {
        params.iter_mut().for_each(|p| p.value.round_to_f32());
    }
    let shapes: Vec<ParamShape> = params.iter().map(|p| p.shape).collect();
    let (state_total, state_matrix) = state_scalar_count(&shapes, config.optimizer);
    let mut opt = OptimizerSet::new(config.optimizer, &config.muon, &config.adamw, &params);
    let param_count: usize = shapes.iter().map(|s| s.len()).sum();

    let all: Vec<usize> = (0..task.num_train()).collect();
    let initial_train = task.loss_grad(&params, &all)?.0;
    let initial_val = task.val_loss(&params)?;
    let mut rows = vec![EvalRow {
        step: 0,
        tokens_seen: 0,
        train_loss: initial_train,
        val_loss: initial_val,
        grad_global_norm: task.full_grad_norm(&params)?,
        update_rms: 0.0,
        eta_t: schedule.eta(0)?,
        wall_ms: wall(),
    }];
    let mut val_history = vec![initial_val];
    let mut crossing = config
        .target_loss
        .and_then(|t| first_crossing(&val_history, config.smoothing_window, t));
    let mut diverged = is_divergent(initial_val, initial_val, config.divergence_factor);

    let mut loss_acc = 0.0;
    let mut loss_count = 0usize;
    let mut step = 0;
    let stop_early = |crossing: Option<usize>| {
        config.stop_rule == StopRule::TokensToTarget && crossing.is_some()
    };

    while step < config.total_steps && !diverged && !stop_early(crossing) {
        step += 1;
        let eta_t = schedule.eta(step)?;
        let batch = sample_batch(task, config.batch_size, &mut rng);
        let outcome = task
            .stochastic_loss_grad(&params, &batch, &mut rng)
            .and_then(|(loss, mut grads)| {
                if f32_mode {
                    grads.iter_mut().for_each(Matrix::round_to_f32);
                }
                clip_global_norm(&mut grads, config.clip_norm);
                let change_sq = opt.step(&mut params, &grads, eta_t)?;
                Ok((loss, change_sq))
            });
        let (loss, change_sq) = match outcome {
            Ok(v) => v,
            Err(Error::NonFinite(_)) => {
                rows.push(EvalRow {
                    step,
                    tokens_seen: step as u64 * config.batch_size as u64,
                    train_loss: f64::NAN,
                    val_loss: f64::NAN,
                    grad_global_norm: f64::NAN,
                    update_rms: f64::NAN,
                    eta_t,
                    wall_ms: wall(),
                });
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if f32_mode {
            params.iter_mut().for_each(|p| p.value.round_to_f32());
            opt.round_to_f32();
        }
        loss_acc += loss;
        loss_count += 1;

        if step % config.eval_every == 0 || step == config.total_steps {
            let val = task.val_loss(&params)?;
            let grad_norm = if val.is_finite() {
                task.full_grad_norm(&params).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            rows.push(EvalRow {
                step,
                tokens_seen: step as u64 * config.batch_size as u64,
                train_loss: loss_acc / loss_count as f64,
                val_loss: val,
                grad_global_norm: grad_norm,
                update_rms: (change_sq / param_count as f64).sqrt(),
                eta_t,
                wall_ms: wall(),
            });
            loss_acc = 0.0;
            loss_count = 0;
            val_history.push(val);
            if crossing.is_none() {
                if let Some(t) = config.target_loss {
                    let last = val_history.len() - 1;
                    if trailing_mean(&val_history, config.smoothing_window) <= t {
                        crossing = Some(last);
                    }
                }
            }
            diverged = is_divergent(val, initial_val, config.divergence_factor);
        }
    }

    let last = rows.last().expect("step-0 row");
    let summary = RunSummary {
        tokens_to_target: crossing.map(|i| rows[i].tokens_seen),
        steps_to_target: crossing.map(|i| rows[i].step),
        loss_spike_count: count_spikes(&val_history, config.spike_ratio),
        initial_val_loss: initial_val,
        final_train_loss: last.train_loss,
        final_val_loss: last.val_loss,
        diverged,
        state_scalar_count: state_total,
        matrix_state_scalar_count: state_matrix,
    };
    Ok(RunRecord {
        run_id: config.run_id(),
        optimizer: config.optimizer,
        batch_size: config.batch_size,
        rows,
        summary,
    })
}
