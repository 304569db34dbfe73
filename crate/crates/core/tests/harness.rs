use muon_core::harness::{
    ablate, batch_sweep_with, emit_ablation_reports, emit_sweep_reports, emit_telescope_reports,
    first_crossing, rate_slope, read_run_csv, summary_csv_string, telescope_sweep, token_ratio, train,
    write_run_csv, AblationSpec, ScheduleConfig, StopRule, SweepSpec, TelescopeSpec, TrainConfig,
    SUMMARY_HEADER,
};
use muon_core::optim::{OptimizerKind, ScheduleKind};
use muon_core::tasks::{MlpSpec, QuadraticSpec, Task, TaskSpec};

fn small_quadratic() -> TaskSpec {
    TaskSpec::Quadratic(QuadraticSpec {
        samples: 512,
        in_dim: 12,
        out_dim: 6,
        ..Default::default()
    })
}

/// Muon on a small quadratic with the target at 1.05x the closed-form optimum.
fn targeted(total_steps: usize) -> TrainConfig {
    let mut c = TrainConfig::new(small_quadratic());
    let task = Task::build(&c.task, c.data_seed()).unwrap();
    let Task::Quadratic(q) = &task else { unreachable!() };
    c.target_loss = Some(1.05 * q.optimum_loss().unwrap());
    c.muon.eta0 = 0.1;
    c.muon.lambda = 0.05;
    c.batch_size = 32;
    c.eval_every = 5;
    c.total_steps = total_steps;
    c
}

#[test]
fn small_step_decreases_loss() {
    let mut c = TrainConfig::new(small_quadratic());
    c.batch_size = 512;
    c.total_steps = 50;
    c.muon.eta0 = 1e-3;
    let r = train(&c).unwrap();
    assert!(r.summary.final_val_loss < r.summary.initial_val_loss);
    for opt in [OptimizerKind::Muon, OptimizerKind::AdamW] {
        c.optimizer = opt;
        let r = train(&c).unwrap();
        assert!(r.summary.final_train_loss < r.rows[0].train_loss, "{opt:?}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let c = targeted(200);
    assert_eq!(train(&c).unwrap(), train(&c).unwrap());
    let mut m = TrainConfig::new(TaskSpec::Mlp(MlpSpec {
        input_dim: 8,
        hidden: vec![16],
        classes: 3,
        samples: 200,
        ..Default::default()
    }));
    m.total_steps = 30;
    m.batch_size = 16;
    assert_eq!(train(&m).unwrap(), train(&m).unwrap());
}

#[test]
fn tokens_seen_is_step_times_batch() {
    let r = train(&targeted(120)).unwrap();
    for w in r.rows.windows(2) {
        assert!(w[1].tokens_seen > w[0].tokens_seen);
    }
    assert!(r.rows.iter().all(|row| row.tokens_seen == row.step as u64 * 32));
}

#[test]
fn target_crossing_matches_manual_stop() {
    let fixed = targeted(600);
    let full = train(&fixed).unwrap();
    let vals: Vec<f64> = full.rows.iter().map(|r| r.val_loss).collect();
    let idx = first_crossing(&vals, fixed.smoothing_window, fixed.target_loss.unwrap())
        .expect("target reachable");
    assert_eq!(full.summary.tokens_to_target, Some(full.rows[idx].tokens_seen));

    let mut stopping = fixed.clone();
    stopping.stop_rule = StopRule::TokensToTarget;
    let early = train(&stopping).unwrap();
    assert_eq!(early.rows.len(), idx + 1);
    assert_eq!(early.rows[..], full.rows[..=idx]);
    assert_eq!(early.summary.tokens_to_target, full.summary.tokens_to_target);
    assert_eq!(early.summary.steps_to_target, Some(full.rows[idx].step));
}

#[test]
fn longer_runs_keep_earlier_crossing() {
    let mut short = targeted(400);
    short.schedule = ScheduleConfig {
        kind: ScheduleKind::Constant,
        ..Default::default()
    };
    let mut long = short.clone();
    long.total_steps = 1600;
    let a = train(&short).unwrap();
    let b = train(&long).unwrap();
    assert!(a.summary.tokens_to_target.is_some());
    assert_eq!(a.summary.tokens_to_target, b.summary.tokens_to_target);
}

#[test]
fn sweep_emits_expected_files() {
    let base = targeted(150);
    let spec = SweepSpec {
        batch_grid: vec![16, 32, 64],
        lr_factors: vec![0.5, 1.0],
        ..Default::default()
    };
    let result = batch_sweep_with(&base, &spec, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_sweep_reports(&result, dir.path()).unwrap();
    let count = |ext: &str| files.iter().filter(|p| p.extension().unwrap() == ext).count();
    assert_eq!((files.len(), count("csv"), count("svg")), (9, 7, 2));
    assert_eq!(std::fs::read_dir(dir.path().join("runs")).unwrap().count(), 6);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 7);
}

#[test]
fn empty_summary_is_header_only() {
    let text = summary_csv_string(&[]).unwrap();
    assert_eq!(text.trim_end(), SUMMARY_HEADER.join(","));
}

#[test]
fn run_csv_round_trips_from_disk() {
    let rec = train(&targeted(80)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested").join("run.csv");
    write_run_csv(&rec, &path).unwrap();
    let back = read_run_csv(&path).unwrap();
    assert_eq!(back.run_id, rec.run_id);
    assert_eq!(back.optimizer, rec.optimizer);
    assert_eq!(back.batch_size, rec.batch_size);
    assert_eq!(back.rows, rec.rows);
}

#[test]
fn ratio_examples() {
    assert_eq!(token_ratio(1.25e6, 1.0e6).unwrap(), 1.25);
    assert_eq!(token_ratio(4096.0, 4096.0).unwrap(), 1.0);
    assert!(token_ratio(0.0, 10.0).is_err());
}

#[test]
fn no_weight_decay_does_not_improve_final_loss() {
    let mut base = targeted(400);
    base.batch_size = 64;
    let spec = AblationSpec {
        k_values: vec![],
        momentum_only: false,
        taylor: false,
        no_rms_matching: false,
        batch_multipliers: vec![],
        adamw_baseline: false,
        ..Default::default()
    };
    let table = ablate(&base, &spec).unwrap();
    let full = table.row("full").unwrap().record.summary.final_val_loss;
    let no_wd = table.row("no_weight_decay").unwrap().record.summary.final_val_loss;
    assert!(no_wd >= full, "no decay {no_wd} < full {full}");
}

#[test]
fn ablation_reports_state_halving() {
    let mut base = targeted(60);
    base.stop_rule = StopRule::FixedSteps;
    let table = ablate(&base, &AblationSpec::default()).unwrap();
    assert_eq!(table.rows.len(), 11);
    let muon = table.row("full").unwrap().record.summary.matrix_state_scalar_count;
    let adamw = table.row("adamw").unwrap().record.summary.matrix_state_scalar_count;
    assert_eq!(2 * muon, adamw);
    let dir = tempfile::tempdir().unwrap();
    emit_ablation_reports(&table, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
}

fn telescope_base() -> TrainConfig {
    let mut c = TrainConfig::new(TaskSpec::Mlp(MlpSpec {
        input_dim: 8,
        hidden: vec![64],
        classes: 4,
        samples: 400,
        ..Default::default()
    }));
    c.batch_size = 32;
    c.total_steps = 40;
    c.eval_every = 20;
    c
}

#[test]
fn telescope_halves_extents_per_doubling() {
    let spec = TelescopeSpec {
        start_width: 64,
        end_width: 256,
        grid_points: 5,
        ..Default::default()
    };
    let result = telescope_sweep(&telescope_base(), &spec).unwrap();
    let widths: Vec<usize> = result.stages.iter().map(|s| s.width).collect();
    assert_eq!(widths, [64, 128, 256]);
    assert!(result.stages.iter().all(|s| s.cells.len() == 25));
    assert_eq!(result.total_cells(), 75);
    for (i, s) in result.stages.iter().enumerate() {
        let scale = 0.5f64.powi(i as i32);
        assert!((s.eta_extent - spec.eta_extent * scale).abs() < 1e-12);
        assert!((s.lambda_extent - spec.lambda_extent * scale).abs() < 1e-12);
    }
    for w in result.stages.windows(2) {
        assert_eq!(w[1].eta_center, w[0].best_cell().eta0);
        assert_eq!(w[1].lambda_center, w[0].best_cell().lambda);
    }
    assert_eq!(result.eta_transfers().len(), 2);
    // Best eta at width 128 lands within one cell at width 256.
    assert!(result.eta_transfers()[1], "{:?}", result.eta_transfers());
    let dir = tempfile::tempdir().unwrap();
    let files = emit_telescope_reports(&result, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
}

#[test]
fn telescope_rejects_bad_widths_and_tasks() {
    let spec = TelescopeSpec {
        start_width: 64,
        end_width: 96,
        ..Default::default()
    };
    assert!(telescope_sweep(&telescope_base(), &spec).is_err());
    let quad = TrainConfig::new(small_quadratic());
    assert!(telescope_sweep(&quad, &TelescopeSpec::default()).is_err());
}

#[test]
fn exact_gradient_descent_beats_the_rate_envelope() {
    let task = Task::build(&small_quadratic(), 11).unwrap();
    let Task::Quadratic(q) = &task else { unreachable!() };
    let eta = 1.0 / q.smoothness().unwrap();
    let (rows, cols) = q.param_shape();
    let mut w = muon_core::Matrix::zeros(rows, cols);
    let mut points = Vec::new();
    for t in 1..=200 {
        let (_, g) = q.loss_grad(&w).unwrap();
        points.push((t, g.frobenius_norm()));
        w.axpy(-eta, &g).unwrap();
    }
    let slope = rate_slope(&points).unwrap();
    assert!(slope < -0.9, "slope {slope}");

    let constant: Vec<(usize, f64)> = (1..=200).map(|t| (t, 3.0)).collect();
    assert!(rate_slope(&constant).unwrap().abs() < 1e-12);
}
