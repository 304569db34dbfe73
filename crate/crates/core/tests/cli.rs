use std::path::Path;
use std::process::{Command, Output};

fn muon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_muon")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

const QUAD: &str = r#""task": {"kind": "quadratic", "samples": 256, "in_dim": 8, "out_dim": 4}"#;

#[test]
fn train_writes_identical_csv_twice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.json",
        &format!(r#"{{"command": "train", {QUAD}, "total_steps": 60, "batch_size": 16, "run_id": "t"}}"#),
    );
    let mut bytes = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = muon(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        bytes.push(std::fs::read(out.join("t.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let text = String::from_utf8(bytes.remove(0)).unwrap();
    assert!(text.starts_with("run_id,optimizer,batch_size,step,tokens_seen,"));
}

#[test]
fn unknown_key_is_a_usage_error_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &format!(r#"{{{QUAD}, "muon": {{"etaa": 0.1}}}}"#));
    let o = muon(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("muon.etaa"));

    let o = muon(&["train", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write(dir.path(), "cmd.json", &format!(r#"{{"command": "sweep", {QUAD}}}"#));
    assert_eq!(muon(&["train", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.json",
        &format!(
            r#"{{{QUAD}, "optimizer": "adamw", "adamw": {{"eta0": 100.0}}, "clip_norm": 1e9,
                "schedule": {{"kind": "constant"}}, "total_steps": 50, "out_dir": "{}"}}"#,
            dir.path().join("o").display()
        ),
    );
    let o = muon(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn msign_check_exit_codes() {
    let o = muon(&["msign-check", "--shape", "8x8", "--k", "1", "--trials", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("5 of 5 trials outside"));
    assert_eq!(muon(&["msign-check", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(muon(&["msign-check", "--shape", "8"]).status.code(), Some(2));
}

#[test]
fn sweep_emits_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let cfg = write(
        dir.path(),
        "s.json",
        &format!(
            r#"{{"command": "sweep", {QUAD}, "total_steps": 100, "eval_every": 5, "target_loss": 1e9,
                "muon": {{"eta0": 0.1}}, "sweep": {{"batch_grid": [16, 32], "lr_factors": [1.0]}}}}"#
        ),
    );
    let o = muon(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(out.join("runs")).unwrap().count(), 4);
    for f in ["summary.csv", "ratio.svg", "loss_vs_tokens.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("monotonicity"));
}

#[test]
fn ablate_prints_eleven_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let cfg = write(dir.path(), "a.json", &format!(r#"{{{QUAD}, "total_steps": 20, "batch_size": 16}}"#));
    let o = muon(&["ablate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let rows = stdout.lines().skip(1).filter(|l| l.contains(',')).count();
    assert_eq!(rows, 11, "{stdout}");
    assert!(out.join("ablation.csv").is_file());
}

#[test]
fn telescope_reports_each_width() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let cfg = write(
        dir.path(),
        "t.json",
        r#"{"task": {"kind": "mlp", "input_dim": 4, "hidden": [8], "classes": 3, "samples": 100},
            "total_steps": 10, "batch_size": 16,
            "telescope": {"start_width": 8, "end_width": 32, "grid_points": 3}}"#,
    );
    let o = muon(&["telescope", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for w in [8, 16, 32] {
        assert!(stdout.contains(&format!("width {w}:")), "{stdout}");
    }
    assert!(out.join("telescope.csv").is_file());
}
