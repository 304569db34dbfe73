//! `muon` command-line interface.
//!
//! Every subcommand reads an optional JSON config (`--config`). The document
//! is a [`TrainConfig`] plus optional blocks `command`, `out_dir`, `sweep`,
//! `ablation`, `telescope` and `msign_check`. Unknown keys are rejected with
//! their path. Exit codes: 0 success, 1 verification failure, 2 usage or
//! config error, 3 divergence.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::harness::{
    ablate, batch_sweep, emit_ablation_reports, emit_sweep_reports, emit_telescope_reports,
    msign_check, telescope_sweep, train, write_run_csv, AblationSpec, Precision, SweepSpec,
    TelescopeSpec, TrainConfig,
};
use crate::msign::PresetName;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

const DEFAULT_OUT: &str = "out";

#[derive(Parser, Debug)]
#[command(name = "muon", version, about = "Muon optimizer experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compare Newton-Schulz against the SVD polar factor on random matrices.
    MsignCheck(MsignCheckArgs),
    /// Run one training configuration and write its run CSV.
    Train(CommonArgs),
    /// Batch-size sweep computing the token consumption ratio.
    Sweep(CommonArgs),
    /// Component ablation table.
    Ablate(CommonArgs),
    /// Width-doubling hyperparameter search.
    Telescope(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: config `out_dir`, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Args, Debug, Clone)]
pub struct MsignCheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Matrix shape as `ROWSxCOLS`.
    #[arg(long)]
    pub shape: Option<Shape>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accepted for uniformity; the check always runs in f64.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Shape(pub usize, pub usize);

impl FromStr for Shape {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("shape must look like 64x64, got `{s}`"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| format!("invalid dimension `{t}` in shape `{s}`"))
        };
        Ok(Shape(parse(r)?, parse(c)?))
    }
}

impl TryFrom<String> for Shape {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Shape> for String {
    fn from(s: Shape) -> String {
        format!("{}x{}", s.0, s.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MsignCheckSpec {
    pub shape: Shape,
    pub k: usize,
    pub preset: PresetName,
    pub trials: usize,
    pub seed: u64,
}

impl Default for MsignCheckSpec {
    fn default() -> Self {
        Self {
            shape: Shape(64, 64),
            k: 5,
            preset: PresetName::Optimized,
            trials: 200,
            seed: 0,
        }
    }
}

/// A parsed config document.
#[derive(Clone, Debug, PartialEq)]
pub struct CliConfig {
    pub command: Option<String>,
    pub out_dir: Option<PathBuf>,
    /// Absent only when the document has no `task` and the command does not need one.
    pub train: Option<TrainConfig>,
    pub sweep: SweepSpec,
    pub ablation: AblationSpec,
    pub telescope: TelescopeSpec,
    pub msign_check: MsignCheckSpec,
}

impl CliConfig {
    pub fn train_config(&self) -> Result<&TrainConfig> {
        self.train
            .as_ref()
            .ok_or_else(|| Error::Config("config is missing required key `task`".into()))
    }
}

fn from_value<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let at = match (prefix.is_empty(), path == ".") {
            (true, _) => path,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{path}"),
        };
        Error::Config(format!("at `{at}`: {}", e.into_inner()))
    })
}

fn take_block<T: DeserializeOwned + Default>(map: &mut Map<String, Value>, key: &str) -> Result<T> {
    match map.remove(key) {
        None => Ok(T::default()),
        Some(v) => from_value(v, key),
    }
}

/// Parses a config document. `task` is required unless `allow_missing_task`.
pub fn parse_config(text: &str, allow_missing_task: bool) -> Result<CliConfig> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let Value::Object(mut map) = value else {
        return Err(Error::Config("config must be a JSON object".into()));
    };
    let command = match map.remove("command") {
        None => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(Error::Config("at `command`: expected a string".into())),
    };
    let out_dir = match map.remove("out_dir") {
        None => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(_) => return Err(Error::Config("at `out_dir`: expected a string".into())),
    };
    let sweep = take_block(&mut map, "sweep")?;
    let ablation = take_block(&mut map, "ablation")?;
    let telescope = take_block(&mut map, "telescope")?;
    let msign_check = take_block(&mut map, "msign_check")?;
    let train = if allow_missing_task && !map.contains_key("task") {
        if let Some(k) = map.keys().next() {
            return Err(Error::Config(format!("at `{k}`: unknown key without a `task`")));
        }
        None
    } else {
        Some(from_value::<TrainConfig>(Value::Object(map), "")?)
    };
    Ok(CliConfig {
        command,
        out_dir,
        train,
        sweep,
        ablation,
        telescope,
        msign_check,
    })
}

pub fn load_config(path: &Path, command: &str, allow_missing_task: bool) -> Result<CliConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = parse_config(&text, allow_missing_task).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(Error::Config(format!(
                "{}: config is for command `{c}`, not `{command}`",
                path.display()
            )));
        }
    }
    Ok(cfg)
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Range(_) | Error::Io { .. } | Error::Csv { .. } => EXIT_USAGE,
        Error::NonFinite(_) => EXIT_DIVERGED,
        _ => EXIT_VERIFY,
    }
}

fn prepared(args: &CommonArgs, command: &str) -> Result<(CliConfig, TrainConfig, PathBuf)> {
    let cfg = load_config(&args.config, command, false)?;
    let mut train = cfg.train_config()?.clone();
    if let Some(s) = args.seed {
        train.seed = s;
    }
    if let Some(p) = args.precision {
        train.precision = p;
    }
    train.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    Ok((cfg, train, out))
}

fn cmd_msign_check(args: &MsignCheckArgs) -> Result<i32> {
    let mut spec = match &args.config {
        Some(p) => load_config(p, "msign-check", true)?.msign_check,
        None => MsignCheckSpec::default(),
    };
    if let Some(s) = args.shape {
        spec.shape = s;
    }
    if let Some(k) = args.k {
        spec.k = k;
    }
    if let Some(p) = args.preset {
        spec.preset = p;
    }
    if let Some(t) = args.trials {
        spec.trials = t as usize;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if spec.trials == 0 {
        return Err(Error::Config("msign_check.trials must be >= 1".into()));
    }
    if spec.k == 0 {
        return Err(Error::Config("msign_check.k must be >= 1".into()));
    }
    let coeffs = crate::msign::CoeffPreset::Named(spec.preset).coefficients();
    let r = msign_check((spec.shape.0, spec.shape.1), &coeffs, spec.k, spec.trials, spec.seed)?;
    println!(
        "shape {}x{} k {} preset {} trials {}",
        r.shape.0, r.shape.1, r.k, coeffs.label, r.trials
    );
    println!("min singular value {}", r.min_singular);
    println!("max singular value {}", r.max_singular);
    println!("max deviation from exact msign {}", r.max_oracle_deviation);
    if r.passed() {
        println!("all trials inside (0.7, 1.3)");
        Ok(EXIT_OK)
    } else {
        println!(
            "{} of {} trials outside (0.7, 1.3); worst matrix seed {}",
            r.violations, r.trials, r.worst_seed
        );
        Ok(EXIT_VERIFY)
    }
}

fn cmd_train(args: &CommonArgs) -> Result<i32> {
    let (_, cfg, out) = prepared(args, "train")?;
    let rec = train(&cfg)?;
    let path = out.join(format!("{}.csv", rec.run_id));
    write_run_csv(&rec, &path)?;
    let s = &rec.summary;
    println!("wrote {}", path.display());
    println!(
        "final train loss {} val loss {} eval rows {}",
        s.final_train_loss,
        s.final_val_loss,
        rec.rows.len()
    );
    if let Some(t) = s.tokens_to_target {
        println!("tokens to target {t} (step {})", s.steps_to_target.unwrap_or_default());
    }
    if s.diverged {
        eprintln!("run diverged");
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(args: &CommonArgs) -> Result<i32> {
    let (cfg, train, out) = prepared(args, "sweep")?;
    let result = batch_sweep(&train, &cfg.sweep)?;
    let files = emit_sweep_reports(&result, &out)?;
    for r in &result.ratios {
        match r.ratio {
            Some(v) => println!("B = {}: R = {v}", r.batch_size),
            None => eprintln!("warning: B = {}: a cell did not reach the target; ratio omitted", r.batch_size),
        }
    }
    println!("{}", result.monotonicity);
    println!("wrote {} files under {}", files.len(), out.display());
    Ok(EXIT_OK)
}

fn cmd_ablate(args: &CommonArgs) -> Result<i32> {
    let (cfg, train, out) = prepared(args, "ablate")?;
    let table = ablate(&train, &cfg.ablation)?;
    let files = emit_ablation_reports(&table, &out)?;
    println!("cell,final_val_loss,steps_to_target,loss_spikes,state_scalars");
    for r in &table.rows {
        let s = &r.record.summary;
        let steps = s.steps_to_target.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        println!(
            "{},{},{},{},{}{}",
            r.name,
            s.final_val_loss,
            steps,
            s.loss_spike_count,
            s.state_scalar_count,
            if s.diverged { " (diverged)" } else { "" }
        );
    }
    println!("wrote {} files under {}", files.len(), out.display());
    Ok(EXIT_OK)
}

fn cmd_telescope(args: &CommonArgs) -> Result<i32> {
    let (cfg, train, out) = prepared(args, "telescope")?;
    let result = telescope_sweep(&train, &cfg.telescope)?;
    let files = emit_telescope_reports(&result, &out)?;
    for s in &result.stages {
        let b = s.best_cell();
        println!(
            "width {}: best eta0 {} lambda {} val loss {} (extent {})",
            s.width, b.eta0, b.lambda, b.record.summary.final_val_loss, s.eta_extent
        );
    }
    for (i, t) in result.eta_transfers().iter().enumerate() {
        println!("stage {} -> {}: eta within one cell: {t}", i, i + 1);
    }
    println!("wrote {} files under {}", files.len(), out.display());
    Ok(EXIT_OK)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::MsignCheck(a) => cmd_msign_check(a),
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Telescope(a) => cmd_telescope(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_parsing() {
        assert_eq!("64x32".parse::<Shape>().unwrap(), Shape(64, 32));
        assert!("64".parse::<Shape>().is_err());
        assert!("0x4".parse::<Shape>().is_err());
    }

    #[test]
    fn minimal_config() {
        let c = parse_config(r#"{"task": {"kind": "quadratic"}}"#, false).unwrap();
        let t = c.train_config().unwrap();
        assert_eq!(t.batch_size, 64);
        assert_eq!(c.sweep, SweepSpec::default());
    }

    #[test]
    fn unknown_keys_report_path() {
        let e = parse_config(r#"{"task": {"kind": "quadratic"}, "muon": {"etaa": 1}}"#, false)
            .unwrap_err()
            .to_string();
        assert!(e.contains("muon.etaa") || e.contains("muon"), "{e}");
        let e = parse_config(r#"{"task": {"kind": "quadratic"}, "sweep": {"grid": [1]}}"#, false)
            .unwrap_err()
            .to_string();
        assert!(e.contains("sweep"), "{e}");
        let e = parse_config(r#"{"task": {"kind": "quadratic"}, "bogus": 1}"#, false)
            .unwrap_err()
            .to_string();
        assert!(e.contains("bogus"), "{e}");
    }

    #[test]
    fn task_required_except_for_msign_check() {
        assert!(parse_config("{}", false).is_err());
        let c = parse_config(r#"{"msign_check": {"shape": "8x8", "trials": 3}}"#, true).unwrap();
        assert_eq!(c.msign_check.shape, Shape(8, 8));
        assert!(c.train.is_none());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code_for(&Error::NonFinite("x".into())), EXIT_DIVERGED);
        assert_eq!(exit_code_for(&Error::NoConvergence { sweeps: 1 }), EXIT_VERIFY);
    }
}
