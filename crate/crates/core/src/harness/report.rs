use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::optim::OptimizerKind;

use super::train::{EvalRow, RunRecord};

pub const RUN_HEADER: [&str; 11] = [
    "run_id",
    "optimizer",
    "batch_size",
    "step",
    "tokens_seen",
    "train_loss",
    "val_loss",
    "grad_global_norm",
    "update_rms",
    "eta_t",
    "wall_ms",
];

pub const SUMMARY_HEADER: [&str; 8] = [
    "run_id",
    "optimizer",
    "batch_size",
    "tokens_to_target",
    "terminated",
    "loss_spike_count",
    "final_val_loss",
    "state_scalar_count",
];

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} value `{s}`")))
}

fn parse_int<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} value `{s}`")))
}

/// Writes via a sibling temp file and a rename, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_bytes(header: &[&str], records: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |source| Error::Csv {
        path: PathBuf::from("<memory>"),
        source,
    };
    w.write_record(header).map_err(wrap)?;
    for r in records {
        w.write_record(&r).map_err(wrap)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))
}

pub fn run_csv_string(record: &RunRecord) -> Result<String> {
    let rows = record.rows.iter().map(|r| {
        vec![
            record.run_id.clone(),
            record.optimizer.to_string(),
            record.batch_size.to_string(),
            r.step.to_string(),
            r.tokens_seen.to_string(),
            fmt_f64(r.train_loss),
            fmt_f64(r.val_loss),
            fmt_f64(r.grad_global_norm),
            fmt_f64(r.update_rms),
            fmt_f64(r.eta_t),
            r.wall_ms.to_string(),
        ]
    });
    Ok(String::from_utf8(csv_bytes(&RUN_HEADER, rows)?).expect("ascii"))
}

pub fn write_run_csv(record: &RunRecord, path: &Path) -> Result<()> {
    write_atomic(path, run_csv_string(record)?.as_bytes())
}

/// Rows of one run CSV as read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RunCsv {
    pub run_id: String,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub rows: Vec<EvalRow>,
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind> {
    match s {
        "muon" => Ok(OptimizerKind::Muon),
        "adamw" => Ok(OptimizerKind::AdamW),
        other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
    }
}

pub fn parse_run_csv(text: &str, path: &Path) -> Result<RunCsv> {
    let wrap = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(wrap)?.clone();
    if header.iter().ne(RUN_HEADER) {
        return Err(Error::Config(format!(
            "{}: unexpected run CSV header",
            path.display()
        )));
    }
    let mut out: Option<RunCsv> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(wrap)?;
        let row = EvalRow {
            step: parse_int(&rec[3], "step")?,
            tokens_seen: parse_int(&rec[4], "tokens_seen")?,
            train_loss: parse_f64(&rec[5], "train_loss")?,
            val_loss: parse_f64(&rec[6], "val_loss")?,
            grad_global_norm: parse_f64(&rec[7], "grad_global_norm")?,
            update_rms: parse_f64(&rec[8], "update_rms")?,
            eta_t: parse_f64(&rec[9], "eta_t")?,
            wall_ms: parse_int(&rec[10], "wall_ms")?,
        };
        match &mut out {
            None => {
                out = Some(RunCsv {
                    run_id: rec[0].to_string(),
                    optimizer: parse_optimizer(&rec[1])?,
                    batch_size: parse_int(&rec[2], "batch_size")?,
                    rows: vec![row],
                })
            }
            Some(run) => run.rows.push(row),
        }
    }
    out.ok_or_else(|| Error::Config(format!("{}: run CSV has no rows", path.display())))
}

pub fn read_run_csv(path: &Path) -> Result<RunCsv> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run_csv(&text, path)
}

pub fn summary_csv_string(records: &[&RunRecord]) -> Result<String> {
    let rows = records.iter().map(|r| {
        let s = &r.summary;
        vec![
            r.run_id.clone(),
            r.optimizer.to_string(),
            r.batch_size.to_string(),
            s.tokens_to_target.map(|t| t.to_string()).unwrap_or_default(),
            s.tokens_to_target.is_some().to_string(),
            s.loss_spike_count.to_string(),
            fmt_f64(s.final_val_loss),
            s.state_scalar_count.to_string(),
        ]
    });
    Ok(String::from_utf8(csv_bytes(&SUMMARY_HEADER, rows)?).expect("ascii"))
}

pub fn write_summary_csv(records: &[&RunRecord], path: &Path) -> Result<()> {
    write_atomic(path, summary_csv_string(records)?.as_bytes())
}

pub(crate) fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    write_atomic(path, &csv_bytes(header, rows)?)
}
