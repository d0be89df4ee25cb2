//! CSV and JSON emission.
//!
//! Floats are written with 17 significant digits so that they round-trip;
//! missing values are empty fields.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::sweep::{Row, RunOutput};
use crate::BenchError;

pub const CSV_HEADER: [&str; 12] =
    ["algorithm", "n", "m", "delta", "eta", "alpha", "adversary", "seed", "mode", "excess_risk", "stderr", "wall_ms"];

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn record(r: &Row) -> [String; 12] {
    [
        r.algorithm.to_string(),
        r.n.to_string(),
        r.m.to_string(),
        r.delta.map(|d| d.to_string()).unwrap_or_default(),
        opt_float(r.eta),
        opt_float(r.alpha),
        r.adversary.clone(),
        r.seed.to_string(),
        r.mode.to_string(),
        fmt_float(r.excess_risk),
        opt_float(r.stderr),
        opt_float(r.wall_ms),
    ]
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(record(r))?;
    }
    w.flush()?;
    Ok(())
}

/// `results.csv` → `results.json`; other names get `.json` appended.
pub fn sidecar_path(out: &Path) -> PathBuf {
    match out.extension() {
        Some(ext) if ext == "csv" => out.with_extension("json"),
        _ => {
            let mut s = out.as_os_str().to_owned();
            s.push(".json");
            PathBuf::from(s)
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    rows: usize,
    resolved_indices: &'a [(usize, Vec<u32>)],
    verdicts: &'a [crate::sweep::RowVerdict],
    all_checks_hold: bool,
    timings_ms: &'a [f64],
}

pub fn write_json_sidecar<W: Write>(cfg: &ExperimentConfig, run: &RunOutput, out: W) -> Result<(), BenchError> {
    let doc = Sidecar {
        config: cfg,
        rows: run.rows.len(),
        resolved_indices: &run.resolved_indices,
        verdicts: &run.verdicts,
        all_checks_hold: run.verdicts.iter().all(|v| v.holds),
        timings_ms: &run.timings_ms,
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    Ok(())
}
