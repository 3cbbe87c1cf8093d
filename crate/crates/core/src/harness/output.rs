//! Result tables and their CSV / JSON files.
//!
//! `results.csv` columns, in order:
//! scenario, method, velocity_mps, p_max_w, frames, status, average_se, ptr,
//! iterations, sweeps, detail.
//! Floats are written with 17 significant digits; missing values are empty.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::SolveTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Infeasible,
    ResourceLimit,
    Error,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Infeasible => "infeasible",
            Status::ResourceLimit => "resource_limit",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub method: String,
    pub velocity_mps: f64,
    pub p_max_w: f64,
    pub frames: usize,
    pub status: Status,
    pub average_se: Option<f64>,
    /// Total pilot symbols over total data symbols.
    pub ptr: Option<f64>,
    /// Sweeps until the objective stopped changing.
    pub iterations: Option<usize>,
    /// Sweeps executed, including the final confirming one.
    pub sweeps: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdRow {
    pub scenario: String,
    pub velocity_mps: f64,
    pub p_max_w: f64,
    pub pilots: u32,
    pub data: u32,
    pub td_s: f64,
    pub status: Status,
    pub average_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub scenario: String,
    pub method: String,
    pub trace: SolveTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub scenario: String,
    pub method: String,
    pub wall_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "both" => Ok(Format::Both),
            other => Err(Error::Config(format!("unknown format `{other}`, expected csv, json or both"))),
        }
    }
}

pub const RESULT_COLUMNS: [&str; 11] = [
    "scenario",
    "method",
    "velocity_mps",
    "p_max_w",
    "frames",
    "status",
    "average_se",
    "ptr",
    "iterations",
    "sweeps",
    "detail",
];

pub const TD_COLUMNS: [&str; 8] = [
    "scenario",
    "velocity_mps",
    "p_max_w",
    "pilots",
    "data",
    "td_s",
    "status",
    "average_se",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_int(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Serialization {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(RESULT_COLUMNS).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.method.clone(),
            fmt_f64(r.velocity_mps),
            fmt_f64(r.p_max_w),
            r.frames.to_string(),
            r.status.as_str().to_string(),
            fmt_opt(r.average_se),
            fmt_opt(r.ptr),
            fmt_opt_int(r.iterations),
            fmt_opt_int(r.sweeps),
            r.detail.clone(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_td_csv(path: &Path, rows: &[TdRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(TD_COLUMNS).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            fmt_f64(r.velocity_mps),
            fmt_f64(r.p_max_w),
            r.pilots.to_string(),
            r.data.to_string(),
            fmt_f64(r.td_s),
            r.status.as_str().to_string(),
            fmt_opt(r.average_se),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_timings_csv(path: &Path, rows: &[TimingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["scenario", "method", "wall_s"]).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([r.scenario.clone(), r.method.clone(), format!("{:.6}", r.wall_s)])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Serialization {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads `results.csv` back into rows.
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let bad = |msg: String| Error::Serialization {
        path: path.to_path_buf(),
        message: msg,
    };
    let float = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(format!("bad number `{s}`")))
        }
    };
    let int = |s: &str| -> Result<Option<usize>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(format!("bad integer `{s}`")))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != RESULT_COLUMNS.len() {
            return Err(bad(format!("expected {} columns, got {}", RESULT_COLUMNS.len(), rec.len())));
        }
        let status = match &rec[5] {
            "ok" => Status::Ok,
            "infeasible" => Status::Infeasible,
            "resource_limit" => Status::ResourceLimit,
            "error" => Status::Error,
            other => return Err(bad(format!("unknown status `{other}`"))),
        };
        rows.push(ResultRow {
            scenario: rec[0].to_string(),
            method: rec[1].to_string(),
            velocity_mps: float(&rec[2])?.unwrap_or(f64::NAN),
            p_max_w: float(&rec[3])?.unwrap_or(f64::NAN),
            frames: int(&rec[4])?.unwrap_or(0),
            status,
            average_se: float(&rec[6])?,
            ptr: float(&rec[7])?,
            iterations: int(&rec[8])?,
            sweeps: int(&rec[9])?,
            detail: rec[10].to_string(),
        });
    }
    Ok(rows)
}

/// Paths of the files a run writes into `dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub results_csv: PathBuf,
    pub results_json: PathBuf,
    pub traces_json: PathBuf,
    pub timings_csv: PathBuf,
    pub td_csv: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        OutputPaths {
            results_csv: dir.join("results.csv"),
            results_json: dir.join("results.json"),
            traces_json: dir.join("traces.json"),
            timings_csv: dir.join("timings.csv"),
            td_csv: dir.join("td_curve.csv"),
        }
    }
}
