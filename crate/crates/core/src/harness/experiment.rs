//! Runs the configured method x velocity x power matrix.
//!
//! Cells are independent and may run on any number of workers; results are
//! collected in cell order, so outputs depend only on the configuration.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{
    write_json, write_results_csv, write_td_csv, write_timings_csv, Format, OutputPaths, ResultRow, Status, TdRow,
    TimingRow, TraceRecord,
};
use crate::baselines::{run_method, Method};
use crate::error::{Error, Result};
use crate::link::pass_contexts;
use crate::optimizer::{solve, BeamStrategy, FrameStrategy, Problem, Solution, Strategy};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; the global pool when unset.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub traces: Vec<TraceRecord>,
    pub timings: Vec<TimingRow>,
    pub td_rows: Vec<TdRow>,
}

pub fn scenario_id(name: &str, velocity: f64, p_max: f64) -> String {
    format!("{name}/v{velocity}/p{p_max}")
}

/// Planning problem for one (velocity, budget) cell.
pub fn build_problem(cfg: &ExperimentConfig, velocity: f64, p_max: f64) -> Result<Problem> {
    let frames = pass_contexts(
        &cfg.pass(velocity),
        cfg.frames,
        cfg.geometry.frame_period_symbols,
        &cfg.radio,
    )?;
    Ok(Problem {
        radio: cfg.radio,
        link: cfg.link,
        beam: cfg.beam,
        localization: cfg.localization,
        frames,
        p_max,
    })
}

fn classify(e: &Error) -> Status {
    if e.is_infeasible() {
        Status::Infeasible
    } else if matches!(e, Error::ResourceLimit { .. }) {
        Status::ResourceLimit
    } else {
        Status::Error
    }
}

struct Cell {
    scenario_index: usize,
    velocity: f64,
    p_max: f64,
    method: Method,
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> (ResultRow, Option<TraceRecord>, TimingRow) {
    let scenario = scenario_id(&cfg.name, cell.velocity, cell.p_max);
    let start = Instant::now();
    let mut baselines = cfg.baselines;
    baselines.pso.seed = derive_seed(cfg.seed, cell.scenario_index as u64);
    let outcome: Result<Solution> = build_problem(cfg, cell.velocity, cell.p_max)
        .and_then(|p| run_method(cell.method, &p, &cfg.optimizer, &baselines));
    let wall_s = start.elapsed().as_secs_f64();
    let mut row = ResultRow {
        scenario: scenario.clone(),
        method: cell.method.name().to_string(),
        velocity_mps: cell.velocity,
        p_max_w: cell.p_max,
        frames: cfg.frames,
        status: Status::Ok,
        average_se: None,
        ptr: None,
        iterations: None,
        sweeps: None,
        detail: String::new(),
    };
    let trace = match outcome {
        Ok(sol) => {
            row.average_se = Some(sol.average_se);
            row.ptr = Some(sol.ptr());
            row.iterations = Some(sol.trace.iterations_to_converge());
            row.sweeps = Some(sol.trace.iterations());
            Some(TraceRecord {
                scenario: scenario.clone(),
                method: row.method.clone(),
                trace: sol.trace,
            })
        }
        Err(e) => {
            row.status = classify(&e);
            row.detail = e.to_string();
            None
        }
    };
    let timing = TimingRow {
        scenario,
        method: row.method.clone(),
        wall_s,
    };
    (row, trace, timing)
}

fn run_td_point(cfg: &ExperimentConfig, velocity: f64, p_max: f64, data: u32) -> TdRow {
    let strategy = Strategy {
        frame: FrameStrategy::Fixed {
            pilots: cfg.td_sweep.pilots,
            data,
        },
        beam: BeamStrategy::Localized,
    };
    let outcome = build_problem(cfg, velocity, p_max).and_then(|p| solve(&p, &cfg.optimizer, &strategy));
    let (status, average_se) = match outcome {
        Ok(sol) => (Status::Ok, Some(sol.average_se)),
        Err(e) => (classify(&e), None),
    };
    TdRow {
        scenario: scenario_id(&cfg.name, velocity, p_max),
        velocity_mps: velocity,
        p_max_w: p_max,
        pilots: cfg.td_sweep.pilots,
        data,
        td_s: data as f64 * cfg.radio.symbol_period,
        status,
        average_se,
    }
}

fn execute(cfg: &ExperimentConfig) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let scenarios: Vec<(f64, f64)> = cfg
        .velocities
        .iter()
        .flat_map(|v| cfg.p_max.iter().map(move |p| (*v, *p)))
        .collect();
    match cfg.kind {
        ExperimentKind::Sweep => {
            let cells: Vec<Cell> = scenarios
                .iter()
                .enumerate()
                .flat_map(|(i, (v, p))| {
                    cfg.methods.iter().map(move |m| Cell {
                        scenario_index: i,
                        velocity: *v,
                        p_max: *p,
                        method: *m,
                    })
                })
                .collect();
            let results: Vec<_> = cells.par_iter().map(|c| run_cell(cfg, c)).collect();
            for (row, trace, timing) in results {
                out.rows.push(row);
                out.traces.extend(trace);
                out.timings.push(timing);
            }
        }
        ExperimentKind::TdCurve => {
            let t = &cfg.td_sweep;
            let points: Vec<(f64, f64, u32)> = scenarios
                .iter()
                .flat_map(|(v, p)| (t.data_min..=t.data_max).map(move |n| (*v, *p, n)))
                .collect();
            out.td_rows = points.par_iter().map(|(v, p, n)| run_td_point(cfg, *v, *p, *n)).collect();
        }
    }
    out
}

pub fn run_experiment(cfg: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutput> {
    match options.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
            Ok(pool.install(|| execute(cfg)))
        }
        None => Ok(execute(cfg)),
    }
}

/// Writes the run into `dir`, creating it if needed.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path, format: Format) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = OutputPaths::in_dir(dir);
    if matches!(format, Format::Csv | Format::Both) {
        write_results_csv(&paths.results_csv, &out.rows)?;
        if !out.td_rows.is_empty() {
            write_td_csv(&paths.td_csv, &out.td_rows)?;
        }
    }
    if matches!(format, Format::Json | Format::Both) {
        write_json(&paths.results_json, &out.rows)?;
        if !out.td_rows.is_empty() {
            write_json(&dir.join("td_curve.json"), &out.td_rows)?;
        }
    }
    write_json(&paths.traces_json, &out.traces)?;
    write_timings_csv(&paths.timings_csv, &out.timings)?;
    Ok(paths)
}
