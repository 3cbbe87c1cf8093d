//! Acceptance suite. One PASS/FAIL line per criterion; exits nonzero if any fail.
//!
//! Run with `cargo test -p ilac-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use ilac_core::baselines::Method;
use ilac_core::harness::{self, build_problem, run_experiment, ExperimentConfig, ResultRow, RunOptions, Status, TdRow};
use ilac_core::link::frame_metrics;
use ilac_core::optimizer::{optimize, Solution};
use ilac_core::oracles::{self, OracleCheck, OracleSettings};

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Outcome { name, passed, detail }
    }

    fn failed(name: &'static str, e: impl std::fmt::Display) -> Self {
        Outcome::new(name, false, format!("error: {e}"))
    }
}

fn config(preset: &str) -> ExperimentConfig {
    harness::preset(preset)
        .and_then(|f| f.resolve())
        .unwrap_or_else(|e| panic!("preset {preset}: {e}"))
}

fn solve_cell(cfg: &ExperimentConfig, v: f64, p: f64) -> ilac_core::Result<(Solution, f64)> {
    let problem = build_problem(cfg, v, p)?;
    let start = Instant::now();
    let sol = optimize(&problem, &cfg.optimizer)?;
    Ok((sol, start.elapsed().as_secs_f64()))
}

fn convergence() -> Outcome {
    const NAME: &str = "convergence";
    let cfg = config("fig3");
    let mut passed = true;
    let mut parts = Vec::new();
    for &p in &cfg.p_max {
        let v = cfg.velocities[0];
        let (sol, secs) = match solve_cell(&cfg, v, p) {
            Ok(x) => x,
            Err(e) => return Outcome::failed(NAME, e),
        };
        let iters = sol.trace.iterations_to_converge();
        let limit = if p >= 8.0 { 3 } else { 10 };
        let ok = sol.trace.termination == ilac_core::optimizer::Termination::Converged
            && iters <= limit
            && secs <= 60.0;
        passed &= ok;
        parts.push(format!(
            "P={p} W: {iters} iterations (limit {limit}), {} sweeps, {secs:.2} s, SE {:.4}",
            sol.trace.iterations(),
            sol.average_se
        ));
    }
    Outcome::new(NAME, passed, parts.join("; "))
}

/// SE lost by moving one frame's data length by one symbol, averaged over frames.
fn grid_cell_slack(cfg: &ExperimentConfig, v: f64, p: f64, sol: &Solution) -> f64 {
    let Ok(problem) = build_problem(cfg, v, p) else {
        return 0.0;
    };
    let mut total = 0.0;
    for (i, plan) in sol.plans.iter().enumerate() {
        let gamma = problem.snr(plan, i);
        let fd = problem.frames[i].doppler_hz;
        let at = |n: f64| frame_metrics(plan.pilots, n, gamma, fd, &cfg.radio).se;
        let here = at(plan.data as f64);
        let up = (at(plan.data as f64 + 1.0) - here).abs();
        let down = if plan.data > 1 {
            (at(plan.data as f64 - 1.0) - here).abs()
        } else {
            0.0
        };
        total += up.max(down);
    }
    total / sol.plans.len() as f64
}

fn benchmark_gap() -> Outcome {
    const NAME: &str = "benchmark_gap";
    let (v, p) = (50.0, 4.0);
    let mut cfg = config("fig5");
    cfg.velocities = vec![v];
    cfg.p_max = vec![p];
    cfg.methods = Method::ALL.to_vec();
    let out = match run_experiment(&cfg, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return Outcome::failed(NAME, e),
    };
    let se = |m: Method| -> Option<f64> {
        out.rows
            .iter()
            .find(|r: &&ResultRow| r.method == m.name() && r.status == Status::Ok)
            .and_then(|r| r.average_se)
    };
    let (Some(ub), Some(prop), Some(b1), Some(b2), Some(b3)) = (
        se(Method::UpperBound),
        se(Method::Proposed),
        se(Method::NoLocalization),
        se(Method::FixedFrame),
        se(Method::Pso),
    ) else {
        return Outcome::new(NAME, false, format!("a method did not return a plan: {:?}", out.rows));
    };
    let prop_sol = match solve_cell(&cfg, v, p) {
        Ok((s, _)) => s,
        Err(e) => return Outcome::failed(NAME, e),
    };
    let slack = grid_cell_slack(&cfg, v, p, &prop_sol);
    let ratio = prop / b1;
    let passed = ratio >= 1.5 && ub >= prop - slack && prop >= b1 && prop >= b2 && prop >= b3;
    Outcome::new(
        NAME,
        passed,
        format!(
            "ratio {ratio:.3} (limit 1.5); upper bound {ub:.6} vs proposed {prop:.6} (slack {slack:.2e}); \
             no_localization {b1:.4}, fixed_frame {b2:.4}, pso {b3:.4}"
        ),
    )
}

fn unimodality() -> Outcome {
    const NAME: &str = "unimodality";
    let cfg = config("fig4");
    let out = match run_experiment(&cfg, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return Outcome::failed(NAME, e),
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for &v in &cfg.velocities {
        let mut peaks = Vec::new();
        for &p in &cfg.p_max {
            let curve: Vec<&TdRow> = out
                .td_rows
                .iter()
                .filter(|r| r.velocity_mps == v && r.p_max_w == p)
                .collect();
            let points: Vec<(u32, f64)> = curve
                .iter()
                .filter_map(|r| r.average_se.map(|se| (r.data, se)))
                .collect();
            if points.is_empty() {
                passed = false;
                parts.push(format!("v={v} P={p}: no feasible point"));
                continue;
            }
            let local_maxima: Vec<usize> = (0..points.len())
                .filter(|&i| {
                    let left = i == 0 || points[i].1 > points[i - 1].1;
                    let right = i + 1 == points.len() || points[i].1 >= points[i + 1].1;
                    left && right
                })
                .collect();
            let (best, &(n_star, se_star)) = points
                .iter()
                .enumerate()
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                .unwrap();
            let contiguous = points.windows(2).all(|w| w[1].0 == w[0].0 + 1);
            let interior = best > 0 && best + 1 < points.len();
            let ok = local_maxima.len() == 1 && interior && contiguous;
            passed &= ok;
            peaks.push(se_star);
            parts.push(format!(
                "v={v} P={p}: peak {se_star:.4} at n={n_star}, {} local maxima, {} feasible points",
                local_maxima.len(),
                points.len()
            ));
        }
        let dominates = peaks.windows(2).all(|w| w[1] > w[0]);
        passed &= dominates;
        if !dominates {
            parts.push(format!("v={v}: peaks not increasing in power"));
        }
    }
    Outcome::new(NAME, passed, parts.join("; "))
}

/// One pilot symbol more in every frame, as a ratio change.
fn quantization_step(sol: &Solution) -> f64 {
    let data: u64 = sol.plans.iter().map(|p| p.data as u64).sum();
    sol.plans.len() as f64 / data as f64
}

fn nondecreasing(name: &str, points: &[(f64, Solution)], parts: &mut Vec<String>) -> bool {
    let mut ok = true;
    for w in points.windows(2) {
        let (a, b) = (&w[0].1, &w[1].1);
        let step = quantization_step(a).max(quantization_step(b));
        if b.ptr() < a.ptr() - step {
            ok = false;
        }
    }
    let list: Vec<String> = points.iter().map(|(x, s)| format!("{x}:{:.4}", s.ptr())).collect();
    parts.push(format!("{name} [{}]", list.join(", ")));
    ok
}

fn ptr_trend() -> Outcome {
    const NAME: &str = "ptr_trend";
    let by_v = config("fig6");
    let by_p = config("fig8");
    let p_fixed = by_v.p_max[0];
    let v_fixed = by_p.velocities[0];
    let mut parts = Vec::new();
    let collect = |cfg: &ExperimentConfig, cells: Vec<(f64, f64, f64)>| -> Result<Vec<(f64, Solution)>, String> {
        cells
            .into_iter()
            .map(|(x, v, p)| solve_cell(cfg, v, p).map(|(s, _)| (x, s)).map_err(|e| e.to_string()))
            .collect()
    };
    let velocity_points = match collect(&by_v, by_v.velocities.iter().map(|&v| (v, v, p_fixed)).collect()) {
        Ok(x) => x,
        Err(e) => return Outcome::failed(NAME, e),
    };
    let power_points = match collect(&by_p, by_p.p_max.iter().map(|&p| (p, v_fixed, p)).collect()) {
        Ok(x) => x,
        Err(e) => return Outcome::failed(NAME, e),
    };
    let a = nondecreasing(&format!("velocity at P={p_fixed} W"), &velocity_points, &mut parts);
    let b = nondecreasing(&format!("power at v={v_fixed} m/s"), &power_points, &mut parts);
    Outcome::new(NAME, a && b, parts.join("; "))
}

fn from_checks(name: &'static str, checks: Vec<ilac_core::Result<OracleCheck>>, extra: Option<(bool, String)>) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for c in checks {
        match c {
            Ok(c) => {
                passed &= c.passed;
                parts.push(format!(
                    "{} {:.3e}/{:.3e} over {}",
                    c.name, c.measured, c.tolerance, c.instances
                ));
            }
            Err(e) => {
                passed = false;
                parts.push(format!("error: {e}"));
            }
        }
    }
    if let Some((ok, text)) = extra {
        passed &= ok;
        parts.push(text);
    }
    Outcome::new(name, passed, parts.join("; "))
}

fn main() -> ExitCode {
    let settings = OracleSettings::default();
    let radio = ilac_core::channel::RadioParams::default();
    let link = ilac_core::link::LinkParams::default();

    let mut outcomes = vec![convergence(), benchmark_gap(), unimodality(), ptr_trend()];

    let start = Instant::now();
    let mc = oracles::markov_mse(&settings);
    let secs = start.elapsed().as_secs_f64();
    outcomes.push(from_checks(
        "channel_mse_oracle",
        vec![mc],
        Some((secs <= 120.0, format!("{secs:.1} s (limit 120 s)"))),
    ));
    outcomes.push(from_checks(
        "direction_vector_oracle",
        vec![
            oracles::direction_vector_gradients(&settings),
            oracles::pilot_fim_psd(&settings, &radio),
        ],
        None,
    ));
    outcomes.push(from_checks(
        "sub_solver_oracles",
        vec![
            oracles::data_length_vs_grid(&settings, &radio, &link),
            oracles::pilot_length_vs_local_search(&settings, &radio, &link),
            oracles::power_vs_projected_gradient(&settings, &radio, &link),
            oracles::beamwidth_vs_grid(&settings, &radio),
        ],
        None,
    ));
    outcomes.push(from_checks(
        "consistency_identity",
        vec![
            oracles::se_identity(&settings, &radio, &link),
            oracles::duration_bound(&settings, &radio, &link),
        ],
        None,
    ));

    let mut all = true;
    for o in &outcomes {
        all &= o.passed;
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
