//! Comparison schemes: exhaustive frame search, a beam fixed at its widest,
//! a fixed frame structure, and particle swarm search over frame lengths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::FramePlan;
use crate::optimizer::{
    allocate_power, optimal_beamwidth, solve, PowerFrame, BeamStrategy, FrameStrategy, OptimizerConfig, Problem,
    Solution, SolveTrace, Strategy, SweepRecord, Termination,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub particles: u32,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub iterations: u32,
    /// Search box for pilot lengths.
    pub k_max: u32,
    /// Search box for data lengths.
    pub n_max: u32,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            particles: 200,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            iterations: 40,
            k_max: 50,
            n_max: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub k_grid_max: u32,
    pub n_grid_max: u32,
    /// Largest (frame, k, n) grid the exhaustive search accepts per sweep.
    pub max_grid_evaluations: u64,
    /// Beam used without localization; the widest allowed beam when unset.
    pub fixed_beamwidth: Option<f64>,
    pub fixed_pilots: u32,
    pub fixed_data: u32,
    pub pso: PsoConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            k_grid_max: 64,
            n_grid_max: 4096,
            max_grid_evaluations: 200_000_000,
            fixed_beamwidth: None,
            fixed_pilots: 5,
            fixed_data: 150,
            pso: PsoConfig::default(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_grid_max == 0 || self.n_grid_max == 0 || self.fixed_pilots == 0 || self.fixed_data == 0 {
            return Err(Error::invalid("grid sizes and fixed frame lengths must be >= 1"));
        }
        let p = &self.pso;
        if p.particles == 0 || p.k_max == 0 || p.n_max == 0 {
            return Err(Error::invalid("pso particles and search box must be >= 1"));
        }
        if [p.inertia, p.cognitive, p.social].iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("pso weights must be non-negative"));
        }
        if p.inertia >= 1.0 {
            return Err(Error::invalid(format!("pso inertia must be below 1, got {}", p.inertia)));
        }
        Ok(())
    }

    /// Pilot share of the fixed frame, pilots over data symbols.
    pub fn fixed_ptr(&self) -> f64 {
        self.fixed_pilots as f64 / self.fixed_data as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    UpperBound,
    NoLocalization,
    FixedFrame,
    Pso,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::UpperBound,
        Method::Proposed,
        Method::NoLocalization,
        Method::FixedFrame,
        Method::Pso,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::UpperBound => "upper_bound",
            Method::NoLocalization => "no_localization",
            Method::FixedFrame => "fixed_frame",
            Method::Pso => "pso",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

pub fn run_method(method: Method, problem: &Problem, opt: &OptimizerConfig, cfg: &BaselineConfig) -> Result<Solution> {
    match method {
        Method::Proposed => crate::optimizer::optimize(problem, opt),
        Method::UpperBound => upper_bound(problem, opt, cfg),
        Method::NoLocalization => benchmark_no_localization(problem, opt, cfg),
        Method::FixedFrame => benchmark_fixed_frame(problem, opt, cfg),
        Method::Pso => benchmark_pso(problem, cfg),
    }
}

/// Joint (k, n) grid per frame with the closed-form beam and power steps.
pub fn upper_bound(problem: &Problem, opt: &OptimizerConfig, cfg: &BaselineConfig) -> Result<Solution> {
    cfg.validate()?;
    let required = problem.frames.len() as f64 * cfg.k_grid_max as f64 * cfg.n_grid_max as f64;
    if required > cfg.max_grid_evaluations as f64 {
        return Err(Error::ResourceLimit {
            required,
            limit: cfg.max_grid_evaluations as f64,
        });
    }
    let strategy = Strategy {
        frame: FrameStrategy::Exhaustive {
            k_max: cfg.k_grid_max,
            n_max: cfg.n_grid_max,
        },
        beam: BeamStrategy::Localized,
    };
    solve(problem, opt, &strategy)
}

/// Proposed loop with the beam frozen, by default at its widest.
pub fn benchmark_no_localization(problem: &Problem, opt: &OptimizerConfig, cfg: &BaselineConfig) -> Result<Solution> {
    cfg.validate()?;
    let strategy = Strategy {
        frame: FrameStrategy::Iterative,
        beam: BeamStrategy::Fixed {
            beamwidth: cfg.fixed_beamwidth.unwrap_or(problem.beam.max),
        },
    };
    solve(problem, opt, &strategy)
}

/// Fixed pilot and data lengths; beam and power still optimized.
pub fn benchmark_fixed_frame(problem: &Problem, opt: &OptimizerConfig, cfg: &BaselineConfig) -> Result<Solution> {
    cfg.validate()?;
    let strategy = Strategy {
        frame: FrameStrategy::Fixed {
            pilots: cfg.fixed_pilots,
            data: cfg.fixed_data,
        },
        beam: BeamStrategy::Localized,
    };
    solve(problem, opt, &strategy)
}

/// Beam and power for given frame lengths; infeasible layouts get a penalty below -1.
fn evaluate_lengths(problem: &Problem, lengths: &[(u32, u32)]) -> (f64, Vec<FramePlan>) {
    let n = problem.frames.len();
    let mut plans: Vec<FramePlan> = lengths
        .iter()
        .map(|&(pilots, data)| FramePlan {
            pilots,
            data,
            beamwidth: problem.beam.max,
            power: problem.p_max / n as f64,
        })
        .collect();
    if let Ok(radii) = problem.radii(&plans) {
        for (i, (plan, r)) in plans.iter_mut().zip(radii).enumerate() {
            if let Ok(b) = optimal_beamwidth(&problem.frames[i].geometry, r.uav, r.gn, &problem.beam) {
                plan.beamwidth = b;
            }
        }
    }
    let mut broken = 0usize;
    let mut frames = Vec::with_capacity(n);
    for (i, plan) in plans.iter().enumerate() {
        match PowerFrame::new(plan, &problem.frames[i], &problem.radio, &problem.link) {
            Ok(f) if f.p_min.is_finite() => frames.push(f),
            _ => broken += 1,
        }
    }
    if broken > 0 {
        return (-1.0 - broken as f64 / n as f64, plans);
    }
    match allocate_power(&frames, problem.p_max, 1e-9) {
        Ok(powers) => {
            for (plan, p) in plans.iter_mut().zip(powers) {
                plan.power = p;
            }
            if problem.check(&plans).is_err() {
                return (-1.0 - 1.0 / n as f64, plans);
            }
            (problem.objective(&plans), plans)
        }
        Err(_) => {
            let required: f64 = frames.iter().map(|f| f.p_min).sum();
            let excess = ((required - problem.p_max) / required).clamp(0.0, 1.0);
            (-1.0 - excess, plans)
        }
    }
}

/// Global-best particle swarm over relaxed per-frame (k, n), rounded for evaluation.
///
/// Particle 0 starts at the default frame lengths; all velocities start at zero.
pub fn benchmark_pso(problem: &Problem, cfg: &BaselineConfig) -> Result<Solution> {
    cfg.validate()?;
    problem.validate()?;
    let pso = &cfg.pso;
    let frames = problem.frames.len();
    let dims = 2 * frames;
    let lower = vec![1.0; dims];
    let upper: Vec<f64> = (0..dims)
        .map(|d| if d % 2 == 0 { pso.k_max as f64 } else { pso.n_max as f64 })
        .collect();
    let init = OptimizerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(pso.seed, 0x9e0));

    let mut positions: Vec<Vec<f64>> = (0..pso.particles)
        .map(|p| {
            (0..dims)
                .map(|d| {
                    if p == 0 {
                        let v = if d % 2 == 0 { init.init_pilots } else { init.init_data };
                        (v as f64).clamp(lower[d], upper[d])
                    } else {
                        rng.random_range(lower[d]..=upper[d])
                    }
                })
                .collect()
        })
        .collect();
    let mut velocities = vec![vec![0.0; dims]; pso.particles as usize];
    let v_limit: Vec<f64> = (0..dims).map(|d| 0.2 * (upper[d] - lower[d]).max(1.0)).collect();

    let decode = |x: &[f64]| -> Vec<(u32, u32)> {
        x.chunks(2)
            .map(|c| (c[0].round().max(1.0) as u32, c[1].round().max(1.0) as u32))
            .collect()
    };
    let evaluate_all = |positions: &[Vec<f64>]| -> Vec<(f64, Vec<FramePlan>)> {
        positions
            .par_iter()
            .map(|x| evaluate_lengths(problem, &decode(x)))
            .collect()
    };

    let first = evaluate_all(&positions);
    let mut personal: Vec<(f64, Vec<f64>)> = first.iter().zip(&positions).map(|(e, x)| (e.0, x.clone())).collect();
    let mut best_index = argmax(first.iter().map(|e| e.0));
    let mut global = (first[best_index].0, positions[best_index].clone(), first[best_index].1.clone());
    let initial_objective = first[0].0;
    let mut sweeps = Vec::with_capacity(pso.iterations as usize);

    for _ in 0..pso.iterations {
        for (i, (x, v)) in positions.iter_mut().zip(velocities.iter_mut()).enumerate() {
            for d in 0..dims {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                v[d] = pso.inertia * v[d]
                    + pso.cognitive * r1 * (personal[i].1[d] - x[d])
                    + pso.social * r2 * (global.1[d] - x[d]);
                v[d] = v[d].clamp(-v_limit[d], v_limit[d]);
                x[d] = (x[d] + v[d]).clamp(lower[d], upper[d]);
            }
        }
        let evals = evaluate_all(&positions);
        for (i, (e, x)) in evals.iter().zip(&positions).enumerate() {
            if e.0 > personal[i].0 {
                personal[i] = (e.0, x.clone());
            }
        }
        best_index = argmax(evals.iter().map(|e| e.0));
        if evals[best_index].0 > global.0 {
            global = (evals[best_index].0, positions[best_index].clone(), evals[best_index].1.clone());
        }
        sweeps.push(SweepRecord {
            objective: global.0,
            blocks: Vec::new(),
            plans: global.2.clone(),
        });
    }

    let plans = global.2;
    problem.check(&plans)?;
    Ok(Solution {
        average_se: problem.objective(&plans),
        plans,
        trace: SolveTrace {
            initial_objective,
            sweeps,
            termination: Termination::IterationLimit,
        },
    })
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
