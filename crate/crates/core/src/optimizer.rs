//! Block-coordinate planner over data length, pilot length, beamwidth and power.
//!
//! Each sweep updates every frame's data length, then pilot length, then the
//! beamwidths from the predicted localization uncertainty, then the power
//! split. The same loop drives the baselines through [`Strategy`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{correlation, RadioParams};
use crate::error::{Constraint, Error, Result};
use crate::link::{
    average_se_unchecked, check_constraints, frame_metrics, max_data_symbols, min_snr, BeamLimits, FrameContext,
    FramePlan, LinkParams, SNR_TOLERANCE,
};
use crate::localization::{frame_start_radii, FrameRadii, FrameSchedule, LocalizationParams};
use crate::scenario::LinkGeometry;

/// Everything the planner needs about one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub radio: RadioParams,
    pub link: LinkParams,
    pub beam: BeamLimits,
    pub localization: LocalizationParams,
    pub frames: Vec<FrameContext>,
    /// Total power budget over all frames, W.
    pub p_max: f64,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.link.validate()?;
        self.beam.validate()?;
        self.localization.validate()?;
        if self.frames.is_empty() {
            return Err(Error::invalid("at least one frame is required"));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::invalid(format!("p_max must be positive, got {}", self.p_max)));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.geometry.d_z <= 0.0 {
                return Err(Error::DegenerateGeometry(format!(
                    "frame {i}: ground node must lie below the UAV"
                )));
            }
        }
        Ok(())
    }

    pub fn snr(&self, plan: &FramePlan, frame: usize) -> f64 {
        self.frames[frame].snr(plan, &self.radio)
    }

    pub fn objective(&self, plans: &[FramePlan]) -> f64 {
        average_se_unchecked(plans, &self.frames, &self.radio)
    }

    pub fn check(&self, plans: &[FramePlan]) -> Result<()> {
        check_constraints(plans, &self.frames, &self.radio, &self.link, &self.beam, self.p_max)
    }

    /// Localization radii at each frame start under `plans`.
    pub fn radii(&self, plans: &[FramePlan]) -> Result<Vec<FrameRadii>> {
        let schedule: Vec<FrameSchedule> = plans
            .iter()
            .enumerate()
            .map(|(i, p)| FrameSchedule {
                pilots: p.pilots,
                data: p.data,
                gamma: self.snr(p, i),
                geometry: self.frames[i].geometry,
            })
            .collect();
        frame_start_radii(&schedule, &self.radio, &self.localization)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_outer_iterations: u32,
    /// Relative change of the average SE between sweeps that ends the loop.
    pub convergence_tol: f64,
    pub sca_max_steps: u32,
    /// Step size, in symbols, below which the data-length iteration stops.
    pub sca_tol_symbols: f64,
    pub pilot_k_max: u32,
    /// Budget equality tolerance relative to p_max.
    pub mu_bisection_tol: f64,
    pub init_pilots: u32,
    pub init_data: u32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_outer_iterations: 50,
            convergence_tol: 1e-4,
            sca_max_steps: 60,
            sca_tol_symbols: 0.1,
            pilot_k_max: 200,
            mu_bisection_tol: 1e-9,
            init_pilots: 5,
            init_data: 95,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 || self.sca_max_steps == 0 || self.pilot_k_max == 0 {
            return Err(Error::invalid("iteration limits and pilot_k_max must be >= 1"));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol < 1.0) {
            return Err(Error::invalid(format!(
                "convergence_tol must lie in (0, 1), got {}",
                self.convergence_tol
            )));
        }
        if !(self.sca_tol_symbols > 0.0) || !(self.mu_bisection_tol > 0.0 && self.mu_bisection_tol < 1.0) {
            return Err(Error::invalid("sca_tol_symbols and mu_bisection_tol must be positive"));
        }
        if self.init_pilots == 0 || self.init_data == 0 {
            return Err(Error::invalid("initial pilot and data lengths must be >= 1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Data length

/// SE of one frame as a function of a continuous data length.
fn se_at(pilots: u32, data: f64, gamma: f64, doppler_hz: f64, radio: &RadioParams) -> f64 {
    frame_metrics(pilots, data, gamma, doppler_hz, radio).se
}

/// d(SE)/d(n) in closed form.
fn se_slope(pilots: u32, data: f64, gamma: f64, doppler_hz: f64, radio: &RadioParams) -> f64 {
    let k = pilots as f64;
    let kg = k * gamma;
    let a1 = (1.0 + gamma) * (1.0 + kg);
    let a2 = 1.0 + kg + gamma + 2.0 * kg * gamma;
    let c = 2.0 * kg * gamma;
    let rate = -radio.decorrelation_rate(doppler_hz) * radio.kappa.ln();
    let decay = (-rate * data).exp();
    let denom = a2 - c * decay;
    let h = (a1 / denom).ln();
    let dh = -c * rate * decay / denom;
    (k / (k + data).powi(2) * h + data / (k + data) * dh) / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataStep {
    pub data: u32,
    pub se: f64,
    pub sca_steps: u32,
}

/// Data length maximizing the frame SE at fixed pilots, beam and power.
///
/// Runs a trust-region linearization over the continuous length inside
/// (0, T_d^max], floors the result to whole symbols and polishes on integers.
/// The returned SE is never below the SE at `start`.
pub fn sca_data_length(
    pilots: u32,
    gamma: f64,
    doppler_hz: f64,
    start: u32,
    radio: &RadioParams,
    link: &LinkParams,
    cfg: &OptimizerConfig,
) -> Result<DataStep> {
    let t_max = max_data_symbols(pilots, gamma, doppler_hz, radio, link)?;
    let n_max = t_max.floor() as u32;
    if n_max == 0 {
        return Err(Error::InfeasibleFrame {
            frame: 0,
            constraint: Constraint::EffectiveSnr,
        });
    }
    let f = |n: f64| se_at(pilots, n, gamma, doppler_hz, radio);
    let mut t = (start.clamp(1, n_max)) as f64;
    let mut value = f(t);
    let mut radius = (t_max / 4.0).max(1.0);
    let mut steps = 0;
    while steps < cfg.sca_max_steps && radius >= cfg.sca_tol_symbols {
        steps += 1;
        let slope = se_slope(pilots, t, gamma, doppler_hz, radio);
        // The surrogate is affine, so its maximizer over the trust interval is an endpoint.
        let target = if slope > 0.0 {
            (t + radius).min(t_max)
        } else {
            (t - radius).max(1.0)
        };
        if (target - t).abs() < cfg.sca_tol_symbols {
            break;
        }
        let candidate = f(target);
        if candidate > value {
            t = target;
            value = candidate;
            radius *= 2.0;
        } else {
            radius *= 0.5;
        }
    }

    let mut best_n = (t.floor() as u32).clamp(1, n_max);
    let mut best = f(best_n as f64);
    loop {
        let mut moved = false;
        for cand in [best_n.saturating_sub(1).max(1), (best_n + 1).min(n_max)] {
            let v = f(cand as f64);
            if v > best {
                best = v;
                best_n = cand;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    if start >= 1 && start <= n_max {
        let v0 = f(start as f64);
        if v0 > best {
            best = v0;
            best_n = start;
        }
    }
    Ok(DataStep {
        data: best_n,
        se: best,
        sca_steps: steps,
    })
}

// ---------------------------------------------------------------------------
// Pilot length

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotStep {
    pub pilots: u32,
    pub se: f64,
}

/// Exact pilot length maximizing the frame SE over 1..=k_max, smallest on ties.
pub fn pilot_length(
    data: u32,
    gamma: f64,
    doppler_hz: f64,
    k_max: u32,
    radio: &RadioParams,
    link: &LinkParams,
) -> Result<PilotStep> {
    let mut best: Option<PilotStep> = None;
    for k in 1..=k_max {
        let m = frame_metrics(k, data as f64, gamma, doppler_hz, radio);
        if m.gamma_e < link.gamma_th * (1.0 - SNR_TOLERANCE) {
            continue;
        }
        if best.is_none_or(|b| m.se > b.se) {
            best = Some(PilotStep { pilots: k, se: m.se });
        }
    }
    best.ok_or(Error::InfeasibleFrame {
        frame: 0,
        constraint: Constraint::EffectiveSnr,
    })
}

/// Best (k, n) on the full grid k <= k_max, n <= n_max at fixed beam and power.
pub fn exhaustive_frame(
    gamma: f64,
    doppler_hz: f64,
    k_max: u32,
    n_max: u32,
    radio: &RadioParams,
    link: &LinkParams,
) -> Result<(u32, u32, f64)> {
    let mut best: Option<(u32, u32, f64)> = None;
    for k in 1..=k_max {
        let Ok(t_max) = max_data_symbols(k, gamma, doppler_hz, radio, link) else {
            continue;
        };
        let top = (t_max.floor() as u32).min(n_max);
        for n in 1..=top {
            let se = se_at(k, n as f64, gamma, doppler_hz, radio);
            if best.is_none_or(|b| se > b.2) {
                best = Some((k, n, se));
            }
        }
    }
    best.ok_or(Error::InfeasibleFrame {
        frame: 0,
        constraint: Constraint::EffectiveSnr,
    })
}

// ---------------------------------------------------------------------------
// Beamwidth

/// Narrowest beam covering both nodes' uncertainty regions, within the beam limits.
pub fn optimal_beamwidth(geom: &LinkGeometry, l_uav: f64, l_gn: f64, limits: &BeamLimits) -> Result<f64> {
    if geom.d_z <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "ground node at or above the UAV altitude".into(),
        ));
    }
    if !(l_uav >= 0.0 && l_gn >= 0.0) {
        return Err(Error::invalid(format!(
            "uncertainty radii must be non-negative, got {l_uav} and {l_gn}"
        )));
    }
    let span = if geom.d_h >= l_uav + 2.0 * l_gn {
        let far = geom.d_h - l_uav + 2.0 * l_gn;
        let near = geom.d_h - l_uav - 2.0 * l_gn;
        (far / geom.d_z).atan() - (near / geom.d_z).atan()
    } else {
        2.0 * (2.0 * l_gn / geom.d_z).atan()
    };
    Ok(span.max(limits.min).min(limits.max))
}

// ---------------------------------------------------------------------------
// Power

/// Per-frame data for the power split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFrame {
    pub pilots: u32,
    pub data: u32,
    /// SNR per watt at the frame's beam and distance.
    pub snr_per_watt: f64,
    /// Channel correlation across the data phase.
    pub alpha: f64,
    pub p_min: f64,
}

impl PowerFrame {
    pub fn new(plan: &FramePlan, ctx: &FrameContext, radio: &RadioParams, link: &LinkParams) -> Result<Self> {
        let g = ctx.snr_per_watt(plan.beamwidth, radio);
        let alpha = correlation(plan.data as f64, ctx.doppler_hz, radio);
        let gamma_min = min_snr(plan.pilots, 1.0 - alpha, link.gamma_th)?;
        Ok(PowerFrame {
            pilots: plan.pilots,
            data: plan.data,
            snr_per_watt: g,
            alpha,
            p_min: gamma_min / g,
        })
    }

    fn weight(&self) -> f64 {
        let (k, n) = (self.pilots as f64, self.data as f64);
        n / (n + k) / std::f64::consts::LN_2
    }

    fn shape(&self) -> (f64, f64, f64) {
        let k = self.pilots as f64;
        (k, k + 1.0, 2.0 * k * (1.0 - self.alpha))
    }

    /// Frame SE at power `p`.
    pub fn se(&self, p: f64) -> f64 {
        let (k, b, c) = self.shape();
        let g = p * self.snr_per_watt;
        self.weight() * (((1.0 + g) * (1.0 + k * g)).ln() - (1.0 + b * g + c * g * g).ln())
    }

    fn dlog(&self, g: f64) -> f64 {
        let (k, b, c) = self.shape();
        1.0 / (1.0 + g) + k / (1.0 + k * g) - (b + 2.0 * c * g) / (1.0 + b * g + c * g * g)
    }

    fn d2log(&self, g: f64) -> f64 {
        let (k, b, c) = self.shape();
        let q = 1.0 + b * g + c * g * g;
        let dq = b + 2.0 * c * g;
        -1.0 / (1.0 + g).powi(2) - k * k / (1.0 + k * g).powi(2) - (2.0 * c * q - dq * dq) / (q * q)
    }

    /// d(SE)/dP.
    pub fn marginal(&self, p: f64) -> f64 {
        self.weight() * self.snr_per_watt * self.dlog(p * self.snr_per_watt)
    }

    /// Power at which the marginal SE equals `mu`, never below `p_min`.
    pub fn power_for(&self, mu: f64) -> f64 {
        if self.marginal(self.p_min) <= mu {
            return self.p_min;
        }
        let target = mu / (self.weight() * self.snr_per_watt);
        let mut lo = self.p_min * self.snr_per_watt;
        let mut hi = lo.max(1e-300) * 2.0;
        while self.dlog(hi) > target && hi < 1e300 {
            lo = hi;
            hi *= 2.0;
        }
        let mut g = 0.5 * (lo + hi);
        for _ in 0..200 {
            let r = self.dlog(g) - target;
            if r > 0.0 {
                lo = g;
            } else {
                hi = g;
            }
            let newton = g - r / self.d2log(g);
            g = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi || r == 0.0 {
                break;
            }
        }
        g / self.snr_per_watt
    }
}

/// Power split maximizing the summed SE under the budget and the per-frame minimum powers.
pub fn allocate_power(frames: &[PowerFrame], p_max: f64, tol: f64) -> Result<Vec<f64>> {
    if frames.is_empty() {
        return Ok(Vec::new());
    }
    let required: f64 = frames.iter().map(|f| f.p_min).sum();
    if required > p_max * (1.0 + 1e-12) {
        return Err(Error::InfeasibleBudget {
            required,
            available: p_max,
        });
    }
    if frames.len() == 1 {
        return Ok(vec![p_max]);
    }
    let total = |mu: f64| frames.iter().map(|f| f.power_for(mu)).sum::<f64>();
    let mut mu_hi = frames.iter().map(|f| f.marginal(f.p_min)).fold(f64::MIN, f64::max);
    let mut mu_lo = frames.iter().map(|f| f.marginal(p_max)).fold(f64::MAX, f64::min);
    if !(mu_lo > 0.0 && mu_hi >= mu_lo) {
        return Err(Error::Numerical(format!("bad multiplier bracket [{mu_lo:e}, {mu_hi:e}]")));
    }
    let mut mu = (mu_lo * mu_hi).sqrt();
    for _ in 0..300 {
        mu = (mu_lo * mu_hi).sqrt();
        let s = total(mu);
        if (s - p_max).abs() <= tol * p_max {
            break;
        }
        if s > p_max {
            mu_lo = mu;
        } else {
            mu_hi = mu;
        }
        if mu_hi / mu_lo - 1.0 < 1e-15 {
            break;
        }
    }
    Ok(frames.iter().map(|f| f.power_for(mu)).collect())
}

// ---------------------------------------------------------------------------
// Outer loop

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FrameStrategy {
    /// Data length by trust-region linearization, then pilot length by enumeration.
    Iterative,
    /// Joint (k, n) grid per frame.
    Exhaustive { k_max: u32, n_max: u32 },
    /// Frame structure held at the given lengths.
    Fixed { pilots: u32, data: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BeamStrategy {
    /// Beam from the predicted localization uncertainty.
    Localized,
    /// Beam held at the given half-width, rad.
    Fixed { beamwidth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub frame: FrameStrategy,
    pub beam: BeamStrategy,
}

impl Strategy {
    pub const PROPOSED: Strategy = Strategy {
        frame: FrameStrategy::Iterative,
        beam: BeamStrategy::Localized,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    DataLength,
    PilotLength,
    FrameGrid,
    Beamwidth,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block: Block,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub objective: f64,
    pub blocks: Vec<BlockRecord>,
    pub plans: Vec<FramePlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub initial_objective: f64,
    pub sweeps: Vec<SweepRecord>,
    pub termination: Termination,
}

impl SolveTrace {
    /// Sweeps executed.
    pub fn iterations(&self) -> usize {
        self.sweeps.len()
    }

    /// Sweeps until the objective stopped changing; the last sweep of a converged run only confirms.
    pub fn iterations_to_converge(&self) -> usize {
        match self.termination {
            Termination::Converged => self.sweeps.len().saturating_sub(1).max(1),
            Termination::IterationLimit => self.sweeps.len(),
        }
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.sweeps.iter().map(|s| s.objective).collect()
    }

    /// Every objective value in update order, starting with the initial plan.
    pub fn block_objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.sweeps.iter().flat_map(|s| s.blocks.iter().map(|b| b.objective)))
            .collect()
    }

    /// Largest decrease between consecutive block updates.
    pub fn worst_descent(&self) -> f64 {
        self.block_objectives()
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub plans: Vec<FramePlan>,
    pub average_se: f64,
    pub trace: SolveTrace,
}

impl Solution {
    /// Total pilot time over total data time.
    pub fn ptr(&self) -> f64 {
        ptr(&self.plans)
    }
}

pub fn ptr(plans: &[FramePlan]) -> f64 {
    let k: u64 = plans.iter().map(|p| p.pilots as u64).sum();
    let n: u64 = plans.iter().map(|p| p.data as u64).sum();
    k as f64 / n as f64
}

/// Runs the proposed planner.
pub fn optimize(problem: &Problem, cfg: &OptimizerConfig) -> Result<Solution> {
    solve(problem, cfg, &Strategy::PROPOSED)
}

/// Runs the block-coordinate loop under `strategy` from its default starting plan.
pub fn solve(problem: &Problem, cfg: &OptimizerConfig, strategy: &Strategy) -> Result<Solution> {
    problem.validate()?;
    cfg.validate()?;
    let init = initial_plans(problem, cfg, strategy)?;
    solve_from(problem, cfg, strategy, init)
}

pub fn initial_plans(problem: &Problem, cfg: &OptimizerConfig, strategy: &Strategy) -> Result<Vec<FramePlan>> {
    let (pilots, data) = match strategy.frame {
        FrameStrategy::Fixed { pilots, data } => (pilots, data),
        _ => (cfg.init_pilots, cfg.init_data),
    };
    if pilots == 0 || data == 0 {
        return Err(Error::invalid("fixed frame lengths must be >= 1"));
    }
    let beamwidth = match strategy.beam {
        BeamStrategy::Localized => problem.beam.max,
        BeamStrategy::Fixed { beamwidth } => beamwidth,
    };
    let power = problem.p_max / problem.frames.len() as f64;
    let mut plans = Vec::with_capacity(problem.frames.len());
    for (i, ctx) in problem.frames.iter().enumerate() {
        let mut plan = FramePlan {
            pilots,
            data,
            beamwidth,
            power,
        };
        let gamma = ctx.snr(&plan, &problem.radio);
        let limit = max_data_symbols(pilots, gamma, ctx.doppler_hz, &problem.radio, &problem.link)
            .map_err(|e| e.at_frame(i))?;
        if (data as f64) > limit && !matches!(strategy.frame, FrameStrategy::Fixed { .. }) {
            // Shorten the data phase until the starting plan meets the threshold.
            plan.data = limit.floor() as u32;
            if plan.data == 0 {
                return Err(Error::InfeasibleFrame {
                    frame: i,
                    constraint: Constraint::EffectiveSnr,
                });
            }
        }
        plans.push(plan);
    }
    Ok(plans)
}

/// Runs the loop from a given plan set.
pub fn solve_from(
    problem: &Problem,
    cfg: &OptimizerConfig,
    strategy: &Strategy,
    mut plans: Vec<FramePlan>,
) -> Result<Solution> {
    problem.validate()?;
    cfg.validate()?;
    if plans.len() != problem.frames.len() {
        return Err(Error::invalid("one starting plan per frame is required"));
    }
    let initial_objective = problem.objective(&plans);
    let mut previous = initial_objective;
    let mut sweeps = Vec::new();
    let mut termination = Termination::IterationLimit;

    for _ in 0..cfg.max_outer_iterations {
        let mut blocks = Vec::new();
        match strategy.frame {
            FrameStrategy::Iterative => {
                data_block(problem, cfg, &mut plans)?;
                blocks.push(BlockRecord {
                    block: Block::DataLength,
                    objective: problem.objective(&plans),
                });
                pilot_block(problem, cfg, &mut plans)?;
                blocks.push(BlockRecord {
                    block: Block::PilotLength,
                    objective: problem.objective(&plans),
                });
            }
            FrameStrategy::Exhaustive { k_max, n_max } => {
                grid_block(problem, k_max, n_max, &mut plans)?;
                blocks.push(BlockRecord {
                    block: Block::FrameGrid,
                    objective: problem.objective(&plans),
                });
            }
            FrameStrategy::Fixed { .. } => {}
        }
        if strategy.beam == BeamStrategy::Localized {
            beam_block(problem, &mut plans)?;
            blocks.push(BlockRecord {
                block: Block::Beamwidth,
                objective: problem.objective(&plans),
            });
        }
        power_block(problem, cfg, &mut plans)?;
        let objective = problem.objective(&plans);
        blocks.push(BlockRecord {
            block: Block::Power,
            objective,
        });
        sweeps.push(SweepRecord {
            objective,
            blocks,
            plans: plans.clone(),
        });
        let change = (objective - previous).abs() / previous.abs().max(f64::MIN_POSITIVE);
        previous = objective;
        if change < cfg.convergence_tol {
            termination = Termination::Converged;
            break;
        }
    }

    problem.check(&plans)?;
    Ok(Solution {
        average_se: problem.objective(&plans),
        plans,
        trace: SolveTrace {
            initial_objective,
            sweeps,
            termination,
        },
    })
}

fn data_block(problem: &Problem, cfg: &OptimizerConfig, plans: &mut [FramePlan]) -> Result<()> {
    let updates: Vec<Result<u32>> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let ctx = &problem.frames[i];
            sca_data_length(
                plan.pilots,
                ctx.snr(plan, &problem.radio),
                ctx.doppler_hz,
                plan.data,
                &problem.radio,
                &problem.link,
                cfg,
            )
            .map(|s| s.data)
            .map_err(|e| e.at_frame(i))
        })
        .collect();
    for (plan, n) in plans.iter_mut().zip(updates) {
        plan.data = n?;
    }
    Ok(())
}

fn pilot_block(problem: &Problem, cfg: &OptimizerConfig, plans: &mut [FramePlan]) -> Result<()> {
    let updates: Vec<Result<u32>> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let ctx = &problem.frames[i];
            pilot_length(
                plan.data,
                ctx.snr(plan, &problem.radio),
                ctx.doppler_hz,
                cfg.pilot_k_max.max(plan.pilots),
                &problem.radio,
                &problem.link,
            )
            .map(|s| s.pilots)
            .map_err(|e| e.at_frame(i))
        })
        .collect();
    for (plan, k) in plans.iter_mut().zip(updates) {
        plan.pilots = k?;
    }
    Ok(())
}

fn grid_block(problem: &Problem, k_max: u32, n_max: u32, plans: &mut [FramePlan]) -> Result<()> {
    let updates: Vec<Result<(u32, u32)>> = plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let ctx = &problem.frames[i];
            let gamma = ctx.snr(plan, &problem.radio);
            let (k, n, se) = exhaustive_frame(gamma, ctx.doppler_hz, k_max, n_max, &problem.radio, &problem.link)
                .map_err(|e| e.at_frame(i))?;
            // Keep the current point when it lies outside the grid and is better.
            let current = se_at(plan.pilots, plan.data as f64, gamma, ctx.doppler_hz, &problem.radio);
            Ok(if current > se { (plan.pilots, plan.data) } else { (k, n) })
        })
        .collect();
    for (plan, kn) in plans.iter_mut().zip(updates) {
        let (k, n) = kn?;
        plan.pilots = k;
        plan.data = n;
    }
    Ok(())
}

fn beam_block(problem: &Problem, plans: &mut [FramePlan]) -> Result<()> {
    let radii = problem.radii(plans)?;
    for (i, (plan, r)) in plans.iter_mut().zip(radii).enumerate() {
        plan.beamwidth =
            optimal_beamwidth(&problem.frames[i].geometry, r.uav, r.gn, &problem.beam).map_err(|e| e.at_frame(i))?;
    }
    Ok(())
}

fn power_block(problem: &Problem, cfg: &OptimizerConfig, plans: &mut [FramePlan]) -> Result<()> {
    let frames = power_frames(problem, plans)?;
    let powers = allocate_power(&frames, problem.p_max, cfg.mu_bisection_tol)?;
    for (plan, p) in plans.iter_mut().zip(powers) {
        plan.power = p;
    }
    Ok(())
}

pub fn power_frames(problem: &Problem, plans: &[FramePlan]) -> Result<Vec<PowerFrame>> {
    plans
        .iter()
        .enumerate()
        .map(|(i, p)| PowerFrame::new(p, &problem.frames[i], &problem.radio, &problem.link).map_err(|e| e.at_frame(i)))
        .collect()
}
