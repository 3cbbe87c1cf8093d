//! Per-frame spectral efficiency and the feasibility bounds derived from the
//! effective-SNR constraint.

use serde::{Deserialize, Serialize};

use crate::channel::{correlation, db_to_linear, estimation_mse_unchecked, RadioParams};
use crate::error::{Constraint, Error, Result};
use crate::scenario::{doppler_shift, link_geometry, LinearPass, LinkGeometry};

/// Relative slack when comparing the effective SNR against its threshold.
pub const SNR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Effective SNR threshold, linear.
    pub gamma_th: f64,
    /// Data-duration ceiling in symbols when the Doppler bound is vacuous.
    pub td_cap_symbols: u32,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            gamma_th: db_to_linear(3.0),
            td_cap_symbols: 10_000,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_th > 0.0 && self.gamma_th.is_finite()) {
            return Err(Error::invalid(format!("gamma_th must be positive, got {}", self.gamma_th)));
        }
        if self.td_cap_symbols == 0 {
            return Err(Error::invalid("td_cap_symbols must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamLimits {
    pub min: f64,
    pub max: f64,
}

impl Default for BeamLimits {
    fn default() -> Self {
        BeamLimits {
            min: 5f64.to_radians(),
            max: 30f64.to_radians(),
        }
    }
}

impl BeamLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min <= self.max && self.max < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid(format!(
                "beam limits must satisfy 0 < min <= max < pi/2, got [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, beam: f64) -> bool {
        beam >= self.min * (1.0 - 1e-12) && beam <= self.max * (1.0 + 1e-12)
    }
}

/// Decision variables of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    /// Pilot symbols k.
    pub pilots: u32,
    /// Data symbols n.
    pub data: u32,
    /// Half beamwidth, rad.
    pub beamwidth: f64,
    /// Transmit power, W.
    pub power: f64,
}

impl FramePlan {
    pub fn pilot_duration(&self, symbol_period: f64) -> f64 {
        self.pilots as f64 * symbol_period
    }

    pub fn data_duration(&self, symbol_period: f64) -> f64 {
        self.data as f64 * symbol_period
    }
}

/// Per-frame environment: geometry at the frame and its Doppler shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameContext {
    pub geometry: LinkGeometry,
    pub doppler_hz: f64,
}

impl FrameContext {
    pub fn snr_per_watt(&self, beam: f64, radio: &RadioParams) -> f64 {
        radio.snr_per_watt(beam, self.geometry.d)
    }

    pub fn snr(&self, plan: &FramePlan, radio: &RadioParams) -> f64 {
        plan.power * self.snr_per_watt(plan.beamwidth, radio)
    }
}

/// Frame contexts along a straight pass, one frame every `period_symbols` symbols.
pub fn pass_contexts(
    pass: &LinearPass,
    frames: usize,
    period_symbols: u32,
    radio: &RadioParams,
) -> Result<Vec<FrameContext>> {
    let doppler_hz = doppler_shift(pass.relative_speed(), radio.carrier_hz);
    (0..frames)
        .map(|i| {
            let (uav, gn) = pass.at_slot(i as u64 * period_symbols as u64, radio.symbol_period);
            Ok(FrameContext {
                geometry: link_geometry(&uav, &gn).map_err(|e| e.at_frame(i))?,
                doppler_hz,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub gamma: f64,
    /// Channel correlation across the data phase.
    pub alpha: f64,
    /// Channel estimation MSE at the end of the frame.
    pub delta_sq: f64,
    pub gamma_e: f64,
    /// Spectral efficiency, bits/s/Hz.
    pub se: f64,
}

/// gamma (1 - delta^2) / (1 + gamma delta^2), floored at zero.
pub fn effective_snr(gamma: f64, delta_sq: f64) -> f64 {
    (gamma * (1.0 - delta_sq) / (1.0 + gamma * delta_sq)).max(0.0)
}

/// SE through the estimation error and the effective SNR. `data` may be fractional.
pub fn frame_metrics(pilots: u32, data: f64, gamma: f64, doppler_hz: f64, radio: &RadioParams) -> FrameMetrics {
    let alpha = correlation(data, doppler_hz, radio);
    let delta_sq = estimation_mse_unchecked(pilots as f64, gamma, alpha).total;
    let gamma_e = effective_snr(gamma, delta_sq);
    let k = pilots as f64;
    FrameMetrics {
        gamma,
        alpha,
        delta_sq,
        gamma_e,
        se: data / (k + data) * gamma_e.ln_1p() / std::f64::consts::LN_2,
    }
}

/// Same SE written directly in (k, n, gamma):
/// n/(k+n) log2(A1 / (A2 - 2 k gamma^2 kappa^(n f_d / 0.423B))).
///
/// Agrees with [`frame_metrics`] wherever the effective SNR is not floored.
pub fn frame_se_closed_form(pilots: u32, data: f64, gamma: f64, doppler_hz: f64, radio: &RadioParams) -> f64 {
    let k = pilots as f64;
    let a1 = 1.0 + k * gamma + gamma + k * gamma * gamma;
    let a2 = 1.0 + k * gamma + gamma + 2.0 * k * gamma * gamma;
    let a3 = radio.decorrelation_rate(doppler_hz) / radio.symbol_period;
    let td = data * radio.symbol_period;
    let decay = radio.kappa.powf(td * a3);
    td / (k * radio.symbol_period + td) * (a1 / (a2 - 2.0 * k * gamma * gamma * decay)).log2()
}

fn check_plan_shape(plan: &FramePlan) -> Result<()> {
    if plan.pilots == 0 || plan.data == 0 {
        return Err(Error::InfeasibleFrame {
            frame: 0,
            constraint: Constraint::PositiveDurations,
        });
    }
    if !(plan.power > 0.0 && plan.power.is_finite()) {
        return Err(Error::InfeasibleFrame {
            frame: 0,
            constraint: Constraint::PowerBudget,
        });
    }
    if !(plan.beamwidth > 0.0 && plan.beamwidth < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InfeasibleFrame {
            frame: 0,
            constraint: Constraint::Beamwidth,
        });
    }
    Ok(())
}

/// Frame SE, rejecting plans that miss the effective SNR threshold.
pub fn frame_se(plan: &FramePlan, ctx: &FrameContext, radio: &RadioParams, link: &LinkParams) -> Result<FrameMetrics> {
    check_plan_shape(plan)?;
    let gamma = ctx.snr(plan, radio);
    let m = frame_metrics(plan.pilots, plan.data as f64, gamma, ctx.doppler_hz, radio);
    if m.gamma_e < link.gamma_th * (1.0 - SNR_TOLERANCE) {
        return Err(Error::InfeasibleFrame {
            frame: 0,
            constraint: Constraint::EffectiveSnr,
        });
    }
    Ok(m)
}

pub fn average_se(plans: &[FramePlan], ctxs: &[FrameContext], radio: &RadioParams, link: &LinkParams) -> Result<f64> {
    if plans.is_empty() || plans.len() != ctxs.len() {
        return Err(Error::invalid(format!(
            "need one context per plan and at least one frame, got {} plans and {} contexts",
            plans.len(),
            ctxs.len()
        )));
    }
    let mut total = 0.0;
    for (i, (plan, ctx)) in plans.iter().zip(ctxs).enumerate() {
        total += frame_se(plan, ctx, radio, link).map_err(|e| e.at_frame(i))?.se;
    }
    Ok(total / plans.len() as f64)
}

/// Average SE with the effective SNR floored instead of enforced.
pub fn average_se_unchecked(plans: &[FramePlan], ctxs: &[FrameContext], radio: &RadioParams) -> f64 {
    let total: f64 = plans
        .iter()
        .zip(ctxs)
        .map(|(p, c)| frame_metrics(p.pilots, p.data as f64, c.snr(p, radio), c.doppler_hz, radio).se)
        .sum();
    total / plans.len().max(1) as f64
}

/// Largest data length in symbols (continuous) that keeps the effective SNR at the threshold.
///
/// Returns the cap when the channel never decorrelates.
pub fn max_data_symbols(pilots: u32, gamma: f64, doppler_hz: f64, radio: &RadioParams, link: &LinkParams) -> Result<f64> {
    if pilots == 0 {
        return Err(Error::invalid("at least one pilot symbol is required"));
    }
    let cap = link.td_cap_symbols as f64;
    if gamma <= link.gamma_th {
        return Err(Error::InfeasibleLink(format!(
            "SNR {gamma:.4e} does not exceed the threshold {:.4e}",
            link.gamma_th
        )));
    }
    let energy = pilots as f64 * gamma;
    let bound = (gamma - link.gamma_th) / (gamma + gamma * link.gamma_th);
    // Smallest correlation that keeps delta^2 within the bound.
    let min_alpha = (2.0 * energy + 1.0 - bound * (1.0 + energy)) / (2.0 * energy);
    if min_alpha >= 1.0 {
        return Err(Error::InfeasibleLink(format!(
            "noise alone breaks the SNR threshold with {pilots} pilots at SNR {gamma:.4e}"
        )));
    }
    let rate = radio.decorrelation_rate(doppler_hz);
    if rate == 0.0 {
        return Ok(cap);
    }
    Ok((min_alpha.ln() / (radio.kappa.ln() * rate)).min(cap))
}

/// [`max_data_symbols`] in seconds.
pub fn max_transmission_duration(
    pilots: u32,
    gamma: f64,
    doppler_hz: f64,
    radio: &RadioParams,
    link: &LinkParams,
) -> Result<f64> {
    Ok(max_data_symbols(pilots, gamma, doppler_hz, radio, link)? * radio.symbol_period)
}

/// Upper bound on delta^2 implied by the SNR threshold.
pub fn delta_sq_bound(gamma: f64, gamma_th: f64) -> f64 {
    (gamma - gamma_th) / (gamma + gamma * gamma_th)
}

/// Smallest SNR meeting the threshold for `pilots` pilots and decorrelation `b2 = 1 - alpha`.
///
/// Positive root of D1 g^2 + g_th (k+1) g + g_th = 0 with D1 = 2 k b2 g_th + 2 k b2 - k.
pub fn min_snr(pilots: u32, b2: f64, gamma_th: f64) -> Result<f64> {
    if pilots == 0 {
        return Err(Error::invalid("at least one pilot symbol is required"));
    }
    let k = pilots as f64;
    let d1 = 2.0 * k * b2 * gamma_th + 2.0 * k * b2 - k;
    if d1 >= 0.0 {
        return Err(Error::InfeasibleLink(format!(
            "decorrelation 1-alpha = {b2:.4e} too large: no power meets the SNR threshold"
        )));
    }
    let b = gamma_th * (k + 1.0);
    let mut disc = b * b - 4.0 * d1 * gamma_th;
    if disc.abs() < 1e-12 * b * b {
        disc = disc.max(0.0);
    }
    // (-b - sqrt(disc)) / (2 D1) written without cancellation.
    Ok((b + disc.sqrt()) / (-2.0 * d1))
}

pub fn min_power(pilots: u32, b2: f64, gamma_th: f64, snr_per_watt: f64) -> Result<f64> {
    if !(snr_per_watt > 0.0) {
        return Err(Error::invalid("SNR per watt must be positive"));
    }
    Ok(min_snr(pilots, b2, gamma_th)? / snr_per_watt)
}

/// Validates every constraint of a plan set: durations, SNR threshold, beam limits and budget.
pub fn check_constraints(
    plans: &[FramePlan],
    ctxs: &[FrameContext],
    radio: &RadioParams,
    link: &LinkParams,
    limits: &BeamLimits,
    p_max: f64,
) -> Result<()> {
    for (i, (plan, ctx)) in plans.iter().zip(ctxs).enumerate() {
        frame_se(plan, ctx, radio, link).map_err(|e| e.at_frame(i))?;
        if !limits.contains(plan.beamwidth) {
            return Err(Error::InfeasibleFrame {
                frame: i,
                constraint: Constraint::Beamwidth,
            });
        }
    }
    let total: f64 = plans.iter().map(|p| p.power).sum();
    if total > p_max * (1.0 + 1e-9) {
        return Err(Error::InfeasibleBudget {
            required: total,
            available: p_max,
        });
    }
    Ok(())
}
