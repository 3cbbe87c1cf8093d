//! Independent cross-checks of the analytic models and sub-solvers.
//!
//! Every check draws its own random instances from a seeded stream and
//! reports the worst measured error against a fixed tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{correlation, estimation_mse, simulate_markov_channel, MarkovTrial, RadioParams};
use crate::error::{Error, Result};
use crate::link::{
    delta_sq_bound, frame_metrics, frame_se_closed_form, max_data_symbols, min_snr, BeamLimits, LinkParams,
    SNR_TOLERANCE,
};
use crate::linalg::Vec3;
use crate::localization::{
    direction_vectors, frame_start_radii, pilot_fim, ranging_intensities, recursive_fim, Fim3, FrameSchedule,
    LocalizationParams, RangingIntensities,
};
use crate::optimizer::{allocate_power, optimal_beamwidth, pilot_length, sca_data_length, OptimizerConfig, PowerFrame};
use crate::scenario::{doppler_shift, link_geometry, LinkGeometry, NodeState};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    /// Worst error found, in the check's own units.
    pub measured: f64,
    pub tolerance: f64,
    pub instances: usize,
    /// Worst instance, human readable.
    pub detail: String,
}

impl OracleCheck {
    fn at_most(name: &str, measured: f64, tolerance: f64, instances: usize, detail: String) -> Self {
        OracleCheck {
            name: name.to_string(),
            passed: measured <= tolerance,
            measured,
            tolerance,
            instances,
            detail,
        }
    }
}

impl std::fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (limit {:.3e}) over {} instances; {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.instances,
            self.detail
        )
    }
}

/// Deliberate model corruption for exercising the checks themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of the elevation ranging intensity.
    NegateElevation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSettings {
    pub seed: u64,
    pub mc_trials: u64,
    /// Markov steps between the pilots and the evaluated symbol.
    pub mc_gap: u32,
    pub geometries: usize,
    pub data_frames: usize,
    pub pilot_configs: usize,
    pub local_search_starts: usize,
    pub power_instances: usize,
    pub beam_geometries: usize,
    pub beam_grid_points: usize,
    pub se_plans: usize,
    pub fault: Fault,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            seed: 7,
            mc_trials: 1_000_000,
            mc_gap: 10,
            geometries: 1000,
            data_frames: 100,
            pilot_configs: 100,
            local_search_starts: 5,
            power_instances: 50,
            beam_geometries: 100,
            beam_grid_points: 2000,
            se_plans: 1000,
            fault: Fault::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_all(settings: &OracleSettings, radio: &RadioParams, link: &LinkParams) -> Result<OracleReport> {
    Ok(OracleReport {
        checks: vec![
            markov_mse(settings)?,
            direction_vector_gradients(settings)?,
            pilot_fim_psd(settings, radio)?,
            data_length_vs_grid(settings, radio, link)?,
            pilot_length_vs_local_search(settings, radio, link)?,
            power_vs_projected_gradient(settings, radio, link)?,
            beamwidth_vs_grid(settings, radio)?,
            se_identity(settings, radio, link)?,
            duration_bound(settings, radio, link)?,
        ],
    })
}

fn rng_for(settings: &OracleSettings, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, stream))
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Monte-Carlo MSE of the Markov channel against the closed form on a 3x3x3 grid.
pub fn markov_mse(settings: &OracleSettings) -> Result<OracleCheck> {
    if settings.mc_trials == 0 {
        return Err(Error::invalid("Monte-Carlo trial count must be at least 1"));
    }
    let mut worst = (0.0, String::new());
    let mut count = 0;
    for (i, k) in [1u32, 5, 20].into_iter().enumerate() {
        for (j, gamma) in [0.1, 1.0, 10.0].into_iter().enumerate() {
            for (l, alpha) in [0.99, 0.95, 0.8].into_iter().enumerate() {
                let trial = MarkovTrial::with_cumulative_alpha(k, settings.mc_gap, gamma, alpha);
                let stream = (i * 9 + j * 3 + l) as u64;
                let mc = simulate_markov_channel(&trial, settings.mc_trials, derive_seed(settings.seed, stream))?;
                let exact = estimation_mse(k, gamma, trial.cumulative_alpha())?.total;
                let rel = (mc.mean - exact).abs() / exact;
                count += 1;
                if rel >= worst.0 {
                    worst = (rel, format!("k={k} gamma={gamma} alpha={alpha}: mc {:.6} vs {:.6}", mc.mean, exact));
                }
            }
        }
    }
    Ok(OracleCheck::at_most("markov_mse", worst.0, 0.02, count, worst.1))
}

fn random_geometry<R: Rng>(rng: &mut R) -> (Vec3, Vec3) {
    loop {
        let uav = Vec3::new(
            rng.random_range(0.0..1000.0),
            rng.random_range(0.0..200.0),
            rng.random_range(20.0..100.0),
        );
        let gn = Vec3::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..200.0), 0.0);
        let dh = (uav.x() - gn.x()).hypot(uav.y() - gn.y());
        if dh > 1.0 {
            return (uav, gn);
        }
    }
}

fn angles(uav: Vec3, gn: Vec3) -> Result<[f64; 3]> {
    let g = link_geometry(&NodeState::stationary(uav), &NodeState::stationary(gn))?;
    Ok([g.d, g.theta, g.phi])
}

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Direction vectors against central finite differences of (d, theta, phi) in the ground node position.
pub fn direction_vector_gradients(settings: &OracleSettings) -> Result<OracleCheck> {
    let mut rng = rng_for(settings, 100);
    let h = 1e-3;
    let mut worst = (0.0, String::new());
    for _ in 0..settings.geometries {
        let (uav, gn) = random_geometry(&mut rng);
        let geom = link_geometry(&NodeState::stationary(uav), &NodeState::stationary(gn))?;
        let q = direction_vectors(&geom)?;
        let mut fd = [[0.0; 3]; 3];
        for axis in 0..3 {
            let mut e = [0.0; 3];
            e[axis] = h;
            let step = Vec3(e);
            let plus = angles(uav, gn + step)?;
            let minus = angles(uav, gn - step)?;
            for m in 0..3 {
                let diff = if m == 2 { wrap(plus[m] - minus[m]) } else { plus[m] - minus[m] };
                fd[m][axis] = diff / (2.0 * h);
            }
        }
        for (m, exact) in [q.range, q.elevation, q.azimuth].into_iter().enumerate() {
            let err = (Vec3(fd[m]) - exact).norm() / exact.norm();
            if err >= worst.0 {
                worst = (err, format!("component {m} at uav {:?} gn {:?}", uav.0, gn.0));
            }
        }
    }
    Ok(OracleCheck::at_most(
        "direction_vector_gradients",
        worst.0,
        1e-6,
        settings.geometries,
        worst.1,
    ))
}

/// Smallest eigenvalue, relative to the largest magnitude, of pilot and recursive information matrices.
pub fn pilot_fim_psd(settings: &OracleSettings, radio: &RadioParams) -> Result<OracleCheck> {
    let mut rng = rng_for(settings, 200);
    let params = LocalizationParams::default();
    let mut worst = (0.0f64, String::from("all matrices PSD"));
    for _ in 0..settings.geometries {
        let (uav, gn) = random_geometry(&mut rng);
        let geom = link_geometry(&NodeState::stationary(uav), &NodeState::stationary(gn))?;
        let gamma = log_uniform(&mut rng, 1e-2, 1e4);
        let mut lam = ranging_intensities(gamma, radio, &params)?;
        if settings.fault == Fault::NegateElevation {
            lam = RangingIntensities {
                elevation: -lam.elevation,
                ..lam
            };
        }
        let j = pilot_fim(&geom, &lam).fim;
        let prior = Fim3::isotropic(1.0);
        let rec = recursive_fim(&prior, Some(&j), &params.gn_noise)?;
        for (label, m) in [("pilot", j), ("recursive", rec)] {
            let e = m.eigenvalues();
            let scale = e[2].abs().max(e[0].abs()).max(f64::MIN_POSITIVE);
            let violation = (-e[0] / scale).max(0.0);
            if violation > worst.0 {
                worst = (violation, format!("{label} matrix at gamma={gamma:.3e}, eigenvalues {e:?}"));
            }
        }
    }
    Ok(OracleCheck::at_most("pilot_fim_psd", worst.0, 1e-10, settings.geometries, worst.1))
}

/// Data length from the linearization against the exhaustive grid.
pub fn data_length_vs_grid(settings: &OracleSettings, radio: &RadioParams, link: &LinkParams) -> Result<OracleCheck> {
    let mut rng = rng_for(settings, 300);
    let cfg = OptimizerConfig::default();
    let mut worst = (0.0f64, String::new());
    let mut done = 0;
    while done < settings.data_frames {
        let k = rng.random_range(1..=30u32);
        let gamma = log_uniform(&mut rng, 3.0, 1e4);
        let fd = doppler_shift(rng.random_range(5.0..60.0), radio.carrier_hz);
        let Ok(t_max) = max_data_symbols(k, gamma, fd, radio, link) else {
            continue;
        };
        let top = t_max.floor() as u32;
        if top == 0 {
            continue;
        }
        let start = rng.random_range(1..=top);
        let step = sca_data_length(k, gamma, fd, start, radio, link, &cfg)?;
        let se = |n: u32| frame_metrics(k, n as f64, gamma, fd, radio).se;
        let mut best = (1, se(1));
        for n in 2..=top {
            let v = se(n);
            if v > best.1 {
                best = (n, v);
            }
        }
        let gap = step.data.abs_diff(best.0) as f64;
        let ascent = se(start) - step.se;
        let err = if ascent > 1e-12 { f64::INFINITY } else { gap };
        if err >= worst.0 {
            worst = (
                err,
                format!("k={k} gamma={gamma:.3e} fd={fd:.1}: got n={} grid n={}", step.data, best.0),
            );
        }
        done += 1;
    }
    Ok(OracleCheck::at_most("data_length_vs_grid", worst.0, 1.0, done, worst.1))
}

/// Pilot enumeration against multi-start integer hill climbing.
pub fn pilot_length_vs_local_search(
    settings: &OracleSettings,
    radio: &RadioParams,
    link: &LinkParams,
) -> Result<OracleCheck> {
    let mut rng = rng_for(settings, 400);
    let k_max = OptimizerConfig::default().pilot_k_max;
    let mut worst = (f64::NEG_INFINITY, String::new());
    let mut done = 0;
    while done < settings.pilot_configs {
        let n = rng.random_range(1..=500u32);
        let gamma = log_uniform(&mut rng, 3.0, 1e4);
        let fd = doppler_shift(rng.random_range(0.0..60.0), radio.carrier_hz);
        let Ok(exact) = pilot_length(n, gamma, fd, k_max, radio, link) else {
            continue;
        };
        let value = |k: u32| {
            let m = frame_metrics(k, n as f64, gamma, fd, radio);
            (m.gamma_e >= link.gamma_th * (1.0 - SNR_TOLERANCE)).then_some(m.se)
        };
        // Plain enumeration as a second reference.
        let brute = (1..=k_max).filter_map(value).fold(f64::NEG_INFINITY, f64::max);
        if brute != exact.se {
            return Ok(OracleCheck::at_most(
                "pilot_length_vs_local_search",
                f64::INFINITY,
                0.0,
                done,
                format!("enumeration mismatch at n={n} gamma={gamma}"),
            ));
        }
        for _ in 0..settings.local_search_starts {
            let mut k = rng.random_range(1..=k_max);
            let Some(mut v) = value(k) else {
                continue;
            };
            loop {
                let mut moved = false;
                for c in [k.saturating_sub(1).max(1), (k + 1).min(k_max)] {
                    if let Some(w) = value(c) {
                        if w > v {
                            v = w;
                            k = c;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    break;
                }
            }
            let excess = v - exact.se;
            if excess > worst.0 {
                worst = (excess, format!("n={n} gamma={gamma:.3e}: local k={k} vs k*={}", exact.pilots));
            }
        }
        done += 1;
    }
    Ok(OracleCheck::at_most(
        "pilot_length_vs_local_search",
        worst.0.max(0.0),
        0.0,
        done,
        worst.1,
    ))
}

/// Projection onto {p >= lower, sum p = total}.
fn project(y: &[f64], lower: &[f64], total: f64) -> Vec<f64> {
    let sum = |tau: f64| y.iter().zip(lower).map(|(v, l)| (v - tau).max(*l)).sum::<f64>();
    let mut lo = y.iter().zip(lower).map(|(v, l)| v - l).fold(f64::INFINITY, f64::min) - total;
    let mut hi = y.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    y.iter().zip(lower).map(|(v, l)| (v - tau).max(*l)).collect()
}

fn projected_gradient(frames: &[PowerFrame], p_max: f64) -> f64 {
    let lower: Vec<f64> = frames.iter().map(|f| f.p_min).collect();
    let objective = |p: &[f64]| frames.iter().zip(p).map(|(f, x)| f.se(*x)).sum::<f64>();
    let mut p = project(&vec![p_max / frames.len() as f64; frames.len()], &lower, p_max);
    let mut value = objective(&p);
    let mut step = p_max;
    for _ in 0..20_000 {
        let grad: Vec<f64> = frames.iter().zip(&p).map(|(f, x)| f.marginal(*x)).collect();
        let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(f64::MIN_POSITIVE);
        let y: Vec<f64> = p.iter().zip(&grad).map(|(x, g)| x + step * g / scale).collect();
        let cand = project(&y, &lower, p_max);
        let v = objective(&cand);
        if v > value {
            p = cand;
            value = v;
            step *= 1.5;
        } else {
            step *= 0.5;
            if step < 1e-16 * p_max {
                break;
            }
        }
    }
    value
}

/// Multiplier-based power split against projected gradient ascent.
pub fn power_vs_projected_gradient(
    settings: &OracleSettings,
    radio: &RadioParams,
    link: &LinkParams,
) -> Result<OracleCheck> {
    let mut rng = rng_for(settings, 500);
    let mut worst = (0.0f64, String::new());
    for inst in 0..settings.power_instances {
        let count = rng.random_range(3..=10usize);
        let mut frames = Vec::with_capacity(count);
        while frames.len() < count {
            let k = rng.random_range(1..=20u32);
            let n = rng.random_range(1..=300u32);
            let g = log_uniform(&mut rng, 50.0, 5e4);
            let alpha = correlation(n as f64, doppler_shift(rng.random_range(0.0..60.0), radio.carrier_hz), radio);
            if let Ok(gmin) = min_snr(k, 1.0 - alpha, link.gamma_th) {
                frames.push(PowerFrame {
                    pilots: k,
                    data: n,
                    snr_per_watt: g,
                    alpha,
                    p_min: gmin / g,
                });
            }
        }
        let need: f64 = frames.iter().map(|f| f.p_min).sum();
        let p_max = need * rng.random_range(1.2..20.0);
        let powers = allocate_power(&frames, p_max, 1e-9)?;
        let kkt: f64 = frames.iter().zip(&powers).map(|(f, p)| f.se(*p)).sum();
        let pg = projected_gradient(&frames, p_max);
        let gap = (pg - kkt) / pg.abs();
        let err = gap.abs();
        if err >= worst.0 {
            worst = (err, format!("instance {inst} with {count} frames: kkt {kkt:.9} vs pg {pg:.9}"));
        }
    }
    Ok(OracleCheck::at_most(
        "power_vs_projected_gradient",
        worst.0,
        1e-3,
        settings.power_instances,
        worst.1,
    ))
}

fn angle_between(a: Vec3, b: Vec3) -> f64 {
    (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

/// Angle the beam must span to cover the uncertainty segment seen from the UAV.
fn covered_span(geom: &LinkGeometry, l_uav: f64, l_gn: f64) -> f64 {
    let (near, far) = if geom.d_h - l_uav - 2.0 * l_gn >= 0.0 {
        (geom.d_h - l_uav - 2.0 * l_gn, geom.d_h - l_uav + 2.0 * l_gn)
    } else {
        (-2.0 * l_gn, 2.0 * l_gn)
    };
    angle_between(Vec3::new(near, 0.0, -geom.d_z), Vec3::new(far, 0.0, -geom.d_z))
}

/// Closed-form beamwidth against a grid search maximizing frame SE among covering beams.
pub fn beamwidth_vs_grid(settings: &OracleSettings, radio: &RadioParams) -> Result<OracleCheck> {
    let mut rng = rng_for(settings, 600);
    let limits = BeamLimits::default();
    let points = settings.beam_grid_points.max(2);
    let cell = (limits.max - limits.min) / (points - 1) as f64;
    let mut worst = (0.0f64, String::new());
    for _ in 0..settings.beam_geometries {
        let d_h: f64 = rng.random_range(0.0..300.0);
        let d_z: f64 = rng.random_range(20.0..150.0);
        let geom = LinkGeometry {
            d: d_h.hypot(d_z),
            d_h,
            d_z,
            theta: d_z.atan2(d_h),
            phi: 0.0,
            degenerate: d_h == 0.0,
        };
        let params = LocalizationParams {
            prior_std: log_uniform(&mut rng, 0.5, 30.0),
            ..LocalizationParams::default()
        };
        let pilots = rng.random_range(1..=5u32);
        let gamma = log_uniform(&mut rng, 1e-3, 10.0);
        let frame = FrameSchedule {
            pilots,
            data: 50,
            gamma,
            geometry: geom,
        };
        let radii = frame_start_radii(&[frame, frame], radio, &params)?[1];
        let closed = optimal_beamwidth(&geom, radii.uav, radii.gn, &limits)?;

        let span = covered_span(&geom, radii.uav, radii.gn);
        let se = |beam: f64| {
            if span > beam * (1.0 + 1e-12) {
                return f64::NEG_INFINITY;
            }
            let g = 0.04 * radio.snr_per_watt(beam, geom.d);
            frame_metrics(1, 10.0, g, 0.0, radio).se
        };
        let mut best = (limits.max, f64::NEG_INFINITY);
        for j in 0..points {
            let beam = limits.min + j as f64 * cell;
            let v = se(beam);
            if v > best.1 {
                best = (beam, v);
            }
        }
        let cells = (closed - best.0).abs() / cell;
        if cells >= worst.0 {
            worst = (
                cells,
                format!(
                    "d_h={d_h:.2} d_z={d_z:.2} l_u={:.3} l_n={:.3}: closed {closed:.6} grid {:.6}",
                    radii.uav, radii.gn, best.0
                ),
            );
        }
    }
    Ok(OracleCheck::at_most(
        "beamwidth_vs_grid",
        worst.0,
        1.0 + 1e-9,
        settings.beam_geometries,
        worst.1,
    ))
}

/// The two SE evaluation routes on random feasible plans.
pub fn se_identity(settings: &OracleSettings, radio: &RadioParams, link: &LinkParams) -> Result<OracleCheck> {
    let mut rng = rng_for(settings, 700);
    let mut worst = (0.0f64, String::new());
    let mut done = 0;
    while done < settings.se_plans {
        let k = rng.random_range(1..=50u32);
        let n = rng.random_range(1..=2000u32);
        let gamma = log_uniform(&mut rng, 3.0, 1e4);
        let fd = doppler_shift(rng.random_range(0.0..80.0), radio.carrier_hz);
        let m = frame_metrics(k, n as f64, gamma, fd, radio);
        if m.gamma_e < link.gamma_th {
            continue;
        }
        let err = (m.se - frame_se_closed_form(k, n as f64, gamma, fd, radio)).abs();
        if err >= worst.0 {
            worst = (err, format!("k={k} n={n} gamma={gamma:.3e} fd={fd:.1}"));
        }
        done += 1;
    }
    Ok(OracleCheck::at_most("se_identity", worst.0, 1e-9, done, worst.1))
}

/// Estimation error at the maximum data length against the threshold-implied bound.
pub fn duration_bound(settings: &OracleSettings, radio: &RadioParams, link: &LinkParams) -> Result<OracleCheck> {
    let mut rng = rng_for(settings, 800);
    let mut worst = (0.0f64, String::new());
    let mut done = 0;
    let mut attempts = 0;
    while done < settings.se_plans && attempts < 100 * settings.se_plans.max(1) {
        attempts += 1;
        let k = rng.random_range(1..=50u32);
        let gamma = log_uniform(&mut rng, 3.0, 1e4);
        let fd = doppler_shift(rng.random_range(5.0..80.0), radio.carrier_hz);
        let Ok(t) = max_data_symbols(k, gamma, fd, radio, link) else {
            continue;
        };
        if t >= link.td_cap_symbols as f64 {
            continue;
        }
        let delta = estimation_mse(k, gamma, correlation(t, fd, radio))?.total;
        let bound = delta_sq_bound(gamma, link.gamma_th);
        let err = (delta - bound).abs() / bound;
        if err >= worst.0 {
            worst = (err, format!("k={k} gamma={gamma:.3e} fd={fd:.1} t={t:.3}"));
        }
        done += 1;
    }
    Ok(OracleCheck::at_most("duration_bound", worst.0, 1e-6, done, worst.1))
}
