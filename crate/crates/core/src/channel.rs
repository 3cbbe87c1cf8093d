//! Directional antenna gain, link SNR, temporal channel correlation and the
//! pilot-based channel estimation error.
//!
//! The estimation error combines a noise term that shrinks with the pilot
//! energy `k * gamma` and a Doppler term that grows as the channel
//! decorrelates between the pilots and the end of the frame. The Monte-Carlo
//! simulator in this module reproduces that value from first principles: a
//! block-constant unit-variance complex Gaussian gain observed through `k`
//! unit-power pilots, estimated with the closed-form MMSE rule, then evolved
//! as a first-order Markov process.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Denominator constant in the correlation exponent n * f_d / (0.423 B).
pub const CORRELATION_BANDWIDTH_FACTOR: f64 = 0.423;

/// Radio and signal parameters, all linear SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// Antenna gain constant G_0.
    pub antenna_gain: f64,
    /// Channel power at 1 m (linear).
    pub beta0: f64,
    /// Receiver noise power, W.
    pub noise_power: f64,
    pub carrier_hz: f64,
    /// System bandwidth B used by the channel correlation model, Hz.
    pub bandwidth_hz: f64,
    /// Effective signal bandwidth used by the ranging information, Hz.
    pub effective_bandwidth_hz: f64,
    /// Baseband-carrier correlation.
    pub chi: f64,
    /// Channel correlation level in (0, 1).
    pub kappa: f64,
    /// Symbol period T_0, s.
    pub symbol_period: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            antenna_gain: 2.28,
            beta0: db_to_linear(-80.0),
            noise_power: dbm_to_watts(-110.0),
            carrier_hz: 4.9e9,
            bandwidth_hz: 1e6,
            effective_bandwidth_hz: 1e6,
            chi: 0.32f64.sqrt(),
            kappa: 0.8,
            symbol_period: 66.7e-6,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("antenna_gain", self.antenna_gain),
            ("beta0", self.beta0),
            ("noise_power", self.noise_power),
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("effective_bandwidth_hz", self.effective_bandwidth_hz),
            ("symbol_period", self.symbol_period),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::invalid(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        if !(self.chi >= 0.0 && self.chi < 1.0) {
            return Err(Error::invalid(format!("chi must lie in [0, 1), got {}", self.chi)));
        }
        Ok(())
    }

    /// SNR delivered per watt of transmit power at half-beamwidth `beam` and distance `d`.
    pub fn snr_per_watt(&self, beam: f64, d: f64) -> f64 {
        self.antenna_gain * self.beta0 / (beam * beam * d * d * self.noise_power)
    }

    /// Exponent per symbol of the correlation function, f_d / (0.423 B).
    pub fn decorrelation_rate(&self, doppler_hz: f64) -> f64 {
        doppler_hz / (CORRELATION_BANDWIDTH_FACTOR * self.bandwidth_hz)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

fn check_beamwidth(beam: f64) -> Result<()> {
    if !(beam > 0.0 && beam < std::f64::consts::FRAC_PI_2) {
        return Err(Error::invalid(format!("half beamwidth must lie in (0, pi/2), got {beam}")));
    }
    Ok(())
}

/// Flat-top directional gain: G_0 / beam^2 strictly inside +-beam on both axes, else 0.
pub fn antenna_gain(beam: f64, offset_theta: f64, offset_phi: f64, params: &RadioParams) -> Result<f64> {
    check_beamwidth(beam)?;
    let inside = offset_theta.abs() < beam && offset_phi.abs() < beam;
    Ok(if inside { params.antenna_gain / (beam * beam) } else { 0.0 })
}

pub fn instantaneous_snr(power: f64, beam: f64, d: f64, params: &RadioParams) -> Result<f64> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::invalid(format!("power must be positive, got {power}")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid(format!("distance must be positive, got {d}")));
    }
    check_beamwidth(beam)?;
    Ok(power * params.snr_per_watt(beam, d))
}

/// Channel correlation after `symbols` symbols: kappa^(symbols * f_d / (0.423 B)).
///
/// `symbols` may be fractional so continuous durations can be probed.
pub fn correlation(symbols: f64, doppler_hz: f64, params: &RadioParams) -> f64 {
    params.kappa.powf(symbols * params.decorrelation_rate(doppler_hz))
}

/// Channel estimation MSE split into its noise and Doppler parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationError {
    pub noise_term: f64,
    pub doppler_term: f64,
    pub total: f64,
}

pub fn estimation_mse(pilots: u32, gamma: f64, alpha: f64) -> Result<EstimationError> {
    if pilots == 0 {
        return Err(Error::invalid("at least one pilot symbol is required"));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("SNR must be positive, got {gamma}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("correlation must lie in (0, 1], got {alpha}")));
    }
    Ok(estimation_mse_unchecked(pilots as f64, gamma, alpha))
}

pub(crate) fn estimation_mse_unchecked(pilots: f64, gamma: f64, alpha: f64) -> EstimationError {
    let energy = pilots * gamma;
    let noise_term = 1.0 / (1.0 + energy);
    let doppler_term = 2.0 * energy * (1.0 - alpha) / (1.0 + energy);
    EstimationError {
        noise_term,
        doppler_term,
        total: noise_term + doppler_term,
    }
}

/// One configuration of the Markov-channel simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovTrial {
    pub pilots: u32,
    /// Number of Markov steps between the pilot block and the evaluated symbol.
    pub gap: u32,
    pub gamma: f64,
    /// Per-symbol correlation.
    pub alpha_step: f64,
}

impl MarkovTrial {
    /// Trial whose cumulative correlation over `gap` steps equals `alpha`.
    pub fn with_cumulative_alpha(pilots: u32, gap: u32, gamma: f64, alpha: f64) -> Self {
        let alpha_step = if gap == 0 { 1.0 } else { alpha.powf(1.0 / gap as f64) };
        MarkovTrial {
            pilots,
            gap,
            gamma,
            alpha_step,
        }
    }

    pub fn cumulative_alpha(&self) -> f64 {
        self.alpha_step.powi(self.gap as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMse {
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    pub trials: u64,
}

const MC_CHUNKS: u64 = 64;

fn complex_normal<R: Rng>(rng: &mut R) -> (f64, f64) {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

fn markov_chunk(trial: &MarkovTrial, trials: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt_gamma = trial.gamma.sqrt();
    let gain = sqrt_gamma / (1.0 + trial.pilots as f64 * trial.gamma);
    let innovation = (1.0 - trial.alpha_step * trial.alpha_step).max(0.0).sqrt();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let (mut h_re, mut h_im) = complex_normal(&mut rng);
        // Unit-power pilots x_j = 1, so x^H y is the plain sum of observations.
        let (mut acc_re, mut acc_im) = (0.0, 0.0);
        for _ in 0..trial.pilots {
            let (n_re, n_im) = complex_normal(&mut rng);
            acc_re += sqrt_gamma * h_re + n_re;
            acc_im += sqrt_gamma * h_im + n_im;
        }
        let (est_re, est_im) = (gain * acc_re, gain * acc_im);
        for _ in 0..trial.gap {
            let (s_re, s_im) = complex_normal(&mut rng);
            h_re = trial.alpha_step * h_re + innovation * s_re;
            h_im = trial.alpha_step * h_im + innovation * s_im;
        }
        let err = (h_re - est_re).powi(2) + (h_im - est_im).powi(2);
        sum += err;
        sum_sq += err * err;
    }
    (sum, sum_sq)
}

/// Empirical MSE of the MMSE channel estimate after `trial.gap` Markov steps.
///
/// Trials are split into a fixed number of independently seeded chunks, so
/// the result depends only on `seed`, never on the worker count.
pub fn simulate_markov_channel(trial: &MarkovTrial, trials: u64, seed: u64) -> Result<MonteCarloMse> {
    if trials == 0 {
        return Err(Error::invalid("Monte-Carlo trial count must be at least 1"));
    }
    if trial.pilots == 0 {
        return Err(Error::invalid("at least one pilot symbol is required"));
    }
    if !(trial.gamma >= 0.0 && trial.gamma.is_finite()) {
        return Err(Error::invalid(format!("SNR must be non-negative, got {}", trial.gamma)));
    }
    if !(trial.alpha_step >= 0.0 && trial.alpha_step <= 1.0) {
        return Err(Error::invalid(format!("per-step correlation must lie in [0, 1], got {}", trial.alpha_step)));
    }
    let chunks = MC_CHUNKS.min(trials);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = trials / chunks + u64::from(c < trials % chunks);
            markov_chunk(trial, n, derive_seed(seed, c))
        })
        .collect();
    let (sum, sum_sq) = partials.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = trials as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(MonteCarloMse {
        mean,
        std_error: (var / n).sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn table_defaults() {
        let p = RadioParams::default();
        assert!((p.beta0 - 1e-8).abs() < 1e-22);
        assert!((p.noise_power - 1e-14).abs() < 1e-28);
        assert!((p.chi * p.chi - 0.32).abs() < 1e-15);
        p.validate().unwrap();
    }

    #[test]
    fn gain_examples() {
        let p = RadioParams::default();
        assert!((antenna_gain(0.5, 0.0, 0.0, &p).unwrap() - 9.12).abs() < 1e-12);
        assert_eq!(antenna_gain(0.1, 0.2, 0.0, &p).unwrap(), 0.0);
        assert_eq!(antenna_gain(0.1, 0.1, 0.0, &p).unwrap(), 0.0);
        assert_eq!(antenna_gain(0.1, 0.0, -0.1, &p).unwrap(), 0.0);
        assert!(antenna_gain(0.0, 0.0, 0.0, &p).is_err());
        assert!(antenna_gain(std::f64::consts::FRAC_PI_2, 0.0, 0.0, &p).is_err());
    }

    #[test]
    fn snr_examples() {
        let p = RadioParams::default();
        let g = instantaneous_snr(1.0, 0.1, 100.0, &p).unwrap();
        assert!((g / 2.28e4 - 1.0).abs() < 1e-12);
        assert!((linear_to_db(g) - 43.579_348_47).abs() < 1e-8);
        let g2 = instantaneous_snr(2.0, 0.1, 100.0, &p).unwrap();
        assert!((g2 / g - 2.0).abs() < 1e-12);
        let g4 = instantaneous_snr(1.0, 0.05, 100.0, &p).unwrap();
        assert!((g4 / g - 4.0).abs() < 1e-12);
        assert!(instantaneous_snr(0.0, 0.1, 100.0, &p).is_err());
        assert!(instantaneous_snr(1.0, 0.1, 0.0, &p).is_err());
    }

    #[test]
    fn correlation_examples() {
        let p = RadioParams::default();
        assert_eq!(correlation(100.0, 0.0, &p), 1.0);
        assert_eq!(correlation(0.0, 817.2, &p), 1.0);
        // kappa^(100 * 817.2 / 423000) evaluated at 30 digits.
        assert!((correlation(100.0, 817.2, &p) - 0.957_806_566_750_818).abs() < 1e-14);
    }

    #[test]
    fn mse_examples() {
        let e = estimation_mse(5, 10.0, 1.0).unwrap();
        assert!((e.total - 1.0 / 51.0).abs() < 1e-15);
        assert_eq!(e.doppler_term, 0.0);
        let e = estimation_mse(5, 10.0, 0.95).unwrap();
        assert!((e.total - 0.117_647_058_823_529_4).abs() < 1e-15);
        let e = estimation_mse(5, 1e-12, 0.9).unwrap();
        assert!((e.total - 1.0).abs() < 1e-10);
        assert!(estimation_mse(0, 10.0, 1.0).is_err());
    }

    #[test]
    fn monte_carlo_limits() {
        let perfect = MarkovTrial {
            pilots: 200,
            gap: 0,
            gamma: 1e6,
            alpha_step: 1.0,
        };
        let r = simulate_markov_channel(&perfect, 20_000, 1).unwrap();
        assert!(r.mean < 1e-6);

        let silent = MarkovTrial::with_cumulative_alpha(5, 4, 1e-9, 0.9);
        let r = simulate_markov_channel(&silent, 200_000, 2).unwrap();
        assert!((r.mean - 1.0).abs() < 0.02);
    }

    #[test]
    fn monte_carlo_matches_closed_form_at_spec_point() {
        let trial = MarkovTrial::with_cumulative_alpha(5, 10, 10.0, 0.95);
        let r = simulate_markov_channel(&trial, 1_000_000, 11).unwrap();
        let expect = estimation_mse(5, 10.0, 0.95).unwrap().total;
        assert!((r.mean / expect - 1.0).abs() < 0.02, "{} vs {}", r.mean, expect);
        assert!((r.mean - expect).abs() < 3.0 * r.std_error + 1e-12);
    }

    #[test]
    fn monte_carlo_is_deterministic_per_seed() {
        let trial = MarkovTrial::with_cumulative_alpha(3, 5, 2.0, 0.9);
        let a = simulate_markov_channel(&trial, 5000, 99).unwrap();
        let b = simulate_markov_channel(&trial, 5000, 99).unwrap();
        assert_eq!(a, b);
        assert!(simulate_markov_channel(&trial, 0, 99).is_err());
    }

    proptest! {
        #[test]
        fn noise_term_identity(k in 1u32..500, gamma in 1e-3..1e4f64, alpha in 0.01..=1.0f64) {
            let e = estimation_mse(k, gamma, alpha).unwrap();
            prop_assert!((e.noise_term * (1.0 + k as f64 * gamma) - 1.0).abs() < 1e-12);
            prop_assert!((e.total - e.noise_term - e.doppler_term).abs() < 1e-15);
            let energy = k as f64 * gamma;
            prop_assert!(e.total >= 0.0 && e.total <= 1.0 + 2.0 * energy / (1.0 + energy) + 1e-12);
        }

        #[test]
        fn mse_decreases_with_pilots_when_static(k in 1u32..500, gamma in 1e-3..1e4f64) {
            let a = estimation_mse(k, gamma, 1.0).unwrap().total;
            let b = estimation_mse(k + 1, gamma, 1.0).unwrap().total;
            prop_assert!(b < a);
        }

        #[test]
        fn mse_increases_with_gap(k in 1u32..100, gamma in 1e-2..1e3f64, n in 0.0..5000.0f64) {
            let p = RadioParams::default();
            let a = estimation_mse(k, gamma, correlation(n, 500.0, &p)).unwrap().total;
            let b = estimation_mse(k, gamma, correlation(n + 1.0, 500.0, &p)).unwrap().total;
            prop_assert!(b > a);
        }

        #[test]
        fn in_beam_gain_times_square_is_constant(beam in 0.01..1.5f64, frac in 0.0..0.99f64) {
            let p = RadioParams::default();
            let g = antenna_gain(beam, frac * beam, -frac * beam, &p).unwrap();
            prop_assert!((g * beam * beam - p.antenna_gain).abs() < 1e-12);
        }
    }
}
