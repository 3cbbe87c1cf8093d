//! Posterior Cramér-Rao machinery for 3D node localization.
//!
//! Pilot symbols contribute range, elevation and azimuth information as
//! rank-one terms along the direction vectors of each parameter. Between
//! slots the inertial motion model couples consecutive positions with
//! information `D = diag(1/sigma^2)`, and the per-slot information follows the
//! Schur-complement recursion
//!
//! ```text
//! J_t = J_tt - D (J_{t-1} + D)^-1 D,   J_tt = J_pilot + D (pilot slot) or D
//! ```
//!
//! Without measurements this is `(J_{t-1}^-1 + D^-1)^-1`, i.e. covariance
//! grows by the motion variance each slot, which is what
//! [`propagate_inertial`] applies in closed form for long data phases.

use serde::{Deserialize, Serialize};

use crate::channel::RadioParams;
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scenario::{LinkGeometry, MotionNoise, SPEED_OF_LIGHT};

/// Symmetric PSD 3x3 Fisher information matrix, 1/m^2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Fim3(Mat3);

impl Fim3 {
    pub const ZERO: Fim3 = Fim3(Mat3::ZERO);

    /// Wraps a matrix, symmetrizing away round-off.
    pub fn new(m: Mat3) -> Self {
        Fim3(m.symmetrize())
    }

    pub fn isotropic(information: f64) -> Self {
        Fim3(Mat3::diag(information, information, information))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn scale(&self, s: f64) -> Fim3 {
        Fim3(self.0.scale(s))
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        self.0.symmetric_eigenvalues()
    }

    /// Eigenvalues >= -`rel_tol` times the largest entry (floored at 1).
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let scale = self.0.max_abs().max(1.0);
        self.0.is_finite() && self.eigenvalues()[0] >= -rel_tol * scale
    }

    /// True when `self - other` is PSD within the relative tolerance.
    pub fn dominates(&self, other: &Fim3, rel_tol: f64) -> bool {
        let diff = Fim3(self.0 - other.0);
        let scale = self.0.max_abs().max(other.0.max_abs()).max(1.0);
        diff.eigenvalues()[0] >= -rel_tol * scale
    }
}

impl std::ops::Add for Fim3 {
    type Output = Fim3;
    fn add(self, rhs: Fim3) -> Fim3 {
        Fim3(self.0 + rhs.0)
    }
}

/// Gradients of range, elevation and azimuth with respect to the ground-node position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionVectors {
    pub range: Vec3,
    pub elevation: Vec3,
    pub azimuth: Vec3,
}

pub fn direction_vectors(geom: &LinkGeometry) -> Result<DirectionVectors> {
    if geom.degenerate {
        return Err(Error::DegenerateGeometry(
            "UAV directly overhead: azimuth undefined, skip angle information".into(),
        ));
    }
    Ok(DirectionVectors {
        range: range_direction(geom),
        elevation: elevation_direction(geom),
        azimuth: azimuth_direction(geom),
    })
}

fn range_direction(geom: &LinkGeometry) -> Vec3 {
    let (st, ct) = geom.theta.sin_cos();
    let (sp, cp) = geom.phi.sin_cos();
    Vec3::new(-cp * ct, -sp * ct, -st)
}

fn elevation_direction(geom: &LinkGeometry) -> Vec3 {
    let (st, ct) = geom.theta.sin_cos();
    let (sp, cp) = geom.phi.sin_cos();
    Vec3::new(cp * st, sp * st, -ct).scale(1.0 / geom.d)
}

fn azimuth_direction(geom: &LinkGeometry) -> Vec3 {
    let ct = geom.theta.cos();
    let (sp, cp) = geom.phi.sin_cos();
    Vec3::new(sp, -cp, 0.0).scale(1.0 / (geom.d * ct))
}

/// Knobs of the localization information model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationParams {
    /// Sum of the per-antenna array geometry factors.
    pub array_factor: f64,
    /// Multiplier applied to the elevation intensity.
    pub elevation_scale: f64,
    /// Multiplier applied to the azimuth intensity.
    pub azimuth_scale: f64,
    /// Multiplier turning the PCRB root into an uncertainty radius.
    pub conf_scale: f64,
    /// Per-axis prior standard deviation of both node positions, m.
    pub prior_std: f64,
    pub uav_noise: MotionNoise,
    pub gn_noise: MotionNoise,
}

impl Default for LocalizationParams {
    fn default() -> Self {
        let noise = MotionNoise {
            sigma_x: 0.005,
            sigma_y: 0.005,
            sigma_z: 0.005,
        };
        LocalizationParams {
            array_factor: 8.0,
            elevation_scale: 1.0,
            azimuth_scale: 1.0,
            conf_scale: 1.0,
            prior_std: 1.0,
            uav_noise: noise,
            gn_noise: noise,
        }
    }
}

impl LocalizationParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("array_factor", self.array_factor),
            ("elevation_scale", self.elevation_scale),
            ("azimuth_scale", self.azimuth_scale),
            ("conf_scale", self.conf_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.prior_std > 0.0 && self.prior_std.is_finite()) {
            return Err(Error::invalid(format!("prior_std must be positive, got {}", self.prior_std)));
        }
        for noise in [self.uav_noise, self.gn_noise] {
            noise.validate()?;
            if noise.sigmas().iter().any(|s| *s == 0.0) {
                return Err(Error::invalid("motion noise must be > 0 for the information recursion"));
            }
        }
        Ok(())
    }
}

/// Range and angle information intensities per pilot symbol.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RangingIntensities {
    pub range: f64,
    pub elevation: f64,
    pub azimuth: f64,
}

pub fn ranging_intensities(gamma: f64, radio: &RadioParams, params: &LocalizationParams) -> Result<RangingIntensities> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("SNR must be >= 0, got {gamma}")));
    }
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    let two_pi_sq = 8.0 * std::f64::consts::PI.powi(2);
    let zeta = radio.effective_bandwidth_hz;
    let range = two_pi_sq * zeta * zeta * (1.0 - radio.chi * radio.chi) * gamma / c2;
    let angle = two_pi_sq * (zeta * radio.chi + radio.carrier_hz).powi(2) * gamma * params.array_factor / c2;
    Ok(RangingIntensities {
        range,
        elevation: angle * params.elevation_scale,
        azimuth: angle * params.azimuth_scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotFim {
    pub fim: Fim3,
    /// Set when the geometry was overhead and only range information was kept.
    pub angles_skipped: bool,
}

pub fn pilot_fim(geom: &LinkGeometry, intensities: &RangingIntensities) -> PilotFim {
    let q_r = range_direction(geom);
    let mut m = q_r.outer(&q_r).scale(intensities.range);
    if geom.degenerate {
        return PilotFim {
            fim: Fim3::new(m),
            angles_skipped: true,
        };
    }
    let q_t = elevation_direction(geom);
    let q_p = azimuth_direction(geom);
    m += q_t.outer(&q_t).scale(intensities.elevation);
    m += q_p.outer(&q_p).scale(intensities.azimuth);
    PilotFim {
        fim: Fim3::new(m),
        angles_skipped: false,
    }
}

/// Inertial information diag(1/sigma^2); infinite sigma contributes nothing.
pub fn inertial_information(noise: &MotionNoise) -> Result<Mat3> {
    noise.validate()?;
    let inv = |s: f64| {
        if s == 0.0 {
            Err(Error::invalid("zero motion noise gives unbounded inertial information"))
        } else {
            Ok(1.0 / (s * s))
        }
    };
    Ok(Mat3::diag(inv(noise.sigma_x)?, inv(noise.sigma_y)?, inv(noise.sigma_z)?))
}

/// One slot of the information recursion.
pub fn recursive_fim(prev: &Fim3, current: Option<&Fim3>, noise: &MotionNoise) -> Result<Fim3> {
    let d = inertial_information(noise)?;
    let measured = current.map(|f| *f.matrix()).unwrap_or(Mat3::ZERO);
    if d == Mat3::ZERO {
        return Ok(Fim3::new(measured));
    }
    let coupled = (*prev.matrix() + d)
        .inverse()
        .ok_or_else(|| Error::Numerical("prior plus inertial information is singular".into()))?;
    Ok(Fim3::new(measured + d - d * coupled * d))
}

/// Applies `steps` measurement-free slots at once.
pub fn propagate_inertial(prev: &Fim3, noise: &MotionNoise, steps: u64) -> Result<Fim3> {
    if steps == 0 {
        return Ok(*prev);
    }
    let d = inertial_information(noise)?;
    if d == Mat3::ZERO {
        return Ok(Fim3::ZERO);
    }
    match prev.matrix().inverse() {
        Some(cov) => {
            let [sx, sy, sz] = noise.sigmas();
            let s = steps as f64;
            let grown = cov + Mat3::diag(sx * sx * s, sy * sy * s, sz * sz * s);
            grown
                .inverse()
                .map(Fim3::new)
                .ok_or_else(|| Error::Numerical("propagated covariance is singular".into()))
        }
        None => {
            let mut j = *prev;
            for _ in 0..steps {
                j = recursive_fim(&j, None, noise)?;
            }
            Ok(j)
        }
    }
}

/// trace(J^-1) in m^2; infinity when J is singular (unbounded error).
pub fn pcrb_trace(j: &Fim3) -> Result<f64> {
    if !j.matrix().is_finite() {
        return Err(Error::Numerical("information matrix has non-finite entries".into()));
    }
    Ok(j.matrix().inverse().map_or(f64::INFINITY, |inv| inv.trace()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRadius {
    pub l: f64,
}

pub fn uncertainty_radius(j: &Fim3, conf_scale: f64) -> Result<UncertaintyRadius> {
    if !(conf_scale >= 0.0) {
        return Err(Error::invalid(format!("confidence scale must be >= 0, got {conf_scale}")));
    }
    Ok(UncertaintyRadius {
        l: conf_scale * pcrb_trace(j)?.sqrt(),
    })
}

/// Inputs for one frame of the localization timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSchedule {
    pub pilots: u32,
    pub data: u32,
    pub gamma: f64,
    pub geometry: LinkGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRadii {
    pub uav: f64,
    pub gn: f64,
}

/// Uncertainty radii of both nodes predicted at the first slot of every frame.
///
/// The prediction at a frame start uses everything up to the previous slot
/// plus one inertial step; the frame's own pilots only help later frames.
pub fn frame_start_radii(
    schedule: &[FrameSchedule],
    radio: &RadioParams,
    params: &LocalizationParams,
) -> Result<Vec<FrameRadii>> {
    let prior = Fim3::isotropic(1.0 / (params.prior_std * params.prior_std));
    let mut uav = prior;
    let mut gn = prior;
    let mut out = Vec::with_capacity(schedule.len());
    for frame in schedule {
        let uav_pred = propagate_inertial(&uav, &params.uav_noise, 1)?;
        let gn_pred = propagate_inertial(&gn, &params.gn_noise, 1)?;
        out.push(FrameRadii {
            uav: uncertainty_radius(&uav_pred, params.conf_scale)?.l,
            gn: uncertainty_radius(&gn_pred, params.conf_scale)?.l,
        });

        // Gradients with respect to the UAV position are the negated GN
        // gradients, so both nodes share one pilot information matrix.
        let intensities = ranging_intensities(frame.gamma, radio, params)?;
        let meas = pilot_fim(&frame.geometry, &intensities).fim;
        for _ in 0..frame.pilots {
            uav = recursive_fim(&uav, Some(&meas), &params.uav_noise)?;
            gn = recursive_fim(&gn, Some(&meas), &params.gn_noise)?;
        }
        uav = propagate_inertial(&uav, &params.uav_noise, frame.data as u64)?;
        gn = propagate_inertial(&gn, &params.gn_noise, frame.data as u64)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::scenario::{link_geometry, NodeState};

    fn geometry(uav: Vec3, gn: Vec3) -> LinkGeometry {
        link_geometry(&NodeState::stationary(uav), &NodeState::stationary(gn)).unwrap()
    }

    fn flat_geometry() -> LinkGeometry {
        LinkGeometry {
            d: 1.0,
            d_h: 1.0,
            d_z: 0.0,
            theta: 0.0,
            phi: 0.0,
            degenerate: false,
        }
    }

    fn same_up_to_sign(a: Vec3, b: Vec3) -> bool {
        (a - b).norm() < 1e-12 || (a + b).norm() < 1e-12
    }

    #[test]
    fn axis_aligned_direction_vectors() {
        let q = direction_vectors(&flat_geometry()).unwrap();
        assert!(same_up_to_sign(q.range, Vec3::new(1.0, 0.0, 0.0)));
        assert!(same_up_to_sign(q.elevation, Vec3::new(0.0, 0.0, 1.0)));
        assert!(same_up_to_sign(q.azimuth, Vec3::new(0.0, 1.0, 0.0)));
    }

    #[test]
    fn elevation_vector_at_45_degrees() {
        let g = geometry(Vec3::new(100.0, 0.0, 100.0), Vec3::ZERO);
        let q = direction_vectors(&g).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2 / g.d;
        assert!(same_up_to_sign(q.elevation, Vec3::new(-s, 0.0, s)));
        assert!((q.elevation.x() + 0.005).abs() < 1e-15 || (q.elevation.x() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn overhead_geometry_is_rejected() {
        let g = geometry(Vec3::new(0.0, 0.0, 100.0), Vec3::ZERO);
        assert!(matches!(direction_vectors(&g), Err(Error::DegenerateGeometry(_))));
        let f = pilot_fim(
            &g,
            &RangingIntensities {
                range: 2.0,
                elevation: 5.0,
                azimuth: 5.0,
            },
        );
        assert!(f.angles_skipped);
        assert!((f.fim.matrix().get(2, 2) - 2.0).abs() < 1e-15);
        assert!((f.fim.matrix().trace() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn intensity_examples() {
        let radio = RadioParams::default();
        let params = LocalizationParams::default();
        let zero = ranging_intensities(0.0, &radio, &params).unwrap();
        assert_eq!(zero, RangingIntensities::default());
        let one = ranging_intensities(1.0, &radio, &params).unwrap();
        assert!((one.range - 5.973_589_680_414_707e-4).abs() < 1e-15);
        let two = ranging_intensities(2.0, &radio, &params).unwrap();
        assert!((two.range / one.range - 2.0).abs() < 1e-12);
        assert!((two.elevation / one.elevation - 2.0).abs() < 1e-12);
        assert_eq!(one.elevation, one.azimuth);
    }

    #[test]
    fn pilot_fim_examples() {
        let g = flat_geometry();
        assert_eq!(pilot_fim(&g, &RangingIntensities::default()).fim, Fim3::ZERO);
        let f = pilot_fim(
            &g,
            &RangingIntensities {
                range: 1.0,
                elevation: 0.0,
                azimuth: 0.0,
            },
        );
        assert_eq!(*f.fim.matrix(), Mat3::diag(1.0, 0.0, 0.0));
    }

    #[test]
    fn recursion_without_measurements_decays() {
        let noise = MotionNoise::isotropic(0.005).unwrap();
        let a = 1.0 / 2.5e-5;
        let mut j = Fim3::isotropic(a);
        let mut prev_trace = pcrb_trace(&j).unwrap();
        for _ in 0..1000 {
            j = recursive_fim(&j, None, &noise).unwrap();
            let t = pcrb_trace(&j).unwrap();
            assert!(t > prev_trace);
            prev_trace = t;
        }
        assert!(j.matrix().get(0, 0) < 1e-3 * a);
    }

    #[test]
    fn recursion_with_certain_prior_returns_inertial_information() {
        let noise = MotionNoise::isotropic(0.005).unwrap();
        let j = recursive_fim(&Fim3::isotropic(1e12), None, &noise).unwrap();
        let d = 1.0 / 2.5e-5;
        for i in 0..3 {
            assert!((j.matrix().get(i, i) / d - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn recursion_without_motion_coupling_is_measurement() {
        let noise = MotionNoise::isotropic(f64::INFINITY).unwrap();
        let meas = Fim3::new(Mat3([[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.0]]));
        let j = recursive_fim(&Fim3::isotropic(7.0), Some(&meas), &noise).unwrap();
        assert_eq!(j, meas);
    }

    #[test]
    fn pcrb_examples() {
        assert!((pcrb_trace(&Fim3::isotropic(1.0)).unwrap() - 3.0).abs() < 1e-15);
        let j = Fim3::new(Mat3::diag(4.0, 1.0, 1.0));
        assert!((pcrb_trace(&j).unwrap() - 2.25).abs() < 1e-15);
        assert!((pcrb_trace(&j.scale(10.0)).unwrap() - 0.225).abs() < 1e-15);
        assert_eq!(pcrb_trace(&Fim3::ZERO).unwrap(), f64::INFINITY);
    }

    #[test]
    fn radius_examples() {
        let r = uncertainty_radius(&Fim3::isotropic(1.0), 1.0).unwrap();
        assert!((r.l - 3f64.sqrt()).abs() < 1e-15);
        let r = uncertainty_radius(&Fim3::isotropic(100.0), 1.0).unwrap();
        assert!((r.l - 0.173_205_080_756_887_7).abs() < 1e-15);
        let r3 = uncertainty_radius(&Fim3::isotropic(100.0), 3.0).unwrap();
        assert!((r3.l - 3.0 * r.l).abs() < 1e-15);
    }

    #[test]
    fn closed_form_propagation_matches_iteration() {
        let noise = MotionNoise::new(0.005, 0.01, 0.02).unwrap();
        let start = Fim3::new(Mat3([[900.0, 20.0, 5.0], [20.0, 400.0, -3.0], [5.0, -3.0, 50.0]]));
        let mut iterated = start;
        for _ in 0..250 {
            iterated = recursive_fim(&iterated, None, &noise).unwrap();
        }
        let jumped = propagate_inertial(&start, &noise, 250).unwrap();
        let diff = (*iterated.matrix() - *jumped.matrix()).max_abs();
        assert!(diff < 1e-9 * iterated.matrix().max_abs());
    }

    #[test]
    fn timeline_radii_shrink_with_more_pilots() {
        let radio = RadioParams::default();
        let params = LocalizationParams::default();
        let g = geometry(Vec3::new(0.0, 100.0, 100.0), Vec3::new(100.0, 100.0, 0.0));
        let sched = |pilots| {
            vec![
                FrameSchedule {
                    pilots,
                    data: 50,
                    gamma: 300.0,
                    geometry: g,
                };
                4
            ]
        };
        let few = frame_start_radii(&sched(1), &radio, &params).unwrap();
        let many = frame_start_radii(&sched(20), &radio, &params).unwrap();
        assert_eq!(few[0], many[0]);
        for i in 1..4 {
            assert!(many[i].gn < few[i].gn);
            assert!(many[i].uav < few[i].uav);
        }
    }

    fn random_geometry() -> impl Strategy<Value = LinkGeometry> {
        (-500.0..500.0f64, -100.0..100.0f64, 10.0..150.0f64).prop_filter_map("overhead", |(x, y, z)| {
            let g = geometry(Vec3::new(x, y, z), Vec3::ZERO);
            (g.d_h > 1.0).then_some(g)
        })
    }

    proptest! {
        #[test]
        fn range_vector_is_unit(g in random_geometry()) {
            let q = direction_vectors(&g).unwrap();
            prop_assert!((q.range.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pilot_fim_is_psd_and_sign_invariant(g in random_geometry(), gamma in 0.0..1e4f64) {
            let radio = RadioParams::default();
            let params = LocalizationParams::default();
            let lam = ranging_intensities(gamma, &radio, &params).unwrap();
            let f = pilot_fim(&g, &lam).fim;
            prop_assert!(f.is_psd(1e-10));
            let q = direction_vectors(&g).unwrap();
            let flipped = (-q.range).outer(&-q.range).scale(lam.range)
                + (-q.elevation).outer(&-q.elevation).scale(lam.elevation)
                + q.azimuth.outer(&q.azimuth).scale(lam.azimuth);
            prop_assert!((*f.matrix() - flipped).max_abs() <= 1e-12 * f.matrix().max_abs().max(1.0));
        }

        #[test]
        fn measurements_never_lose_information(g in random_geometry(), gamma in 0.0..1e3f64, prior in 1.0..1e6f64) {
            let radio = RadioParams::default();
            let params = LocalizationParams::default();
            let meas = pilot_fim(&g, &ranging_intensities(gamma, &radio, &params).unwrap()).fim;
            let prev = Fim3::isotropic(prior);
            let with = recursive_fim(&prev, Some(&meas), &params.gn_noise).unwrap();
            let without = recursive_fim(&prev, None, &params.gn_noise).unwrap();
            prop_assert!(with.dominates(&without, 1e-10));
            prop_assert!(pcrb_trace(&with).unwrap() <= pcrb_trace(&without).unwrap() * (1.0 + 1e-12));
        }
    }
}
