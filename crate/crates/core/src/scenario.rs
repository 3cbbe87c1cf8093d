//! Node kinematics and UAV-to-ground-node link geometry.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;

/// Speed of light used throughout, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Position and velocity of one node at a slot index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub time_index: u64,
}

impl NodeState {
    pub fn new(position: Vec3, velocity: Vec3) -> Self {
        NodeState {
            position,
            velocity,
            time_index: 0,
        }
    }

    pub fn stationary(position: Vec3) -> Self {
        NodeState::new(position, Vec3::ZERO)
    }
}

/// Per-axis standard deviation of the motion perturbation, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_z: f64,
}

impl MotionNoise {
    pub fn new(sigma_x: f64, sigma_y: f64, sigma_z: f64) -> Result<Self> {
        let noise = MotionNoise {
            sigma_x,
            sigma_y,
            sigma_z,
        };
        noise.validate()?;
        Ok(noise)
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        MotionNoise::new(sigma, sigma, sigma)
    }

    pub fn sigmas(&self) -> [f64; 3] {
        [self.sigma_x, self.sigma_y, self.sigma_z]
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas().iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::invalid(format!("motion noise must be >= 0, got {:?}", self.sigmas())));
        }
        Ok(())
    }
}

/// Relative geometry of the UAV seen from the ground node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// Slant distance, m.
    pub d: f64,
    /// Horizontal distance, m.
    pub d_h: f64,
    /// Height of the UAV above the ground node, m.
    pub d_z: f64,
    /// Elevation angle, rad.
    pub theta: f64,
    /// Azimuth angle, rad.
    pub phi: f64,
    /// Set when the UAV is directly overhead and the azimuth is undefined.
    pub degenerate: bool,
}

impl LinkGeometry {
    /// Propagation delay d/c, seconds.
    pub fn delay(&self) -> f64 {
        self.d / SPEED_OF_LIGHT
    }

    /// UAV-minus-GN displacement rebuilt from (d, theta, phi).
    pub fn displacement(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(self.d * ct * cp, self.d * ct * sp, self.d * st)
    }
}

/// Advances a node by one slot of duration `slot`, adding Gaussian motion noise.
pub fn step_motion<R: Rng + ?Sized>(
    state: &NodeState,
    noise: &MotionNoise,
    slot: f64,
    rng: &mut R,
) -> Result<NodeState> {
    if !(slot > 0.0 && slot.is_finite()) {
        return Err(Error::invalid(format!("slot duration must be positive, got {slot}")));
    }
    if !state.velocity.is_finite() || !state.position.is_finite() {
        return Err(Error::invalid("node state must be finite"));
    }
    noise.validate()?;

    let mut position = state.position + state.velocity.scale(slot);
    for (axis, sigma) in noise.sigmas().into_iter().enumerate() {
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
            position.0[axis] += normal.sample(rng);
        }
    }
    Ok(NodeState {
        position,
        velocity: state.velocity,
        time_index: state.time_index + 1,
    })
}

pub fn link_geometry(uav: &NodeState, gn: &NodeState) -> Result<LinkGeometry> {
    let delta = uav.position - gn.position;
    if !delta.is_finite() {
        return Err(Error::invalid("positions must be finite"));
    }
    let d = delta.norm();
    if d == 0.0 {
        return Err(Error::DegenerateGeometry("UAV and ground node coincide".into()));
    }
    let d_h = delta.x().hypot(delta.y());
    let d_z = delta.z();
    let theta = d_z.atan2(d_h);
    let degenerate = d_h == 0.0;
    let phi = if degenerate { 0.0 } else { delta.y().atan2(delta.x()) };
    Ok(LinkGeometry {
        d,
        d_h,
        d_z,
        theta,
        phi,
        degenerate,
    })
}

/// Doppler shift for a non-negative relative speed: v * f_c / c.
pub fn doppler_shift(relative_speed: f64, carrier_hz: f64) -> f64 {
    relative_speed * carrier_hz / SPEED_OF_LIGHT
}

/// Straight-line constant-velocity pass of the UAV over a ground node.
///
/// Positions are the noise-free means; motion noise only enters the
/// localization information through [`MotionNoise`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPass {
    pub uav: NodeState,
    pub gn: NodeState,
}

impl LinearPass {
    pub fn new(uav: NodeState, gn: NodeState) -> Self {
        LinearPass { uav, gn }
    }

    /// Mean node states after `slots` slots.
    pub fn at_slot(&self, slots: u64, slot: f64) -> (NodeState, NodeState) {
        let t = slots as f64 * slot;
        let advance = |s: &NodeState| NodeState {
            position: s.position + s.velocity.scale(t),
            velocity: s.velocity,
            time_index: s.time_index + slots,
        };
        (advance(&self.uav), advance(&self.gn))
    }

    pub fn relative_speed(&self) -> f64 {
        (self.uav.velocity - self.gn.velocity).norm()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const T0: f64 = 66.7e-6;

    #[test]
    fn zero_dynamics_stay_put() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = NodeState::stationary(Vec3::ZERO);
        let next = step_motion(&s, &MotionNoise::isotropic(0.0).unwrap(), T0, &mut rng).unwrap();
        assert_eq!(next.position, Vec3::ZERO);
        assert_eq!(next.time_index, 1);
    }

    #[test]
    fn constant_velocity_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = NodeState::new(Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0));
        let next = step_motion(&s, &MotionNoise::isotropic(0.0).unwrap(), T0, &mut rng).unwrap();
        assert!((next.position.x() - 6.67e-4).abs() < 1e-15);
        assert_eq!(next.position.y(), 0.0);
    }

    #[test]
    fn non_finite_velocity_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = NodeState::new(Vec3::ZERO, Vec3::new(f64::NAN, 0.0, 0.0));
        let noise = MotionNoise::isotropic(0.0).unwrap();
        assert!(matches!(step_motion(&s, &noise, T0, &mut rng), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn motion_noise_variance_matches_configuration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = MotionNoise::isotropic(0.005).unwrap();
        let mut state = NodeState::stationary(Vec3::ZERO);
        let steps = 1_000_000;
        let mut sum = [0.0f64; 3];
        let mut sum_sq = [0.0f64; 3];
        for _ in 0..steps {
            let next = step_motion(&state, &noise, T0, &mut rng).unwrap();
            let inc = next.position - state.position;
            for a in 0..3 {
                sum[a] += inc[a];
                sum_sq[a] += inc[a] * inc[a];
            }
            state = next;
        }
        for a in 0..3 {
            let mean = sum[a] / steps as f64;
            let var = sum_sq[a] / steps as f64 - mean * mean;
            assert!((var / 2.5e-5 - 1.0).abs() < 0.01, "axis {a} variance {var}");
        }
    }

    #[test]
    fn geometry_examples() {
        let g = link_geometry(
            &NodeState::stationary(Vec3::new(100.0, 0.0, 100.0)),
            &NodeState::stationary(Vec3::ZERO),
        )
        .unwrap();
        assert!((g.d - 141.421_356_237_309_5).abs() < 1e-9);
        assert!((g.theta - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(g.phi, 0.0);
        assert!(!g.degenerate);

        let g = link_geometry(
            &NodeState::stationary(Vec3::new(0.0, 0.0, 30.0)),
            &NodeState::stationary(Vec3::ZERO),
        )
        .unwrap();
        assert_eq!(g.theta, FRAC_PI_2);
        assert_eq!(g.phi, 0.0);
        assert!(g.degenerate);

        let g = link_geometry(
            &NodeState::stationary(Vec3::new(0.0, 50.0, 50.0)),
            &NodeState::stationary(Vec3::ZERO),
        )
        .unwrap();
        assert!((g.phi - FRAC_PI_2).abs() < 1e-15);
        assert!((g.theta - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn coincident_nodes_rejected() {
        let p = NodeState::stationary(Vec3::new(1.0, 2.0, 3.0));
        assert!(matches!(link_geometry(&p, &p), Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_shift(0.0, 4.9e9), 0.0);
        assert!((doppler_shift(50.0, 4.9e9) - 817.211_474_316_2).abs() < 1e-9);
        assert!((doppler_shift(10.0, 4.9e9) - 163.442_294_863_2).abs() < 1e-9);
    }

    #[test]
    fn linear_pass_matches_stepping() {
        let pass = LinearPass::new(
            NodeState::new(Vec3::new(0.0, 100.0, 100.0), Vec3::new(50.0, 0.0, 0.0)),
            NodeState::stationary(Vec3::new(100.0, 100.0, 0.0)),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let still = MotionNoise::isotropic(0.0).unwrap();
        let mut uav = pass.uav;
        for _ in 0..250 {
            uav = step_motion(&uav, &still, T0, &mut rng).unwrap();
        }
        let (u, _) = pass.at_slot(250, T0);
        assert!((u.position - uav.position).norm() < 1e-12);
        assert_eq!(u.time_index, 250);
        assert_eq!(pass.relative_speed(), 50.0);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -1000.0..1000.0f64
    }

    proptest! {
        #[test]
        fn geometry_reconstructs_displacement(
            ux in coord(), uy in coord(), uz in coord(),
            gx in coord(), gy in coord(), gz in coord(),
        ) {
            let uav = NodeState::stationary(Vec3::new(ux, uy, uz));
            let gn = NodeState::stationary(Vec3::new(gx, gy, gz));
            prop_assume!((uav.position - gn.position).norm() > 1e-3);
            let g = link_geometry(&uav, &gn).unwrap();
            prop_assert!((g.d * g.d - (g.d_h * g.d_h + g.d_z * g.d_z)).abs() <= 1e-9 * g.d * g.d);
            let rebuilt = g.displacement();
            let truth = uav.position - gn.position;
            prop_assert!((rebuilt - truth).norm() <= 1e-9 * g.d);
            prop_assert!(g.phi > -std::f64::consts::PI && g.phi <= std::f64::consts::PI);
        }

        #[test]
        fn zero_noise_step_is_linear_in_velocity(vx in -80.0..80.0f64, vy in -80.0..80.0f64, s in 0.1..5.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let still = MotionNoise::isotropic(0.0).unwrap();
            let a = step_motion(&NodeState::new(Vec3::ZERO, Vec3::new(vx, vy, 0.0)), &still, T0, &mut rng).unwrap();
            let b = step_motion(&NodeState::new(Vec3::ZERO, Vec3::new(vx * s, vy * s, 0.0)), &still, T0, &mut rng).unwrap();
            prop_assert!((a.position.scale(s) - b.position).norm() <= 1e-15 * (1.0 + b.position.norm()));
        }

        #[test]
        fn doppler_is_homogeneous(v in 0.0..200.0f64, s in 0.0..10.0f64) {
            let a = doppler_shift(v * s, 4.9e9);
            let b = s * doppler_shift(v, 4.9e9);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}
