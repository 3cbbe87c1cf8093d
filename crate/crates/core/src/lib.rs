//! Joint localization and communication planning for a UAV-to-ground link.
//!
//! The crate models a UAV serving a ground node with a directional antenna,
//! tracks the posterior localization bound of both nodes, and allocates pilot
//! length, data length, beamwidth and power per frame to maximise average
//! spectral efficiency.

pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod link;
pub mod linalg;
pub mod localization;
pub mod optimizer;
pub mod oracles;
pub mod scenario;
pub mod seed;

pub use error::{Constraint, Error, Result};
