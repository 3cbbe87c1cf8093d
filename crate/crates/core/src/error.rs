use std::path::PathBuf;

use thiserror::Error;

/// Constraint labels used when a plan or frame is reported infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Effective SNR must reach the threshold.
    EffectiveSnr,
    /// Pilot and data durations must be positive.
    PositiveDurations,
    /// Beamwidth must lie inside its configured limits.
    Beamwidth,
    /// Per-frame power positive and total power within budget.
    PowerBudget,
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let label = match self {
            Constraint::EffectiveSnr => "effective SNR >= threshold",
            Constraint::PositiveDurations => "positive integer durations",
            Constraint::Beamwidth => "beamwidth limits",
            Constraint::PowerBudget => "power budget",
        };
        f.write_str(label)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The link cannot meet the SNR threshold for any transmission duration.
    #[error("infeasible link: {0}")]
    InfeasibleLink(String),

    #[error("frame {frame} infeasible: violates {constraint}")]
    InfeasibleFrame { frame: usize, constraint: Constraint },

    #[error("infeasible power budget: need at least {required:.6e} W, have {available:.6e} W")]
    InfeasibleBudget { required: f64, available: f64 },

    #[error("numerical conditioning failure: {0}")]
    Numerical(String),

    #[error("search too large: {required:.3e} evaluations exceed the limit of {limit:.3e}")]
    ResourceLimit { required: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Serialization { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Returns a copy of an infeasibility error relabelled with a frame index.
    pub(crate) fn at_frame(self, frame: usize) -> Self {
        match self {
            Error::InfeasibleLink(_) => Error::InfeasibleFrame {
                frame,
                constraint: Constraint::EffectiveSnr,
            },
            Error::InfeasibleFrame { constraint, .. } => Error::InfeasibleFrame { frame, constraint },
            other => other,
        }
    }

    /// True for errors that describe an infeasible problem instance rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleLink(_) | Error::InfeasibleFrame { .. } | Error::InfeasibleBudget { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
