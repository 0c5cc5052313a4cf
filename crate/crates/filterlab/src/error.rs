//! Error type shared across the crate.

use thiserror::Error;

/// Errors surfaced by filterlab operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A covariance matrix failed the Cholesky positive-definiteness gate.
    #[error("covariance is not positive definite ({context})")]
    CholeskyFailure { context: String },

    /// Dimensions of two quantities do not agree.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// The shared KDE covariance is singular (degenerate ensemble, no process noise).
    #[error("degenerate kernel density estimate: shared covariance is singular")]
    DegenerateKde,

    /// The innovation covariance H P H' + R is singular.
    #[error("innovation covariance is singular")]
    InnovationSingular,

    /// Every component evidence underflowed to zero likelihood.
    #[error("total weight collapse: all component evidences are zero")]
    TotalWeightCollapse,

    /// Deterministic grids require an odd point count.
    #[error("invalid grid size {m}: point count must be odd and >= 1")]
    InvalidGridSize { m: usize },

    /// Transport marginals do not carry the same total mass.
    #[error("transport marginal mismatch: source mass {src_mass} vs target mass {dst_mass}")]
    MarginalMismatch { src_mass: f64, dst_mass: f64 },

    /// Barycentric projection onto a zero-mass target point is undefined.
    #[error("zero-mass transport target at index {index}")]
    ZeroMassTarget { index: usize },

    /// Adaptive integrator step size underflowed.
    #[error("integrator step underflow at t = {t}")]
    StiffnessFailure { t: f64 },

    /// Trajectory descended below the lunar surface.
    #[error("trajectory impacted the body at t = {t} (radius {radius} m)")]
    ImpactDetected { t: f64, radius: f64 },

    /// Station-keeping differential correction did not converge.
    #[error("station keeping failed to converge after {iterations} iterations (residual {residual} m)")]
    StationKeepingFailure { iterations: usize, residual: f64 },

    /// The UKF produced a covariance that is no longer positive definite.
    #[error("UKF divergence: {context}")]
    UkfDivergence { context: String },

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An error raised while updating one mixture component.
    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Filesystem or formatting failure while writing experiment outputs.
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the index of the mixture component it came from.
    pub fn for_component(self, index: usize) -> Error {
        Error::Component {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
