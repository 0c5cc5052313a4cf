//! Dynamics, measurement models, and reference distributions for the
//! experiments.

pub mod constants;
pub mod integrator;
pub mod lorenz63;
pub mod nrho;
pub mod pineapple;

pub use constants::PhysicalConstants;
pub use integrator::{integrate, Dynamics, IntegratorConfig};
pub use lorenz63::{lorenz_range_measurement, range_measurement, Lorenz63};
pub use nrho::{
    next_orbit_event, nrho_measurement, station_keeping_truth, NrhoConfig, NrhoDynamics,
    NrhoInitialState, OrbitEvent,
};
pub use pineapple::{pineapple_gmm, pineapple_gmm_uniform};
