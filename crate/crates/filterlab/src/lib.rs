//! Nonlinear filtering toolkit built around Gaussian-mixture particle
//! filters with a fully deterministic resampling path: kernel density
//! estimates over the ensemble, per-component EKF updates, and a
//! grid-plus-exact-optimal-transport reduction back to equally weighted
//! particles. A stochastic-resampling baseline (EnGMF) and a UKF are
//! included, together with a Monte Carlo experiment harness for a chaotic
//! three-variable twin experiment and a lunar-orbit tracking scenario.

pub mod error;
pub mod exec;
pub mod fib_grid;
pub mod filters;
pub mod gaussian_sum;
pub mod gmm;
pub mod harness;
pub mod kde;
pub mod models;
pub mod resampling;
pub mod stream;
pub mod transport;

pub use error::{Error, Result};
