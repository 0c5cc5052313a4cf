//! Adaptive embedded Runge-Kutta integration (Dormand-Prince 5(4), FSAL)
//! with a PI step-size controller.
//!
//! The controller uses only the documented formula below, so trajectories
//! are deterministic for given inputs and tolerances.

use crate::error::{Error, Result};
use crate::gmm::StateVector;

/// Right-hand side of an ODE system. Implementations may reject states (for
/// example below a body's surface), which aborts the integration.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, state: &StateVector) -> Result<StateVector>;
}

/// Tolerances and step bounds for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
        }
    }
}

// Dormand-Prince 5(4) Butcher tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights equal A[6]; the FSAL stage k7 = f(t + h, y_new).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const ORDER_EXP: f64 = 0.2 - PI_BETA * 0.75;

/// Integrates the system from `(t0, s0)` to `t1`. Local error per step is
/// controlled against `abs_tol + rel_tol * |y|`; a step shrinking below
/// `1e-14 * (t1 - t0)` raises [`Error::StiffnessFailure`].
pub fn integrate(
    dynamics: &dyn Dynamics,
    s0: &StateVector,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<StateVector> {
    assert!(t1 >= t0, "integrate requires t1 >= t0");
    assert!(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0, "tolerances must be positive");
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(s0.clone());
    }
    let dim = s0.len();
    let min_step = 1e-14 * span;

    let mut t = t0;
    let mut y = s0.clone();
    let mut k: Vec<StateVector> = vec![StateVector::zeros(dim); 7];
    k[0] = dynamics.rhs(t, &y)?;
    let mut h = (span * 1e-3).min(cfg.max_step);
    let mut err_prev: f64 = 1.0;

    loop {
        if t >= t1 {
            return Ok(y);
        }
        h = h.min(t1 - t).min(cfg.max_step);
        if h < min_step {
            return Err(Error::StiffnessFailure { t });
        }

        for stage in 1..6 {
            let mut yi = y.clone();
            for (j, kj) in k.iter().enumerate().take(stage) {
                let a = A[stage][j];
                if a != 0.0 {
                    yi += kj * (a * h);
                }
            }
            k[stage] = dynamics.rhs(t + C[stage] * h, &yi)?;
        }
        // The A[6] row is the fifth-order solution; its stage is the FSAL one.
        let mut y_new = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = A[6][j];
            if a != 0.0 {
                y_new += kj * (a * h);
            }
        }
        k[6] = dynamics.rhs(t + h, &y_new)?;

        // RMS error norm scaled per component.
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += E[j] * kj[i];
                }
            }
            e *= h;
            let scale = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale) * (e / scale);
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y_new;
            k[0] = k[6].clone();
            let err_clamped = err.max(1e-10);
            let factor = SAFETY * err_clamped.powf(-ORDER_EXP) * err_prev.powf(PI_BETA);
            h *= factor.clamp(MIN_FACTOR, MAX_FACTOR);
            err_prev = err_clamped;
        } else {
            h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    struct Exponential;
    impl Dynamics for Exponential {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, s: &StateVector) -> Result<StateVector> {
            Ok(s.clone())
        }
    }

    #[test]
    fn exponential_growth() {
        let cfg = IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
        };
        let y = integrate(&Exponential, &dvector![1.0], 0.0, 1.0, &cfg).unwrap();
        assert_abs_diff_eq!(y[0], 1.0_f64.exp(), epsilon = 1e-8);
    }

    #[test]
    fn zero_span_returns_input() {
        let s = dvector![2.0];
        let y = integrate(&Exponential, &s, 3.0, 3.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(y, s);
    }

    #[test]
    fn deterministic_repeat() {
        let cfg = IntegratorConfig::default();
        let a = integrate(&Exponential, &dvector![1.0], 0.0, 2.5, &cfg).unwrap();
        let b = integrate(&Exponential, &dvector![1.0], 0.0, 2.5, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
