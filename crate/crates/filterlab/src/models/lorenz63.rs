//! The Lorenz '63 system and its range measurement.

use nalgebra::{dmatrix, DMatrix, DVector};

use crate::error::Result;
use crate::gaussian_sum::MeasurementModel;
use crate::gmm::StateVector;
use crate::models::constants::PhysicalConstants;
use crate::models::integrator::Dynamics;

/// Lorenz '63 dynamics with the standard chaotic parameters.
///
/// `published_rhs` reproduces a published variant that drops the `-y` term
/// from the second equation; it is unstable and exists only for comparison
/// runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorenz63 {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub published_rhs: bool,
}

impl Lorenz63 {
    pub fn standard() -> Self {
        let c = PhysicalConstants::default_set();
        Self {
            sigma: c.lorenz_sigma,
            rho: c.lorenz_rho,
            beta: c.lorenz_beta,
            published_rhs: false,
        }
    }

    /// The C+ fixed point at the center of one attractor wing:
    /// (sqrt(beta (rho - 1)), sqrt(beta (rho - 1)), rho - 1).
    pub fn wing_center(&self) -> StateVector {
        let s = (self.beta * (self.rho - 1.0)).sqrt();
        DVector::from_vec(vec![s, s, self.rho - 1.0])
    }
}

impl Dynamics for Lorenz63 {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, _t: f64, s: &StateVector) -> Result<StateVector> {
        let (x, y, z) = (s[0], s[1], s[2]);
        let dy = if self.published_rhs {
            x * (self.rho - z)
        } else {
            x * (self.rho - z) - y
        };
        Ok(DVector::from_vec(vec![
            self.sigma * (y - x),
            dy,
            x * y - self.beta * z,
        ]))
    }
}

/// Range measurement to a fixed point `center`, with variance `r_var`.
///
/// The Jacobian is the unit direction from the center; exactly at the center
/// it degenerates and the canonical +x axis is returned as the limit
/// direction (never hit in practice).
pub fn range_measurement(center: StateVector, r_var: f64) -> MeasurementModel {
    let c_h = center.clone();
    let c_j = center;
    MeasurementModel::new(
        move |s: &StateVector| {
            let d = s - &c_h;
            DVector::from_vec(vec![d.norm()])
        },
        move |s: &StateVector| {
            let d = s - &c_j;
            let r = d.norm();
            if r == 0.0 {
                let mut j = DMatrix::zeros(1, c_j.len());
                j[(0, 0)] = 1.0;
                return j;
            }
            DMatrix::from_fn(1, c_j.len(), |_, k| d[k] / r)
        },
        dmatrix![r_var],
    )
}

/// The paper-standard range measurement: distance to the C+ wing center,
/// unit variance.
pub fn lorenz_range_measurement() -> MeasurementModel {
    let model = Lorenz63::standard();
    range_measurement(model.wing_center(), PhysicalConstants::default_set().lorenz_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use filterlab_oracles::fd_jacobian;
    use nalgebra::dvector;

    #[test]
    fn origin_is_fixed_point() {
        let m = Lorenz63::standard();
        let d = m.rhs(0.0, &dvector![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(d, dvector![0.0, 0.0, 0.0]);
    }

    #[test]
    fn wing_center_is_fixed_point() {
        let m = Lorenz63::standard();
        let d = m.rhs(0.0, &m.wing_center()).unwrap();
        assert_abs_diff_eq!(d.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hand_substitution() {
        let m = Lorenz63::standard();
        let d = m.rhs(0.0, &dvector![1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!((d - dvector![-10.0, 28.0, 0.0]).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn published_variant_drops_damping_term() {
        let m = Lorenz63 {
            published_rhs: true,
            ..Lorenz63::standard()
        };
        let d = m.rhs(0.0, &dvector![1.0, 5.0, 0.0]).unwrap();
        assert_abs_diff_eq!(d[1], 28.0, epsilon = 1e-13);
    }

    #[test]
    fn range_measurement_near_center() {
        let mm = lorenz_range_measurement();
        let c = Lorenz63::standard().wing_center();
        let s = &c + dvector![1.0, 0.0, 0.0];
        assert_abs_diff_eq!(mm.observe(&s)[0], 1.0, epsilon = 1e-13);
        let j = mm.jacobian_at(&s);
        assert_abs_diff_eq!(j[(0, 0)], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(j[(0, 1)], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(mm.observe(&c)[0], 0.0, epsilon = 0.0);
    }

    #[test]
    fn range_jacobian_matches_finite_differences() {
        let mm = lorenz_range_measurement();
        // Deterministic pseudo-random points spread around the attractor box.
        let mut v = 0.5_f64;
        let mut next = || {
            v = (v * 997.0 + 0.1234).fract();
            v * 40.0 - 20.0
        };
        for _ in 0..100 {
            let s = dvector![next(), next(), next() + 25.0];
            let analytic = mm.jacobian_at(&s);
            let fd = fd_jacobian(|x| mm.observe(x), &s, 1e-6);
            let denom = analytic.norm().max(1e-12);
            assert!(
                (&analytic - &fd).norm() / denom < 1e-6,
                "jacobian mismatch at {s}"
            );
        }
    }
}
