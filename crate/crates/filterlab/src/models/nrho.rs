//! Moon-centered lunar-orbit tracking scenario: point-mass lunar gravity
//! plus Earth third-body acceleration on a circular Earth-Moon orbit, the
//! range/range-rate/angles measurement from the lunar north pole, and the
//! apolune station-keeping truth model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian_sum::MeasurementModel;
use crate::gmm::StateVector;
use crate::models::constants::PhysicalConstants;
use crate::models::integrator::{integrate, Dynamics, IntegratorConfig};

/// Moon-centered inertial-axes dynamics. State is (x, y, z, vx, vy, vz) in
/// meters and meters per second. The Earth starts on the -x axis and moves
/// counterclockwise in the xy plane at the circular two-body rate; the
/// third-body term carries the indirect part, so it vanishes at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrhoDynamics {
    pub mu_moon: f64,
    pub mu_earth: f64,
    pub earth_moon_distance: f64,
    pub earth_rate: f64,
    pub lunar_radius: f64,
}

impl NrhoDynamics {
    pub fn from_constants(c: &PhysicalConstants) -> Self {
        Self {
            mu_moon: c.mu_moon,
            mu_earth: c.mu_earth,
            earth_moon_distance: c.earth_moon_distance,
            earth_rate: c.earth_moon_rate(),
            lunar_radius: c.lunar_radius,
        }
    }

    /// Earth position relative to the Moon at time `t`.
    pub fn earth_position(&self, t: f64) -> DVector<f64> {
        let a = self.earth_rate * t;
        DVector::from_vec(vec![
            -self.earth_moon_distance * a.cos(),
            -self.earth_moon_distance * a.sin(),
            0.0,
        ])
    }

    /// Third-body bracket (direct minus indirect term).
    fn third_body(&self, r: &DVector<f64>, t: f64) -> DVector<f64> {
        let re = self.earth_position(t);
        let d = &re - r;
        let d3 = d.norm().powi(3);
        let re3 = re.norm().powi(3);
        d / d3 * self.mu_earth - re / re3 * self.mu_earth
    }
}

impl Dynamics for NrhoDynamics {
    fn dim(&self) -> usize {
        6
    }

    fn rhs(&self, t: f64, s: &StateVector) -> Result<StateVector> {
        let r = DVector::from_vec(vec![s[0], s[1], s[2]]);
        let rn = r.norm();
        if rn < self.lunar_radius {
            return Err(Error::ImpactDetected { t, radius: rn });
        }
        let central = &r * (-self.mu_moon / rn.powi(3));
        let acc = central + self.third_body(&r, t);
        Ok(DVector::from_vec(vec![s[3], s[4], s[5], acc[0], acc[1], acc[2]]))
    }
}

/// Which initial state a lunar scenario starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrhoInitialState {
    /// The published initial conditions, loaded verbatim.
    Table1,
    /// The CR3BP-derived 9:2 NRHO state documented in the constants file.
    Cr3bp,
}

/// Full configuration of the lunar tracking experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct NrhoConfig {
    pub initial_state: StateVector,
    pub period: f64,
    pub p0: DMatrix<f64>,
    pub measurement_noise: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub lunar_radius: f64,
}

impl NrhoConfig {
    pub fn new(which: NrhoInitialState, c: &PhysicalConstants) -> Self {
        let (state, period) = match which {
            NrhoInitialState::Table1 => (c.nrho_table1_state, c.nrho_period),
            NrhoInitialState::Cr3bp => (c.nrho_cr3bp_state, c.nrho_cr3bp_period),
        };
        let p0 = DMatrix::from_diagonal(&DVector::from_vec(vec![
            1e-2, 1e-2, 1e-2, 1e-8, 1e-8, 1e-8,
        ]));
        let angle_var = (100.0 * c.arcsec_rad).powi(2);
        let measurement_noise =
            DMatrix::from_diagonal(&DVector::from_vec(vec![1e2, 1e-2, angle_var, angle_var]));
        let process_noise = &p0 * 0.25;
        Self {
            initial_state: DVector::from_column_slice(&state),
            period,
            p0,
            measurement_noise,
            process_noise,
            lunar_radius: c.lunar_radius,
        }
    }

    /// Replaces the initial state (used by the config-file override).
    pub fn with_initial_state(mut self, state: StateVector) -> Self {
        self.initial_state = state;
        self
    }
}

/// Range, range rate, azimuth and elevation from a station at the lunar
/// north pole: with p = (x, y, z - r_moon) and v the velocity,
/// h = (|p|, p.v/|p|, atan2(y, x), atan((z - r_moon)/|p|)).
///
/// The azimuth is angular (residuals wrap at +-pi). On the polar axis the
/// azimuth is undefined; the Jacobian row degenerates to zero there.
pub fn nrho_measurement(c: &PhysicalConstants) -> MeasurementModel {
    let r_moon = c.lunar_radius;
    let angle_var = (100.0 * c.arcsec_rad).powi(2);
    let noise = DMatrix::from_diagonal(&DVector::from_vec(vec![1e2, 1e-2, angle_var, angle_var]));
    MeasurementModel::new(
        move |s: &StateVector| {
            let p = DVector::from_vec(vec![s[0], s[1], s[2] - r_moon]);
            let v = DVector::from_vec(vec![s[3], s[4], s[5]]);
            let rho = p.norm();
            let q = s[2] - r_moon;
            DVector::from_vec(vec![
                rho,
                p.dot(&v) / rho,
                s[1].atan2(s[0]),
                (q / rho).atan(),
            ])
        },
        move |s: &StateVector| {
            let p = [s[0], s[1], s[2] - r_moon];
            let v = [s[3], s[4], s[5]];
            let rho = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let pv = p[0] * v[0] + p[1] * v[1] + p[2] * v[2];
            let q = p[2];
            let mut j = DMatrix::zeros(4, 6);
            // range
            for k in 0..3 {
                j[(0, k)] = p[k] / rho;
            }
            // range rate
            for k in 0..3 {
                j[(1, k)] = v[k] / rho - pv * p[k] / rho.powi(3);
                j[(1, k + 3)] = p[k] / rho;
            }
            // azimuth
            let xy2 = s[0] * s[0] + s[1] * s[1];
            if xy2 > 0.0 {
                j[(2, 0)] = -s[1] / xy2;
                j[(2, 1)] = s[0] / xy2;
            }
            // elevation = atan(q / rho)
            let denom = rho * (rho * rho + q * q);
            j[(3, 0)] = -q * p[0] / denom;
            j[(3, 1)] = -q * p[1] / denom;
            j[(3, 2)] = (rho * rho - q * q) / denom;
            j
        },
        noise,
    )
    .with_angular(vec![2])
}

/// A radial-rate sign change on a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitEvent {
    /// r.v crosses from negative to positive: closest approach.
    Perilune,
    /// r.v crosses from positive to negative: farthest point.
    Apolune,
}

fn radial_rate(s: &StateVector) -> f64 {
    s[0] * s[3] + s[1] * s[4] + s[2] * s[5]
}

/// Scans forward from `(t, s)` for the next perilune or apolune within
/// `horizon`, bisecting the bracketing interval down to 1e-3 s. Returns the
/// refined event time and state, or `None` when no crossing occurs.
pub fn next_orbit_event(
    dynamics: &NrhoDynamics,
    s: &StateVector,
    t: f64,
    horizon: f64,
    scan_step: f64,
    cfg: &IntegratorConfig,
) -> Result<Option<(f64, StateVector, OrbitEvent)>> {
    let mut t_a = t;
    let mut s_a = s.clone();
    let mut rate_a = radial_rate(&s_a);
    let steps = (horizon / scan_step).ceil() as usize;
    for _ in 0..steps {
        let t_b = (t_a + scan_step).min(t + horizon);
        let s_b = integrate(dynamics, &s_a, t_a, t_b, cfg)?;
        let rate_b = radial_rate(&s_b);
        if rate_a != 0.0 && rate_b != 0.0 && rate_a.signum() != rate_b.signum() {
            let event = if rate_a < 0.0 {
                OrbitEvent::Perilune
            } else {
                OrbitEvent::Apolune
            };
            // Bisection on the bracket, re-integrating from the left edge.
            let (mut lo_t, mut lo_s) = (t_a, s_a);
            let mut hi_t = t_b;
            while hi_t - lo_t > 1e-3 {
                let mid_t = 0.5 * (lo_t + hi_t);
                let mid_s = integrate(dynamics, &lo_s, lo_t, mid_t, cfg)?;
                if radial_rate(&mid_s).signum() == rate_a.signum() {
                    lo_t = mid_t;
                    lo_s = mid_s;
                } else {
                    hi_t = mid_t;
                }
            }
            let s_event = integrate(dynamics, &lo_s, lo_t, hi_t, cfg)?;
            return Ok(Some((hi_t, s_event, event)));
        }
        t_a = t_b;
        s_a = s_b;
        rate_a = rate_b;
        if t_a >= t + horizon {
            break;
        }
    }
    Ok(None)
}

/// Station-keeping differential correction at apolune: Newton iteration on
/// the velocity so that propagating one `period` lands the position on
/// `target` within 1 m, capped at 20 iterations. A state that already
/// reaches the target is returned unchanged.
pub fn station_keeping_truth(
    dynamics: &NrhoDynamics,
    s: &StateVector,
    t: f64,
    target: &StateVector,
    period: f64,
    cfg: &IntegratorConfig,
) -> Result<StateVector> {
    const TOL_M: f64 = 1.0;
    const MAX_ITER: usize = 20;
    let position_after = |state: &StateVector| -> Result<DVector<f64>> {
        let s1 = integrate(dynamics, state, t, t + period, cfg)?;
        Ok(DVector::from_vec(vec![s1[0], s1[1], s1[2]]))
    };

    let mut current = s.clone();
    let mut residual = position_after(&current)? - target;
    for iteration in 0..=MAX_ITER {
        if residual.norm() <= TOL_M {
            return Ok(current);
        }
        if iteration == MAX_ITER {
            break;
        }
        // Finite-difference sensitivity of arrival position to velocity.
        let speed = (current[3] * current[3] + current[4] * current[4] + current[5] * current[5])
            .sqrt()
            .max(1.0);
        let dv = 1e-6 * speed;
        let mut jac = DMatrix::zeros(3, 3);
        for k in 0..3 {
            let mut pert = current.clone();
            pert[3 + k] += dv;
            let col = (position_after(&pert)? - target - &residual) / dv;
            jac.set_column(k, &col);
        }
        let delta = jac.lu().solve(&(-&residual)).ok_or(Error::StationKeepingFailure {
            iterations: iteration,
            residual: residual.norm(),
        })?;
        for k in 0..3 {
            current[3 + k] += delta[k];
        }
        residual = position_after(&current)? - target;
    }
    Err(Error::StationKeepingFailure {
        iterations: MAX_ITER,
        residual: residual.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use filterlab_oracles::fd_jacobian;
    use nalgebra::dvector;

    fn dynamics() -> NrhoDynamics {
        NrhoDynamics::from_constants(PhysicalConstants::default_set())
    }

    fn integrator() -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-3,
            max_step: f64::INFINITY,
        }
    }

    #[test]
    fn third_body_bracket_vanishes_at_origin() {
        let d = dynamics();
        let bracket = d.third_body(&DVector::zeros(3), 1234.0);
        assert_abs_diff_eq!(bracket.norm(), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn impact_detected_below_surface() {
        let d = dynamics();
        let s = dvector![1e6, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            d.rhs(0.0, &s),
            Err(Error::ImpactDetected { .. })
        ));
    }

    #[test]
    fn circular_two_body_speed_constant() {
        // With the Earth's pull off, a circular orbit keeps its speed over a
        // full revolution within 1e-8 relative.
        let mut d = dynamics();
        d.mu_earth = 0.0;
        let r0 = 5e6;
        let v0 = (d.mu_moon / r0).sqrt();
        let period = 2.0 * std::f64::consts::PI * (r0 / v0);
        let s0 = dvector![r0, 0.0, 0.0, 0.0, v0, 0.0];
        let s1 = integrate(&d, &s0, 0.0, period, &integrator()).unwrap();
        let speed = (s1[3] * s1[3] + s1[4] * s1[4] + s1[5] * s1[5]).sqrt();
        assert_abs_diff_eq!(speed / v0, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn two_body_energy_conserved_ten_periods() {
        let mut d = dynamics();
        d.mu_earth = 0.0;
        let r0 = 8e6;
        let v0 = (d.mu_moon / r0).sqrt();
        let period = 2.0 * std::f64::consts::PI * r0 / v0;
        let energy = |s: &StateVector| {
            let r = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
            let v2 = s[3] * s[3] + s[4] * s[4] + s[5] * s[5];
            0.5 * v2 - d.mu_moon / r
        };
        let s0 = dvector![r0, 0.0, 0.0, 0.0, 0.8 * v0, 0.3 * v0];
        let e0 = energy(&s0);
        let s1 = integrate(&d, &s0, 0.0, 10.0 * period, &integrator()).unwrap();
        assert_abs_diff_eq!(energy(&s1) / e0, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn measurement_on_polar_axis() {
        let c = PhysicalConstants::default_set();
        let mm = nrho_measurement(c);
        let dalt = 1e6;
        let s = dvector![0.0, 0.0, c.lunar_radius + dalt, 0.0, 0.0, 0.0];
        let h = mm.observe(&s);
        assert_abs_diff_eq!(h[0], dalt, epsilon = 1e-9);
        assert_abs_diff_eq!(h[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[2], 0.0, epsilon = 0.0); // guarded azimuth
        assert_abs_diff_eq!(h[3], std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn range_rate_sign_for_receding_object() {
        let c = PhysicalConstants::default_set();
        let mm = nrho_measurement(c);
        let s = dvector![5e6, 1e6, 3e6, 500.0, 100.0, 300.0];
        assert!(mm.observe(&s)[1] > 0.0);
    }

    #[test]
    fn measurement_jacobian_matches_finite_differences() {
        let c = PhysicalConstants::default_set();
        let mm = nrho_measurement(c);
        let mut v = 0.37_f64;
        let mut next = || {
            v = (v * 997.0 + 0.1234).fract();
            v - 0.5
        };
        for _ in 0..50 {
            let s = dvector![
                2e7 * next(),
                2e7 * next(),
                -6e7 + 1e7 * next(),
                100.0 * next(),
                100.0 * next(),
                100.0 * next()
            ];
            let analytic = mm.jacobian_at(&s);
            let fd = fd_jacobian(|x| mm.observe(x), &s, 1e-7);
            let rel = (&analytic - &fd).norm() / analytic.norm();
            assert!(rel < 1e-5, "jacobian mismatch {rel} at {s}");
        }
    }

    #[test]
    fn cr3bp_orbit_has_both_events() {
        let c = PhysicalConstants::default_set();
        let d = dynamics();
        let cfg = integrator();
        let nc = NrhoConfig::new(NrhoInitialState::Cr3bp, c);
        // Starting at apolune moving inward, the first event is perilune.
        let (t_peri, s_peri, ev) = next_orbit_event(
            &d,
            &nc.initial_state,
            0.0,
            nc.period,
            nc.period / 2000.0,
            &cfg,
        )
        .unwrap()
        .expect("perilune exists");
        assert_eq!(ev, OrbitEvent::Perilune);
        let r_peri = (s_peri[0] * s_peri[0] + s_peri[1] * s_peri[1] + s_peri[2] * s_peri[2]).sqrt();
        assert!(r_peri > c.lunar_radius && r_peri < 5e6, "perilune radius {r_peri}");
        assert!(t_peri > 0.2 * nc.period && t_peri < 0.8 * nc.period);

        let (t_apo, s_apo, ev2) =
            next_orbit_event(&d, &s_peri, t_peri, nc.period, nc.period / 2000.0, &cfg)
                .unwrap()
                .expect("apolune exists");
        assert_eq!(ev2, OrbitEvent::Apolune);
        let r_apo = (s_apo[0] * s_apo[0] + s_apo[1] * s_apo[1] + s_apo[2] * s_apo[2]).sqrt();
        assert!(r_apo > 6e7 && r_apo < 8e7, "apolune radius {r_apo}");
        assert!(t_apo > t_peri);
    }

    #[test]
    fn station_keeping_periodic_state_needs_no_correction() {
        let c = PhysicalConstants::default_set();
        let d = dynamics();
        let cfg = integrator();
        let nc = NrhoConfig::new(NrhoInitialState::Cr3bp, c);
        // Target: the synodic-fixed apolune, i.e. the initial position
        // rotated by the Earth-Moon angle over one period.
        let angle = d.earth_rate * nc.period;
        let (sin, cos) = angle.sin_cos();
        let p = &nc.initial_state;
        let target = dvector![
            cos * p[0] - sin * p[1],
            sin * p[0] + cos * p[1],
            p[2]
        ];
        let corrected =
            station_keeping_truth(&d, &nc.initial_state, 0.0, &target, nc.period, &cfg).unwrap();
        let dv = (0..3)
            .map(|k| (corrected[3 + k] - nc.initial_state[3 + k]).powi(2))
            .sum::<f64>()
            .sqrt();
        let speed = (0..3)
            .map(|k| nc.initial_state[3 + k].powi(2))
            .sum::<f64>()
            .sqrt();
        // The frozen state is periodic to sub-meter closure, so the shooter
        // accepts it or applies at most a hair of correction.
        assert!(dv / speed < 1e-6, "relative correction {}", dv / speed);

        // And the corrected state actually reaches the target within 1 m.
        let arrived = integrate(&d, &corrected, 0.0, nc.period, &cfg).unwrap();
        let miss = ((arrived[0] - target[0]).powi(2)
            + (arrived[1] - target[1]).powi(2)
            + (arrived[2] - target[2]).powi(2))
        .sqrt();
        assert!(miss <= 1.0, "arrival miss {miss} m");
    }
}
