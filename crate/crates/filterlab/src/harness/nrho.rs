//! The lunar tracking experiment: a station-keeping truth orbit measured
//! once per revolution at perilune, driving the two mixture filters and the
//! UKF baseline, with per-epoch position/velocity error records and a
//! divergence-event log.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::filters::{engmf_step, pineapple_step, ukf_step, PropagationSpec, UkfParams};
use crate::gmm::{sample_mean_cov, Ensemble, Gaussian, StateVector};
use crate::harness::{DefensiveRule, FilterKind};
use crate::models::integrator::IntegratorConfig;
use crate::models::nrho::{
    next_orbit_event, nrho_measurement, station_keeping_truth, NrhoConfig, NrhoDynamics,
    NrhoInitialState, OrbitEvent,
};
use crate::models::PhysicalConstants;
use crate::stream::{Purpose, StreamKey};

/// Configuration of the lunar tracking experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct NrhoExperimentConfig {
    pub orbits: usize,
    pub trials: usize,
    pub particles: usize,
    pub seed: u64,
    pub m_grid: usize,
    pub defensive: DefensiveRule,
    pub filters: Vec<FilterKind>,
    pub initial: NrhoInitialState,
    /// Overrides the preset initial state when set (meters, meters/second).
    pub initial_state_override: Option<StateVector>,
}

impl Default for NrhoExperimentConfig {
    fn default() -> Self {
        Self {
            orbits: 20,
            trials: 10,
            particles: 30,
            seed: 7,
            m_grid: 51,
            defensive: DefensiveRule::Fixed(0.05),
            filters: vec![FilterKind::Pineapple, FilterKind::Engmf, FilterKind::Ukf],
            initial: NrhoInitialState::Table1,
            initial_state_override: None,
        }
    }
}

/// One recorded measurement epoch for one filter and trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrhoEpochRecord {
    pub trial: usize,
    pub orbit: usize,
    pub time: f64,
    /// Position error of the filter estimate in meters (NaN after divergence).
    pub pos_error: f64,
    /// Velocity error in meters per second (NaN after divergence).
    pub vel_error: f64,
    /// Distance of the estimate from the Moon's center in meters.
    pub estimate_radius: f64,
}

/// Full experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct NrhoResult {
    /// Epoch records per filter, in (filter, trial, orbit) order.
    pub epochs: Vec<(FilterKind, NrhoEpochRecord)>,
    /// Deterministic event log: divergences, missing events, failures.
    pub events: Vec<String>,
    /// Largest truth radius seen (the apolune radius), for boundedness checks.
    pub apolune_radius: f64,
    /// Number of perilune epochs the truth produced.
    pub n_epochs: usize,
}

struct TruthTimeline {
    /// (time, state) at each perilune passage.
    epochs: Vec<(f64, StateVector)>,
    apolune_radius: f64,
    log: Vec<String>,
}

fn radius(s: &StateVector) -> f64 {
    (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()
}

fn speed_error(a: &StateVector, b: &StateVector) -> (f64, f64) {
    let dp = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let dv = ((a[3] - b[3]).powi(2) + (a[4] - b[4]).powi(2) + (a[5] - b[5]).powi(2)).sqrt();
    (dp, dv)
}

/// Generates the station-keeping truth: from the configured state, correct
/// the velocity at every apolune (targeting the synodic-fixed apolune
/// position one period later) and record every perilune passage.
fn generate_truth(
    dynamics: &NrhoDynamics,
    scenario: &NrhoConfig,
    orbits: usize,
    integrator: &IntegratorConfig,
) -> TruthTimeline {
    let mut log = Vec::new();
    let mut epochs = Vec::new();
    let mut apolune_radius = radius(&scenario.initial_state);
    let scan = scenario.period / 2000.0;
    let horizon = 2.0 * scenario.period;

    // Apply the first correction only when the configured state actually
    // sits at apolune (zero radial rate at a radius maximum); the physical
    // preset does, arbitrary states may not.
    let mut t = 0.0;
    let mut state = scenario.initial_state.clone();
    if at_apolune(dynamics, t, &state) {
        match apply_station_keeping(dynamics, &state, t, scenario.period, integrator) {
            Ok(corrected) => state = corrected,
            Err(e) => log.push(format!("initial station keeping failed: {e}")),
        }
    } else {
        log.push("initial state is not at apolune; no initial correction".to_string());
    }

    for orbit in 1..=orbits {
        // Perilune: the measurement epoch of this orbit.
        match next_orbit_event(dynamics, &state, t, horizon, scan, integrator) {
            Ok(Some((t_ev, s_ev, OrbitEvent::Perilune))) => {
                epochs.push((t_ev, s_ev.clone()));
                t = t_ev;
                state = s_ev;
            }
            Ok(Some((t_ev, s_ev, OrbitEvent::Apolune))) => {
                // Started between perilune and apolune; station keep and retry.
                apolune_radius = apolune_radius.max(radius(&s_ev));
                t = t_ev;
                state = s_ev;
                match apply_station_keeping(dynamics, &state, t, scenario.period, integrator) {
                    Ok(corrected) => state = corrected,
                    Err(e) => {
                        log.push(format!("orbit {orbit}: station keeping failed: {e}"));
                    }
                }
                match next_orbit_event(dynamics, &state, t, horizon, scan, integrator) {
                    Ok(Some((t2, s2, OrbitEvent::Perilune))) => {
                        epochs.push((t2, s2.clone()));
                        t = t2;
                        state = s2;
                    }
                    _ => {
                        log.push(format!("orbit {orbit}: no perilune found; truth ends"));
                        break;
                    }
                }
            }
            Ok(None) => {
                log.push(format!("orbit {orbit}: no radial-rate crossing; truth ends"));
                break;
            }
            Err(e) => {
                log.push(format!("orbit {orbit}: truth propagation failed: {e}"));
                break;
            }
        }

        if orbit == orbits {
            break;
        }
        // Apolune: station-keeping maneuver.
        match next_orbit_event(dynamics, &state, t, horizon, scan, integrator) {
            Ok(Some((t_ev, s_ev, OrbitEvent::Apolune))) => {
                apolune_radius = apolune_radius.max(radius(&s_ev));
                t = t_ev;
                state = s_ev;
                match apply_station_keeping(dynamics, &state, t, scenario.period, integrator) {
                    Ok(corrected) => state = corrected,
                    Err(e) => log.push(format!("orbit {orbit}: station keeping failed: {e}")),
                }
            }
            Ok(Some((t_ev, s_ev, OrbitEvent::Perilune))) => {
                log.push(format!("orbit {orbit}: unexpected consecutive perilune"));
                t = t_ev;
                state = s_ev;
            }
            Ok(None) => {
                log.push(format!("orbit {orbit}: no apolune found; truth ends"));
                break;
            }
            Err(e) => {
                log.push(format!("orbit {orbit}: truth propagation failed: {e}"));
                break;
            }
        }
    }
    TruthTimeline {
        epochs,
        apolune_radius,
        log,
    }
}

/// True when the radial rate is (relatively) zero and decreasing: the state
/// sits at a radius maximum.
fn at_apolune(dynamics: &NrhoDynamics, t: f64, s: &StateVector) -> bool {
    use crate::models::integrator::Dynamics;
    let rv = s[0] * s[3] + s[1] * s[4] + s[2] * s[5];
    let speed = (s[3] * s[3] + s[4] * s[4] + s[5] * s[5]).sqrt();
    let scale = radius(s) * speed;
    if scale == 0.0 || rv.abs() > 1e-6 * scale {
        return false;
    }
    match dynamics.rhs(t, s) {
        Ok(d) => {
            // d/dt (r.v) = |v|^2 + r.a
            let ra = s[0] * d[3] + s[1] * d[4] + s[2] * d[5];
            speed * speed + ra < 0.0
        }
        Err(_) => false,
    }
}

fn apply_station_keeping(
    dynamics: &NrhoDynamics,
    state: &StateVector,
    t: f64,
    period: f64,
    integrator: &IntegratorConfig,
) -> Result<StateVector> {
    // Target the current apolune position rotated with the Earth-Moon line,
    // keeping the orbit fixed relative to the rotating geometry.
    let angle = dynamics.earth_rate * period;
    let (sin, cos) = angle.sin_cos();
    let target = DVector::from_vec(vec![
        cos * state[0] - sin * state[1],
        sin * state[0] + cos * state[1],
        state[2],
    ]);
    station_keeping_truth(dynamics, state, t, &target, period, integrator)
}

enum Belief {
    Particles(Ensemble),
    Gaussian(Gaussian),
    Diverged,
}

/// The truth perilune epochs (time, state) for the configured scenario,
/// together with the apolune radius and the truth generation log. This is
/// the same timeline the experiment itself consumes.
pub fn nrho_truth_epochs(
    cfg: &NrhoExperimentConfig,
) -> Result<(Vec<(f64, StateVector)>, f64, Vec<String>)> {
    let constants = PhysicalConstants::default_set();
    let dynamics = NrhoDynamics::from_constants(constants);
    let mut scenario = NrhoConfig::new(cfg.initial, constants);
    if let Some(state) = &cfg.initial_state_override {
        scenario = scenario.with_initial_state(state.clone());
    }
    let integrator = IntegratorConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-3,
        max_step: f64::INFINITY,
    };
    let truth = generate_truth(&dynamics, &scenario, cfg.orbits, &integrator);
    Ok((truth.epochs, truth.apolune_radius, truth.log))
}

/// Runs the lunar tracking experiment. Every trial reuses the shared truth
/// timeline (the truth is deterministic) but draws its own initial
/// perturbations and measurement noise.
pub fn run_nrho_experiment(cfg: &NrhoExperimentConfig) -> Result<NrhoResult> {
    if cfg.trials < 1 || cfg.orbits < 1 {
        return Err(Error::InvalidConfig("orbits and trials must be >= 1".into()));
    }
    if cfg.m_grid % 2 == 0 {
        return Err(Error::InvalidGridSize { m: cfg.m_grid });
    }
    if cfg.particles < 2 {
        return Err(Error::InvalidConfig("particles must be >= 2".into()));
    }
    for f in &cfg.filters {
        if matches!(f, FilterKind::Free) {
            return Err(Error::InvalidConfig(
                "the lunar experiment drives pineapple, engmf and ukf only".into(),
            ));
        }
    }

    let constants = PhysicalConstants::default_set();
    let dynamics = NrhoDynamics::from_constants(constants);
    let mut scenario = NrhoConfig::new(cfg.initial, constants);
    if let Some(state) = &cfg.initial_state_override {
        scenario = scenario.with_initial_state(state.clone());
    }
    let integrator = IntegratorConfig {
        rel_tol: 1e-10,
        abs_tol: 1e-3,
        max_step: f64::INFINITY,
    };
    let mm = nrho_measurement(constants);

    let truth = generate_truth(&dynamics, &scenario, cfg.orbits, &integrator);
    let mut events: Vec<String> = truth.log.iter().map(|l| format!("truth: {l}")).collect();
    let n_epochs = truth.epochs.len();

    // Per-trial measurement noise.
    let r_chol = Cholesky::new(scenario.measurement_noise.clone())
        .expect("measurement covariance is PD")
        .unpack();

    let trial_outputs: Vec<Vec<(FilterKind, NrhoEpochRecord)>> = map_range(cfg.trials, |trial| {
        run_nrho_trial(
            cfg, &dynamics, &scenario, &mm, &truth, &integrator, &r_chol, trial,
        )
    });
    let mut epochs = Vec::new();
    for filter in &cfg.filters {
        for records in &trial_outputs {
            for (f, rec) in records {
                if f == filter {
                    epochs.push((*f, *rec));
                }
            }
        }
    }
    // Divergence events: first NaN epoch per (filter, trial).
    for filter in &cfg.filters {
        for (trial, records) in trial_outputs.iter().enumerate() {
            if let Some((_, rec)) = records
                .iter()
                .find(|(f, rec)| f == filter && rec.pos_error.is_nan())
            {
                events.push(format!(
                    "{} trial {trial}: divergence recorded at orbit {} (t = {})",
                    filter.label(),
                    rec.orbit,
                    rec.time
                ));
            }
        }
    }

    Ok(NrhoResult {
        epochs,
        events,
        apolune_radius: truth.apolune_radius,
        n_epochs,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_nrho_trial(
    cfg: &NrhoExperimentConfig,
    dynamics: &NrhoDynamics,
    scenario: &NrhoConfig,
    mm: &crate::gaussian_sum::MeasurementModel,
    truth: &TruthTimeline,
    integrator: &IntegratorConfig,
    r_chol: &DMatrix<f64>,
    trial: usize,
) -> Vec<(FilterKind, NrhoEpochRecord)> {
    let p0_chol = Cholesky::new(scenario.p0.clone())
        .expect("initial covariance is PD")
        .unpack();

    // Measurements with trial-keyed noise.
    let measurements: Vec<DVector<f64>> = truth
        .epochs
        .iter()
        .enumerate()
        .map(|(j, (_, s))| {
            let mut rng =
                StreamKey::new(cfg.seed, trial as u64, (j + 1) as u64, Purpose::MeasurementNoise)
                    .rng(0);
            let z = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            mm.observe(s) + r_chol * z
        })
        .collect();

    let init_key = StreamKey::new(cfg.seed, trial as u64, 0, Purpose::InitialEnsemble);
    let draw_state = |index: u64| -> StateVector {
        let mut rng = init_key.rng(index);
        let z = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal));
        &scenario.initial_state + &p0_chol * z
    };

    let mut records = Vec::new();
    for filter in &cfg.filters {
        let mut belief = match filter {
            FilterKind::Pineapple | FilterKind::Engmf => {
                let members: Vec<StateVector> =
                    (0..cfg.particles).map(|i| draw_state(i as u64)).collect();
                match Ensemble::new(members) {
                    Ok(e) => Belief::Particles(e),
                    Err(_) => Belief::Diverged,
                }
            }
            FilterKind::Ukf => {
                // The mean perturbation uses a draw index disjoint from the
                // particle indices.
                let mean = draw_state(1 << 32);
                match Gaussian::new(mean, scenario.p0.clone()) {
                    Ok(g) => Belief::Gaussian(g),
                    Err(_) => Belief::Diverged,
                }
            }
            FilterKind::Free => unreachable!("rejected by config validation"),
        };

        let mut t_prev = 0.0;
        let v = cfg.defensive.value(cfg.particles);
        let ukf_params = UkfParams::baseline();
        for (j, (t_j, truth_j)) in truth.epochs.iter().enumerate() {
            let prop = PropagationSpec {
                dynamics,
                t0: t_prev,
                t1: *t_j,
                integrator,
            };
            let y = &measurements[j];
            let estimate: Option<StateVector> = match &mut belief {
                Belief::Diverged => None,
                Belief::Particles(e) => {
                    let stepped = match filter {
                        FilterKind::Pineapple => pineapple_step(
                            e,
                            &prop,
                            mm,
                            y,
                            Some(&scenario.process_noise),
                            v,
                            cfg.m_grid,
                        ),
                        FilterKind::Engmf => {
                            let key = StreamKey::new(
                                cfg.seed,
                                trial as u64,
                                (j + 1) as u64,
                                Purpose::Resample,
                            );
                            engmf_step(e, &prop, mm, y, Some(&scenario.process_noise), v, &key)
                        }
                        _ => unreachable!(),
                    };
                    match stepped {
                        Ok((next, _report)) => {
                            let (mean, _) = sample_mean_cov(&next);
                            belief = Belief::Particles(next);
                            Some(mean)
                        }
                        Err(_) => {
                            belief = Belief::Diverged;
                            None
                        }
                    }
                }
                Belief::Gaussian(g) => {
                    match ukf_step(g, &prop, mm, y, Some(&scenario.process_noise), &ukf_params) {
                        Ok(next) => {
                            let mean = next.mean().clone();
                            belief = Belief::Gaussian(next);
                            Some(mean)
                        }
                        Err(_) => {
                            belief = Belief::Diverged;
                            None
                        }
                    }
                }
            };
            let record = match estimate {
                Some(mean) => {
                    let (dp, dv) = speed_error(&mean, truth_j);
                    NrhoEpochRecord {
                        trial,
                        orbit: j + 1,
                        time: *t_j,
                        pos_error: dp,
                        vel_error: dv,
                        estimate_radius: radius(&mean),
                    }
                }
                None => NrhoEpochRecord {
                    trial,
                    orbit: j + 1,
                    time: *t_j,
                    pos_error: f64::NAN,
                    vel_error: f64::NAN,
                    estimate_radius: f64::NAN,
                },
            };
            records.push((*filter, record));
            t_prev = *t_j;
        }
    }
    records
}

/// Renders one filter's epoch records as CSV:
/// `trial,orbit,time_s,pos_error_m,vel_error_mps,estimate_radius_m`.
pub fn nrho_filter_csv(result: &NrhoResult, filter: FilterKind) -> String {
    use crate::harness::format_float;
    let mut out = String::from("trial,orbit,time_s,pos_error_m,vel_error_mps,estimate_radius_m\n");
    for (f, rec) in &result.epochs {
        if *f == filter {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rec.trial,
                rec.orbit,
                format_float(rec.time),
                format_float(rec.pos_error),
                format_float(rec.vel_error),
                format_float(rec.estimate_radius)
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoke_run_emits_epochs() {
        // 1 trial, 2 orbits on the physical preset: at least 2 measurement
        // epochs per filter.
        let cfg = NrhoExperimentConfig {
            orbits: 2,
            trials: 1,
            particles: 8,
            m_grid: 11,
            initial: NrhoInitialState::Cr3bp,
            filters: vec![FilterKind::Pineapple, FilterKind::Engmf, FilterKind::Ukf],
            ..NrhoExperimentConfig::default()
        };
        let result = run_nrho_experiment(&cfg).unwrap();
        assert!(result.n_epochs >= 2, "expected >= 2 epochs, got {}", result.n_epochs);
        for filter in &cfg.filters {
            let count = result.epochs.iter().filter(|(f, _)| f == filter).count();
            assert!(count >= 2, "{} recorded {count} epochs", filter.label());
        }
        let csv = nrho_filter_csv(&result, FilterKind::Pineapple);
        assert!(csv.lines().count() >= 3);
    }

    #[test]
    fn table1_state_escapes_without_epochs() {
        let cfg = NrhoExperimentConfig {
            orbits: 1,
            trials: 1,
            particles: 4,
            m_grid: 5,
            initial: NrhoInitialState::Table1,
            filters: vec![FilterKind::Ukf],
            ..NrhoExperimentConfig::default()
        };
        let result = run_nrho_experiment(&cfg).unwrap();
        assert_eq!(result.n_epochs, 0);
        assert!(!result.events.is_empty());
    }
}
