//! The chaotic three-variable twin experiment: truth spin-in, range
//! measurements, a particle-count sweep over both mixture filters, and the
//! spatio-temporal RMSE summary CSV.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::filters::{engmf_step, pineapple_step, PropagationSpec};
use crate::gmm::{sample_mean_cov, Ensemble, StateVector};
use crate::harness::{aggregate, format_float, spatio_temporal_rmse, DefensiveRule, FilterKind};
use crate::models::integrator::{integrate, IntegratorConfig};
use crate::models::lorenz63::{lorenz_range_measurement, Lorenz63};
use crate::models::PhysicalConstants;
use crate::stream::{Purpose, StreamKey};

/// Configuration of the twin experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzConfig {
    pub particles: Vec<usize>,
    pub trials: usize,
    pub steps: usize,
    pub spinup: usize,
    pub seed: u64,
    pub m_grid: usize,
    pub defensive: DefensiveRule,
    pub filters: Vec<FilterKind>,
    /// Reproduce the published right-hand-side variant (drops the -y term).
    pub published_rhs: bool,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        Self {
            particles: vec![2, 4, 8, 12, 16],
            trials: 24,
            steps: 220,
            spinup: 20,
            seed: 7,
            m_grid: 51,
            defensive: DefensiveRule::InvSqrtN(0.1),
            filters: vec![FilterKind::Pineapple, FilterKind::Engmf],
            published_rhs: false,
        }
    }
}

impl LorenzConfig {
    fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.spinup >= self.steps {
            return Err(Error::InvalidConfig(format!(
                "spinup {} must be smaller than steps {}",
                self.spinup, self.steps
            )));
        }
        if self.m_grid % 2 == 0 {
            return Err(Error::InvalidGridSize { m: self.m_grid });
        }
        if self.particles.is_empty() || self.particles.iter().any(|&n| n < 2) {
            return Err(Error::InvalidConfig(
                "particle counts must be >= 2 (no process noise in this scenario)".into(),
            ));
        }
        for f in &self.filters {
            if matches!(f, FilterKind::Ukf) {
                return Err(Error::InvalidConfig(
                    "the twin experiment drives pineapple, engmf and free only".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Aggregated spatio-temporal RMSE for one (filter, N) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterStats {
    pub mean_rmse: f64,
    pub sigma3: f64,
    pub excluded_trials: usize,
}

/// One particle-count row of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzRow {
    pub n_particles: usize,
    pub pineapple: Option<FilterStats>,
    pub engmf: Option<FilterStats>,
    pub free: Option<FilterStats>,
}

/// Full experiment output: rows per particle count plus a deterministic log.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzResult {
    pub rows: Vec<LorenzRow>,
    pub log_lines: Vec<String>,
}

struct TrialOutput {
    /// RMSE per (filter index, particle index); NaN marks a failed run.
    rmse: Vec<Vec<f64>>,
    log_lines: Vec<String>,
}

/// Runs the Monte Carlo sweep. Trials run in parallel; the merge order is
/// fixed by trial index.
pub fn run_lorenz_experiment(cfg: &LorenzConfig) -> Result<LorenzResult> {
    cfg.validate()?;
    let outputs: Vec<Result<TrialOutput>> =
        map_range(cfg.trials, |trial| run_trial(cfg, trial as u64));
    let mut per_cell: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::with_capacity(cfg.trials); cfg.particles.len()]; cfg.filters.len()];
    let mut log_lines = Vec::new();
    for (trial, out) in outputs.into_iter().enumerate() {
        let out = out?;
        for (fi, per_n) in out.rmse.iter().enumerate() {
            for (ni, &v) in per_n.iter().enumerate() {
                per_cell[fi][ni].push(v);
            }
        }
        for line in out.log_lines {
            log_lines.push(format!("trial {trial}: {line}"));
        }
    }

    let mut rows = Vec::with_capacity(cfg.particles.len());
    for (ni, &n) in cfg.particles.iter().enumerate() {
        let mut row = LorenzRow {
            n_particles: n,
            pineapple: None,
            engmf: None,
            free: None,
        };
        for (fi, filter) in cfg.filters.iter().enumerate() {
            let (mean, sigma3, excluded) = aggregate(&per_cell[fi][ni]);
            if excluded > 0 {
                log_lines.push(format!(
                    "excluded {excluded} NaN trial(s) for {} at N={n}",
                    filter.label()
                ));
            }
            let stats = FilterStats {
                mean_rmse: mean,
                sigma3,
                excluded_trials: excluded,
            };
            match filter {
                FilterKind::Pineapple => row.pineapple = Some(stats),
                FilterKind::Engmf => row.engmf = Some(stats),
                FilterKind::Free => row.free = Some(stats),
                FilterKind::Ukf => unreachable!("rejected by validate"),
            }
        }
        rows.push(row);
    }
    Ok(LorenzResult { rows, log_lines })
}

fn run_trial(cfg: &LorenzConfig, trial: u64) -> Result<TrialOutput> {
    let constants = PhysicalConstants::default_set();
    let dynamics = Lorenz63 {
        published_rhs: cfg.published_rhs,
        ..Lorenz63::standard()
    };
    let integrator = IntegratorConfig::default();
    let mm = lorenz_range_measurement();
    let dt = constants.lorenz_dt;
    let r_std = constants.lorenz_r.sqrt();

    // Truth: perturbed start, long spin-in onto the attractor, then the
    // experiment window.
    let mut spin_start = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    {
        let mut rng = StreamKey::new(cfg.seed, trial, 0, Purpose::TruthInit).rng(0);
        for i in 0..3 {
            spin_start[i] += rng.sample::<f64, _>(StandardNormal);
        }
    }
    let truth0 = integrate(&dynamics, &spin_start, 0.0, 1000.0 * dt, &integrator)?;
    let mut truth = Vec::with_capacity(cfg.steps + 1);
    truth.push(truth0);
    for k in 1..=cfg.steps {
        let prev = &truth[k - 1];
        truth.push(integrate(&dynamics, prev, 0.0, dt, &integrator)?);
    }

    // Synthetic measurements at every assimilation epoch.
    let measurements: Vec<DVector<f64>> = (1..=cfg.steps)
        .map(|k| {
            let mut rng = StreamKey::new(cfg.seed, trial, k as u64, Purpose::MeasurementNoise).rng(0);
            let noise: f64 = rng.sample(StandardNormal);
            let mut y = mm.observe(&truth[k]);
            y[0] += r_std * noise;
            y
        })
        .collect();

    let mut rmse = vec![vec![f64::NAN; cfg.particles.len()]; cfg.filters.len()];
    let mut log_lines = Vec::new();
    for (ni, &n_particles) in cfg.particles.iter().enumerate() {
        // Initial ensemble: truth plus unit-covariance perturbations; shared
        // across filters so paired comparisons see identical starts.
        let init_key = StreamKey::new(cfg.seed, trial, 0, Purpose::InitialEnsemble);
        let members: Vec<StateVector> = (0..n_particles)
            .map(|i| {
                let mut rng = init_key.rng(i as u64);
                &truth[0] + DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal))
            })
            .collect();
        let initial = Ensemble::new(members)?;
        let v = cfg.defensive.value(n_particles);

        for (fi, filter) in cfg.filters.iter().enumerate() {
            match run_filter_trajectory(
                cfg, &dynamics, &integrator, &mm, &truth, &measurements, &initial, v, trial, *filter,
            ) {
                Ok((value, collapses)) => {
                    rmse[fi][ni] = value;
                    if collapses > 0 {
                        log_lines.push(format!(
                            "{} N={n_particles}: {collapses} weight-collapse recoveries",
                            filter.label()
                        ));
                    }
                }
                Err(e) => {
                    log_lines.push(format!("{} N={n_particles}: failed: {e}", filter.label()));
                }
            }
        }
    }
    Ok(TrialOutput { rmse, log_lines })
}

#[allow(clippy::too_many_arguments)]
fn run_filter_trajectory(
    cfg: &LorenzConfig,
    dynamics: &Lorenz63,
    integrator: &IntegratorConfig,
    mm: &crate::gaussian_sum::MeasurementModel,
    truth: &[StateVector],
    measurements: &[DVector<f64>],
    initial: &Ensemble,
    defensive: f64,
    trial: u64,
    filter: FilterKind,
) -> Result<(f64, usize)> {
    let dt = PhysicalConstants::default_set().lorenz_dt;
    let mut ensemble = initial.clone();
    let mut estimates = Vec::with_capacity(cfg.steps);
    let mut collapses = 0usize;
    for k in 1..=cfg.steps {
        let prop = PropagationSpec {
            dynamics,
            t0: 0.0,
            t1: dt,
            integrator,
        };
        let y = &measurements[k - 1];
        let report = match filter {
            FilterKind::Pineapple => {
                let (next, report) =
                    pineapple_step(&ensemble, &prop, mm, y, None, defensive, cfg.m_grid)?;
                ensemble = next;
                report.weight_collapse
            }
            FilterKind::Engmf => {
                let key = StreamKey::new(cfg.seed, trial, k as u64, Purpose::Resample);
                let (next, report) = engmf_step(&ensemble, &prop, mm, y, None, defensive, &key)?;
                ensemble = next;
                report.weight_collapse
            }
            FilterKind::Free => {
                let members = ensemble
                    .iter()
                    .map(|m| integrate(dynamics, m, 0.0, dt, integrator))
                    .collect::<Result<Vec<_>>>()?;
                ensemble = Ensemble::new(members)?;
                false
            }
            FilterKind::Ukf => unreachable!("rejected by validate"),
        };
        if report {
            collapses += 1;
        }
        let (mean, _) = sample_mean_cov(&ensemble);
        estimates.push(mean);
    }
    let value = spatio_temporal_rmse(&estimates, &truth[1..], cfg.spinup)?;
    Ok((value, collapses))
}

/// Renders the sweep as CSV with the fixed header
/// `Ns,mPineapple,s3Pineapple,mEnGMF,s3EnGMF`; a trailing
/// `mFree,s3Free` pair appears only when the free-running ensemble was
/// requested. Filters that were not run render as NaN.
pub fn lorenz_csv(result: &LorenzResult) -> String {
    let with_free = result.rows.iter().any(|r| r.free.is_some());
    let mut out = String::from("Ns,mPineapple,s3Pineapple,mEnGMF,s3EnGMF");
    if with_free {
        out.push_str(",mFree,s3Free");
    }
    out.push('\n');
    for row in &result.rows {
        let cell = |s: &Option<FilterStats>| match s {
            Some(st) => (st.mean_rmse, st.sigma3),
            None => (f64::NAN, f64::NAN),
        };
        let (mp, sp) = cell(&row.pineapple);
        let (me, se) = cell(&row.engmf);
        out.push_str(&format!(
            "{},{},{},{},{}",
            row.n_particles,
            format_float(mp),
            format_float(sp),
            format_float(me),
            format_float(se)
        ));
        if with_free {
            let (mf, sf) = cell(&row.free);
            out.push_str(&format!(",{},{}", format_float(mf), format_float(sf)));
        }
        out.push('\n');
    }
    out
}
