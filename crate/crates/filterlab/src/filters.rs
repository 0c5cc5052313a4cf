//! Assembled sequential filters: the deterministic transport filter, the
//! stochastic-resampling EnGMF, and a UKF baseline. Each exposes one
//! `step(belief, measurement) -> belief` cycle.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian_sum::{
    apply_defensive_factor, ekf_component_update, update_weights, MeasurementModel,
};
use crate::gmm::{symmetrize, Ensemble, Gaussian, GaussianMixture, StateVector};
use crate::kde::kde_estimate;
use crate::models::integrator::{integrate, Dynamics, IntegratorConfig};
use crate::resampling::{deterministic_resample, stochastic_resample};
use crate::stream::StreamKey;

/// How one propagation leg is performed.
pub struct PropagationSpec<'a> {
    pub dynamics: &'a dyn Dynamics,
    pub t0: f64,
    pub t1: f64,
    pub integrator: &'a IntegratorConfig,
}

/// Events worth surfacing from a filter step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    /// The evidence underflowed for every component and the weights were
    /// reset to uniform.
    pub weight_collapse: bool,
}

/// Unscented-transform parameters; `lambda = alpha^2 (n + kappa) - n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl UkfParams {
    /// The baseline parameters used by the lunar comparison:
    /// alpha = 1, beta = 2, kappa = -3.
    pub fn baseline() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: -3.0,
        }
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.alpha * self.alpha * (n as f64 + self.kappa) - n as f64
    }

    /// Mean and covariance sigma weights (w0_mean, w0_cov, w_rest).
    pub fn weights(&self, n: usize) -> Result<(f64, f64, f64)> {
        let lambda = self.lambda(n);
        let denom = n as f64 + lambda;
        if denom <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "UKF parameters give n + lambda = {denom} <= 0 for n = {n}"
            )));
        }
        let w0_mean = lambda / denom;
        let w0_cov = w0_mean + 1.0 - self.alpha * self.alpha + self.beta;
        let w_rest = 0.5 / denom;
        Ok((w0_mean, w0_cov, w_rest))
    }
}

fn propagate_members(e: &Ensemble, prop: &PropagationSpec) -> Result<Ensemble> {
    let members = e
        .iter()
        .map(|m| integrate(prop.dynamics, m, prop.t0, prop.t1, prop.integrator))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(members)
}

/// Gaussian-sum update with the filter loop's weight-collapse recovery:
/// when every evidence underflows, the weights reset to uniform and the
/// event is reported.
fn measurement_update(
    prior: &GaussianMixture,
    mm: &MeasurementModel,
    y: &DVector<f64>,
    defensive: f64,
    report: &mut StepReport,
) -> Result<GaussianMixture> {
    let results: Vec<(Gaussian, f64)> = prior
        .components()
        .iter()
        .enumerate()
        .map(|(i, g)| ekf_component_update(g, mm, y).map_err(|e| e.for_component(i)))
        .collect::<Result<Vec<_>>>()?;
    let (components, log_evidences): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let weights = match update_weights(&log_evidences, prior.weights()) {
        Ok(w) => w,
        Err(Error::TotalWeightCollapse) => {
            report.weight_collapse = true;
            vec![1.0 / prior.len() as f64; prior.len()]
        }
        Err(other) => return Err(other),
    };
    let weights = apply_defensive_factor(&weights, defensive);
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / total).collect();
    GaussianMixture::new(components, weights)
}

/// One deterministic filter cycle: propagate every member without noise,
/// rebuild the KDE with the process noise folded into the kernel, run the
/// Gaussian-sum update, and resample on the M-point grids through the exact
/// transport solve. The entire step is deterministic.
pub fn pineapple_step(
    e: &Ensemble,
    prop: &PropagationSpec,
    mm: &MeasurementModel,
    y: &DVector<f64>,
    process_noise: Option<&DMatrix<f64>>,
    defensive: f64,
    m_grid: usize,
) -> Result<(Ensemble, StepReport)> {
    let mut report = StepReport::default();
    let propagated = propagate_members(e, prop)?;
    let prior = kde_estimate(&propagated, process_noise)?;
    let posterior = measurement_update(&prior, mm, y, defensive, &mut report)?;
    let resampled = deterministic_resample(&posterior, m_grid)?;
    Ok((resampled, report))
}

/// One stochastic-resampling cycle (the EnGMF baseline): as
/// [`pineapple_step`] but drawing the output ensemble from the posterior
/// mixture through the given stream.
pub fn engmf_step(
    e: &Ensemble,
    prop: &PropagationSpec,
    mm: &MeasurementModel,
    y: &DVector<f64>,
    process_noise: Option<&DMatrix<f64>>,
    defensive: f64,
    stream: &StreamKey,
) -> Result<(Ensemble, StepReport)> {
    let mut report = StepReport::default();
    let propagated = propagate_members(e, prop)?;
    let prior = kde_estimate(&propagated, process_noise)?;
    let posterior = measurement_update(&prior, mm, y, defensive, &mut report)?;
    let resampled = stochastic_resample(&posterior, e.len(), stream)?;
    Ok((resampled, report))
}

fn sigma_points(mean: &StateVector, cov: &DMatrix<f64>, lambda: f64) -> Result<Vec<StateVector>> {
    let n = mean.len();
    let scaled = symmetrize(&(cov * (n as f64 + lambda)));
    let l = Cholesky::new(scaled)
        .ok_or_else(|| Error::UkfDivergence {
            context: "sigma-point covariance is not positive definite".into(),
        })?
        .unpack();
    let mut pts = Vec::with_capacity(2 * n + 1);
    pts.push(mean.clone());
    for i in 0..n {
        let col = l.column(i).into_owned();
        pts.push(mean + &col);
        pts.push(mean - &col);
    }
    Ok(pts)
}

/// One unscented Kalman filter cycle: 2n+1 sigma points propagated through
/// the dynamics (additive process noise), then a fresh sigma set through the
/// measurement. A covariance that stops being positive definite raises
/// [`Error::UkfDivergence`]; with the baseline parameters on a strongly
/// nonlinear pass this is an expected, recordable outcome.
pub fn ukf_step(
    g: &Gaussian,
    prop: &PropagationSpec,
    mm: &MeasurementModel,
    y: &DVector<f64>,
    process_noise: Option<&DMatrix<f64>>,
    params: &UkfParams,
) -> Result<Gaussian> {
    let n = g.dim();
    let lambda = params.lambda(n);
    let (w0m, w0c, wi) = params.weights(n)?;

    // Predict.
    let pts = sigma_points(g.mean(), g.cov(), lambda)?;
    let propagated: Vec<StateVector> = pts
        .iter()
        .map(|p| integrate(prop.dynamics, p, prop.t0, prop.t1, prop.integrator))
        .collect::<Result<Vec<_>>>()?;
    let weight = |i: usize, for_cov: bool| -> f64 {
        if i == 0 {
            if for_cov {
                w0c
            } else {
                w0m
            }
        } else {
            wi
        }
    };
    let mut pred_mean = DVector::zeros(n);
    for (i, p) in propagated.iter().enumerate() {
        pred_mean += p * weight(i, false);
    }
    let mut pred_cov = DMatrix::zeros(n, n);
    for (i, p) in propagated.iter().enumerate() {
        let d = p - &pred_mean;
        pred_cov.syger(weight(i, true), &d, &d, 1.0);
    }
    pred_cov.fill_upper_triangle_with_lower_triangle();
    if let Some(q) = process_noise {
        pred_cov += q;
    }
    let pred_cov = symmetrize(&pred_cov);
    if Cholesky::new(pred_cov.clone()).is_none() {
        return Err(Error::UkfDivergence {
            context: "predicted covariance failed the Cholesky gate".into(),
        });
    }

    // Update with a fresh sigma set from the predicted Gaussian.
    let pts = sigma_points(&pred_mean, &pred_cov, lambda)?;
    let m = mm.obs_dim();
    let mut obs: Vec<DVector<f64>> = pts.iter().map(|p| mm.observe(p)).collect();
    // Align angular components with the central sigma point before summing.
    let reference = obs[0].clone();
    for o in obs.iter_mut().skip(1) {
        let aligned = mm.residual(o, &reference);
        *o = &reference + aligned;
    }
    let mut obs_mean = DVector::zeros(m);
    for (i, o) in obs.iter().enumerate() {
        obs_mean += o * weight(i, false);
    }
    let mut s = mm.noise_cov().clone();
    let mut cross = DMatrix::zeros(n, m);
    for (i, o) in obs.iter().enumerate() {
        let dy = o - &obs_mean;
        let dx = &pts[i] - &pred_mean;
        let w = weight(i, true);
        s.syger(w, &dy, &dy, 1.0);
        cross += w * dx * dy.transpose();
    }
    s.fill_upper_triangle_with_lower_triangle();
    let s = symmetrize(&s);
    let chol_s = Cholesky::new(s.clone()).ok_or(Error::InnovationSingular)?;
    let gain = chol_s.solve(&cross.transpose()).transpose();
    let innovation = mm.residual(y, &obs_mean);
    let post_mean = &pred_mean + &gain * &innovation;
    let post_cov = symmetrize(&(&pred_cov - &gain * &s * gain.transpose()));
    Gaussian::new(post_mean, post_cov).map_err(|e| match e {
        Error::CholeskyFailure { .. } => Error::UkfDivergence {
            context: "updated covariance failed the Cholesky gate".into(),
        },
        other => other,
    })
}
