//! The measurement-update half of the filter: per-component EKF updates with
//! Joseph-form covariances, evidence-based weight updates in log space, and
//! defensive-factor regularization toward uniform weights.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gmm::{log_density_from_cholesky, symmetrize, Gaussian, GaussianMixture, StateVector};

type ObsFn = dyn Fn(&StateVector) -> DVector<f64> + Send + Sync;
type JacFn = dyn Fn(&StateVector) -> DMatrix<f64> + Send + Sync;

/// A nonlinear measurement operator `h`, its analytic Jacobian, and the
/// measurement noise covariance R.
///
/// Components listed in `angular` are treated as angles: their residuals are
/// wrapped to (-pi, pi] before entering the update.
pub struct MeasurementModel {
    h: Box<ObsFn>,
    jacobian: Box<JacFn>,
    noise_cov: DMatrix<f64>,
    angular: Vec<usize>,
}

impl MeasurementModel {
    pub fn new<H, J>(h: H, jacobian: J, noise_cov: DMatrix<f64>) -> Self
    where
        H: Fn(&StateVector) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&StateVector) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            h: Box::new(h),
            jacobian: Box::new(jacobian),
            noise_cov,
            angular: Vec::new(),
        }
    }

    /// Marks measurement components (by index) whose residuals wrap at +-pi.
    pub fn with_angular(mut self, indices: Vec<usize>) -> Self {
        self.angular = indices;
        self
    }

    pub fn observe(&self, x: &StateVector) -> DVector<f64> {
        (self.h)(x)
    }

    pub fn jacobian_at(&self, x: &StateVector) -> DMatrix<f64> {
        (self.jacobian)(x)
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn obs_dim(&self) -> usize {
        self.noise_cov.nrows()
    }

    /// Residual y - h(x) prediction with angular components wrapped.
    pub fn residual(&self, y: &DVector<f64>, predicted: &DVector<f64>) -> DVector<f64> {
        let mut r = y - predicted;
        for &i in &self.angular {
            r[i] = wrap_angle(r[i]);
        }
        r
    }
}

impl std::fmt::Debug for MeasurementModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasurementModel")
            .field("obs_dim", &self.obs_dim())
            .field("angular", &self.angular)
            .finish()
    }
}

/// Wraps an angle difference to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// One extended-Kalman-filter update of a single Gaussian component,
/// linearized around the prior mean.
///
/// Returns the posterior component and the log-evidence
/// `log N(y; h(mu), H Sigma H' + R)` used for the mixture weight update.
/// The covariance update uses the Joseph form and must pass the Cholesky
/// gate afterwards.
pub fn ekf_component_update(
    g: &Gaussian,
    mm: &MeasurementModel,
    y: &DVector<f64>,
) -> Result<(Gaussian, f64)> {
    let n = g.dim();
    if y.len() != mm.obs_dim() {
        return Err(Error::DimensionMismatch {
            context: "measurement",
            expected: mm.obs_dim(),
            got: y.len(),
        });
    }
    let h = mm.jacobian_at(g.mean());
    let predicted = mm.observe(g.mean());
    let innovation = mm.residual(y, &predicted);

    let ph_t = g.cov() * h.transpose();
    let s = symmetrize(&(&h * &ph_t + mm.noise_cov()));
    let chol_s = Cholesky::new(s).ok_or(Error::InnovationSingular)?;
    let log_evidence = log_density_from_cholesky(&chol_s, &innovation)?;

    // Gain K = P H' S^-1 via the Cholesky solve.
    let gain = chol_s.solve(&ph_t.transpose()).transpose();
    let post_mean = g.mean() + &gain * &innovation;

    // Joseph form: (I - K H) P (I - K H)' + K R K'.
    let ikh = DMatrix::<f64>::identity(n, n) - &gain * &h;
    let post_cov = &ikh * g.cov() * ikh.transpose() + &gain * mm.noise_cov() * gain.transpose();
    let post = Gaussian::new(post_mean, symmetrize(&post_cov)).map_err(|e| match e {
        Error::CholeskyFailure { .. } => Error::CholeskyFailure {
            context: "posterior covariance after Joseph update".into(),
        },
        other => other,
    })?;
    Ok((post, log_evidence))
}

/// Posterior mixture weights `w_i^+ ~ w_i^- exp(log_evidence_i)`, normalized
/// with a log-sum-exp shift so the largest exponent is zero.
pub fn update_weights(log_evidences: &[f64], prior_weights: &[f64]) -> Result<Vec<f64>> {
    if log_evidences.len() != prior_weights.len() {
        return Err(Error::DimensionMismatch {
            context: "log evidences",
            expected: prior_weights.len(),
            got: log_evidences.len(),
        });
    }
    // Combine in log space; weight 0 contributes -inf regardless of evidence.
    let logs: Vec<f64> = log_evidences
        .iter()
        .zip(prior_weights)
        .map(|(&le, &w)| if w > 0.0 { le + w.ln() } else { f64::NEG_INFINITY })
        .collect();
    let shift = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::TotalWeightCollapse);
    }
    let unnorm: Vec<f64> = logs.iter().map(|&l| (l - shift).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|u| u / total).collect())
}

/// Defensive-factor regularization `w_i <- (1 - v) w_i + v / N`.
///
/// `v = 0` is the identity; uniform weights are a fixed point for any `v`.
pub fn apply_defensive_factor(weights: &[f64], v: f64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&v), "defensive factor must lie in [0, 1)");
    let n = weights.len() as f64;
    weights.iter().map(|&w| (1.0 - v) * w + v / n).collect()
}

/// Full Gaussian-sum measurement update: per-component EKF updates, the
/// evidence weight update, then the defensive factor.
///
/// Component updates are independent; the weight normalization is an ordered
/// reduction over ascending component index, so the result does not depend
/// on scheduling.
pub fn gaussian_sum_update(
    prior: &GaussianMixture,
    mm: &MeasurementModel,
    y: &DVector<f64>,
    defensive: f64,
) -> Result<GaussianMixture> {
    let results: Vec<(Gaussian, f64)> = prior
        .components()
        .iter()
        .enumerate()
        .map(|(i, g)| ekf_component_update(g, mm, y).map_err(|e| e.for_component(i)))
        .collect::<Result<Vec<_>>>()?;
    let (components, log_evidences): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let weights = update_weights(&log_evidences, prior.weights())?;
    let weights = apply_defensive_factor(&weights, defensive);
    // Renormalize exactly once to absorb roundoff from the affine map.
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / total).collect();
    GaussianMixture::new(components, weights)
}
