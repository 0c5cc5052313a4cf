//! Monte Carlo experiment driver: configures trials, runs filters over truth
//! trajectories, aggregates spatio-temporal RMSE statistics, and renders the
//! CSV outputs.
//!
//! Trials are embarrassingly parallel; every aggregation is an ordered
//! reduction over trial index, so output bytes never depend on the thread
//! count. All randomness flows through counter-based streams keyed by
//! (seed, trial, step, purpose).

mod demo;
mod lorenz;
mod nrho;

pub use demo::{run_pineapple_demo, DemoConfig, DemoResult};
pub use lorenz::{
    lorenz_csv, run_lorenz_experiment, FilterStats, LorenzConfig, LorenzResult, LorenzRow,
};
pub use nrho::{
    nrho_filter_csv, nrho_truth_epochs, run_nrho_experiment, NrhoEpochRecord,
    NrhoExperimentConfig, NrhoResult,
};

use crate::error::{Error, Result};
use crate::gmm::StateVector;

/// Filters the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FilterKind {
    /// Deterministic grid-plus-transport resampling.
    Pineapple,
    /// Stochastic-resampling ensemble Gaussian mixture filter.
    Engmf,
    /// Unscented Kalman filter baseline.
    Ukf,
    /// Free-running ensemble: propagation only, no assimilation.
    Free,
}

impl FilterKind {
    pub fn label(&self) -> &'static str {
        match self {
            FilterKind::Pineapple => "pineapple",
            FilterKind::Engmf => "engmf",
            FilterKind::Ukf => "ukf",
            FilterKind::Free => "free",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pineapple" => Ok(FilterKind::Pineapple),
            "engmf" => Ok(FilterKind::Engmf),
            "ukf" => Ok(FilterKind::Ukf),
            "free" => Ok(FilterKind::Free),
            other => Err(Error::InvalidConfig(format!("unknown filter {other:?}"))),
        }
    }
}

/// Defensive-factor schedule: either a fixed value or `c / sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefensiveRule {
    Fixed(f64),
    InvSqrtN(f64),
}

impl DefensiveRule {
    pub fn value(&self, n_particles: usize) -> f64 {
        match *self {
            DefensiveRule::Fixed(v) => v,
            DefensiveRule::InvSqrtN(c) => c / (n_particles as f64).sqrt(),
        }
    }

    /// Parses `fixed:0.05` or `invsqrt:0.1`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("defensive rule {s:?}: expected kind:value")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("defensive rule {s:?}: bad number")))?;
        if !(0.0..1.0).contains(&v) {
            return Err(Error::InvalidConfig(format!(
                "defensive value {v} outside [0, 1)"
            )));
        }
        match kind.trim() {
            "fixed" => Ok(DefensiveRule::Fixed(v)),
            "invsqrt" => Ok(DefensiveRule::InvSqrtN(v)),
            other => Err(Error::InvalidConfig(format!("unknown defensive kind {other:?}"))),
        }
    }
}

/// Spatio-temporal RMSE over both time steps and state components:
/// `sqrt( sum_{k > spinup} |e_k - x_k|^2 / ((K - spinup) n) )`.
pub fn spatio_temporal_rmse(
    estimates: &[StateVector],
    truth: &[StateVector],
    spinup: usize,
) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "rmse trajectory lengths",
            expected: truth.len(),
            got: estimates.len(),
        });
    }
    let total = estimates.len();
    if spinup >= total {
        return Err(Error::InvalidConfig(format!(
            "spinup {spinup} must be smaller than the trajectory length {total}"
        )));
    }
    let dim = truth[0].len();
    let mut acc = 0.0;
    for k in spinup..total {
        acc += (&estimates[k] - &truth[k]).norm_squared();
    }
    Ok((acc / ((total - spinup) as f64 * dim as f64)).sqrt())
}

/// Mean and 3-sigma spread over trials, excluding NaN entries; the exclusion
/// count is reported alongside.
pub(crate) fn aggregate(values: &[f64]) -> (f64, f64, usize) {
    let valid: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let excluded = values.len() - valid.len();
    if valid.is_empty() {
        return (f64::NAN, f64::NAN, excluded);
    }
    let mean = valid.iter().sum::<f64>() / valid.len() as f64;
    let sigma3 = if valid.len() >= 2 {
        let var = valid.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (valid.len() - 1) as f64;
        3.0 * var.sqrt()
    } else {
        f64::NAN
    };
    (mean, sigma3, excluded)
}

/// Full-precision decimal rendering: 17 significant digits round-trips f64
/// exactly; NaN renders as `NaN`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    #[test]
    fn rmse_zero_for_exact_estimates() {
        let t = vec![dvector![1.0, 2.0], dvector![3.0, 4.0]];
        assert_eq!(spatio_temporal_rmse(&t, &t, 0).unwrap(), 0.0);
    }

    #[test]
    fn rmse_constant_error_collapses_to_magnitude() {
        let truth = vec![dvector![0.0, 0.0]; 5];
        let eps = 0.3;
        let est = vec![dvector![eps, eps]; 5];
        assert_abs_diff_eq!(
            spatio_temporal_rmse(&est, &truth, 0).unwrap(),
            eps,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rmse_hand_case() {
        let truth = vec![dvector![0.0], dvector![0.0]];
        let est = vec![dvector![3.0], dvector![4.0]];
        assert_abs_diff_eq!(
            spatio_temporal_rmse(&est, &truth, 0).unwrap(),
            (12.5_f64).sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rmse_respects_spinup() {
        let truth = vec![dvector![0.0], dvector![0.0], dvector![0.0]];
        let est = vec![dvector![100.0], dvector![1.0], dvector![1.0]];
        assert_abs_diff_eq!(
            spatio_temporal_rmse(&est, &truth, 1).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rmse_length_mismatch() {
        let truth = vec![dvector![0.0]];
        let est = vec![dvector![0.0], dvector![1.0]];
        assert!(spatio_temporal_rmse(&est, &truth, 0).is_err());
    }

    #[test]
    fn aggregate_excludes_nan() {
        let (mean, sigma3, excluded) = aggregate(&[1.0, 3.0, f64::NAN]);
        assert_abs_diff_eq!(mean, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma3, 3.0 * (2.0_f64).sqrt(), epsilon = 1e-12);
        assert_eq!(excluded, 1);
    }

    #[test]
    fn format_float_round_trips() {
        for &v in &[0.1, -3.5355339059327378, 1e-300, 2.5e17] {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v);
        }
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn defensive_rules() {
        assert_abs_diff_eq!(DefensiveRule::Fixed(0.05).value(30), 0.05, epsilon = 0.0);
        assert_abs_diff_eq!(
            DefensiveRule::InvSqrtN(0.1).value(4),
            0.05,
            epsilon = 1e-15
        );
        assert!(DefensiveRule::parse("fixed:0.05").is_ok());
        assert!(DefensiveRule::parse("invsqrt:0.1").is_ok());
        assert!(DefensiveRule::parse("bogus").is_err());
        assert!(DefensiveRule::parse("fixed:1.5").is_err());
    }
}
