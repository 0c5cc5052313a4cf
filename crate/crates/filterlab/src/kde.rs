//! Kernel density estimation: turn an ensemble into a Gaussian mixture with
//! the Silverman bandwidth, optionally folding additive process noise into
//! the shared kernel covariance.
//!
//! Process noise enters only through the kernel covariance, never as a
//! per-particle perturbation, which keeps the estimate fully deterministic.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::gmm::{sample_mean_cov, symmetrize, Ensemble, Gaussian, GaussianMixture};

/// Bandwidth parameters for a Gaussian kernel density estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthParams {
    /// State dimension n.
    pub dim: usize,
    /// Ensemble size N.
    pub count: usize,
    /// Bandwidth beta^2.
    pub beta_sq: f64,
}

impl BandwidthParams {
    pub fn silverman(count: usize, dim: usize) -> Self {
        Self {
            dim,
            count,
            beta_sq: silverman_bandwidth(count, dim),
        }
    }
}

/// Silverman's rule bandwidth: beta^2 = (4 / (N (n + 2)))^(2 / (n + 4)).
///
/// Optimal for Gaussian-distributed samples and vanishing as N grows, so the
/// density estimate stays convergent for non-Gaussian distributions too.
pub fn silverman_bandwidth(count: usize, dim: usize) -> f64 {
    assert!(count >= 1 && dim >= 1, "silverman_bandwidth needs N >= 1 and n >= 1");
    let n = dim as f64;
    let big_n = count as f64;
    (4.0 / (big_n * (n + 2.0))).powf(2.0 / (n + 4.0))
}

/// Builds the Gaussian-mixture KDE of an ensemble: one component per member,
/// uniform weights, and a single shared covariance
/// `beta^2 Cov(X) + Q` (with `Q = 0` when absent).
///
/// The shared covariance must pass the Cholesky gate; a degenerate ensemble
/// with no process noise yields [`Error::DegenerateKde`].
pub fn kde_estimate(e: &Ensemble, process_noise: Option<&DMatrix<f64>>) -> Result<GaussianMixture> {
    let n = e.dim();
    if let Some(q) = process_noise {
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "process noise covariance",
                expected: n,
                got: q.nrows(),
            });
        }
    }
    if e.len() < 2 && process_noise.is_none() {
        return Err(Error::InvalidConfig(
            "kde_estimate needs N >= 2 or an explicit process-noise covariance".into(),
        ));
    }
    let bw = BandwidthParams::silverman(e.len(), n);
    let (_, cov_x) = sample_mean_cov(e);
    let mut shared = cov_x * bw.beta_sq;
    if let Some(q) = process_noise {
        shared += q;
    }
    let shared = symmetrize(&shared);
    if Cholesky::new(shared.clone()).is_none() {
        return Err(Error::DegenerateKde);
    }
    let components = e
        .iter()
        .map(|m| Gaussian::new(m.clone(), shared.clone()))
        .collect::<Result<Vec<_>>>()?;
    GaussianMixture::uniform(components)
}
