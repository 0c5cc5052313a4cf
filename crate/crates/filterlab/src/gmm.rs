//! Gaussian and Gaussian-mixture value types with the dense linear algebra
//! every other module consumes.
//!
//! Covariances are stored dense and re-symmetrized after arithmetic updates;
//! a successful Cholesky factorization is the single positive-definiteness
//! gate. All types are immutable values and all operations are pure.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// State vector; length is the model dimension n.
pub type StateVector = DVector<f64>;

pub const LN_TWO_PI: f64 = 1.837877066409345483560659472811;

/// A dense multivariate Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: StateVector,
    cov: DMatrix<f64>,
}

impl Gaussian {
    /// Builds a Gaussian, enforcing a symmetric (1e-12 relative) and
    /// positive-definite covariance.
    pub fn new(mean: StateVector, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "gaussian covariance",
                expected: n,
                got: cov.nrows(),
            });
        }
        let scale = cov.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidConfig(format!(
                        "covariance asymmetric at ({i},{j}): {} vs {}",
                        cov[(i, j)],
                        cov[(j, i)]
                    )));
                }
            }
        }
        let cov = symmetrize(&cov);
        if Cholesky::new(cov.clone()).is_none() {
            return Err(Error::CholeskyFailure {
                context: "gaussian constructor".into(),
            });
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &StateVector {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular Cholesky factor of the covariance.
    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.cov.clone()).ok_or_else(|| Error::CholeskyFailure {
            context: "gaussian covariance".into(),
        })
    }
}

/// Symmetrizes a matrix as (A + A')/2.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Log-density of `g` at `x`, computed via the Cholesky factor.
pub fn gaussian_logpdf(g: &Gaussian, x: &StateVector) -> Result<f64> {
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            context: "logpdf point",
            expected: g.dim(),
            got: x.len(),
        });
    }
    let chol = g.cholesky()?;
    log_density_from_cholesky(&chol, &(x - g.mean()))
}

/// Log of N(residual; 0, S) given the Cholesky factor of S.
pub fn log_density_from_cholesky(chol: &Cholesky<f64, Dyn>, residual: &DVector<f64>) -> Result<f64> {
    let n = residual.len() as f64;
    let l = chol.l_dirty();
    let mut log_det = 0.0;
    for i in 0..residual.len() {
        log_det += l[(i, i)].ln();
    }
    // Solve L z = residual; the quadratic form is |z|^2.
    let z = l
        .solve_lower_triangular(residual)
        .ok_or(Error::InnovationSingular)?;
    Ok(-0.5 * (n * LN_TWO_PI + z.norm_squared()) - log_det)
}

/// An ordered, equally weighted collection of state vectors. Order is part of
/// the determinism contract and is preserved by every operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<StateVector>,
}

impl Ensemble {
    pub fn new(members: Vec<StateVector>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidConfig("ensemble needs at least one member".into()));
        }
        let n = members[0].len();
        for (i, m) in members.iter().enumerate() {
            if m.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "ensemble member",
                    expected: n,
                    got: m.len(),
                });
            }
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidConfig(format!("ensemble member {i} is not finite")));
            }
        }
        Ok(Self { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].len()
    }

    pub fn members(&self) -> &[StateVector] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = &StateVector> {
        self.members.iter()
    }
}

/// Sample mean and unbiased (divisor N-1) sample covariance of an ensemble.
/// A single-member ensemble has zero covariance.
pub fn sample_mean_cov(e: &Ensemble) -> (StateVector, DMatrix<f64>) {
    let n = e.dim();
    let count = e.len();
    let mut mean = DVector::zeros(n);
    for m in e.iter() {
        mean += m;
    }
    mean /= count as f64;
    let mut cov = DMatrix::zeros(n, n);
    if count >= 2 {
        for m in e.iter() {
            let d = m - &mean;
            cov.syger(1.0, &d, &d, 1.0);
        }
        cov /= (count - 1) as f64;
        cov.fill_upper_triangle_with_lower_triangle();
    }
    (mean, cov)
}

/// A weighted Gaussian mixture; the filter's belief representation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<Gaussian>,
    weights: Vec<f64>,
}

impl GaussianMixture {
    /// Builds a mixture, enforcing nonnegative weights summing to one within
    /// 1e-12 and at least one component.
    pub fn new(components: Vec<Gaussian>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("mixture needs at least one component".into()));
        }
        if components.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                context: "mixture weights",
                expected: components.len(),
                got: weights.len(),
            });
        }
        let n = components[0].dim();
        for c in &components {
            if c.dim() != n {
                return Err(Error::DimensionMismatch {
                    context: "mixture component dimension",
                    expected: n,
                    got: c.dim(),
                });
            }
        }
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidConfig("mixture weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components, weights })
    }

    /// Mixture with uniform weights 1/N.
    pub fn uniform(components: Vec<Gaussian>) -> Result<Self> {
        let w = 1.0 / components.len() as f64;
        let weights = vec![w; components.len()];
        Self::new(components, weights)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn component(&self, i: usize) -> &Gaussian {
        &self.components[i]
    }
}

/// Mean and covariance of the mixture distribution:
/// mean = sum w_i mu_i, cov = sum w_i (Sigma_i + (mu_i - mu)(mu_i - mu)').
pub fn mixture_moments(m: &GaussianMixture) -> (StateVector, DMatrix<f64>) {
    let n = m.dim();
    let mut mean = DVector::zeros(n);
    for (g, &w) in m.components().iter().zip(m.weights()) {
        mean += g.mean() * w;
    }
    let mut cov = DMatrix::zeros(n, n);
    for (g, &w) in m.components().iter().zip(m.weights()) {
        cov += g.cov() * w;
        let d = g.mean() - &mean;
        cov.syger(w, &d, &d, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    (mean, symmetrize(&cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn scalar_gaussian(mean: f64, var: f64) -> Gaussian {
        Gaussian::new(dvector![mean], dmatrix![var]).unwrap()
    }

    #[test]
    fn logpdf_standard_normal_mode() {
        let g = scalar_gaussian(0.0, 1.0);
        let lp = gaussian_logpdf(&g, &dvector![0.0]).unwrap();
        assert_abs_diff_eq!(lp, -0.5 * LN_TWO_PI, epsilon = 1e-14);
        assert_abs_diff_eq!(lp, -0.9189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn logpdf_at_mean_is_normalizer() {
        let cov = dmatrix![2.0, 0.3; 0.3, 1.0];
        let mean = dvector![1.0, -2.0];
        let g = Gaussian::new(mean.clone(), cov.clone()).unwrap();
        let lp = gaussian_logpdf(&g, &mean).unwrap();
        let expect = -0.5 * (2.0 * LN_TWO_PI + cov.determinant().ln());
        assert_abs_diff_eq!(lp, expect, epsilon = 1e-12);
    }

    #[test]
    fn logpdf_two_dim_point() {
        let g = Gaussian::new(dvector![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let lp = gaussian_logpdf(&g, &dvector![3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(lp, -12.5 - LN_TWO_PI, epsilon = 1e-12);
        assert_abs_diff_eq!(lp, -14.337877066409345, epsilon = 1e-12);
    }

    #[test]
    fn logpdf_rejects_indefinite_cov() {
        let err = Gaussian::new(dvector![0.0], dmatrix![-1.0]).unwrap_err();
        assert!(matches!(err, Error::CholeskyFailure { .. }));
    }

    #[test]
    fn sample_mean_cov_identical_members() {
        let v = dvector![1.0, 2.0];
        let e = Ensemble::new(vec![v.clone(), v.clone()]).unwrap();
        let (mean, cov) = sample_mean_cov(&e);
        assert_eq!(mean, v);
        assert_eq!(cov, DMatrix::zeros(2, 2));
    }

    #[test]
    fn sample_mean_cov_hand_case() {
        let e = Ensemble::new(vec![dvector![0.0], dvector![2.0]]).unwrap();
        let (mean, cov) = sample_mean_cov(&e);
        assert_abs_diff_eq!(mean[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cov[(0, 0)], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn sample_mean_cov_permutation_invariant() {
        let a = dvector![1.0, 0.0];
        let b = dvector![-2.0, 3.0];
        let c = dvector![0.5, 0.5];
        let e1 = Ensemble::new(vec![a.clone(), b.clone(), c.clone()]).unwrap();
        let e2 = Ensemble::new(vec![c, a, b]).unwrap();
        let (m1, c1) = sample_mean_cov(&e1);
        let (m2, c2) = sample_mean_cov(&e2);
        assert_abs_diff_eq!((m1 - m2).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((c1 - c2).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mixture_moments_single_component() {
        let g = Gaussian::new(dvector![3.0], dmatrix![4.0]).unwrap();
        let m = GaussianMixture::new(vec![g.clone()], vec![1.0]).unwrap();
        let (mean, cov) = mixture_moments(&m);
        assert_eq!(mean, *g.mean());
        assert_eq!(cov, *g.cov());
    }

    #[test]
    fn mixture_moments_two_point_mixture() {
        // N(-1, eps) and N(+1, eps) with equal weights: mean 0, cov ~ 1.
        let eps = 1e-14;
        let a = scalar_gaussian(-1.0, eps);
        let b = scalar_gaussian(1.0, eps);
        let m = GaussianMixture::new(vec![a, b], vec![0.5, 0.5]).unwrap();
        let (mean, cov) = mixture_moments(&m);
        assert_abs_diff_eq!(mean[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cov[(0, 0)], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn mixture_moments_permutation_invariant() {
        let a = Gaussian::new(dvector![1.0, 0.0], dmatrix![1.0, 0.2; 0.2, 2.0]).unwrap();
        let b = Gaussian::new(dvector![-2.0, 1.0], dmatrix![0.5, 0.0; 0.0, 0.5]).unwrap();
        let m1 = GaussianMixture::new(vec![a.clone(), b.clone()], vec![0.3, 0.7]).unwrap();
        let m2 = GaussianMixture::new(vec![b, a], vec![0.7, 0.3]).unwrap();
        let (mean1, cov1) = mixture_moments(&m1);
        let (mean2, cov2) = mixture_moments(&m2);
        assert_abs_diff_eq!((mean1 - mean2).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((cov1 - cov2).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        let g = scalar_gaussian(0.0, 1.0);
        assert!(GaussianMixture::new(vec![g.clone()], vec![0.5]).is_err());
        assert!(GaussianMixture::new(vec![g], vec![-1.0]).is_err());
    }
}
