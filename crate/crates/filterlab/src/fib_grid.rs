//! Deterministic, equally weighted point grids approximating Gaussian
//! distributions, and their union over mixture components.
//!
//! The standard grid places floor(M/2) points through a golden-ratio rank-1
//! lattice on the unit hypercube: point k has coordinates frac(k * alpha_d)
//! with alpha_d = phi_n^-d, where phi_n is the unique real root of
//! x^(n+1) = x + 1. Lattice coordinates are mapped through the inverse
//! standard-normal CDF, then the origin and all antipodal reflections are
//! added to reach M points. A final scalar rescaling pins the grid
//! covariance trace to exactly n. The construction is fully deterministic,
//! the mean is always a grid point, and the approximation sharpens as M
//! grows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gmm::{Gaussian, GaussianMixture, StateVector};

/// M equally weighted points approximating one Gaussian.
///
/// M is odd; the point at index `(M - 1) / 2` is exactly the target mean and
/// the remaining points come in antipodal pairs about it: the negative branch
/// in descending lattice index, then the mean, then the positive branch in
/// ascending lattice index.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicGrid {
    points: Vec<StateVector>,
    weight_each: f64,
}

impl DeterministicGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[StateVector] {
        &self.points
    }

    pub fn weight_each(&self) -> f64 {
        self.weight_each
    }

    /// Index of the point that equals the target mean.
    pub fn center_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Equal-weight mean of the grid points.
    pub fn mean(&self) -> StateVector {
        let mut m = DVector::zeros(self.dim());
        for p in &self.points {
            m += p;
        }
        m / self.len() as f64
    }

    /// Equal-weight covariance of the grid about its mean (divisor M; the
    /// grid is an empirical measure, not a sample).
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let n = self.dim();
        let mut cov = DMatrix::zeros(n, n);
        for p in &self.points {
            let d = p - &mean;
            cov.syger(1.0, &d, &d, 1.0);
        }
        cov.fill_upper_triangle_with_lower_triangle();
        cov / self.len() as f64
    }
}

/// Grid points for a whole mixture in `mat` order: the N component means
/// occupy positions 0..N, the remaining grid points follow grouped by
/// component and then by grid index. Point (i, j) carries weight w_i / M.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCollection {
    points: Vec<StateVector>,
    weights: Vec<f64>,
    component_index: Vec<usize>,
    grid_index: Vec<usize>,
}

impl WeightedCollection {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[StateVector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn component_index(&self) -> &[usize] {
        &self.component_index
    }

    pub fn grid_index(&self) -> &[usize] {
        &self.grid_index
    }
}

/// Unique real root of x^(n+1) = x + 1 (the golden ratio for n = 1, the
/// plastic number for n = 2, ...), via the contraction x <- (1 + x)^(1/(n+1)).
pub(crate) fn generalized_golden_ratio(n: usize) -> f64 {
    let mut x = 2.0_f64;
    let inv = 1.0 / (n as f64 + 1.0);
    for _ in 0..128 {
        x = (1.0 + x).powf(inv);
    }
    x
}

/// Deterministic grid of M points approximating N(0, I_n).
pub fn standard_fib_grid(m: usize, dim: usize) -> Result<DeterministicGrid> {
    if m == 0 || m % 2 == 0 {
        return Err(Error::InvalidGridSize { m });
    }
    assert!(dim >= 1, "grid dimension must be at least 1");
    let half = (m - 1) / 2;
    let phi = generalized_golden_ratio(dim);
    let alpha: Vec<f64> = (1..=dim).map(|d| phi.powi(-(d as i32))).collect();

    let mut branch = Vec::with_capacity(half);
    for k in 1..=half {
        let mut z = DVector::zeros(dim);
        for (d, &a) in alpha.iter().enumerate() {
            let u = (k as f64 * a).fract();
            z[d] = inv_norm_cdf(u);
        }
        branch.push(z);
    }

    let mut points = Vec::with_capacity(m);
    for i in (0..half).rev() {
        points.push(-&branch[i]);
    }
    points.push(DVector::zeros(dim));
    points.extend(branch);

    // Pin the covariance trace to n exactly (up to roundoff): the reflected
    // lattice has no radial bias left after this single scalar.
    let total_sq: f64 = points.iter().map(|p| p.norm_squared()).sum();
    if total_sq > 0.0 {
        let scale = (dim as f64 * m as f64 / total_sq).sqrt();
        for p in &mut points {
            *p *= scale;
        }
    }

    Ok(DeterministicGrid {
        points,
        weight_each: 1.0 / m as f64,
    })
}

/// Grid for a general Gaussian: the standard grid mapped through
/// `mu + L p` with L the lower Cholesky factor of the covariance.
pub fn component_grid(g: &Gaussian, m: usize) -> Result<DeterministicGrid> {
    let std = standard_fib_grid(m, g.dim())?;
    let l = g.cholesky()?.l();
    let points = std
        .points
        .iter()
        .map(|p| g.mean() + &l * p)
        .collect::<Vec<_>>();
    Ok(DeterministicGrid {
        points,
        weight_each: std.weight_each,
    })
}

/// Union of per-component grids over a mixture, in `mat` order with the
/// component means first.
pub fn gmm_grid(mixture: &GaussianMixture, m: usize) -> Result<WeightedCollection> {
    let n_comp = mixture.len();
    let grids = mixture
        .components()
        .iter()
        .enumerate()
        .map(|(i, g)| component_grid(g, m).map_err(|e| e.for_component(i)))
        .collect::<Result<Vec<_>>>()?;
    let center = grids[0].center_index();

    let total = n_comp * m;
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut component_index = Vec::with_capacity(total);
    let mut grid_index = Vec::with_capacity(total);

    for (i, grid) in grids.iter().enumerate() {
        points.push(grid.points()[center].clone());
        weights.push(mixture.weights()[i] / m as f64);
        component_index.push(i);
        grid_index.push(center);
    }
    for (i, grid) in grids.iter().enumerate() {
        for (j, p) in grid.points().iter().enumerate() {
            if j == center {
                continue;
            }
            points.push(p.clone());
            weights.push(mixture.weights()[i] / m as f64);
            component_index.push(i);
            grid_index.push(j);
        }
    }

    Ok(WeightedCollection {
        points,
        weights,
        component_index,
        grid_index,
    })
}

/// Inverse standard-normal CDF.
///
/// Acklam's rational approximation (coefficients below, |relative error|
/// < 1.2e-9 on its own) refined by one Halley step against an in-repo
/// double-precision `erfc`, leaving the result accurate to ~1e-14. The
/// upper half reflects through the lower half, so the function is exactly
/// antisymmetric and keeps full precision in both tails. The formula is
/// fixed here so every platform evaluates the identical expression.
pub fn inv_norm_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "inv_norm_cdf requires p in (0, 1), got {p}");
    if p > 0.5 {
        -inv_norm_cdf_lower(1.0 - p)
    } else {
        inv_norm_cdf_lower(p)
    }
}

/// Inverse CDF on (0, 0.5], where the result is nonpositive.
fn inv_norm_cdf_lower(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x0 = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    // One Halley refinement: e = Phi(x0) - p, with x0 <= 0 so the erfc
    // argument is nonnegative and the evaluation loses no precision.
    let e = 0.5 * erfc(-x0 / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x0 * x0 / 2.0).exp();
    x0 - u / (1.0 + x0 * u / 2.0)
}

/// Complementary error function, accurate to ~1e-15: Maclaurin series of erf
/// for |x| < 2, the classical continued fraction for the tail.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    const TWO_OVER_SQRT_PI: f64 = 1.1283791670955126;
    if x < 2.0 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^k x^(2k+1) / (k! (2k+1))
        let xx = x * x;
        let mut term = x;
        let mut sum = x;
        for k in 1..200 {
            term *= -xx / k as f64;
            let add = term / (2.0 * k as f64 + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        1.0 - TWO_OVER_SQRT_PI * sum
    } else {
        // sqrt(pi) exp(x^2) erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        let mut tail = 0.0;
        for k in (1..=80).rev() {
            tail = (k as f64 / 2.0) / (x + tail);
        }
        (TWO_OVER_SQRT_PI / 2.0) * (-x * x).exp() / (x + tail)
    }
}
