//! Independent reference implementations ("oracles") for the filterlab test
//! suites.
//!
//! Nothing in this crate is consumed by the library under test; every routine
//! here is a deliberately separate computation path (dense tableau simplex,
//! textbook Kalman algebra, fixed-step integration, finite differences) used
//! to cross-check the production implementations.

use nalgebra::{DMatrix, DVector};

/// Solves `min c'x  s.t.  Ax = b, x >= 0` with a dense two-phase tableau
/// simplex using Bland's anti-cycling rule.
///
/// Returns `(objective, x)` or `None` when the program is infeasible. Sized
/// for the small transportation instances used in tests; not a production
/// solver.
pub fn solve_lp(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(c.len(), n);
    assert_eq!(b.len(), m);

    // Phase 1: artificial variables, minimize their sum. Flip rows so b >= 0.
    let mut tab = DMatrix::<f64>::zeros(m + 1, n + m + 1);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[(i, j)] = sign * a[(i, j)];
        }
        tab[(i, n + i)] = 1.0;
        tab[(i, n + m)] = sign * b[i];
    }
    // Phase-1 objective row: sum of artificial rows (so reduced costs start consistent).
    for j in 0..(n + m + 1) {
        let mut s = 0.0;
        for i in 0..m {
            s += tab[(i, j)];
        }
        tab[(m, j)] = -s;
    }
    for i in 0..m {
        tab[(m, n + i)] = 0.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    run_simplex(&mut tab, &mut basis, n + m);
    if tab[(m, n + m)].abs() > 1e-7 {
        return None; // infeasible
    }

    // Drive any artificial variable still in the basis out (degenerate case).
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab[(i, j)].abs() > 1e-9) {
                pivot(&mut tab, &mut basis, i, j);
            }
        }
    }

    // Phase 2: restore the true objective row over the current basis.
    for j in 0..(n + m + 1) {
        tab[(m, j)] = 0.0;
    }
    for j in 0..n {
        tab[(m, j)] = c[j];
    }
    for i in 0..m {
        let bj = basis[i];
        if bj < n && c[bj] != 0.0 {
            let coef = c[bj];
            for j in 0..(n + m + 1) {
                tab[(m, j)] -= coef * tab[(i, j)];
            }
        }
    }
    // Forbid artificial columns from re-entering.
    for j in n..(n + m) {
        tab[(m, j)] = f64::INFINITY;
    }
    run_simplex(&mut tab, &mut basis, n);

    let mut x = DVector::<f64>::zeros(n);
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = tab[(i, n + m)];
        }
    }
    Some((c.dot(&x), x))
}

fn run_simplex(tab: &mut DMatrix<f64>, basis: &mut [usize], ncols_enter: usize) {
    let m = tab.nrows() - 1;
    let rhs = tab.ncols() - 1;
    loop {
        // Bland: first column with negative reduced cost.
        let Some(col) = (0..ncols_enter).find(|&j| tab[(m, j)] < -1e-10) else {
            return;
        };
        // Ratio test, Bland tie-break on basis index.
        let mut row: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if tab[(i, col)] > 1e-12 {
                let ratio = tab[(i, rhs)] / tab[(i, col)];
                if ratio < best - 1e-12
                    || (ratio < best + 1e-12 && row.is_some_and(|r| basis[i] < basis[r]))
                {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let Some(row) = row else {
            return; // unbounded; cannot happen for transportation instances
        };
        pivot(tab, basis, row, col);
    }
}

fn pivot(tab: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let p = tab[(row, col)];
    for j in 0..tab.ncols() {
        tab[(row, j)] /= p;
    }
    for i in 0..tab.nrows() {
        if i != row {
            let f = tab[(i, col)];
            if f != 0.0 {
                for j in 0..tab.ncols() {
                    tab[(i, j)] -= f * tab[(row, j)];
                }
            }
        }
    }
    basis[row] = col;
}

/// Optimal objective of the transportation problem `min sum c_ij t_ij`
/// with row sums `src_w` and column sums `dst_w`, via the dense LP above.
///
/// The last column-sum constraint is dropped (it is linearly dependent).
pub fn transport_objective(cost: &DMatrix<f64>, src_w: &[f64], dst_w: &[f64]) -> Option<f64> {
    let p = cost.nrows();
    let n = cost.ncols();
    let nv = p * n;
    let mut a = DMatrix::<f64>::zeros(p + n - 1, nv);
    let mut b = DVector::<f64>::zeros(p + n - 1);
    for i in 0..p {
        for j in 0..n {
            a[(i, i * n + j)] = 1.0;
        }
        b[i] = src_w[i];
    }
    for j in 0..(n - 1) {
        for i in 0..p {
            a[(p + j, i * n + j)] = 1.0;
        }
        b[p + j] = dst_w[j];
    }
    let c = DVector::from_fn(nv, |k, _| cost[(k / n, k % n)]);
    solve_lp(&c, &a, &b).map(|(obj, _)| obj)
}

/// One textbook Kalman measurement update: returns posterior mean, posterior
/// covariance and the log-likelihood of the innovation.
///
/// All quantities computed with plain inverses; no Joseph form, no Cholesky.
pub fn kalman_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>, f64) {
    let s = h * cov * h.transpose() + r;
    let s_inv = s.clone().try_inverse().expect("oracle innovation covariance invertible");
    let k = cov * h.transpose() * &s_inv;
    let innov = y - h * mean;
    let post_mean = mean + &k * &innov;
    let n = mean.len();
    let post_cov = (DMatrix::<f64>::identity(n, n) - &k * h) * cov;
    let m = y.len() as f64;
    let det = s.determinant();
    let maha = (innov.transpose() * &s_inv * &innov)[(0, 0)];
    let log_lik = -0.5 * (m * (2.0 * std::f64::consts::PI).ln() + det.ln() + maha);
    (post_mean, post_cov, log_lik)
}

/// Classic fixed-step fourth-order Runge-Kutta integration of dy/dt = f(t, y).
pub fn rk4_fixed<F>(f: F, y0: &DVector<f64>, t0: f64, t1: f64, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let span = t1 - t0;
    let steps = (span / h).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut y = y0.clone();
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &(&y + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&y + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&y + &k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
    }
    y
}

/// Central finite-difference Jacobian of `f` at `x`, with per-component step
/// scaled to the state magnitude.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, base_step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let m = f(x).len();
    let mut jac = DMatrix::<f64>::zeros(m, n);
    for j in 0..n {
        let h = base_step * x[j].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let df = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &df);
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn lp_solves_tiny_transportation() {
        // src {0,1} w=[1/2,1/2], dst {0,1} w=[1/4,3/4], squared distance cost.
        let cost = dmatrix![0.0, 1.0; 1.0, 0.0];
        let obj = transport_objective(&cost, &[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((obj - 0.25).abs() < 1e-12, "objective {obj}");
    }

    #[test]
    fn lp_detects_infeasible() {
        let c = dvector![1.0];
        let a = dmatrix![1.0; 1.0];
        let b = dvector![1.0, 2.0];
        assert!(solve_lp(&c, &a, &b).is_none());
    }

    #[test]
    fn kalman_scalar_case() {
        let (m, p, l) = kalman_update(
            &dvector![0.0],
            &dmatrix![1.0],
            &dmatrix![1.0],
            &dmatrix![1.0],
            &dvector![1.0],
        );
        assert!((m[0] - 0.5).abs() < 1e-14);
        assert!((p[(0, 0)] - 0.5).abs() < 1e-14);
        let expect = -0.25 - 0.5 * (2.0 * std::f64::consts::PI * 2.0_f64).ln();
        assert!((l - expect).abs() < 1e-12);
    }

    #[test]
    fn rk4_exponential() {
        let y = rk4_fixed(|_, y| y.clone(), &dvector![1.0], 0.0, 1.0, 1e-4);
        assert!((y[0] - 1.0_f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn fd_jacobian_quadratic() {
        let f = |x: &DVector<f64>| dvector![x[0] * x[0] + x[1], 3.0 * x[1]];
        let j = fd_jacobian(f, &dvector![2.0, -1.0], 1e-6);
        assert!((j[(0, 0)] - 4.0).abs() < 1e-8);
        assert!((j[(0, 1)] - 1.0).abs() < 1e-8);
        assert!((j[(1, 1)] - 3.0).abs() < 1e-8);
    }
}
