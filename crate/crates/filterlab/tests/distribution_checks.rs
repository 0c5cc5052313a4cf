//! Distribution-level checks: the density normalizes on a grid, and the
//! demonstration mixture's moments agree with a large Monte Carlo estimate.

use filterlab::gmm::{gaussian_logpdf, mixture_moments, Gaussian};
use filterlab::models::pineapple_gmm;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

#[test]
fn density_integrates_to_one_1d() {
    let g = Gaussian::new(dvector![0.7], dmatrix![1.9]).unwrap();
    let (lo, hi, steps) = (-12.0, 13.0, 20_000);
    let h = (hi - lo) / steps as f64;
    let mut total = 0.0;
    for i in 0..steps {
        let x = lo + (i as f64 + 0.5) * h;
        total += gaussian_logpdf(&g, &dvector![x]).unwrap().exp() * h;
    }
    assert!((total - 1.0).abs() < 1e-3, "1-D mass {total}");
}

#[test]
fn density_integrates_to_one_2d() {
    let g = Gaussian::new(dvector![0.0, -0.5], dmatrix![1.0, 0.4; 0.4, 0.8]).unwrap();
    let (lo, hi, steps) = (-7.0, 7.0, 400);
    let h = (hi - lo) / steps as f64;
    let mut total = 0.0;
    for i in 0..steps {
        for j in 0..steps {
            let x = lo + (i as f64 + 0.5) * h;
            let y = lo + (j as f64 + 0.5) * h;
            total += gaussian_logpdf(&g, &dvector![x, y]).unwrap().exp() * h * h;
        }
    }
    assert!((total - 1.0).abs() < 1e-3, "2-D mass {total}");
}

#[test]
fn pineapple_moments_match_monte_carlo() {
    // 1e6 stochastic draws from the mixture: the analytic moments must sit
    // within 3 standard errors of the empirical estimate.
    let mixture = pineapple_gmm();
    let (mean, cov) = mixture_moments(&mixture);

    let mut rng = ChaCha12Rng::seed_from_u64(123456);
    let n = 1_000_000usize;
    let chols: Vec<DMatrix<f64>> = mixture
        .components()
        .iter()
        .map(|g| g.cholesky().unwrap().unpack())
        .collect();
    let mut cumulative = Vec::new();
    let mut acc = 0.0;
    for &w in mixture.weights() {
        acc += w;
        cumulative.push(acc);
    }

    let mut sum = DVector::zeros(2);
    let mut sum_sq = DMatrix::zeros(2, 2);
    for _ in 0..n {
        let u: f64 = rng.random();
        let comp = cumulative.partition_point(|&c| c < u).min(6);
        let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = mixture.component(comp).mean() + &chols[comp] * z;
        sum += &x;
        sum_sq += &x * x.transpose();
    }
    let emp_mean = &sum / n as f64;
    let emp_cov = &sum_sq / n as f64 - &emp_mean * emp_mean.transpose();

    for d in 0..2 {
        let se = (cov[(d, d)] / n as f64).sqrt();
        assert!(
            (mean[d] - emp_mean[d]).abs() < 3.0 * se,
            "mean[{d}] {} vs MC {} (se {se})",
            mean[d],
            emp_mean[d]
        );
    }
    for i in 0..2 {
        for j in 0..2 {
            // Standard error of a covariance entry.
            let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)] * cov[(i, j)]) / n as f64).sqrt();
            assert!(
                (cov[(i, j)] - emp_cov[(i, j)]).abs() < 3.0 * se,
                "cov[{i},{j}] {} vs MC {} (se {se})",
                cov[(i, j)],
                emp_cov[(i, j)]
            );
        }
    }
}
