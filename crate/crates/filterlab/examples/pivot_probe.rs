use filterlab::fib_grid::gmm_grid;
use filterlab::gmm::{Gaussian, GaussianMixture, StateVector};
use filterlab::transport::{cost_matrix, solve_transport};
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

fn main() {
    let n = 16usize;
    let dim = 3;
    let comps: Vec<Gaussian> = (0..n)
        .map(|i| {
            let mean = DVector::from_fn(dim, |d, _| ((i * 7 + d * 3) % 13) as f64 * 0.7);
            let cov = DMatrix::identity(dim, dim) * (0.5 + 0.1 * (i % 3) as f64);
            Gaussian::new(mean, cov).unwrap()
        })
        .collect();
    let weights: Vec<f64> = (0..n).map(|i| (i + 1) as f64).collect();
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let m = GaussianMixture::new(comps, weights).unwrap();
    let grid = gmm_grid(&m, 51).unwrap();
    let targets: Vec<StateVector> = m.components().iter().map(|g| g.mean().clone()).collect();
    let uniform = vec![1.0 / n as f64; n];
    let cost = cost_matrix(grid.points(), &targets);
    let t0 = Instant::now();
    let plan = solve_transport(&cost, grid.weights(), &uniform).unwrap();
    println!("solve: {:.1} ms, objective {:.6}", t0.elapsed().as_secs_f64() * 1e3, plan.objective(&cost));
}
