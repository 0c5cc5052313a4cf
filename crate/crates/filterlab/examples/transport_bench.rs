use filterlab::fib_grid::gmm_grid;
use filterlab::gmm::{Gaussian, GaussianMixture};
use filterlab::resampling::deterministic_resample;
use nalgebra::{DMatrix, DVector};
use std::time::Instant;

fn main() {
    for &n in &[2usize, 8, 16, 30] {
        // Mixture shaped like a mid-run Lorenz/orbit belief: spread means.
        let dim = if n == 30 { 6 } else { 3 };
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
        let t0 = Instant::now();
        let reps = 5;
        for _ in 0..reps {
            let e = deterministic_resample(&m, 51).unwrap();
            assert_eq!(e.len(), n);
        }
        let per = t0.elapsed().as_secs_f64() / reps as f64;
        println!("N={n:2} dim={dim} P={} -> {:.1} ms/solve", grid.len(), per * 1e3);
    }
}
