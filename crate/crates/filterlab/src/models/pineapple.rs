//! The seven-component "pineapple" demonstration mixture.

use nalgebra::{dmatrix, dvector};

use crate::gmm::{Gaussian, GaussianMixture};

/// The pineapple distribution: means m1..m7, covariances
/// `C1 = [[1, 0], [0, 1.5]]` and
/// `C_i = (1 / (floor(i/2) + 1)) [[0.75, s], [s, 0.75]]` with `s = (-1)^i 0.5`
/// for i = 2..7, and weights (0.4, 0.1 x 6).
pub fn pineapple_gmm() -> GaussianMixture {
    let means = [
        dvector![0.0, 0.0],
        dvector![1.0, 3.0],
        dvector![-1.0, 3.0],
        dvector![0.75, 5.0],
        dvector![-0.75, 5.0],
        dvector![0.5, 6.5],
        dvector![-0.5, 6.5],
    ];
    let mut components = Vec::with_capacity(7);
    for (idx, mean) in means.into_iter().enumerate() {
        let i = idx + 1;
        let cov = if i == 1 {
            dmatrix![1.0, 0.0; 0.0, 1.5]
        } else {
            let scale = 1.0 / ((i / 2) as f64 + 1.0);
            let s = if i % 2 == 0 { 0.5 } else { -0.5 };
            dmatrix![0.75 * scale, s * scale; s * scale, 0.75 * scale]
        };
        components.push(Gaussian::new(mean, cov).expect("pineapple covariances are PD"));
    }
    let weights = vec![0.4, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1];
    GaussianMixture::new(components, weights).expect("pineapple weights are valid")
}

/// The same seven components with uniform weights 1/7. The resampling
/// demonstration treats the mixture as unweighted, matching the figure it
/// reproduces.
pub fn pineapple_gmm_uniform() -> GaussianMixture {
    GaussianMixture::uniform(pineapple_gmm().components().to_vec())
        .expect("uniform pineapple weights are valid")
}
