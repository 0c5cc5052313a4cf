//! Both resampling strategies behind one interface: naive stochastic
//! resampling (the EnGMF baseline) and the deterministic grid-plus-transport
//! path.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::fib_grid::gmm_grid;
use crate::gmm::{Ensemble, GaussianMixture, StateVector};
use crate::stream::StreamKey;
use crate::transport::{barycentric_projection, cost_matrix, solve_transport};

/// Which resampling path a filter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleStrategy {
    /// Categorical draw over weights, then a Gaussian draw per particle.
    Stochastic,
    /// Fibonacci grids and an exact transport solve; M must be odd.
    DeterministicOt { m: usize },
}

/// Draws `n_out` i.i.d. samples from the mixture: inverse-CDF categorical
/// selection over the weights, then a Gaussian draw through the component's
/// Cholesky factor. Draw `i` consumes generator `i` of the stream, so the
/// result is reproducible and independent of evaluation order.
///
/// A component with an exactly zero covariance matrix is treated as a point
/// mass at its mean.
pub fn stochastic_resample(
    mixture: &GaussianMixture,
    n_out: usize,
    stream: &StreamKey,
) -> Result<Ensemble> {
    let dim = mixture.dim();
    let mut cumulative = Vec::with_capacity(mixture.len());
    let mut acc = 0.0;
    for &w in mixture.weights() {
        acc += w;
        cumulative.push(acc);
    }
    // Pre-factor each component once.
    let factors = mixture
        .components()
        .iter()
        .map(|g| {
            if g.cov().amax() == 0.0 {
                Ok(None)
            } else {
                g.cholesky().map(|c| Some(c.unpack()))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut members = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let mut rng = stream.rng(i as u64);
        let u: f64 = rng.random();
        let comp = cumulative.partition_point(|&c| c < u).min(mixture.len() - 1);
        let g = mixture.component(comp);
        let member = match &factors[comp] {
            None => g.mean().clone(),
            Some(l) => {
                let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                g.mean() + l * z
            }
        };
        members.push(member);
    }
    Ensemble::new(members)
}

/// Deterministic resampling: build the M-point grid of every component,
/// transport the collection's mass onto the component means with uniform
/// target weights, and reduce the plan by barycentric projection.
///
/// The output has exactly N = component-count members and involves no random
/// number generation anywhere; two calls on identical inputs return
/// bit-identical ensembles.
pub fn deterministic_resample(mixture: &GaussianMixture, m: usize) -> Result<Ensemble> {
    let collection = gmm_grid(mixture, m)?;
    let n_comp = mixture.len();
    let targets: Vec<StateVector> = mixture.components().iter().map(|g| g.mean().clone()).collect();
    let uniform = vec![1.0 / n_comp as f64; n_comp];

    let cost = cost_matrix(collection.points(), &targets);
    let plan = solve_transport(&cost, collection.weights(), &uniform)?;
    let points = barycentric_projection(&plan, collection.points(), &uniform)?;
    Ensemble::new(points)
}

/// Dispatches on the strategy; the stream is only consumed by the stochastic
/// path.
pub fn resample(
    mixture: &GaussianMixture,
    n_out: usize,
    strategy: ResampleStrategy,
    stream: &StreamKey,
) -> Result<Ensemble> {
    match strategy {
        ResampleStrategy::Stochastic => stochastic_resample(mixture, n_out, stream),
        ResampleStrategy::DeterministicOt { m } => deterministic_resample(mixture, m),
    }
}
