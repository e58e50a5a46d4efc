//! Conditional diffusion process observed at discrete times.
//!
//! The state follows `du = 10u(1 - u²)/(1 + u²) dt + dx` on `(0, 1]` from
//! `u(0) = 0`, discretized by Euler–Maruyama with `Δt = 0.01`. The inferred
//! parameter is the whitened Brownian increment vector `x ∈ R¹⁰⁰` with
//! standard normal prior; the path increment over a step is `√Δt · x_k`, so
//! the induced path has the Brownian covariance `min(t, t')`. Twenty
//! equispaced observations of `u` carry Gaussian noise with `σ = 0.1`.
//!
//! The log-likelihood gradient is the exact reverse-mode derivative of the
//! squared-residual sum through the recursion, with the drift derivative
//! handled analytically.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::InferenceModel;
use crate::num::{real, Real};

const STEPS: usize = 100;
const OBSERVATIONS: usize = 20;
const OBS_STRIDE: usize = STEPS / OBSERVATIONS;
const DT: f64 = 0.01;
const NOISE_STD: f64 = 0.1;

fn drift<S: Real>(u: S) -> S {
    real::<S>(10.0) * u * (S::one() - u * u) / (S::one() + u * u)
}

// d/du of the drift: 10(1 - 4u² - u⁴)/(1 + u²)².
fn drift_deriv<S: Real>(u: S) -> S {
    let u2 = u * u;
    let denom = (S::one() + u2) * (S::one() + u2);
    real::<S>(10.0) * (S::one() - real::<S>(4.0) * u2 - u2 * u2) / denom
}

/// The discretized conditional diffusion inference problem.
pub struct ConditionalDiffusionModel<S: Real> {
    data: DVector<S>,
    noise_std: S,
    dt: S,
}

impl<S: Real> ConditionalDiffusionModel<S> {
    /// Wraps a vector of twenty observations.
    pub fn new(data: DVector<S>) -> crate::error::Result<Self> {
        if data.len() != OBSERVATIONS {
            return Err(crate::error::Error::DimensionMismatch {
                expected: OBSERVATIONS,
                actual: data.len(),
            });
        }
        Ok(Self {
            data,
            noise_std: real::<S>(NOISE_STD),
            dt: real::<S>(DT),
        })
    }

    pub fn data(&self) -> &DVector<S> {
        &self.data
    }

    pub fn noise_std(&self) -> S {
        self.noise_std
    }

    /// Full Euler–Maruyama path `u_1, …, u_100` for whitened increments.
    pub fn forward_path(&self, increments: &DVector<S>) -> Vec<S> {
        let sqrt_dt = self.dt.sqrt();
        let mut path = Vec::with_capacity(STEPS);
        let mut u = S::zero();
        for k in 0..STEPS {
            u = u + drift(u) * self.dt + sqrt_dt * increments[k];
            path.push(u);
        }
        path
    }

    /// Observed coordinates of the forward path (`u` at `t = 0.05·i`).
    pub fn forward(&self, increments: &DVector<S>) -> DVector<S> {
        let path = self.forward_path(increments);
        DVector::from_fn(OBSERVATIONS, |i, _| path[(i + 1) * OBS_STRIDE - 1])
    }
}

impl<S: Real> InferenceModel<S> for ConditionalDiffusionModel<S> {
    fn dim(&self) -> usize {
        STEPS
    }

    fn log_likelihood(&self, x: &DVector<S>) -> S {
        let predicted = self.forward(x);
        let misfit = (&self.data - predicted).norm_squared();
        -misfit / (real::<S>(2.0) * self.noise_std * self.noise_std)
    }

    fn grad_log_likelihood(&self, x: &DVector<S>) -> DVector<S> {
        let path = self.forward_path(x);
        let inv_var = S::one() / (self.noise_std * self.noise_std);
        let sqrt_dt = self.dt.sqrt();

        // Backward sweep: adjoint[k] = dJ/du_k for step index k = 1..=100,
        // observation terms injected where u is measured. The increment
        // x_{k-1} enters u_k additively, so grad[k-1] = adjoint[k]·√Δt.
        let mut grad = DVector::zeros(STEPS);
        let mut adjoint = S::zero();
        for k in (1..=STEPS).rev() {
            let u_k = path[k - 1];
            let mut direct = S::zero();
            if k % OBS_STRIDE == 0 {
                let obs_index = k / OBS_STRIDE - 1;
                direct = (self.data[obs_index] - u_k) * inv_var;
            }
            adjoint = if k == STEPS {
                direct
            } else {
                direct + adjoint * (S::one() + drift_deriv(u_k) * self.dt)
            };
            grad[k - 1] = adjoint * sqrt_dt;
            // Chain through u_k = u_{k-1} + drift(u_{k-1})Δt + √Δt x_{k-1}
            // happens at the next loop step via the (1 + drift'·Δt) factor.
        }
        grad
    }
}

/// Synthesizes the benchmark instance: a true whitened increment vector from
/// the standard normal prior and noisy observations of its path.
pub fn build_conditional_diffusion<S: Real>(seed: u64) -> (ConditionalDiffusionModel<S>, DVector<S>)
where
    StandardNormal: Distribution<S>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_true = DVector::from_fn(STEPS, |_, _| rng.sample(StandardNormal));
    let template = ConditionalDiffusionModel {
        data: DVector::zeros(OBSERVATIONS),
        noise_std: real::<S>(NOISE_STD),
        dt: real::<S>(DT),
    };
    let clean = template.forward(&x_true);
    let noise = DVector::from_fn(OBSERVATIONS, |_, _| rng.sample(StandardNormal));
    let data = clean + noise * real::<S>(NOISE_STD);
    let model = ConditionalDiffusionModel::new(data).expect("twenty observations");
    (model, x_true)
}
