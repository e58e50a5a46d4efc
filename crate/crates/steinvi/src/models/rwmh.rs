//! Random-walk Metropolis reference sampler with prior-preconditioned
//! proposals.
//!
//! Desk-scale stand-in for a heavyweight reference MCMC: proposals are
//! `x' = x + β·Lζ` with `Γ = LLᵀ` the prior covariance and `ζ` standard
//! normal, so step geometry follows the prior. Intended for small dimension
//! and long chains; reports per-coordinate moments with a batch-means
//! effective-sample-size estimate.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{log_posterior, InferenceModel};
use crate::num::{real, real_usize, Real};
use crate::prior::Prior;

#[derive(Clone, Debug)]
pub struct RwmhConfig<S: Real> {
    pub chain_length: usize,
    pub burn_in: usize,
    /// Scale `β` multiplying the prior-shaped proposal increment.
    pub proposal_scale: S,
    pub seed: u64,
}

impl<S: Real> RwmhConfig<S> {
    pub fn new(chain_length: usize) -> Self {
        Self {
            chain_length,
            burn_in: chain_length / 5,
            proposal_scale: real::<S>(0.4),
            seed: 0,
        }
    }
}

/// Posterior moment estimates from a finished chain.
#[derive(Clone, Debug)]
pub struct RwmhReport<S: Real> {
    pub mean: DVector<S>,
    pub variance: DVector<S>,
    pub acceptance_rate: S,
    /// Batch-means effective sample size per coordinate.
    pub ess: DVector<S>,
    /// Set when the acceptance rate leaves `[0.05, 0.8]`.
    pub acceptance_warning: bool,
}

/// Runs the chain and returns moment estimates. Deterministic for a fixed
/// seed.
pub fn reference_posterior_rwmh<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    prior: &Prior<S>,
    config: &RwmhConfig<S>,
) -> Result<RwmhReport<S>>
where
    StandardNormal: rand::distr::Distribution<S>,
    rand::distr::StandardUniform: rand::distr::Distribution<S>,
{
    if config.chain_length < 10 || config.burn_in >= config.chain_length {
        return Err(Error::config("chain must be longer than its burn-in"));
    }
    if !(config.proposal_scale > S::zero()) {
        return Err(Error::config("proposal_scale must be positive"));
    }
    let d = prior.dim();
    if model.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: model.dim(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = prior.sample(&mut rng);
    let mut lp = log_posterior(model, prior, &x);
    let kept = config.chain_length - config.burn_in;
    let mut samples: Vec<DVector<S>> = Vec::with_capacity(kept);
    let mut accepted = 0usize;

    for step in 0..config.chain_length {
        let noise = DVector::from_fn(d, |_, _| rng.sample(StandardNormal));
        let proposal = &x + prior.apply_factor(&noise) * config.proposal_scale;
        let lp_new = log_posterior(model, prior, &proposal);
        let log_u: S = {
            let u: S = rng.sample(rand::distr::StandardUniform);
            u.max(real::<S>(1e-300)).ln()
        };
        if lp_new.is_finite() && log_u < lp_new - lp {
            x = proposal;
            lp = lp_new;
            accepted += 1;
        }
        if step >= config.burn_in {
            samples.push(x.clone());
        }
    }

    let n = samples.len();
    let nf = real_usize::<S>(n);
    let mut mean = DVector::zeros(d);
    for s in &samples {
        mean += s;
    }
    mean /= nf;
    let mut variance = DVector::zeros(d);
    for s in &samples {
        for j in 0..d {
            let diff = s[j] - mean[j];
            variance[j] += diff * diff;
        }
    }
    variance /= nf - S::one();

    let ess = DVector::from_fn(d, |j, _| {
        let series: Vec<S> = samples.iter().map(|s| s[j]).collect();
        batch_means_ess(&series, mean[j], variance[j])
    });

    let acceptance_rate = real_usize::<S>(accepted) / real_usize::<S>(config.chain_length);
    let acceptance_warning =
        acceptance_rate < real::<S>(0.05) || acceptance_rate > real::<S>(0.8);

    Ok(RwmhReport {
        mean,
        variance,
        acceptance_rate,
        ess,
        acceptance_warning,
    })
}

fn batch_means_ess<S: Real>(series: &[S], mean: S, variance: S) -> S {
    let n = series.len();
    if !(variance > S::zero()) || n < 4 {
        return S::one();
    }
    let batch = (n as f64).sqrt() as usize;
    let batches = n / batch;
    let mut batch_var = S::zero();
    for b in 0..batches {
        let slice = &series[b * batch..(b + 1) * batch];
        let bm = slice.iter().fold(S::zero(), |a, v| a + *v) / real_usize::<S>(batch);
        batch_var += (bm - mean) * (bm - mean);
    }
    batch_var /= real_usize::<S>(batches.saturating_sub(1).max(1));
    let tau = (real_usize::<S>(batch) * batch_var / variance).max(S::one());
    (real_usize::<S>(n) / tau).min(real_usize::<S>(n))
}
