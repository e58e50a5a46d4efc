//! The inference-model interface and gradient checking helpers.

use nalgebra::DVector;

use crate::num::{real, Real};
use crate::prior::Prior;

/// A Bayesian inference problem exposing the log-likelihood and its
/// gradient with respect to the parameter.
///
/// Implementations must be pure: repeated evaluation at the same point
/// returns the same value, and concurrent per-particle calls are safe.
pub trait InferenceModel<S: Real>: Send + Sync {
    /// Parameter dimension `d`.
    fn dim(&self) -> usize;

    /// `log f(x)`, up to an additive constant.
    fn log_likelihood(&self, x: &DVector<S>) -> S;

    /// `∇_x log f(x)`.
    fn grad_log_likelihood(&self, x: &DVector<S>) -> DVector<S>;
}

/// Unnormalized log-posterior `log f(x) + log p0(x)`.
pub fn log_posterior<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    prior: &Prior<S>,
    x: &DVector<S>,
) -> S {
    model.log_likelihood(x) + prior.log_density(x)
}

/// Posterior score `∇ log f(x) + ∇ log p0(x)`, evaluated at the support
/// projection of `x` so box priors never see exterior points.
pub(crate) fn posterior_grad_clamped<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    prior: &Prior<S>,
    x: &DVector<S>,
) -> DVector<S> {
    let mut point = x.clone();
    prior.clamp_to_support(&mut point);
    let prior_grad = prior
        .grad_log_density(&point)
        .expect("clamped point lies in the support");
    model.grad_log_likelihood(&point) + prior_grad
}

/// Log-posterior evaluated at the support projection of `x`.
pub(crate) fn log_posterior_clamped<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    prior: &Prior<S>,
    x: &DVector<S>,
) -> S {
    let mut point = x.clone();
    prior.clamp_to_support(&mut point);
    log_posterior(model, prior, &point)
}

/// Centered finite-difference gradient of a scalar function.
///
/// The step for coordinate `i` scales with `|x_i|`, floored at `step`.
/// This is the independent oracle used by the gradient-correctness tests.
pub fn finite_difference_gradient<S: Real>(
    f: impl Fn(&DVector<S>) -> S,
    x: &DVector<S>,
    step: S,
) -> DVector<S> {
    let mut grad = DVector::zeros(x.len());
    for i in 0..x.len() {
        let h = step * x[i].abs().max(S::one());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        grad[i] = (f(&xp) - f(&xm)) / (real::<S>(2.0) * h);
    }
    grad
}

/// Checks a model gradient against finite differences at one point and
/// returns the worst relative deviation (relative to the gradient norm).
pub fn gradient_relative_error<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    x: &DVector<S>,
    fd_step: S,
) -> S {
    let analytic = model.grad_log_likelihood(x);
    let numeric = finite_difference_gradient(|p| model.log_likelihood(p), x, fd_step);
    let scale = analytic.norm().max(S::one());
    (analytic - numeric).norm() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::GaussianPrior;

    struct Quadratic;

    impl InferenceModel<f64> for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn log_likelihood(&self, x: &DVector<f64>) -> f64 {
            -0.5 * (3.0 * x[0] * x[0] + x[1] * x[1]) + 0.7 * x[0] * x[1]
        }
        fn grad_log_likelihood(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_row_slice(&[-3.0 * x[0] + 0.7 * x[1], -x[1] + 0.7 * x[0]])
        }
    }

    #[test]
    fn finite_difference_oracle_agrees_with_analytic_gradient() {
        let m = Quadratic;
        let x = DVector::from_row_slice(&[0.4, -1.2]);
        assert!(gradient_relative_error(&m, &x, 1e-6) < 1e-8);
    }

    #[test]
    fn log_posterior_adds_prior_term() {
        let m = Quadratic;
        let prior = Prior::Gaussian(GaussianPrior::standard(2));
        let x = DVector::from_row_slice(&[0.5, 0.5]);
        let lp = log_posterior(&m, &prior, &x);
        assert!((lp - (m.log_likelihood(&x) + prior.log_density(&x))).abs() < 1e-15);
    }
}
