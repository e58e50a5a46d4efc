//! Small analytic models shared by the unit tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::model::InferenceModel;
use crate::num::Real;

/// `f ≡ 1`: flat likelihood, so the posterior equals the prior.
pub(crate) struct UnitLikelihood {
    pub dim: usize,
}

impl<S: Real> InferenceModel<S> for UnitLikelihood {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_likelihood(&self, _x: &DVector<S>) -> S {
        S::zero()
    }
    fn grad_log_likelihood(&self, x: &DVector<S>) -> DVector<S> {
        DVector::zeros(x.len())
    }
}

/// Isotropic Gaussian likelihood `log f = -precision/2 · ‖x - mean‖²`.
pub(crate) struct GaussianTestModel {
    mean: DVector<f64>,
    precision: f64,
}

impl GaussianTestModel {
    pub(crate) fn new(mean: DVector<f64>, precision: f64) -> Self {
        Self { mean, precision }
    }
}

impl InferenceModel<f64> for GaussianTestModel {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn log_likelihood(&self, x: &DVector<f64>) -> f64 {
        -0.5 * self.precision * (x - &self.mean).norm_squared()
    }
    fn grad_log_likelihood(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.mean - x) * self.precision
    }
}

/// Random matrix with Euclidean-orthonormal columns (`d×r`).
pub(crate) fn random_orthonormal<R: Rng>(d: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(d, r, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    nalgebra::QR::new(raw).q()
}
