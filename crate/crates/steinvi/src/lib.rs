//! Particle-based variational inference with likelihood-informed dimension
//! reduction.
//!
//! The crate implements Stein variational gradient descent (SVGD) and its
//! projected variant (pSVGD). pSVGD transports only the coefficients of a
//! low-rank parameter projection whose basis is built adaptively from a
//! gradient information matrix of the log-likelihood, solved as a generalized
//! eigenproblem against the prior covariance. The orthogonal complement of
//! each particle is frozen at its prior value during the inner transport.
//!
//! Contents:
//! - [`prior`], [`ensemble`], [`model`]: priors, particle ensembles, and the
//!   inference-model interface shared by all solvers.
//! - [`kernel`]: Gaussian kernels with median-heuristic bandwidth and the
//!   eigenvalue-weighted coefficient-space metric.
//! - [`subspace`]: gradient stacks, the factor-form generalized eigensolve,
//!   rank selection, and projections.
//! - [`svgd`], [`psvgd`]: the full-space baseline and the projected/adaptive
//!   transport loops.
//! - [`models`]: benchmark inference problems with analytic gradients and a
//!   random-walk Metropolis reference sampler.
//! - [`diagnostics`], [`record`]: accuracy metrics and per-run diagnostics.
//!
//! All numerical code is generic over the scalar type through the
//! [`num::Real`] trait (`f32` or `f64`); the aliases at the crate root fix
//! `f64`, which is what the experiment driver uses.
//!
//! Runs are deterministic: a fixed seed yields bitwise-identical results for
//! any worker count, because every reduction uses a fixed particle order and
//! sampling draws from per-particle RNG streams.

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod kernel;
pub mod model;
pub mod models;
pub mod num;
pub mod prior;
pub mod psvgd;
pub mod record;
pub mod subspace;
pub mod svgd;
pub mod worker;

#[cfg(test)]
pub(crate) mod testutil;

pub use ensemble::{sample_prior, ParticleEnsemble};
pub use error::{Error, Result};
pub use kernel::{median_bandwidth, BandwidthRule, KernelConfig, Metric, ResolvedKernel};
pub use model::InferenceModel;
pub use num::Real;
pub use prior::{GaussianPrior, Prior, UniformPrior};
pub use psvgd::{
    run_adaptive_psvgd, run_psvgd_inner, AdaptiveConfig, CoefficientEnsemble, InnerConfig,
};
pub use record::{AdaptationRecord, IterationRecord, PhaseTimings, RunRecord};
pub use subspace::{
    assemble_gradient_stack, generalized_eigensolve, projection_error_bound, select_rank,
    GradientStack, ProjectionBasis,
};
pub use svgd::{run_svgd, StepRule, SvgdConfig};

/// Particle ensemble over `f64`, the scalar type used by the CLI driver.
pub type Ensemble = ParticleEnsemble<f64>;
/// Projection basis over `f64`.
pub type Basis = ProjectionBasis<f64>;
/// Run diagnostics over `f64`.
pub type Record = RunRecord<f64>;
