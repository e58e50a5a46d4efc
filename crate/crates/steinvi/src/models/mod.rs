//! Benchmark inference problems with analytic gradients, plus a
//! random-walk Metropolis reference sampler for desk-scale ground truth.

pub mod diffusion;
pub mod linear;
pub mod logistic;
pub mod rwmh;

pub use diffusion::{build_conditional_diffusion, ConditionalDiffusionModel};
pub use linear::{build_linear_gaussian, LinearGaussianModel, LinearGaussianSetup};
pub use logistic::{load_dataset, synthetic_classification, LogisticRegressionModel};
pub use rwmh::{reference_posterior_rwmh, RwmhConfig, RwmhReport};
