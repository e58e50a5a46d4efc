//! Projected SVGD: coefficient-space transport with frozen complements, and
//! the adaptive outer loop that rebuilds the subspace.
//!
//! Given a rank-`r` basis `Ψ`, each particle decomposes as
//! `x_n = Ψ w_n + x_n⊥`. The inner loop transports only the coefficients
//! `w_n`, leaving every complement `x_n⊥` untouched; the coefficient
//! posterior score is the frozen-complement one-sample approximation
//!
//! ```text
//! ∇_w log π(w_n) = Ψᵀ [ ∇_x log f(Ψ w_n + x_n⊥) + ∇_x log p0(Ψ w_n + x_n⊥) ]
//! ```
//!
//! which uses the full prior score in place of the marginal term; the two
//! agree exactly for Gaussian priors. The adaptive loop re-estimates the
//! gradient information matrix at the current particles, rebuilds the basis,
//! re-freezes the complements, and repeats until the particles stop moving.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::ensemble::{sample_prior, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::kernel::{BandwidthRule, KernelConfig, Metric, ResolvedKernel};
use crate::model::{posterior_grad_clamped, InferenceModel};
use crate::num::{real, Real};
use crate::prior::Prior;
use crate::record::{AdaptationRecord, IterationRecord, PhaseTimings, RunRecord};
use crate::subspace::{
    assemble_gradient_stack, generalized_eigensolve, projection_error_bound, select_rank,
    ProjectionBasis,
};
use crate::svgd::{
    backtracking_line_search, direction_from_table, kernel_table, mean_log_posterior,
    mean_step_norm, LineSearchOutcome, StepRule,
};
use crate::worker;

/// Stopping tolerance on a mean step norm.
#[derive(Clone, Copy, Debug, Default)]
pub enum StopTolerance<S: Real> {
    /// `1e-3 · sqrt(dim)` of the space the steps live in.
    #[default]
    ScaledDefault,
    /// Never stop early.
    Disabled,
    /// Explicit value.
    Value(S),
}

impl<S: Real> StopTolerance<S> {
    fn resolve(&self, dim: usize) -> Option<S> {
        match self {
            StopTolerance::ScaledDefault => {
                Some(real::<S>(1e-3) * crate::num::real_usize::<S>(dim).sqrt())
            }
            StopTolerance::Disabled => None,
            StopTolerance::Value(v) => Some(*v),
        }
    }
}

/// Particle ensemble in coefficient space, with frozen complements.
#[derive(Clone, Debug)]
pub struct CoefficientEnsemble<S: Real> {
    coeffs: DMatrix<S>,      // N×r
    complements: DMatrix<S>, // N×d
    basis: ProjectionBasis<S>,
}

impl<S: Real> CoefficientEnsemble<S> {
    /// Projects every particle onto the basis, freezing the complements.
    pub fn project(basis: ProjectionBasis<S>, ensemble: &ParticleEnsemble<S>) -> Result<Self> {
        if ensemble.dim() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                actual: ensemble.dim(),
            });
        }
        let x = ensemble.particles();
        let coeffs = x * basis.psi();
        let complements = x - &coeffs * basis.psi().transpose();
        Ok(Self {
            coeffs,
            complements,
            basis,
        })
    }

    pub fn count(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn rank(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn dim(&self) -> usize {
        self.complements.ncols()
    }

    pub fn basis(&self) -> &ProjectionBasis<S> {
        &self.basis
    }

    pub fn coefficients(&self) -> &DMatrix<S> {
        &self.coeffs
    }

    pub fn complements(&self) -> &DMatrix<S> {
        &self.complements
    }

    pub fn coefficient(&self, n: usize) -> DVector<S> {
        self.coeffs.row(n).transpose()
    }

    pub fn complement(&self, n: usize) -> DVector<S> {
        self.complements.row(n).transpose()
    }

    /// `x_n = Ψ w_n + x_n⊥`.
    pub fn reconstruct_particle(&self, n: usize) -> DVector<S> {
        self.basis
            .reconstruct(&self.coefficient(n), &self.complement(n))
    }

    /// Reconstructs the full-space ensemble.
    pub fn reconstruct(&self) -> Result<ParticleEnsemble<S>> {
        let x = &self.coeffs * self.basis.psi().transpose() + &self.complements;
        ParticleEnsemble::new(x)
    }

    /// Largest violation of `Ψᵀ x⊥ = 0` over all particles.
    pub fn complement_defect(&self) -> S {
        let proj = &self.complements * self.basis.psi();
        proj.iter().fold(S::zero(), |acc, v| acc.max(v.abs()))
    }

    fn replace_coefficients(&mut self, coeffs: DMatrix<S>) {
        self.coeffs = coeffs;
    }
}

/// Reconstructs particles from coefficients and frozen complements.
pub fn reconstruct_ensemble<S: Real>(coeff: &CoefficientEnsemble<S>) -> Result<ParticleEnsemble<S>> {
    coeff.reconstruct()
}

/// Coefficient-space posterior score for one particle (frozen complement).
pub fn coefficient_grad_log_posterior<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    prior: &Prior<S>,
    basis: &ProjectionBasis<S>,
    w: &DVector<S>,
    x_perp: &DVector<S>,
) -> Result<DVector<S>> {
    if w.len() != basis.rank() {
        return Err(Error::DimensionMismatch {
            expected: basis.rank(),
            actual: w.len(),
        });
    }
    let x = basis.reconstruct(w, x_perp);
    let full = posterior_grad_clamped(model, prior, &x);
    Ok(basis.psi().transpose() * full)
}

/// Steepest direction in coefficient space; identical assembly to the
/// full-space rule, with the kernel metric optionally eigenvalue-weighted.
pub fn psvgd_direction<S: Real>(
    coeffs: &[DVector<S>],
    grads: &[DVector<S>],
    kernel: &ResolvedKernel<S>,
    workers: usize,
) -> Vec<DVector<S>> {
    crate::svgd::svgd_direction(coeffs, grads, kernel, workers)
}

/// Configuration for the inner (fixed-subspace) transport loop.
#[derive(Clone, Debug)]
pub struct InnerConfig<S: Real> {
    /// Iteration cap `L^w_max`. Zero is a no-op and returns the input.
    pub max_iterations: usize,
    pub step_rule: StepRule<S>,
    pub w_tolerance: StopTolerance<S>,
    pub bandwidth: BandwidthRule<S>,
    /// Weight the kernel metric with the basis eigenvalues (`Λ + I`).
    pub use_eigen_metric: bool,
    pub workers: usize,
}

impl<S: Real> InnerConfig<S> {
    pub fn new(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            step_rule: StepRule::default(),
            w_tolerance: StopTolerance::ScaledDefault,
            bandwidth: BandwidthRule::MedianHeuristic,
            use_eigen_metric: true,
            workers: 1,
        }
    }

    fn kernel_config(&self, basis: &ProjectionBasis<S>) -> KernelConfig<S> {
        let metric = if self.use_eigen_metric {
            Metric::EigenWeighted(basis.eigenvalues().clone())
        } else {
            Metric::Euclidean
        };
        KernelConfig {
            bandwidth: self.bandwidth.clone(),
            metric,
        }
    }
}

/// Runs the fixed-subspace coefficient transport. Complements are never
/// modified; the returned record holds one entry per inner iteration with
/// step norms measured in coefficient space.
pub fn run_psvgd_inner<S: Real, M: InferenceModel<S> + ?Sized>(
    mut coeff: CoefficientEnsemble<S>,
    model: &M,
    prior: &Prior<S>,
    config: &InnerConfig<S>,
) -> Result<(CoefficientEnsemble<S>, RunRecord<S>)> {
    config.step_rule.validate()?;
    let mut record = RunRecord::new();
    if config.max_iterations == 0 {
        return Ok((coeff, record));
    }
    let workers = config.workers.max(1);
    let kernel_config = config.kernel_config(&coeff.basis);
    let tolerance = config.w_tolerance.resolve(coeff.rank());
    let mut timings = PhaseTimings::default();
    let start = Instant::now();

    let psi_t = coeff.basis.psi().transpose();

    for iteration in 0..config.max_iterations {
        let t0 = Instant::now();
        let w_rows: Vec<DVector<S>> = (0..coeff.count()).map(|n| coeff.coefficient(n)).collect();
        let grads = {
            let coeff_ref = &coeff;
            worker::collect_indexed(workers, coeff.count(), DVector::zeros(0), |n| {
                let x = coeff_ref.reconstruct_particle(n);
                let full = posterior_grad_clamped(model, prior, &x);
                coeff_ref.basis.psi().transpose() * full
            })
        };
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { iteration });
        }
        let t1 = Instant::now();

        let kernel = kernel_config.resolve(&w_rows)?;
        let table = kernel_table(&w_rows, &kernel, workers);
        let t2 = Instant::now();

        let direction = direction_from_table(&w_rows, &grads, &table, &kernel, workers);
        let mut dir_mat = DMatrix::zeros(coeff.count(), coeff.rank());
        for (n, d) in direction.iter().enumerate() {
            dir_mat.row_mut(n).tr_copy_from(d);
        }

        let propose_rows = |eps: S| -> Vec<DVector<S>> {
            let w_new = &coeff.coeffs + &dir_mat * eps;
            let x = &w_new * &psi_t + &coeff.complements;
            (0..x.nrows()).map(|n| x.row(n).transpose()).collect()
        };

        let outcome = match &config.step_rule {
            StepRule::Fixed(eps) => LineSearchOutcome {
                step_size: *eps,
                exhausted: false,
            },
            StepRule::LineSearch { initial } => {
                let current: Vec<DVector<S>> =
                    (0..coeff.count()).map(|n| coeff.reconstruct_particle(n)).collect();
                let baseline = mean_log_posterior(model, prior, &current, workers);
                backtracking_line_search(*initial, baseline, |eps| {
                    mean_log_posterior(model, prior, &propose_rows(eps), workers)
                })
            }
        };

        let w_new = &coeff.coeffs + &dir_mat * outcome.step_size;
        let step_norm = {
            let before: Vec<DVector<S>> =
                (0..coeff.count()).map(|n| coeff.coefficient(n)).collect();
            let after: Vec<DVector<S>> = (0..w_new.nrows()).map(|n| w_new.row(n).transpose()).collect();
            mean_step_norm(&before, &after)
        };
        coeff.replace_coefficients(w_new);
        if coeff.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration });
        }
        let t3 = Instant::now();

        timings.gradient_s += (t1 - t0).as_secs_f64();
        timings.kernel_s += (t2 - t1).as_secs_f64();
        timings.update_s += (t3 - t2).as_secs_f64();

        record.iterations.push(IterationRecord {
            step_norm,
            bandwidth: kernel.bandwidth,
            step_size: outcome.step_size,
            backtrack_warning: outcome.exhausted,
        });

        if let Some(tol) = tolerance {
            if step_norm <= tol {
                break;
            }
        }
    }

    timings.total_s = start.elapsed().as_secs_f64();
    record.timings = timings;
    Ok((coeff, record))
}

/// Configuration for the adaptive outer loop.
#[derive(Clone, Debug)]
pub struct AdaptiveConfig<S: Real> {
    pub particle_count: usize,
    /// Outer iteration cap `L^x_max`.
    pub outer_max: usize,
    /// Inner iterations per adaptation (`L^w_max`).
    pub inner_per_adapt: usize,
    pub x_tolerance: StopTolerance<S>,
    pub w_tolerance: StopTolerance<S>,
    /// Rank rule: keep the smallest `r` with `λ_{r+1}` below this.
    pub rank_threshold: S,
    /// Optional cap on the retained rank.
    pub max_rank: Option<usize>,
    pub step_rule: StepRule<S>,
    pub bandwidth: BandwidthRule<S>,
    pub use_eigen_metric: bool,
    pub seed: u64,
    pub workers: usize,
}

impl<S: Real> AdaptiveConfig<S> {
    pub fn new(particle_count: usize, outer_max: usize) -> Self {
        Self {
            particle_count,
            outer_max,
            inner_per_adapt: 10,
            x_tolerance: StopTolerance::ScaledDefault,
            w_tolerance: StopTolerance::ScaledDefault,
            rank_threshold: real::<S>(1e-2),
            max_rank: None,
            step_rule: StepRule::default(),
            bandwidth: BandwidthRule::MedianHeuristic,
            use_eigen_metric: true,
            seed: 0,
            workers: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.particle_count == 0 {
            return Err(Error::config("particle_count must be >= 1"));
        }
        if self.outer_max == 0 {
            return Err(Error::config("outer_max must be >= 1"));
        }
        if self.inner_per_adapt == 0 {
            return Err(Error::config("inner_per_adapt must be >= 1"));
        }
        if !(self.rank_threshold > S::zero()) {
            return Err(Error::config("rank_threshold must be positive"));
        }
        self.step_rule.validate()
    }
}

/// Adaptive pSVGD: per outer step, rebuild the informed subspace from the
/// current particles, re-freeze the complements, run the inner coefficient
/// transport, and reconstruct. Stops at `outer_max` or when the mean
/// particle movement over an outer step falls below the x tolerance.
pub fn run_adaptive_psvgd<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    prior: &Prior<S>,
    config: &AdaptiveConfig<S>,
) -> Result<(ParticleEnsemble<S>, RunRecord<S>)>
where
    rand_distr::StandardNormal: rand::distr::Distribution<S>,
    rand::distr::StandardUniform: rand::distr::Distribution<S>,
{
    config.validate()?;
    if model.dim() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            actual: model.dim(),
        });
    }
    let start = Instant::now();
    let workers = config.workers.max(1);
    let mut ensemble = sample_prior(prior, config.particle_count, config.seed)?;
    let x_tolerance = config.x_tolerance.resolve(prior.dim());
    let mut record = RunRecord::new();

    let inner_config = InnerConfig {
        max_iterations: config.inner_per_adapt,
        step_rule: config.step_rule.clone(),
        w_tolerance: config.w_tolerance,
        bandwidth: config.bandwidth.clone(),
        use_eigen_metric: config.use_eigen_metric,
        workers,
    };

    for outer in 0..config.outer_max {
        let before = ensemble.rows();

        let t0 = Instant::now();
        let stack = assemble_gradient_stack(model, &ensemble, workers)
            .map_err(|e| outer_error(e, outer))?;
        let cap = config
            .max_rank
            .unwrap_or(usize::MAX)
            .min(stack.count())
            .min(stack.dim());
        let (basis_full, spectrum) =
            generalized_eigensolve(&stack, prior, cap).map_err(|e| outer_error(e, outer))?;
        let rank = select_rank(&spectrum, config.rank_threshold)?
            .min(basis_full.rank());
        let basis = basis_full.truncate(rank)?;
        record.timings.gradient_s += t0.elapsed().as_secs_f64();

        record.adaptations.push(AdaptationRecord {
            spectrum: spectrum.clone(),
            selected_rank: rank,
            tail_bound: projection_error_bound(&spectrum[rank.min(spectrum.len())..], S::one()),
            x_step_norm: S::zero(),
        });

        let coeff = CoefficientEnsemble::project(basis, &ensemble)?;
        let (coeff, inner_record) = run_psvgd_inner(coeff, model, prior, &inner_config)
            .map_err(|e| outer_error(e, outer))?;
        record.absorb(inner_record);

        ensemble = coeff.reconstruct().map_err(|e| outer_error(e, outer))?;
        for n in 0..ensemble.count() {
            let mut x = ensemble.particle(n);
            prior.clamp_to_support(&mut x);
            ensemble.set_particle(n, &x);
        }

        let x_step = mean_step_norm(&before, &ensemble.rows());
        record
            .adaptations
            .last_mut()
            .expect("pushed this outer step")
            .x_step_norm = x_step;

        if let Some(tol) = x_tolerance {
            if x_step <= tol {
                break;
            }
        }
    }

    record.timings.total_s = start.elapsed().as_secs_f64();
    Ok((ensemble, record))
}

fn outer_error(e: Error, outer: usize) -> Error {
    match e {
        Error::NonFinite { iteration } => Error::NonFinite {
            iteration: outer * 1_000_000 + iteration,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{sample_mean, sample_variance};
    use crate::kernel::KernelConfig;
    use crate::prior::GaussianPrior;
    use crate::svgd::{run_svgd, svgd_direction, SvgdConfig};
    use crate::testutil::{random_orthonormal, GaussianTestModel, UnitLikelihood};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vecf(values: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(values)
    }

    fn basis_from(q: DMatrix<f64>, eigs: &[f64]) -> ProjectionBasis<f64> {
        ProjectionBasis::new(q, vecf(eigs)).unwrap()
    }

    #[test]
    fn full_rank_identity_basis_reduces_to_full_space_gradient() {
        let model = GaussianTestModel::new(vecf(&[0.5, -0.5]), 2.0);
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(2));
        let basis = basis_from(DMatrix::identity(2, 2), &[1.0, 1.0]);
        let w = vecf(&[0.3, 0.9]);
        let grad =
            coefficient_grad_log_posterior(&model, &prior, &basis, &w, &vecf(&[0.0, 0.0]))
                .unwrap();
        let full = posterior_grad_clamped(&model, &prior, &w);
        assert!((grad - full).norm() < 1e-15);
    }

    #[test]
    fn unit_likelihood_standard_prior_gives_projected_score() {
        // f ≡ 1 with N(0, I): score is -x, so the coefficient gradient at
        // x⊥ = 0 is -w.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_orthonormal(6, 2, &mut rng);
        let basis = basis_from(q, &[2.0, 1.0]);
        let model = UnitLikelihood { dim: 6 };
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(6));
        let w = vecf(&[0.7, -0.2]);
        let grad = coefficient_grad_log_posterior(
            &model,
            &prior,
            &basis,
            &w,
            &DVector::zeros(6),
        )
        .unwrap();
        assert!((grad + w).norm() < 1e-12);
    }

    #[test]
    fn coefficient_gradient_matches_finite_differences() {
        // Finite differences of w ↦ log f(Ψw + x⊥) + log p0(Ψw + x⊥).
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_orthonormal(5, 3, &mut rng);
        let basis = basis_from(q, &[3.0, 2.0, 1.0]);
        let model = GaussianTestModel::new(vecf(&[0.2, -0.1, 0.4, 0.0, -0.6]), 1.7);
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(5));

        let w0 = vecf(&[0.4, -0.8, 0.1]);
        // A complement orthogonal to the basis columns.
        let raw = vecf(&[0.3, 0.1, -0.2, 0.5, 0.2]);
        let (_, x_perp) = basis.project(&raw).unwrap();

        let analytic =
            coefficient_grad_log_posterior(&model, &prior, &basis, &w0, &x_perp).unwrap();
        let fd = crate::model::finite_difference_gradient(
            |w| {
                let x = basis.reconstruct(w, &x_perp);
                model.log_likelihood(&x) + prior.log_density(&x)
            },
            &w0,
            1e-6,
        );
        let scale = analytic.norm().max(1.0);
        assert!((analytic - fd).norm() / scale < 1e-5);
    }

    #[test]
    fn direction_collapses_to_gradient_for_single_particle() {
        let coeffs = vec![vecf(&[0.4])];
        let grads = vec![vecf(&[-2.0])];
        let kernel = ResolvedKernel {
            bandwidth: 1.0,
            metric: Metric::Euclidean,
        };
        let dir = psvgd_direction(&coeffs, &grads, &kernel, 1);
        assert!((dir[0][0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn two_particle_coefficient_direction_matches_hand_enumeration() {
        let (w1, w2) = (0.2f64, -0.6f64);
        let (g1, g2) = (1.0f64, -0.4f64);
        let h = 1.5f64;
        let lambda = 2.0f64; // metric weight λ + 1 = 3
        let q12 = 3.0 * (w1 - w2) * (w1 - w2);
        let k12 = (-q12 / h).exp();
        let expected1 = 0.5 * (g1 + g2 * k12 + (-2.0 / h) * k12 * 3.0 * (w2 - w1));
        let expected2 = 0.5 * (g1 * k12 + g2 + (-2.0 / h) * k12 * 3.0 * (w1 - w2));

        let kernel = ResolvedKernel {
            bandwidth: h,
            metric: Metric::EigenWeighted(vecf(&[lambda])),
        };
        let dir = psvgd_direction(
            &[vecf(&[w1]), vecf(&[w2])],
            &[vecf(&[g1]), vecf(&[g2])],
            &kernel,
            1,
        );
        assert!((dir[0][0] - expected1).abs() < 1e-15);
        assert!((dir[1][0] - expected2).abs() < 1e-15);
    }

    #[test]
    fn zero_eigenvalues_reduce_weighted_metric_to_euclidean() {
        let coeffs = vec![vecf(&[0.1, 0.9]), vecf(&[-0.5, 0.2]), vecf(&[0.4, -0.3])];
        let grads = vec![vecf(&[1.0, 0.0]), vecf(&[0.0, 1.0]), vecf(&[-1.0, 0.5])];
        let weighted = ResolvedKernel {
            bandwidth: 1.2,
            metric: Metric::EigenWeighted(vecf(&[0.0, 0.0])),
        };
        let euclid = ResolvedKernel {
            bandwidth: 1.2,
            metric: Metric::Euclidean,
        };
        let a = psvgd_direction(&coeffs, &grads, &weighted, 1);
        let b = psvgd_direction(&coeffs, &grads, &euclid, 1);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn zero_inner_iterations_is_a_no_op() {
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(3));
        let ens = sample_prior(&prior, 5, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let basis = basis_from(random_orthonormal(3, 2, &mut rng), &[2.0, 1.0]);
        let coeff = CoefficientEnsemble::project(basis, &ens).unwrap();
        let before = coeff.coefficients().clone();
        let model = UnitLikelihood { dim: 3 };
        let (after, record) =
            run_psvgd_inner(coeff, &model, &prior, &InnerConfig::new(0)).unwrap();
        assert_eq!(after.coefficients(), &before);
        assert!(record.iterations.is_empty());
    }

    #[test]
    fn complements_are_bitwise_frozen_during_inner_loop() {
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(4));
        let ens = sample_prior(&prior, 12, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = basis_from(random_orthonormal(4, 2, &mut rng), &[3.0, 0.5]);
        let coeff = CoefficientEnsemble::project(basis, &ens).unwrap();
        assert!(coeff.complement_defect() < 1e-10);
        let before = coeff.complements().clone();
        let model = GaussianTestModel::new(vecf(&[0.4, -0.2, 0.1, 0.3]), 1.0);
        let (after, record) =
            run_psvgd_inner(coeff, &model, &prior, &InnerConfig::new(15)).unwrap();
        assert_eq!(after.complements(), &before);
        assert!(!record.iterations.is_empty());
    }

    #[test]
    fn reconstruction_round_trip_and_linearity() {
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(5));
        let ens = sample_prior(&prior, 6, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let basis = basis_from(random_orthonormal(5, 2, &mut rng), &[2.0, 1.0]);
        let coeff = CoefficientEnsemble::project(basis.clone(), &ens).unwrap();

        // Round trip directly after projection.
        let rebuilt = coeff.reconstruct().unwrap();
        assert!((rebuilt.particles() - ens.particles()).norm() < 1e-12);

        // Zero coefficients leave only the complement.
        let z = basis.reconstruct(&DVector::zeros(2), &coeff.complement(0));
        assert!((z - coeff.complement(0)).norm() < 1e-15);

        // Perturbing w by δ moves x by Ψδ exactly.
        let delta = vecf(&[0.3, -0.7]);
        let w = coeff.coefficient(0);
        let x0 = basis.reconstruct(&w, &coeff.complement(0));
        let x1 = basis.reconstruct(&(w + &delta), &coeff.complement(0));
        assert!((x1 - x0 - basis.psi() * delta).norm() < 1e-13);
    }

    #[test]
    fn full_rank_inner_step_matches_svgd_step() {
        // r = d with an orthogonal basis, Euclidean metric, matched fixed
        // bandwidth and step: one inner pSVGD iteration must move particles
        // exactly like one SVGD iteration.
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let q = random_orthonormal(d, d, &mut rng);
        let basis = basis_from(q, &[4.0, 3.0, 2.0, 1.0]);
        let model = GaussianTestModel::new(vecf(&[0.2, -0.4, 0.6, 0.0]), 1.3);
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(d));
        let ens = sample_prior(&prior, 10, 30).unwrap();

        let h = 1.9;
        let eps = 0.05;

        // One SVGD step by hand.
        let rows = ens.rows();
        let grads: Vec<DVector<f64>> = rows
            .iter()
            .map(|x| posterior_grad_clamped(&model, &prior, x))
            .collect();
        let kernel = ResolvedKernel {
            bandwidth: h,
            metric: Metric::Euclidean,
        };
        let dir = svgd_direction(&rows, &grads, &kernel, 1);
        let svgd_next: Vec<DVector<f64>> = rows
            .iter()
            .zip(dir.iter())
            .map(|(x, d)| x + d * eps)
            .collect();

        // One pSVGD step through the full-rank basis.
        let coeff = CoefficientEnsemble::project(basis, &ens).unwrap();
        let mut cfg = InnerConfig::new(1);
        cfg.step_rule = StepRule::Fixed(eps);
        cfg.bandwidth = BandwidthRule::Fixed(h);
        cfg.use_eigen_metric = false;
        let (coeff, _) = run_psvgd_inner(coeff, &model, &prior, &cfg).unwrap();
        let psvgd_next = coeff.reconstruct().unwrap();

        for (n, x) in svgd_next.iter().enumerate() {
            let moved = psvgd_next.particle(n);
            assert!(
                (moved - x).norm() < 1e-10,
                "particle {n} differs beyond tolerance"
            );
        }
    }

    #[test]
    fn coefficient_kernel_equals_full_space_kernel_on_the_subspace() {
        // With ΨᵀΨ = I and the Euclidean metric, k^r(w, w̃) equals the
        // full-space kernel at (Ψw, Ψw̃) for the same bandwidth.
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let q = random_orthonormal(7, 3, &mut rng);
        let kernel = ResolvedKernel {
            bandwidth: 2.3,
            metric: Metric::Euclidean,
        };
        for _ in 0..25 {
            let w1 = DVector::from_fn(3, |_, _| rand::Rng::random::<f64>(&mut rng) - 0.5);
            let w2 = DVector::from_fn(3, |_, _| rand::Rng::random::<f64>(&mut rng) - 0.5);
            let kr = kernel.eval(&w1, &w2);
            let kx = kernel.eval(&(&q * &w1), &(&q * &w2));
            assert!((kr - kx).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_likelihood_keeps_coefficient_moments() {
        let d = 3;
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(d));
        let ens = sample_prior(&prior, 64, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let basis = basis_from(random_orthonormal(d, 2, &mut rng), &[1.0, 0.5]);
        let coeff = CoefficientEnsemble::project(basis, &ens).unwrap();
        let w0 = coeff.coefficients().clone();
        let model = UnitLikelihood { dim: d };
        let mut cfg = InnerConfig::new(100);
        cfg.w_tolerance = StopTolerance::Disabled;
        let (coeff, _) = run_psvgd_inner(coeff, &model, &prior, &cfg).unwrap();

        for j in 0..2 {
            let before: Vec<f64> = w0.column(j).iter().copied().collect();
            let after: Vec<f64> = coeff.coefficients().column(j).iter().copied().collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let var = |v: &[f64]| {
                let m = mean(v);
                v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
            };
            assert!((mean(&after) - mean(&before)).abs() < 0.05);
            assert!((var(&after) - var(&before)).abs() < 0.05);
        }
    }

    #[test]
    fn adaptive_single_outer_step_equals_fixed_subspace_run() {
        let model = GaussianTestModel::new(vecf(&[0.5, 0.0, -0.5]), 2.0);
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(3));
        let mut cfg = AdaptiveConfig::new(16, 1);
        cfg.inner_per_adapt = 7;
        cfg.seed = 50;
        cfg.x_tolerance = StopTolerance::Disabled;
        cfg.w_tolerance = StopTolerance::Disabled;
        let (ens_a, rec_a) = run_adaptive_psvgd(&model, &prior, &cfg).unwrap();
        assert_eq!(rec_a.adaptations.len(), 1);
        assert_eq!(rec_a.iterations.len(), 7);

        // Reproduce by hand: one eigensolve + projection + inner run.
        let init = sample_prior(&prior, 16, 50).unwrap();
        let stack = assemble_gradient_stack(&model, &init, 1).unwrap();
        let (basis_full, spectrum) = generalized_eigensolve(&stack, &prior, 3).unwrap();
        let rank = select_rank(&spectrum, cfg.rank_threshold)
            .unwrap()
            .min(basis_full.rank());
        let basis = basis_full.truncate(rank).unwrap();
        let coeff = CoefficientEnsemble::project(basis, &init).unwrap();
        let mut inner = InnerConfig::new(7);
        inner.w_tolerance = StopTolerance::Disabled;
        let (coeff, _) = run_psvgd_inner(coeff, &model, &prior, &inner).unwrap();
        let ens_b = coeff.reconstruct().unwrap();
        assert_eq!(ens_a.particles(), ens_b.particles());
    }

    #[test]
    fn worker_count_does_not_change_adaptive_results() {
        let model = GaussianTestModel::new(vecf(&[0.3, -0.1, 0.2, 0.0]), 1.5);
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(4));
        let mut cfg = AdaptiveConfig::new(12, 3);
        cfg.inner_per_adapt = 5;
        cfg.seed = 60;
        cfg.workers = 1;
        let (ens1, _) = run_adaptive_psvgd(&model, &prior, &cfg).unwrap();
        cfg.workers = 4;
        let (ens4, _) = run_adaptive_psvgd(&model, &prior, &cfg).unwrap();
        assert_eq!(ens1.particles(), ens4.particles());
    }

    #[test]
    fn svgd_and_psvgd_share_the_unit_likelihood_fixed_point() {
        // Sanity cross-check: both transports leave prior samples roughly in
        // place when the likelihood is flat (pSVGD needs a hand-built basis
        // because a flat likelihood has no informed subspace).
        let model = UnitLikelihood { dim: 2 };
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(2));
        let mut cfg = SvgdConfig::new(32, 40);
        cfg.kernel = KernelConfig::euclidean_median();
        cfg.seed = 70;
        let (ens, _) = run_svgd(&model, &prior, &cfg).unwrap();
        let m = sample_mean(&ens);
        let v = sample_variance(&ens).unwrap();
        assert!(m.norm() < 0.5);
        assert!((v[0] - 1.0).abs() < 0.5);
    }
}
