//! Full-space Stein variational gradient descent.
//!
//! Particles move along the kernelized steepest-descent direction
//!
//! ```text
//! φ(x_m) = (1/N) Σ_n [ ∇log p(x_n) · k(x_n, x_m) + ∇_{x_n} k(x_n, x_m) ]
//! ```
//!
//! with the step size chosen by backtracking line search on the
//! ensemble-averaged log-posterior (halving until the average does not
//! decrease), or fixed. Each iteration runs three data-parallel phases —
//! posterior gradients, kernel tables, particle updates — separated by
//! barriers, with every reduction in fixed particle order so results do not
//! depend on the worker count.

use std::time::Instant;

use nalgebra::DVector;

use crate::ensemble::{sample_prior, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, Metric, ResolvedKernel};
use crate::model::{log_posterior_clamped, posterior_grad_clamped, InferenceModel};
use crate::num::{real, real_usize, Real};
use crate::prior::Prior;
use crate::record::{IterationRecord, PhaseTimings, RunRecord};
use crate::worker;

/// Maximum number of halvings the line search may perform.
pub const MAX_BACKTRACKS: usize = 20;

/// Step-size policy for a transport loop.
#[derive(Clone, Debug)]
pub enum StepRule<S: Real> {
    /// Backtracking from `initial`, reset at every iteration.
    LineSearch { initial: S },
    /// Constant step size.
    Fixed(S),
}

impl<S: Real> Default for StepRule<S> {
    fn default() -> Self {
        StepRule::LineSearch { initial: S::one() }
    }
}

impl<S: Real> StepRule<S> {
    pub(crate) fn validate(&self) -> Result<()> {
        let eps = match self {
            StepRule::LineSearch { initial } => *initial,
            StepRule::Fixed(eps) => *eps,
        };
        if !(eps > S::zero()) {
            return Err(Error::config("step size must be positive"));
        }
        Ok(())
    }
}

/// Configuration for [`run_svgd`].
#[derive(Clone, Debug)]
pub struct SvgdConfig<S: Real> {
    pub particle_count: usize,
    pub max_iterations: usize,
    pub step_rule: StepRule<S>,
    /// Stop once the mean step norm falls to this value; `None` disables
    /// early stopping.
    pub tolerance: Option<S>,
    pub kernel: KernelConfig<S>,
    pub seed: u64,
    pub workers: usize,
}

impl<S: Real> SvgdConfig<S> {
    pub fn new(particle_count: usize, max_iterations: usize) -> Self {
        Self {
            particle_count,
            max_iterations,
            step_rule: StepRule::default(),
            tolerance: None,
            kernel: KernelConfig::euclidean_median(),
            seed: 0,
            workers: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.particle_count == 0 {
            return Err(Error::config("particle_count must be >= 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be >= 1"));
        }
        if let Some(tol) = self.tolerance {
            if tol < S::zero() {
                return Err(Error::config("tolerance must be >= 0"));
            }
        }
        self.step_rule.validate()
    }
}

/// Symmetric kernel table `k(x_n, x_m)`, stored row-major by `n`.
pub(crate) fn kernel_table<S: Real>(
    points: &[DVector<S>],
    kernel: &ResolvedKernel<S>,
    workers: usize,
) -> Vec<S> {
    let n = points.len();
    let mut table = vec![S::zero(); n * n];
    let mut rows: Vec<&mut [S]> = table.chunks_mut(n).collect();
    worker::for_each_indexed(workers, &mut rows, |i, row| {
        for m in 0..n {
            row[m] = kernel.eval(&points[i], &points[m]);
        }
    });
    table
}

/// Assembles the steepest-direction rows from a precomputed kernel table.
pub(crate) fn direction_from_table<S: Real>(
    points: &[DVector<S>],
    grads: &[DVector<S>],
    table: &[S],
    kernel: &ResolvedKernel<S>,
    workers: usize,
) -> Vec<DVector<S>> {
    let n = points.len();
    let d = points[0].len();
    let weights: Vec<S> = match &kernel.metric {
        Metric::Euclidean => vec![S::one(); d],
        Metric::EigenWeighted(lambda) => lambda.iter().map(|l| *l + S::one()).collect(),
    };
    let scale = -real::<S>(2.0) / kernel.bandwidth;
    worker::collect_indexed(workers, n, DVector::zeros(0), |m| {
        let pm = &points[m];
        let mut acc = DVector::<S>::zeros(d);
        for i in 0..n {
            let k = table[i * n + m];
            let c = scale * k;
            let (pi, gi) = (&points[i], &grads[i]);
            for j in 0..d {
                acc[j] += k * gi[j] + c * weights[j] * (pi[j] - pm[j]);
            }
        }
        acc / real_usize::<S>(n)
    })
}

/// Steepest-direction assembly for one iteration: row `m` of the result is
/// `φ(x_m)` for the supplied posterior score rows.
pub fn svgd_direction<S: Real>(
    points: &[DVector<S>],
    grads: &[DVector<S>],
    kernel: &ResolvedKernel<S>,
    workers: usize,
) -> Vec<DVector<S>> {
    let table = kernel_table(points, kernel, workers);
    direction_from_table(points, grads, table.as_slice(), kernel, workers)
}

/// Outcome of the backtracking line search.
#[derive(Clone, Copy, Debug)]
pub struct LineSearchOutcome<S: Real> {
    pub step_size: S,
    /// Set when all backtracks failed; the returned step is
    /// `initial · 2^-MAX_BACKTRACKS`.
    pub exhausted: bool,
}

/// Halves the step from `initial` until `objective(eps) >= baseline`.
pub fn backtracking_line_search<S: Real>(
    initial: S,
    baseline: S,
    mut objective: impl FnMut(S) -> S,
) -> LineSearchOutcome<S> {
    let half = real::<S>(0.5);
    let mut eps = initial;
    for _ in 0..=MAX_BACKTRACKS {
        if objective(eps) >= baseline {
            return LineSearchOutcome {
                step_size: eps,
                exhausted: false,
            };
        }
        eps *= half;
    }
    LineSearchOutcome {
        step_size: initial * half.powi(MAX_BACKTRACKS as i32),
        exhausted: true,
    }
}

/// Ensemble-averaged log-posterior, reduced in fixed particle order.
pub(crate) fn mean_log_posterior<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    prior: &Prior<S>,
    rows: &[DVector<S>],
    workers: usize,
) -> S {
    let values = worker::collect_indexed(workers, rows.len(), S::zero(), |n| {
        log_posterior_clamped(model, prior, &rows[n])
    });
    values.iter().fold(S::zero(), |a, b| a + *b) / real_usize::<S>(rows.len())
}

/// Runs SVGD from prior samples until the iteration cap or the step-norm
/// tolerance is reached. Returns the final ensemble with per-iteration
/// diagnostics.
pub fn run_svgd<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    prior: &Prior<S>,
    config: &SvgdConfig<S>,
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
    let ensemble = sample_prior(prior, config.particle_count, config.seed)?;
    let mut rows = ensemble.rows();
    let workers = config.workers.max(1);
    let mut record = RunRecord::new();
    let mut timings = PhaseTimings::default();

    for iteration in 0..config.max_iterations {
        let t0 = Instant::now();
        let grads = worker::collect_indexed(workers, rows.len(), DVector::zeros(0), |n| {
            posterior_grad_clamped(model, prior, &rows[n])
        });
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { iteration });
        }
        let t1 = Instant::now();

        let kernel = config.kernel.resolve(&rows)?;
        let table = kernel_table(&rows, &kernel, workers);
        let t2 = Instant::now();

        let direction = direction_from_table(&rows, &grads, &table, &kernel, workers);
        let propose = |eps: S| -> Vec<DVector<S>> {
            rows.iter()
                .zip(direction.iter())
                .map(|(x, d)| {
                    let mut cand = x + d * eps;
                    prior.clamp_to_support(&mut cand);
                    cand
                })
                .collect()
        };

        let (outcome, next_rows) = match &config.step_rule {
            StepRule::Fixed(eps) => (
                LineSearchOutcome {
                    step_size: *eps,
                    exhausted: false,
                },
                propose(*eps),
            ),
            StepRule::LineSearch { initial } => {
                let baseline = mean_log_posterior(model, prior, &rows, workers);
                let outcome = backtracking_line_search(*initial, baseline, |eps| {
                    mean_log_posterior(model, prior, &propose(eps), workers)
                });
                let next = propose(outcome.step_size);
                (outcome, next)
            }
        };

        let step_norm = mean_step_norm(&rows, &next_rows);
        rows = next_rows;
        if rows.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
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

        if let Some(tol) = config.tolerance {
            if step_norm <= tol {
                break;
            }
        }
    }

    timings.total_s = start.elapsed().as_secs_f64();
    record.timings = timings;
    let out = rows_to_ensemble(&rows)?;
    Ok((out, record))
}

pub(crate) fn mean_step_norm<S: Real>(before: &[DVector<S>], after: &[DVector<S>]) -> S {
    let sum = before
        .iter()
        .zip(after.iter())
        .map(|(a, b)| (b - a).norm())
        .fold(S::zero(), |acc, v| acc + v);
    sum / real_usize::<S>(before.len())
}

pub(crate) fn rows_to_ensemble<S: Real>(rows: &[DVector<S>]) -> Result<ParticleEnsemble<S>> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mat = nalgebra::DMatrix::zeros(n, d);
    for (i, r) in rows.iter().enumerate() {
        mat.row_mut(i).tr_copy_from(r);
    }
    ParticleEnsemble::new(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::BandwidthRule;
    use crate::prior::GaussianPrior;
    use crate::testutil::{GaussianTestModel, UnitLikelihood};
    use crate::diagnostics::{sample_mean, sample_variance};

    fn vecf(values: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(values)
    }

    fn fixed_kernel(h: f64) -> ResolvedKernel<f64> {
        ResolvedKernel {
            bandwidth: h,
            metric: Metric::Euclidean,
        }
    }

    #[test]
    fn single_particle_degenerates_to_gradient_ascent() {
        let points = vec![vecf(&[0.3, -0.7])];
        let grads = vec![vecf(&[1.0, 2.0])];
        let dir = svgd_direction(&points, &grads, &fixed_kernel(1.0), 1);
        assert!((dir[0].clone() - vecf(&[1.0, 2.0])).norm() < 1e-15);
    }

    #[test]
    fn two_particle_direction_matches_hand_enumeration() {
        // Spell out both terms of the update for N = 2, d = 1.
        let (x1, x2) = (0.5f64, -1.0f64);
        let (g1, g2) = (-0.5f64, 1.0f64);
        let h = 2.0f64;
        let k12 = (-(x1 - x2) * (x1 - x2) / h).exp();
        // Row 1: (1/2)[g1·k11 + g2·k21 + ∇_{x1}k(x1,x1) + ∇_{x2}k(x2,x1)]
        let expected1 = 0.5 * (g1 + g2 * k12 + 0.0 + (-2.0 / h) * k12 * (x2 - x1));
        let expected2 = 0.5 * (g1 * k12 + g2 + (-2.0 / h) * k12 * (x1 - x2) + 0.0);

        let points = vec![vecf(&[x1]), vecf(&[x2])];
        let grads = vec![vecf(&[g1]), vecf(&[g2])];
        let dir = svgd_direction(&points, &grads, &fixed_kernel(h), 1);
        assert!((dir[0][0] - expected1).abs() < 1e-15);
        assert!((dir[1][0] - expected2).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_gives_antisymmetric_direction() {
        // Standard normal target: score -x. Particles at ±a.
        let a = 0.8f64;
        let points = vec![vecf(&[-a]), vecf(&[a])];
        let grads = vec![vecf(&[a]), vecf(&[-a])];
        let dir = svgd_direction(&points, &grads, &fixed_kernel(1.3), 1);
        assert!((dir[0][0] + dir[1][0]).abs() < 1e-15);
    }

    #[test]
    fn direction_is_permutation_equivariant() {
        let points = vec![vecf(&[0.1, 1.0]), vecf(&[-0.4, 0.2]), vecf(&[0.9, -0.3])];
        let grads = vec![vecf(&[0.5, -1.0]), vecf(&[1.5, 0.3]), vecf(&[-0.2, 0.8])];
        let dir = svgd_direction(&points, &grads, &fixed_kernel(0.9), 1);

        let perm = [2usize, 0, 1];
        let pp: Vec<_> = perm.iter().map(|&i| points[i].clone()).collect();
        let pg: Vec<_> = perm.iter().map(|&i| grads[i].clone()).collect();
        let pdir = svgd_direction(&pp, &pg, &fixed_kernel(0.9), 1);
        for (slot, &src) in perm.iter().enumerate() {
            assert!((pdir[slot].clone() - dir[src].clone()).norm() < 1e-12);
        }
    }

    #[test]
    fn direction_identical_for_any_worker_count() {
        let points: Vec<_> = (0..9)
            .map(|i| vecf(&[(i as f64).sin(), (i as f64).cos()]))
            .collect();
        let grads: Vec<_> = (0..9).map(|i| vecf(&[i as f64 * 0.1, -0.3])).collect();
        let d1 = svgd_direction(&points, &grads, &fixed_kernel(1.1), 1);
        let d4 = svgd_direction(&points, &grads, &fixed_kernel(1.1), 4);
        for (a, b) in d1.iter().zip(d4.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn line_search_accepts_initial_step_for_zero_direction() {
        // Zero direction leaves the objective unchanged, which satisfies the
        // non-decrease test at the first try.
        let out = backtracking_line_search(1.0f64, -3.5, |_| -3.5);
        assert_eq!(out.step_size, 1.0);
        assert!(!out.exhausted);
    }

    #[test]
    fn line_search_backs_off_an_overshooting_step() {
        // 1D quadratic log-density J(eps) for a particle at x=2 moving along
        // -x with unit step overshooting the mode.
        let x = 2.0f64;
        let dir = -4.0 * x; // steep gradient direction
        let obj = |eps: f64| -(x + eps * dir) * (x + eps * dir);
        let baseline = obj(0.0);
        let out = backtracking_line_search(1.0, baseline, obj);
        assert!(out.step_size < 1.0);
        assert!(obj(out.step_size) >= baseline);
        assert!(!out.exhausted);
    }

    #[test]
    fn line_search_exhaustion_returns_minimum_step_with_warning() {
        let out = backtracking_line_search(1.0f64, 0.0, |_| -1.0);
        assert!(out.exhausted);
        assert!((out.step_size - 0.5f64.powi(20)).abs() < 1e-18);
    }

    #[test]
    fn zero_iterations_is_a_config_error() {
        let model = UnitLikelihood { dim: 1 };
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(1));
        let cfg = SvgdConfig::<f64>::new(4, 0);
        assert!(matches!(
            run_svgd(&model, &prior, &cfg).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn prior_is_a_fixed_point_under_unit_likelihood() {
        // f ≡ 1 makes the prior the target, so transport must keep the
        // ensemble at the prior's moments to within SAA noise (5% of the
        // prior scale). The transport de-noises the initial sample toward
        // the exact moments, so the comparison is against the prior itself.
        let n = 1024;
        let model = UnitLikelihood { dim: 2 };
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(2));
        let mut cfg = SvgdConfig::new(n, 100);
        cfg.step_rule = StepRule::Fixed(0.25);
        cfg.seed = 21;
        let (ens, record) = run_svgd(&model, &prior, &cfg).unwrap();
        assert_eq!(record.iterations.len(), 100);

        let m1 = sample_mean(&ens);
        let v1 = sample_variance(&ens).unwrap();
        for j in 0..2 {
            assert!(m1[j].abs() < 0.05, "mean offset {}", m1[j]);
            assert!((v1[j] - 1.0).abs() < 0.05, "var offset {}", v1[j] - 1.0);
        }
    }

    #[test]
    fn recovers_standard_normal_moments_in_1d() {
        // Prior N(0, 4) combined with a quadratic likelihood of precision
        // 0.75 gives the standard normal posterior.
        let model = GaussianTestModel::new(vecf(&[0.0]), 0.75);
        let prior = Prior::Gaussian(GaussianPrior::isotropic(1, 4.0).unwrap());
        let mut cfg = SvgdConfig::new(64, 200);
        cfg.seed = 5;
        let (ens, _) = run_svgd(&model, &prior, &cfg).unwrap();
        let mean = sample_mean(&ens)[0];
        let var = sample_variance(&ens).unwrap()[0];
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "variance {var}");
    }

    #[test]
    fn translation_equivariance_on_gaussian_targets() {
        let shift = 3.0;
        let run = |center: f64, seed: u64| {
            let model = GaussianTestModel::new(vecf(&[center]), 1.0);
            let prior =
                Prior::Gaussian(GaussianPrior::new(vecf(&[center]), nalgebra::DMatrix::identity(1, 1)).unwrap());
            let mut cfg = SvgdConfig::new(32, 150);
            cfg.seed = seed;
            let (ens, _) = run_svgd(&model, &prior, &cfg).unwrap();
            sample_mean(&ens)[0]
        };
        let base = run(0.0, 9);
        let moved = run(shift, 9);
        assert!((moved - base - shift).abs() < 0.05, "{moved} vs {base}");
    }

    #[test]
    fn stopping_rule_fires_exactly_when_step_norm_crosses_tolerance() {
        let model = UnitLikelihood { dim: 1 };
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(1));
        let mut cfg = SvgdConfig::new(8, 50);
        cfg.tolerance = Some(1e9); // everything is below this
        let (_, record) = run_svgd(&model, &prior, &cfg).unwrap();
        assert_eq!(record.iterations.len(), 1);
        assert!(record.iterations[0].step_norm >= 0.0);

        cfg.tolerance = None;
        let (_, record) = run_svgd(&model, &prior, &cfg).unwrap();
        assert_eq!(record.iterations.len(), 50);
        let crossing = record.iterations.iter().map(|i| i.step_norm);
        assert!(crossing.clone().all(|s| s >= 0.0));
    }

    #[test]
    fn median_bandwidth_is_used_when_configured() {
        let model = UnitLikelihood { dim: 2 };
        let prior: Prior<f64> = Prior::Gaussian(GaussianPrior::standard(2));
        let mut cfg = SvgdConfig::new(16, 2);
        cfg.kernel = KernelConfig {
            bandwidth: BandwidthRule::MedianHeuristic,
            metric: Metric::Euclidean,
        };
        let (_, record) = run_svgd(&model, &prior, &cfg).unwrap();
        assert!(record.iterations.iter().all(|it| it.bandwidth > 0.0));
    }
}
