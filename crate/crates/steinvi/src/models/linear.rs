//! Linear-Gaussian inverse problem for a 1D diffusion-reaction equation.
//!
//! The forward map composes a piecewise-linear finite element solve of
//! `-u'' + u = x` on `(0, 1)` with `u(0) = 0`, `u(1) = 1` and a pointwise
//! observation of the solution at `s` equispaced interior locations. The
//! Dirichlet lift is affine, so it is folded into the stored data and the
//! model keeps a plain linear map `A`. With a Gaussian smoothness prior the
//! posterior is Gaussian with known mean and covariance, which makes this
//! model the accuracy oracle for the transport algorithms.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::InferenceModel;
use crate::num::{real, real_usize, Real};
use crate::prior::{GaussianPrior, Prior};

/// Linear forward model with Gaussian noise and an analytic posterior.
pub struct LinearGaussianModel<S: Real> {
    forward: DMatrix<S>, // A: s×d
    data: DVector<S>,    // lift-corrected observations
    noise_std: S,
    posterior_cov: DMatrix<S>,
    map_point: DVector<S>,
}

impl<S: Real> LinearGaussianModel<S> {
    /// Assembles the model from an explicit forward map, data vector, noise
    /// level and prior precision; computes the analytic posterior.
    pub fn from_parts(
        forward: DMatrix<S>,
        data: DVector<S>,
        noise_std: S,
        prior_precision: DMatrix<S>,
    ) -> Result<Self> {
        let d = forward.ncols();
        if data.len() != forward.nrows() {
            return Err(Error::DimensionMismatch {
                expected: forward.nrows(),
                actual: data.len(),
            });
        }
        if prior_precision.nrows() != d || prior_precision.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: prior_precision.nrows(),
            });
        }
        if !(noise_std > S::zero()) {
            return Err(Error::config("noise_std must be positive"));
        }
        let inv_var = S::one() / (noise_std * noise_std);
        let posterior_precision = forward.transpose() * &forward * inv_var + prior_precision;
        let chol = Cholesky::new(posterior_precision).ok_or_else(|| {
            Error::Factorization("posterior precision is not positive definite".to_string())
        })?;
        let posterior_cov = chol.inverse();
        let map_point = &posterior_cov * (forward.transpose() * &data * inv_var);
        Ok(Self {
            forward,
            data,
            noise_std,
            posterior_cov,
            map_point,
        })
    }

    pub fn forward_matrix(&self) -> &DMatrix<S> {
        &self.forward
    }

    pub fn data(&self) -> &DVector<S> {
        &self.data
    }

    pub fn noise_std(&self) -> S {
        self.noise_std
    }

    /// Analytic posterior covariance `(AᵀΣ_ξ⁻¹A + Σ_x⁻¹)⁻¹`.
    pub fn posterior_covariance(&self) -> &DMatrix<S> {
        &self.posterior_cov
    }

    /// Diagonal of the analytic posterior covariance.
    pub fn posterior_variance(&self) -> DVector<S> {
        self.posterior_cov.diagonal()
    }

    pub fn map_point(&self) -> &DVector<S> {
        &self.map_point
    }
}

impl<S: Real> InferenceModel<S> for LinearGaussianModel<S> {
    fn dim(&self) -> usize {
        self.forward.ncols()
    }

    fn log_likelihood(&self, x: &DVector<S>) -> S {
        let residual = &self.data - &self.forward * x;
        -residual.norm_squared() / (real::<S>(2.0) * self.noise_std * self.noise_std)
    }

    fn grad_log_likelihood(&self, x: &DVector<S>) -> DVector<S> {
        let residual = &self.data - &self.forward * x;
        self.forward.transpose() * residual / (self.noise_std * self.noise_std)
    }
}

/// A model bundled with the prior it was synthesized under and the draw
/// that generated the data.
pub struct LinearGaussianSetup<S: Real> {
    pub model: LinearGaussianModel<S>,
    pub prior: Prior<S>,
    pub x_true: DVector<S>,
}

/// Builds the benchmark instance on a `d`-node grid with `s` equispaced
/// interior observations, `noise_rel` relative noise (`σ = noise_rel ·
/// max|Ou|` of the noiseless observations) and a smoothness prior with
/// precision `I + laplacian_scale·(-Δ_h)`.
pub fn build_linear_gaussian<S: Real>(
    d: usize,
    s: usize,
    noise_rel: f64,
    laplacian_scale: f64,
    seed: u64,
) -> Result<LinearGaussianSetup<S>>
where
    StandardNormal: Distribution<S>,
{
    if d < 3 {
        return Err(Error::config("grid needs d >= 3 nodes"));
    }
    if s == 0 || s > d - 2 {
        return Err(Error::config("need 1 <= s <= d - 2 observations"));
    }
    if (d - 1) % (s + 1) != 0 {
        return Err(Error::config(
            "observation points must fall on grid nodes: (s + 1) must divide (d - 1)",
        ));
    }
    if !(noise_rel > 0.0) {
        return Err(Error::config("noise_rel must be positive"));
    }

    let (solution_map, lift) = fem_solution_operator::<S>(d)?;

    // Observation rows: node i(d-1)/(s+1) for i = 1..=s; always interior.
    let stride = (d - 1) / (s + 1);
    let mut forward = DMatrix::zeros(s, d);
    let mut lift_obs = DVector::zeros(s);
    for i in 1..=s {
        let node = i * stride;
        forward.row_mut(i - 1).copy_from(&solution_map.row(node - 1));
        lift_obs[i - 1] = lift[node - 1];
    }

    let gaussian = GaussianPrior::smoothness(d, real::<S>(laplacian_scale))?;
    let prior_precision = gaussian.precision_dense();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_true = gaussian.sample(&mut rng);
    let obs_true = &forward * &x_true + &lift_obs;
    let max_obs = obs_true.iter().fold(S::zero(), |a, v| a.max(v.abs()));
    let noise_std = real::<S>(noise_rel) * max_obs;
    if !(noise_std > S::zero()) {
        return Err(Error::config("degenerate noise level: observations are all zero"));
    }
    let noise = DVector::from_fn(s, |_, _| rng.sample(StandardNormal));
    // Fold the Dirichlet lift into the data: y - O·lift.
    let data = obs_true + noise * noise_std - lift_obs;

    let model = LinearGaussianModel::from_parts(forward, data, noise_std, prior_precision)?;
    Ok(LinearGaussianSetup {
        model,
        prior: Prior::Gaussian(gaussian),
        x_true,
    })
}

/// FEM solution operator for `-u'' + u = x`, `u(0) = 0`, `u(1) = 1` on a
/// uniform `d`-node mesh. Returns the interior solution map `B` (rows are
/// interior nodes `1..d-1`, columns all `d` source nodes) and the lift
/// vector `c` such that `u_interior = B x + c`.
fn fem_solution_operator<S: Real>(d: usize) -> Result<(DMatrix<S>, DVector<S>)> {
    let interior = d - 2;
    let h = S::one() / real_usize::<S>(d - 1);
    let stiff_diag = real::<S>(2.0) / h;
    let stiff_off = -S::one() / h;
    let mass_diag = real::<S>(2.0) / real::<S>(3.0) * h;
    let mass_off = h / real::<S>(6.0);

    // System matrix (stiffness + mass) on interior nodes.
    let mut system = DMatrix::zeros(interior, interior);
    for i in 0..interior {
        system[(i, i)] = stiff_diag + mass_diag;
        if i + 1 < interior {
            system[(i, i + 1)] = stiff_off + mass_off;
            system[(i + 1, i)] = stiff_off + mass_off;
        }
    }
    let chol = Cholesky::new(system)
        .ok_or_else(|| Error::Factorization("singular FEM system".to_string()))?;

    // Load operator: interior rows of the full mass matrix.
    let mut load = DMatrix::zeros(interior, d);
    for i in 0..interior {
        let node = i + 1;
        load[(i, node - 1)] = mass_off;
        load[(i, node)] = mass_diag;
        load[(i, node + 1)] = mass_off;
    }

    // Dirichlet lift from u(1) = 1 acts on the last interior equation.
    let mut lift_rhs = DVector::zeros(interior);
    lift_rhs[interior - 1] = -(stiff_off + mass_off);

    let solution_map = chol.solve(&load);
    let lift = chol.solve(&lift_rhs);
    Ok((solution_map, lift))
}
