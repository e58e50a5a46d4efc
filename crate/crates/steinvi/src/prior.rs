//! Prior distributions: Gaussian (dense or sparse-precision) and uniform box.
//!
//! A Gaussian prior stores its covariance either densely with a Cholesky
//! factor, or through a tridiagonal precision matrix (scaled discrete
//! Laplacian plus identity) factorized once into a lower-bidiagonal
//! Cholesky factor. The second form never materializes the dense covariance,
//! which keeps smoothness priors cheap at high dimension.
//!
//! Both forms expose the same factor algebra. Writing the covariance as
//! `Γ = L Lᵀ`, the prior provides products and solves with `L`, `L⁻¹` and
//! `L⁻ᵀ`; these back sampling, gradient whitening for the generalized
//! eigenproblem, and the map from whitened eigenvectors to parameter space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::distr::{Distribution, StandardUniform};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::num::{real, real_usize, Real};

/// Relative symmetry tolerance accepted when building a dense covariance.
const SYMMETRY_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
enum CovarianceForm<S: Real> {
    Dense {
        covariance: DMatrix<S>,
        factor: DMatrix<S>, // lower Cholesky factor of the covariance
    },
    /// Symmetric tridiagonal precision `T = Γ⁻¹` with lower-bidiagonal
    /// Cholesky factor `T = R Rᵀ`, so the covariance factor is `L = R⁻ᵀ`.
    TridiagonalPrecision {
        diag: DVector<S>,
        off: DVector<S>,
        factor_diag: DVector<S>,
        factor_off: DVector<S>,
    },
}

/// Gaussian prior with mean vector and symmetric positive-definite covariance.
#[derive(Clone, Debug)]
pub struct GaussianPrior<S: Real> {
    mean: DVector<S>,
    form: CovarianceForm<S>,
    log_normalizer: S, // -d/2 log(2π) - 1/2 log det Γ
}

impl<S: Real> GaussianPrior<S> {
    /// Builds a prior from a dense covariance matrix.
    ///
    /// Fails if the matrix is not symmetric to within `1e-12` relative or if
    /// the Cholesky factorization does not succeed.
    pub fn new(mean: DVector<S>, covariance: DMatrix<S>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: covariance.nrows(),
            });
        }
        let mut scale = S::zero();
        let mut asym = S::zero();
        for i in 0..d {
            for j in 0..d {
                scale = scale.max(covariance[(i, j)].abs());
                asym = asym.max((covariance[(i, j)] - covariance[(j, i)]).abs());
            }
        }
        if asym > real::<S>(SYMMETRY_REL_TOL) * scale.max(S::one()) {
            return Err(Error::Factorization(
                "covariance is not symmetric".to_string(),
            ));
        }
        let chol = Cholesky::<S, Dyn>::new(covariance.clone()).ok_or_else(|| {
            Error::Factorization("covariance is not positive definite".to_string())
        })?;
        let factor = chol.l();
        let log_normalizer = Self::normalizer_from_factor_diag(d, factor.diagonal().iter());
        Ok(Self {
            mean,
            form: CovarianceForm::Dense { covariance, factor },
            log_normalizer,
        })
    }

    /// Standard normal prior `N(0, I)` in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self::isotropic(dim, S::one()).expect("identity covariance is SPD")
    }

    /// Isotropic prior `N(0, variance · I)`.
    pub fn isotropic(dim: usize, variance: S) -> Result<Self> {
        if !(variance > S::zero()) {
            return Err(Error::Factorization(
                "isotropic variance must be positive".to_string(),
            ));
        }
        Self::new(
            DVector::zeros(dim),
            DMatrix::from_diagonal_element(dim, dim, variance),
        )
    }

    /// Builds a prior from a symmetric tridiagonal precision matrix given by
    /// its diagonal and first off-diagonal.
    pub fn from_tridiagonal_precision(
        mean: DVector<S>,
        diag: DVector<S>,
        off: DVector<S>,
    ) -> Result<Self> {
        let d = mean.len();
        if diag.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: diag.len(),
            });
        }
        if d > 0 && off.len() != d - 1 {
            return Err(Error::DimensionMismatch {
                expected: d - 1,
                actual: off.len(),
            });
        }
        // Bidiagonal Cholesky of the precision: T = R Rᵀ, R lower.
        let mut factor_diag = DVector::zeros(d);
        let mut factor_off = DVector::zeros(d.saturating_sub(1));
        for i in 0..d {
            let mut v = diag[i];
            if i > 0 {
                let e = off[i - 1] / factor_diag[i - 1];
                factor_off[i - 1] = e;
                v -= e * e;
            }
            if !(v > S::zero()) {
                return Err(Error::Factorization(
                    "tridiagonal precision is not positive definite".to_string(),
                ));
            }
            factor_diag[i] = v.sqrt();
        }
        // log det Γ = -log det T = -2 Σ log r_ii, so the normalizer uses
        // +Σ log r_ii.
        let half_log_det_precision: S = factor_diag.iter().map(|r| r.ln()).fold(S::zero(), |a, b| a + b);
        let log_normalizer =
            -real_usize::<S>(d) / real::<S>(2.0) * (real::<S>(2.0) * S::pi()).ln()
                + half_log_det_precision;
        Ok(Self {
            mean,
            form: CovarianceForm::TridiagonalPrecision {
                diag,
                off,
                factor_diag,
                factor_off,
            },
            log_normalizer,
        })
    }

    /// Smoothness prior with precision `I + scale·L`, where `L` is the
    /// discrete Laplacian on a uniform 1D grid of `dim` nodes over `(0, 1)`
    /// with free (Neumann-style) endpoints. `scale` multiplies the continuum
    /// operator `-Δ`, discretized with grid spacing `1/(dim-1)`.
    pub fn smoothness(dim: usize, scale: S) -> Result<Self> {
        if dim < 2 {
            return Err(Error::config("smoothness prior needs dim >= 2"));
        }
        let h = S::one() / real_usize::<S>(dim - 1);
        let c = scale / (h * h);
        let mut diag = DVector::from_element(dim, S::one() + real::<S>(2.0) * c);
        diag[0] = S::one() + c;
        diag[dim - 1] = S::one() + c;
        let off = DVector::from_element(dim - 1, -c);
        Self::from_tridiagonal_precision(DVector::zeros(dim), diag, off)
    }

    fn normalizer_from_factor_diag<'a>(d: usize, diag: impl Iterator<Item = &'a S>) -> S
    where
        S: 'a,
    {
        // log det Γ = 2 Σ log l_ii.
        let half_log_det: S = diag.map(|l| l.ln()).fold(S::zero(), |a, b| a + b);
        -real_usize::<S>(d) / real::<S>(2.0) * (real::<S>(2.0) * S::pi()).ln() - half_log_det
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<S> {
        &self.mean
    }

    /// Gradient of the log-density, `-Γ⁻¹(x - mean)`.
    pub fn grad_log_density(&self, x: &DVector<S>) -> DVector<S> {
        let centered = x - &self.mean;
        match &self.form {
            CovarianceForm::Dense { factor, .. } => {
                let mut v = factor
                    .solve_lower_triangular(&centered)
                    .expect("factor has positive diagonal");
                v = factor
                    .tr_solve_lower_triangular(&v)
                    .expect("factor has positive diagonal");
                -v
            }
            CovarianceForm::TridiagonalPrecision { diag, off, .. } => {
                -tridiag_mul(diag, off, &centered)
            }
        }
    }

    /// Normalized log-density.
    pub fn log_density(&self, x: &DVector<S>) -> S {
        let centered = x - &self.mean;
        let whitened = self.whiten_gradient_impl_inverse(&centered);
        self.log_normalizer - whitened.norm_squared() / real::<S>(2.0)
    }

    // L⁻¹ v for the quadratic form; same operation the whitening uses.
    fn whiten_gradient_impl_inverse(&self, v: &DVector<S>) -> DVector<S> {
        match &self.form {
            CovarianceForm::Dense { factor, .. } => factor
                .solve_lower_triangular(v)
                .expect("factor has positive diagonal"),
            CovarianceForm::TridiagonalPrecision {
                factor_diag,
                factor_off,
                ..
            } => {
                // L⁻¹ = Rᵀ, a bidiagonal product.
                let d = v.len();
                let mut out = DVector::zeros(d);
                for i in 0..d {
                    let mut acc = factor_diag[i] * v[i];
                    if i + 1 < d {
                        acc += factor_off[i] * v[i + 1];
                    }
                    out[i] = acc;
                }
                out
            }
        }
    }

    /// Maps a likelihood gradient into whitened coordinates: `L⁻¹ g`.
    pub fn whiten_gradient(&self, g: &DVector<S>) -> DVector<S> {
        self.whiten_gradient_impl_inverse(g)
    }

    /// Maps a whitened-space vector back to parameter space: `L⁻ᵀ u`.
    pub fn unwhiten_vector(&self, u: &DVector<S>) -> DVector<S> {
        match &self.form {
            CovarianceForm::Dense { factor, .. } => factor
                .tr_solve_lower_triangular(u)
                .expect("factor has positive diagonal"),
            CovarianceForm::TridiagonalPrecision {
                factor_diag,
                factor_off,
                ..
            } => {
                // Solve R x = u by forward substitution.
                let d = u.len();
                let mut out = DVector::zeros(d);
                for i in 0..d {
                    let mut acc = u[i];
                    if i > 0 {
                        acc -= factor_off[i - 1] * out[i - 1];
                    }
                    out[i] = acc / factor_diag[i];
                }
                out
            }
        }
    }

    /// Applies the covariance factor: `L z`.
    pub fn apply_factor(&self, z: &DVector<S>) -> DVector<S> {
        match &self.form {
            CovarianceForm::Dense { factor, .. } => factor * z,
            CovarianceForm::TridiagonalPrecision {
                factor_diag,
                factor_off,
                ..
            } => {
                // L = R⁻ᵀ: solve Rᵀ x = z by back substitution.
                let d = z.len();
                let mut out = DVector::zeros(d);
                for i in (0..d).rev() {
                    let mut acc = z[i];
                    if i + 1 < d {
                        acc -= factor_off[i] * out[i + 1];
                    }
                    out[i] = acc / factor_diag[i];
                }
                out
            }
        }
    }

    /// Draws one sample `mean + L z` with `z` standard normal.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<S>
    where
        StandardNormal: Distribution<S>,
    {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        &self.mean + self.apply_factor(&z)
    }

    /// Dense covariance matrix; intended for small-dimension diagnostics.
    pub fn covariance_dense(&self) -> DMatrix<S> {
        match &self.form {
            CovarianceForm::Dense { covariance, .. } => covariance.clone(),
            CovarianceForm::TridiagonalPrecision { .. } => {
                let d = self.dim();
                let mut cov = DMatrix::zeros(d, d);
                for j in 0..d {
                    // Column j of Γ = L Lᵀ e_j.
                    let mut e = DVector::zeros(d);
                    e[j] = S::one();
                    let col = self.apply_factor(&self.apply_factor_transpose(&e));
                    cov.set_column(j, &col);
                }
                cov
            }
        }
    }

    /// Dense precision matrix; intended for small-dimension diagnostics.
    pub fn precision_dense(&self) -> DMatrix<S> {
        match &self.form {
            CovarianceForm::Dense { covariance, .. } => covariance
                .clone()
                .try_inverse()
                .expect("SPD covariance is invertible"),
            CovarianceForm::TridiagonalPrecision { diag, off, .. } => {
                let d = self.dim();
                let mut t = DMatrix::zeros(d, d);
                for i in 0..d {
                    t[(i, i)] = diag[i];
                    if i + 1 < d {
                        t[(i, i + 1)] = off[i];
                        t[(i + 1, i)] = off[i];
                    }
                }
                t
            }
        }
    }

    // Lᵀ z, used only to assemble the dense covariance column by column.
    fn apply_factor_transpose(&self, z: &DVector<S>) -> DVector<S> {
        match &self.form {
            CovarianceForm::Dense { factor, .. } => factor.transpose() * z,
            CovarianceForm::TridiagonalPrecision {
                factor_diag,
                factor_off,
                ..
            } => {
                // Lᵀ = R⁻¹: solve R x = z.
                let d = z.len();
                let mut out = DVector::zeros(d);
                for i in 0..d {
                    let mut acc = z[i];
                    if i > 0 {
                        acc -= factor_off[i - 1] * out[i - 1];
                    }
                    out[i] = acc / factor_diag[i];
                }
                out
            }
        }
    }
}

fn tridiag_mul<S: Real>(diag: &DVector<S>, off: &DVector<S>, v: &DVector<S>) -> DVector<S> {
    let d = v.len();
    let mut out = DVector::zeros(d);
    for i in 0..d {
        let mut acc = diag[i] * v[i];
        if i > 0 {
            acc += off[i - 1] * v[i - 1];
        }
        if i + 1 < d {
            acc += off[i] * v[i + 1];
        }
        out[i] = acc;
    }
    out
}

/// Uniform prior on an axis-aligned box.
#[derive(Clone, Debug)]
pub struct UniformPrior<S: Real> {
    lower: DVector<S>,
    upper: DVector<S>,
}

impl<S: Real> UniformPrior<S> {
    /// Builds the box prior; requires `lower < upper` componentwise.
    pub fn new(lower: DVector<S>, upper: DVector<S>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                actual: upper.len(),
            });
        }
        for i in 0..lower.len() {
            if !(lower[i] < upper[i]) {
                return Err(Error::config(format!(
                    "uniform prior needs lower < upper at coordinate {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: S) -> Result<Self> {
        Self::new(
            DVector::from_element(dim, -half_width),
            DVector::from_element(dim, half_width),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<S> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<S> {
        &self.upper
    }

    /// True when `x` lies in the closed box.
    pub fn contains(&self, x: &DVector<S>) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }

    /// Zero gradient on the (closed) support; error outside.
    pub fn grad_log_density(&self, x: &DVector<S>) -> Result<DVector<S>> {
        for i in 0..self.dim() {
            if x[i] < self.lower[i] || x[i] > self.upper[i] {
                return Err(Error::OutsideSupport { coordinate: i });
            }
        }
        Ok(DVector::zeros(self.dim()))
    }

    /// Log-density: constant on the support, `-∞` outside.
    pub fn log_density(&self, x: &DVector<S>) -> S {
        if !self.contains(x) {
            return real::<S>(f64::NEG_INFINITY);
        }
        -(0..self.dim())
            .map(|i| (self.upper[i] - self.lower[i]).ln())
            .fold(S::zero(), |a, b| a + b)
    }

    /// Per-coordinate variance `(upper - lower)² / 12`.
    pub fn variances(&self) -> DVector<S> {
        DVector::from_fn(self.dim(), |i, _| {
            let w = self.upper[i] - self.lower[i];
            w * w / real::<S>(12.0)
        })
    }

    /// Clamps `x` back into the box, componentwise.
    pub fn clamp(&self, x: &mut DVector<S>) {
        for i in 0..self.dim() {
            x[i] = x[i].max(self.lower[i]).min(self.upper[i]);
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<S>
    where
        StandardUniform: Distribution<S>,
    {
        DVector::from_fn(self.dim(), |i, _| {
            let u: S = rng.sample(StandardUniform);
            self.lower[i] + (self.upper[i] - self.lower[i]) * u
        })
    }
}

/// A prior distribution usable by every solver in the crate.
#[derive(Clone, Debug)]
pub enum Prior<S: Real> {
    Gaussian(GaussianPrior<S>),
    Uniform(UniformPrior<S>),
}

impl<S: Real> Prior<S> {
    pub fn dim(&self) -> usize {
        match self {
            Prior::Gaussian(p) => p.dim(),
            Prior::Uniform(p) => p.dim(),
        }
    }

    /// Gradient of the log-density. Errors for points outside a uniform
    /// prior's support.
    pub fn grad_log_density(&self, x: &DVector<S>) -> Result<DVector<S>> {
        match self {
            Prior::Gaussian(p) => Ok(p.grad_log_density(x)),
            Prior::Uniform(p) => p.grad_log_density(x),
        }
    }

    pub fn log_density(&self, x: &DVector<S>) -> S {
        match self {
            Prior::Gaussian(p) => p.log_density(x),
            Prior::Uniform(p) => p.log_density(x),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<S>
    where
        StandardNormal: Distribution<S>,
        StandardUniform: Distribution<S>,
    {
        match self {
            Prior::Gaussian(p) => p.sample(rng),
            Prior::Uniform(p) => p.sample(rng),
        }
    }

    /// Whitens a likelihood gradient against the prior covariance factor.
    pub fn whiten_gradient(&self, g: &DVector<S>) -> DVector<S> {
        match self {
            Prior::Gaussian(p) => p.whiten_gradient(g),
            Prior::Uniform(p) => {
                let s = p.variances();
                DVector::from_fn(g.len(), |i, _| g[i] / s[i].sqrt())
            }
        }
    }

    /// Maps a whitened vector back to parameter space (`L⁻ᵀ u`).
    pub fn unwhiten_vector(&self, u: &DVector<S>) -> DVector<S> {
        match self {
            Prior::Gaussian(p) => p.unwhiten_vector(u),
            Prior::Uniform(p) => {
                let s = p.variances();
                DVector::from_fn(u.len(), |i, _| u[i] / s[i].sqrt())
            }
        }
    }

    /// Applies the covariance factor `L`; used by prior-preconditioned
    /// proposals.
    pub fn apply_factor(&self, z: &DVector<S>) -> DVector<S> {
        match self {
            Prior::Gaussian(p) => p.apply_factor(z),
            Prior::Uniform(p) => {
                let s = p.variances();
                DVector::from_fn(z.len(), |i, _| z[i] * s[i].sqrt())
            }
        }
    }

    /// Projects a point back into the support. A no-op for Gaussians.
    pub fn clamp_to_support(&self, x: &mut DVector<S>) {
        if let Prior::Uniform(p) = self {
            p.clamp(x);
        }
    }

    /// Dense covariance for diagnostics and small-dimension oracles.
    pub fn covariance_dense(&self) -> DMatrix<S> {
        match self {
            Prior::Gaussian(p) => p.covariance_dense(),
            Prior::Uniform(p) => DMatrix::from_diagonal(&p.variances()),
        }
    }
}
