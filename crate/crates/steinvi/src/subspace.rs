//! Likelihood-informed subspace construction.
//!
//! The data-informed subspace is spanned by the dominant eigenvectors of the
//! pencil `(Ĥ, Γ)`, where `Ĥ = (1/M) Σ_m ∇log f(x_m) ∇log f(x_m)ᵀ` is the
//! sample gradient information matrix and `Γ` the prior covariance.
//!
//! `Ĥ` is never materialized. Writing `Γ = L Lᵀ` and stacking the whitened
//! gradients `g̃_m = L⁻¹ g_m` as rows of `G̃`, the pencil is equivalent to the
//! symmetric standard problem `L⁻¹ Ĥ L⁻ᵀ u = λ u` whose nonzero eigenpairs
//! come exactly from the `M×M` Gram matrix `(1/M) G̃ G̃ᵀ`: if `(λ, v)` is an
//! eigenpair of the Gram matrix then `u = G̃ᵀ v / √(Mλ)` is a unit
//! eigenvector of the whitened problem. Eigenvalues are exact for every rank
//! up to `M`, which replaces a randomized eigensolver at ensemble-sized
//! ranks.
//!
//! Eigenvectors of the pencil come back as `ψ = L⁻ᵀ u` and are
//! `Γ`-orthonormal. The projector, the frozen-complement decomposition and
//! the coefficient-space kernel identity all require a Euclidean-orthonormal
//! basis (`ΨᵀΨ = I`), so the returned basis is re-orthonormalized with a
//! Gram–Schmidt pass that preserves the spanned subspace, while the pencil
//! eigenvalues are kept for rank selection and the weighted kernel metric.
//! When `Γ` is a multiple of the identity the pass leaves the eigenvectors
//! unchanged up to sign.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::model::InferenceModel;
use crate::num::{real, real_usize, Real};
use crate::prior::Prior;
use crate::worker;

/// Relative floor below which Gram eigenvalues are treated as numerically
/// zero and excluded from the basis.
const RANK_FLOOR_REL: f64 = 1e-12;

/// Stack of log-likelihood gradients, one particle per row (`M×d`).
#[derive(Clone, Debug)]
pub struct GradientStack<S: Real> {
    grads: DMatrix<S>,
}

impl<S: Real> GradientStack<S> {
    pub fn new(grads: DMatrix<S>) -> Result<Self> {
        if grads.nrows() == 0 || grads.ncols() == 0 {
            return Err(Error::config("gradient stack needs M >= 1 and d >= 1"));
        }
        if grads.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: 0 });
        }
        Ok(Self { grads })
    }

    pub fn count(&self) -> usize {
        self.grads.nrows()
    }

    pub fn dim(&self) -> usize {
        self.grads.ncols()
    }

    pub fn grads(&self) -> &DMatrix<S> {
        &self.grads
    }

    pub fn row(&self, m: usize) -> DVector<S> {
        self.grads.row(m).transpose()
    }
}

/// Evaluates `∇ log f` at every particle. Row `m` of the result belongs to
/// particle `m`; the implicit information matrix is `(1/M) GᵀG`.
pub fn assemble_gradient_stack<S: Real, M: InferenceModel<S> + ?Sized>(
    model: &M,
    ensemble: &ParticleEnsemble<S>,
    workers: usize,
) -> Result<GradientStack<S>> {
    let rows = ensemble.rows();
    let grads = worker::collect_indexed(workers, rows.len(), DVector::zeros(0), |m| {
        model.grad_log_likelihood(&rows[m])
    });
    let mut stack = DMatrix::zeros(ensemble.count(), ensemble.dim());
    for (m, g) in grads.iter().enumerate() {
        if g.len() != ensemble.dim() {
            return Err(Error::DimensionMismatch {
                expected: ensemble.dim(),
                actual: g.len(),
            });
        }
        stack.row_mut(m).tr_copy_from(g);
    }
    GradientStack::new(stack)
}

/// Rank-`r` projection basis with the retained pencil eigenvalues.
#[derive(Clone, Debug)]
pub struct ProjectionBasis<S: Real> {
    psi: DMatrix<S>,         // d×r, Euclidean-orthonormal columns
    eigenvalues: DVector<S>, // λ_1 >= ... >= λ_r >= 0
}

impl<S: Real> ProjectionBasis<S> {
    /// Wraps an explicit basis; columns must be orthonormal to `1e-10` and
    /// eigenvalues sorted descending.
    pub fn new(psi: DMatrix<S>, eigenvalues: DVector<S>) -> Result<Self> {
        if psi.ncols() != eigenvalues.len() || psi.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: psi.ncols(),
                actual: eigenvalues.len(),
            });
        }
        let basis = Self { psi, eigenvalues };
        if basis.orthonormality_defect() > real::<S>(1e-10) {
            return Err(Error::config("basis columns are not orthonormal"));
        }
        for i in 1..basis.eigenvalues.len() {
            if basis.eigenvalues[i] > basis.eigenvalues[i - 1] {
                return Err(Error::config("eigenvalues must be sorted descending"));
            }
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.psi.nrows()
    }

    pub fn rank(&self) -> usize {
        self.psi.ncols()
    }

    pub fn psi(&self) -> &DMatrix<S> {
        &self.psi
    }

    pub fn eigenvalues(&self) -> &DVector<S> {
        &self.eigenvalues
    }

    /// Largest deviation of `ΨᵀΨ` from the identity.
    pub fn orthonormality_defect(&self) -> S {
        let gram = self.psi.transpose() * &self.psi;
        let r = self.rank();
        let mut worst = S::zero();
        for i in 0..r {
            for j in 0..r {
                let target = if i == j { S::one() } else { S::zero() };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Keeps the leading `rank` columns and eigenvalues.
    pub fn truncate(&self, rank: usize) -> Result<Self> {
        if rank == 0 || rank > self.rank() {
            return Err(Error::config(format!(
                "cannot truncate basis of rank {} to {rank}",
                self.rank()
            )));
        }
        Ok(Self {
            psi: self.psi.columns(0, rank).into_owned(),
            eigenvalues: self.eigenvalues.rows(0, rank).into_owned(),
        })
    }

    /// Splits `x` into coefficients `w = Ψᵀx` and the orthogonal complement
    /// `x⊥ = x - Ψw`.
    pub fn project(&self, x: &DVector<S>) -> Result<(DVector<S>, DVector<S>)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let w = self.psi.transpose() * x;
        let x_perp = x - &self.psi * &w;
        Ok((w, x_perp))
    }

    /// Inverse of [`project`](Self::project): `x = Ψw + x⊥`.
    pub fn reconstruct(&self, w: &DVector<S>, x_perp: &DVector<S>) -> DVector<S> {
        &self.psi * w + x_perp
    }

    /// Applies the rank-`r` projector `P_r = ΨΨᵀ`.
    pub fn apply_projector(&self, x: &DVector<S>) -> DVector<S> {
        &self.psi * (self.psi.transpose() * x)
    }
}

/// Solves the pencil `Ĥψ = λΓψ` for the dominant eigenpairs in factor form.
///
/// Returns the Euclidean-orthonormalized basis (at most `max_rank` columns,
/// fewer when the stack has lower numerical rank) together with the full
/// spectrum of length `min(M, d)`, zeros included, for diagnostics and rank
/// selection.
pub fn generalized_eigensolve<S: Real>(
    stack: &GradientStack<S>,
    prior: &Prior<S>,
    max_rank: usize,
) -> Result<(ProjectionBasis<S>, Vec<S>)> {
    let m = stack.count();
    let d = stack.dim();
    if prior.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: prior.dim(),
        });
    }
    if max_rank == 0 || max_rank > m.min(d) {
        return Err(Error::config(format!(
            "max_rank must lie in 1..=min(M={m}, d={d})"
        )));
    }

    // Whitened gradient rows g̃_m = L⁻¹ g_m.
    let mut whitened = DMatrix::zeros(m, d);
    for i in 0..m {
        whitened
            .row_mut(i)
            .tr_copy_from(&prior.whiten_gradient(&stack.row(i)));
    }

    // M×M Gram matrix (1/M) G̃ G̃ᵀ.
    let gram = (&whitened * whitened.transpose()) / real_usize::<S>(m);
    let eig = SymmetricEigen::new(gram);

    // Sort eigenpairs descending, clamping small negative roundoff to zero.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let spectrum: Vec<S> = order
        .iter()
        .take(m.min(d))
        .map(|&i| eig.eigenvalues[i].max(S::zero()))
        .collect();

    let lambda_max = spectrum[0];
    if !(lambda_max > S::zero()) {
        return Err(Error::ZeroGradientStack);
    }
    let floor = lambda_max * real::<S>(RANK_FLOOR_REL);
    let usable = spectrum.iter().take_while(|l| **l > floor).count();
    let k = usable.min(max_rank);

    // Map Gram eigenvectors to whitened-space eigenvectors and back to
    // parameter space.
    let mut psi = DMatrix::zeros(d, k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let scale = (real_usize::<S>(m) * spectrum[col]).sqrt();
        let u = (whitened.transpose() * v) / scale;
        psi.set_column(col, &prior.unwhiten_vector(&u));
    }

    orthonormalize_columns(&mut psi)?;
    let eigenvalues = DVector::from_iterator(k, spectrum.iter().take(k).copied());
    Ok((ProjectionBasis { psi, eigenvalues }, spectrum))
}

/// Modified Gram–Schmidt with a second re-orthogonalization pass and a
/// sign convention that makes the largest-magnitude entry of each column
/// positive. Leaves already-orthonormal columns unchanged up to sign.
fn orthonormalize_columns<S: Real>(mat: &mut DMatrix<S>) -> Result<()> {
    let (d, r) = (mat.nrows(), mat.ncols());
    for j in 0..r {
        let mut col = mat.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let prev = mat.column(i);
                let coef = prev.dot(&col);
                col.axpy(-coef, &prev.into_owned(), S::one());
            }
        }
        let norm = col.norm();
        if !(norm > real::<S>(1e-300)) {
            return Err(Error::Factorization(
                "rank-deficient basis in orthonormalization".to_string(),
            ));
        }
        col /= norm;
        let mut best = 0;
        for i in 0..d {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < S::zero() {
            col = -col;
        }
        mat.set_column(j, &col);
    }
    Ok(())
}

/// Smallest rank `r >= 1` such that the first discarded eigenvalue falls
/// below `threshold`; `r = len` when no tail qualifies.
pub fn select_rank<S: Real>(eigenvalues: &[S], threshold: S) -> Result<usize> {
    if eigenvalues.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    if !(threshold > S::zero()) {
        return Err(Error::config("rank threshold must be positive"));
    }
    for r in 1..eigenvalues.len() {
        if eigenvalues[r] < threshold {
            return Ok(r);
        }
    }
    Ok(eigenvalues.len())
}

/// Diagnostic upper-bound proxy for the posterior projection error:
/// `(γ/2) Σ tail`. The constant `γ` is unknown, so with the default `γ = 1`
/// this is a relative indicator only.
pub fn projection_error_bound<S: Real>(tail: &[S], gamma: S) -> S {
    let sum = tail.iter().fold(S::zero(), |a, b| a + *b);
    gamma * sum / real::<S>(2.0)
}
