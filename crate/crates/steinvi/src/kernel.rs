//! Gaussian reproducing kernels for full-space and coefficient-space
//! transport.
//!
//! The kernel is `k(w, w') = exp(-Q(w - w') / h)` where the quadratic form
//! `Q` is either the squared Euclidean norm or the eigenvalue-weighted form
//! `vᵀ(Λ + I)v` used in coefficient space, with `Λ` the diagonal of retained
//! subspace eigenvalues (data weight) and `I` the prior weight.
//!
//! The bandwidth follows the median heuristic `h = med² / log N` with `med`
//! the median of the `N(N-1)/2` pairwise distances, recomputed from the
//! current ensemble at every iteration. When the eigen-weighted metric is
//! active, the pairwise distances for the median are measured in the same
//! weighted norm, so the exponent stays `O(1)` regardless of `Λ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::num::{real, real_usize, Real};

/// How the bandwidth `h` is chosen.
#[derive(Clone, Debug)]
pub enum BandwidthRule<S: Real> {
    /// `h = med² / log N` from the current points.
    MedianHeuristic,
    /// A fixed, positive bandwidth.
    Fixed(S),
}

/// Quadratic form used inside the kernel exponent.
#[derive(Clone, Debug)]
pub enum Metric<S: Real> {
    /// `Q(v) = ‖v‖²`.
    Euclidean,
    /// `Q(v) = vᵀ(Λ + I)v` with `Λ = diag(eigenvalues)`, all entries `>= 0`.
    EigenWeighted(DVector<S>),
}

impl<S: Real> Metric<S> {
    /// Validates metric weights (and their length against `dim`).
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Metric::EigenWeighted(lambda) = self {
            if lambda.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: lambda.len(),
                });
            }
            if lambda.iter().any(|v| *v < S::zero()) {
                return Err(Error::config("metric eigenvalues must be non-negative"));
            }
        }
        Ok(())
    }

    /// `Q(v)`.
    pub fn quadratic(&self, v: &DVector<S>) -> S {
        match self {
            Metric::Euclidean => v.norm_squared(),
            Metric::EigenWeighted(lambda) => {
                let mut acc = S::zero();
                for i in 0..v.len() {
                    acc += (lambda[i] + S::one()) * v[i] * v[i];
                }
                acc
            }
        }
    }

    /// `(Λ + I) v`; the identity for the Euclidean metric.
    pub fn weighted(&self, v: &DVector<S>) -> DVector<S> {
        match self {
            Metric::Euclidean => v.clone(),
            Metric::EigenWeighted(lambda) => {
                DVector::from_fn(v.len(), |i, _| (lambda[i] + S::one()) * v[i])
            }
        }
    }
}

/// Kernel specification: bandwidth rule plus metric.
#[derive(Clone, Debug)]
pub struct KernelConfig<S: Real> {
    pub bandwidth: BandwidthRule<S>,
    pub metric: Metric<S>,
}

impl<S: Real> KernelConfig<S> {
    /// Median-heuristic bandwidth with the Euclidean metric.
    pub fn euclidean_median() -> Self {
        Self {
            bandwidth: BandwidthRule::MedianHeuristic,
            metric: Metric::Euclidean,
        }
    }

    /// Fixed bandwidth with the Euclidean metric.
    pub fn euclidean_fixed(h: S) -> Self {
        Self {
            bandwidth: BandwidthRule::Fixed(h),
            metric: Metric::Euclidean,
        }
    }

    /// Resolves the bandwidth against a concrete point set, yielding an
    /// evaluable kernel.
    ///
    /// A single point cannot inform the median heuristic; transport with
    /// `N = 1` only ever evaluates the kernel at zero separation, so the
    /// bandwidth is set to one there.
    pub fn resolve(&self, points: &[DVector<S>]) -> Result<ResolvedKernel<S>> {
        let dim = points.first().map_or(0, |p| p.len());
        self.metric.validate(dim)?;
        let bandwidth = match &self.bandwidth {
            BandwidthRule::Fixed(h) => {
                if !(*h > S::zero()) {
                    return Err(Error::config("fixed bandwidth must be positive"));
                }
                *h
            }
            BandwidthRule::MedianHeuristic => {
                if points.len() < 2 {
                    S::one()
                } else {
                    median_bandwidth_rows(points, &self.metric)?
                }
            }
        };
        Ok(ResolvedKernel {
            bandwidth,
            metric: self.metric.clone(),
        })
    }
}

/// A kernel with its bandwidth pinned down.
#[derive(Clone, Debug)]
pub struct ResolvedKernel<S: Real> {
    pub bandwidth: S,
    pub metric: Metric<S>,
}

impl<S: Real> ResolvedKernel<S> {
    /// `k(w, w') = exp(-Q(w - w') / h)`, a value in `(0, 1]`.
    pub fn eval(&self, w: &DVector<S>, w_other: &DVector<S>) -> S {
        let diff = w - w_other;
        (-self.metric.quadratic(&diff) / self.bandwidth).exp()
    }

    /// Gradient of [`eval`](Self::eval) with respect to the first argument:
    /// `-(2/h) · k · (Λ + I)(w - w')`.
    pub fn grad_first_arg(&self, w: &DVector<S>, w_other: &DVector<S>) -> DVector<S> {
        let diff = w - w_other;
        let k = (-self.metric.quadratic(&diff) / self.bandwidth).exp();
        self.metric.weighted(&diff) * (-real::<S>(2.0) / self.bandwidth * k)
    }
}

/// Median-heuristic bandwidth `med² / log N` over the rows of `points`.
///
/// Requires `N >= 2` and at least one nonzero pairwise distance; otherwise
/// the bandwidth degenerates and an error is returned.
pub fn median_bandwidth<S: Real>(points: &DMatrix<S>, metric: &Metric<S>) -> Result<S> {
    let rows: Vec<DVector<S>> = (0..points.nrows())
        .map(|i| points.row(i).transpose())
        .collect();
    median_bandwidth_rows(&rows, metric)
}

fn median_bandwidth_rows<S: Real>(points: &[DVector<S>], metric: &Metric<S>) -> Result<S> {
    let n = points.len();
    if n < 2 {
        return Err(Error::config("median bandwidth needs at least two points"));
    }
    let mut distances = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = &points[i] - &points[j];
            distances.push(metric.quadratic(&diff).sqrt());
        }
    }
    distances.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = distances.len() / 2;
    let med = if distances.len() % 2 == 1 {
        distances[mid]
    } else {
        (distances[mid - 1] + distances[mid]) / real::<S>(2.0)
    };
    let h = med * med / real_usize::<S>(n).ln();
    if !(h > S::zero()) {
        return Err(Error::DegenerateBandwidth);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn vecf(values: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(values)
    }

    #[test]
    fn median_two_points() {
        // Distances {2}; med = 2, h = 4 / ln 2.
        let pts = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        let h = median_bandwidth(&pts, &Metric::Euclidean).unwrap();
        let expected = 4.0 / 2.0f64.ln();
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 5.7708).abs() < 1e-4);
    }

    #[test]
    fn median_three_points_enumerates_all_pairs() {
        // Points 0, 1, 3 on the line: distances {1, 2, 3}, med = 2.
        let pts = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let h = median_bandwidth(&pts, &Metric::Euclidean).unwrap();
        assert!((h - 4.0 / 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_points_degenerate() {
        let pts = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0]);
        let err = median_bandwidth(&pts, &Metric::Euclidean).unwrap_err();
        assert!(matches!(err, Error::DegenerateBandwidth));
    }

    #[test]
    fn weighted_metric_changes_the_median_distances() {
        let pts = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let metric = Metric::EigenWeighted(vecf(&[3.0, 0.0]));
        // Weighted distance is sqrt(4) = 2, so h = 4 / ln 2.
        let h = median_bandwidth(&pts, &metric).unwrap();
        assert!((h - 4.0 / 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn eval_identity_and_closed_forms() {
        let k = ResolvedKernel {
            bandwidth: 1.0f64,
            metric: Metric::Euclidean,
        };
        let w = vecf(&[1.0, 0.0]);
        let z = vecf(&[0.0, 0.0]);
        assert_eq!(k.eval(&w, &w), 1.0);
        assert!((k.eval(&w, &z) - (-1.0f64).exp()).abs() < 1e-15);

        let kw = ResolvedKernel {
            bandwidth: 1.0f64,
            metric: Metric::EigenWeighted(vecf(&[3.0, 0.0])),
        };
        // Q = (3 + 1)·1² = 4.
        assert!((kw.eval(&w, &z) - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn grad_closed_form_and_symmetry() {
        let k = ResolvedKernel {
            bandwidth: 2.0f64,
            metric: Metric::Euclidean,
        };
        let w = vecf(&[1.0]);
        let z = vecf(&[0.0]);
        assert_eq!(k.grad_first_arg(&w, &w), vecf(&[0.0]));
        // -(2/2)·exp(-1/2)·1
        assert!((k.grad_first_arg(&w, &z)[0] + (-0.5f64).exp()).abs() < 1e-15);
        // Antisymmetry of the difference form.
        let g = k.grad_first_arg(&w, &z);
        let g_swapped = k.grad_first_arg(&z, &w);
        assert!((g + g_swapped).norm() < 1e-16);
    }

    #[test]
    fn gram_matrix_is_positive_definite_up_to_roundoff() {
        let pts: Vec<DVector<f64>> = (0..8)
            .map(|i| {
                vecf(&[
                    (i as f64 * 0.7).sin(),
                    (i as f64 * 1.3).cos(),
                    i as f64 * 0.21,
                ])
            })
            .collect();
        let kernel = ResolvedKernel {
            bandwidth: 1.5f64,
            metric: Metric::Euclidean,
        };
        let gram = DMatrix::from_fn(8, 8, |i, j| kernel.eval(&pts[i], &pts[j]));
        let eigs = SymmetricEigen::new(gram).eigenvalues;
        assert!(eigs.iter().all(|l| *l > -1e-10), "eigenvalues {eigs}");
    }

    fn point_pair(dim_max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..=dim_max).prop_flat_map(|n| {
            (
                proptest::collection::vec(-5.0f64..5.0, n),
                proptest::collection::vec(-5.0f64..5.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric((a, b) in point_pair(5), h in 0.2f64..5.0) {
            let k = ResolvedKernel { bandwidth: h, metric: Metric::Euclidean };
            let (wa, wb) = (vecf(&a), vecf(&b));
            prop_assert_eq!(k.eval(&wa, &wb), k.eval(&wb, &wa));
        }

        #[test]
        fn gradient_matches_finite_differences(
            (a, b) in point_pair(4),
            h in 0.5f64..4.0,
            lam0 in 0.0f64..4.0,
        ) {
            let mut lambda = vec![0.0; a.len()];
            lambda[0] = lam0;
            let kernel = ResolvedKernel {
                bandwidth: h,
                metric: Metric::EigenWeighted(vecf(&lambda)),
            };
            let (wa, wb) = (vecf(&a), vecf(&b));
            let grad = kernel.grad_first_arg(&wa, &wb);
            let fd = crate::model::finite_difference_gradient(
                |w| kernel.eval(w, &wb),
                &wa,
                1e-6,
            );
            let scale = grad.norm().max(1e-8);
            prop_assert!((grad - fd).norm() / scale < 1e-6);
        }
    }
}
