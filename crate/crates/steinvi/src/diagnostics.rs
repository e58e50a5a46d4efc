//! Accuracy metrics computed from ensembles.

use nalgebra::DVector;

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::num::{real, real_usize, Real};

/// Per-coordinate sample mean.
pub fn sample_mean<S: Real>(ensemble: &ParticleEnsemble<S>) -> DVector<S> {
    let n = real_usize::<S>(ensemble.count());
    let mut mean = DVector::zeros(ensemble.dim());
    for i in 0..ensemble.count() {
        mean += ensemble.particles().row(i).transpose();
    }
    mean / n
}

/// Per-coordinate unbiased sample variance; needs at least two particles.
pub fn sample_variance<S: Real>(ensemble: &ParticleEnsemble<S>) -> Result<DVector<S>> {
    let n = ensemble.count();
    if n < 2 {
        return Err(Error::config("sample variance needs N >= 2"));
    }
    let mean = sample_mean(ensemble);
    let mut var = DVector::zeros(ensemble.dim());
    for i in 0..n {
        let diff = ensemble.particles().row(i).transpose() - &mean;
        for j in 0..ensemble.dim() {
            var[j] += diff[j] * diff[j];
        }
    }
    Ok(var / real_usize::<S>(n - 1))
}

/// Relative L2 error of the pointwise sample variance against a reference:
/// `‖v - v_ref‖₂ / ‖v_ref‖₂`.
pub fn variance_rmse<S: Real>(
    ensemble: &ParticleEnsemble<S>,
    reference: &DVector<S>,
) -> Result<S> {
    if reference.len() != ensemble.dim() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dim(),
            actual: reference.len(),
        });
    }
    if reference.iter().any(|v| !(*v > S::zero()) || !v.is_finite()) {
        return Err(Error::config("reference variance must be finite and positive"));
    }
    let var = sample_variance(ensemble)?;
    Ok((var - reference).norm() / reference.norm())
}

/// Root-mean-square distance of the ensemble mean from a reference point.
pub fn mean_rmse<S: Real>(ensemble: &ParticleEnsemble<S>, reference: &DVector<S>) -> Result<S> {
    if reference.len() != ensemble.dim() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dim(),
            actual: reference.len(),
        });
    }
    let diff = sample_mean(ensemble) - reference;
    Ok((diff.norm_squared() / real_usize::<S>(reference.len())).sqrt())
}

/// Per-coordinate empirical credible interval at the given level.
///
/// Uses linear interpolation between order statistics; `level = 0.9`
/// returns the 5th and 95th percentiles, `level = 1.0` the min and max.
pub fn credible_interval<S: Real>(
    ensemble: &ParticleEnsemble<S>,
    level: S,
) -> Result<Vec<(S, S)>> {
    if ensemble.count() < 20 {
        return Err(Error::config("credible interval needs N >= 20"));
    }
    if !(level > S::zero() && level <= S::one()) {
        return Err(Error::config("level must lie in (0, 1]"));
    }
    let half_tail = (S::one() - level) / real::<S>(2.0);
    let mut out = Vec::with_capacity(ensemble.dim());
    for j in 0..ensemble.dim() {
        let mut column: Vec<S> = ensemble.particles().column(j).iter().copied().collect();
        column.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite particles"));
        out.push((
            quantile_sorted(&column, half_tail),
            quantile_sorted(&column, S::one() - half_tail),
        ));
    }
    Ok(out)
}

/// Fraction of coordinates whose reference value lies inside the interval.
pub fn interval_coverage<S: Real>(intervals: &[(S, S)], reference: &DVector<S>) -> Result<S> {
    if intervals.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            actual: intervals.len(),
        });
    }
    let hits = intervals
        .iter()
        .zip(reference.iter())
        .filter(|((lo, hi), v)| **v >= *lo && **v <= *hi)
        .count();
    Ok(real_usize::<S>(hits) / real_usize::<S>(intervals.len()))
}

fn quantile_sorted<S: Real>(sorted: &[S], q: S) -> S {
    let n = sorted.len();
    let pos = q * real_usize::<S>(n - 1);
    let lo = pos.floor();
    let idx = lo
        .to_subset()
        .map(|v: f64| v as usize)
        .unwrap_or(0)
        .min(n - 1);
    if idx + 1 >= n {
        return sorted[n - 1];
    }
    let frac = pos - lo;
    sorted[idx] * (S::one() - frac) + sorted[idx + 1] * frac
}
