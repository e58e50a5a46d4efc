//! Bayesian logistic regression for binary classification.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::InferenceModel;
use crate::num::{real, Real};

/// Bernoulli-logit likelihood over a fixed design matrix.
pub struct LogisticRegressionModel<S: Real> {
    features: DMatrix<S>, // n_data × d
    labels: Vec<bool>,
}

/// Numerically stable `log σ(z)`.
fn log_sigmoid<S: Real>(z: S) -> S {
    if z >= S::zero() {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn sigmoid<S: Real>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

impl<S: Real> LogisticRegressionModel<S> {
    pub fn new(features: DMatrix<S>, labels: Vec<bool>) -> Result<Self> {
        if features.nrows() != labels.len() || features.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                actual: labels.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite feature value".to_string()));
        }
        Ok(Self { features, labels })
    }

    pub fn data_count(&self) -> usize {
        self.features.nrows()
    }

    pub fn features(&self) -> &DMatrix<S> {
        &self.features
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Classification accuracy of the posterior-mean predictive probability
    /// over an ensemble of weight vectors.
    pub fn ensemble_accuracy(&self, ensemble: &crate::ensemble::ParticleEnsemble<S>) -> Result<S> {
        if ensemble.dim() != self.features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.features.ncols(),
                actual: ensemble.dim(),
            });
        }
        let n = self.data_count();
        let half = real::<S>(0.5);
        let mut correct = 0usize;
        for i in 0..n {
            let row = self.features.row(i).transpose();
            let mut prob = S::zero();
            for p in 0..ensemble.count() {
                prob += sigmoid(row.dot(&ensemble.particle(p)));
            }
            prob /= crate::num::real_usize::<S>(ensemble.count());
            if (prob >= half) == self.labels[i] {
                correct += 1;
            }
        }
        Ok(crate::num::real_usize::<S>(correct) / crate::num::real_usize::<S>(n))
    }
}

impl<S: Real> InferenceModel<S> for LogisticRegressionModel<S> {
    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn log_likelihood(&self, x: &DVector<S>) -> S {
        let logits = &self.features * x;
        let mut acc = S::zero();
        for (i, &label) in self.labels.iter().enumerate() {
            let z = logits[i];
            acc += if label { log_sigmoid(z) } else { log_sigmoid(-z) };
        }
        acc
    }

    fn grad_log_likelihood(&self, x: &DVector<S>) -> DVector<S> {
        let logits = &self.features * x;
        let weights = DVector::from_fn(self.data_count(), |i, _| {
            let y = if self.labels[i] { S::one() } else { S::zero() };
            y - sigmoid(logits[i])
        });
        self.features.transpose() * weights
    }
}

/// Synthetic classification problem: Gaussian features scaled by `1/√d`, a
/// planted standard-normal weight vector, Bernoulli labels. Returns the
/// model and the planted weights.
pub fn synthetic_classification<S: Real>(
    n_data: usize,
    dim: usize,
    seed: u64,
) -> (LogisticRegressionModel<S>, DVector<S>)
where
    StandardNormal: Distribution<S>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = S::one() / crate::num::real_usize::<S>(dim).sqrt();
    let features = DMatrix::from_fn(n_data, dim, |_, _| {
        let z: S = rng.sample(StandardNormal);
        z * scale
    });
    let truth = DVector::from_fn(dim, |_, _| rng.sample(StandardNormal));
    let labels = (0..n_data)
        .map(|i| {
            let p = sigmoid(features.row(i).transpose().dot(&truth));
            let u: f64 = rng.random();
            real::<S>(u) < p
        })
        .collect();
    let model = LogisticRegressionModel::new(features, labels).expect("finite synthetic data");
    (model, truth)
}

/// Loads a whitespace- or comma-separated numeric text dataset: one row per
/// data point, last column the binary label (0 or 1).
pub fn load_dataset<S: Real>(path: &Path) -> Result<LogisticRegressionModel<S>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Input(format!("line {}: bad number {f:?}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if fields.len() < 2 {
            return Err(Error::Input(format!(
                "line {}: need at least one feature and a label",
                lineno + 1
            )));
        }
        if let Some(prev) = rows.first() {
            if prev.len() != fields.len() {
                return Err(Error::Input(format!(
                    "line {}: inconsistent column count",
                    lineno + 1
                )));
            }
        }
        rows.push(fields);
    }
    if rows.is_empty() {
        return Err(Error::Input("dataset has no data rows".to_string()));
    }
    let d = rows[0].len() - 1;
    let mut labels = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        match row[d] {
            v if v == 0.0 => labels.push(false),
            v if v == 1.0 => labels.push(true),
            v => {
                return Err(Error::Input(format!(
                    "row {}: label must be 0 or 1, got {v}",
                    i + 1
                )))
            }
        }
    }
    let features = DMatrix::from_fn(rows.len(), d, |i, j| real::<S>(rows[i][j]));
    LogisticRegressionModel::new(features, labels)
}
