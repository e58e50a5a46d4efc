//! Particle ensembles and reproducible prior sampling.

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, StandardUniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::num::Real;
use crate::prior::Prior;

/// An ensemble of `N` particles in `d` dimensions, stored as an `N×d`
/// matrix whose rows are the samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble<S: Real> {
    particles: DMatrix<S>,
}

impl<S: Real> ParticleEnsemble<S> {
    /// Wraps a particle matrix, validating that all entries are finite and
    /// that both dimensions are at least one.
    pub fn new(particles: DMatrix<S>) -> Result<Self> {
        if particles.nrows() == 0 || particles.ncols() == 0 {
            return Err(Error::config("ensemble needs N >= 1 and d >= 1"));
        }
        if particles.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: 0 });
        }
        Ok(Self { particles })
    }

    /// Number of particles `N`.
    pub fn count(&self) -> usize {
        self.particles.nrows()
    }

    /// Parameter dimension `d`.
    pub fn dim(&self) -> usize {
        self.particles.ncols()
    }

    pub fn particles(&self) -> &DMatrix<S> {
        &self.particles
    }

    pub fn particles_mut(&mut self) -> &mut DMatrix<S> {
        &mut self.particles
    }

    /// Particle `n` as an owned column vector.
    pub fn particle(&self, n: usize) -> DVector<S> {
        self.particles.row(n).transpose()
    }

    /// All particles as owned column vectors, in row order.
    pub fn rows(&self) -> Vec<DVector<S>> {
        (0..self.count()).map(|n| self.particle(n)).collect()
    }

    pub fn set_particle(&mut self, n: usize, value: &DVector<S>) {
        self.particles.row_mut(n).tr_copy_from(value);
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.particles.iter().all(|v| v.is_finite())
    }
}

/// Draws `count` i.i.d. prior samples.
///
/// Each particle consumes its own counter-based RNG stream derived from the
/// master seed, so the ensemble is bitwise identical no matter how particles
/// are later partitioned across workers, and across repeated runs.
pub fn sample_prior<S: Real>(prior: &Prior<S>, count: usize, seed: u64) -> Result<ParticleEnsemble<S>>
where
    StandardNormal: Distribution<S>,
    StandardUniform: Distribution<S>,
{
    if count == 0 {
        return Err(Error::config("sample_prior needs count >= 1"));
    }
    let d = prior.dim();
    let mut particles = DMatrix::zeros(count, d);
    for n in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let x = prior.sample(&mut rng);
        particles.row_mut(n).tr_copy_from(&x);
    }
    ParticleEnsemble::new(particles)
}
