//! Per-run diagnostics collected by the transport loops.

use crate::num::Real;

/// One transport iteration.
#[derive(Clone, Debug)]
pub struct IterationRecord<S: Real> {
    /// Mean over particles of the step norm `‖x^{ℓ} - x^{ℓ-1}‖₂`
    /// (coefficient-space norm during pSVGD inner iterations).
    pub step_norm: S,
    /// Kernel bandwidth used at this iteration.
    pub bandwidth: S,
    /// Accepted step size `ε`.
    pub step_size: S,
    /// Set when the line search exhausted its backtracking budget.
    pub backtrack_warning: bool,
}

/// One adaptation step of the outer subspace loop.
#[derive(Clone, Debug)]
pub struct AdaptationRecord<S: Real> {
    /// Full pencil spectrum, sorted descending (zeros included).
    pub spectrum: Vec<S>,
    /// Rank retained by the truncation rule.
    pub selected_rank: usize,
    /// Half tail sum of the discarded eigenvalues (relative indicator).
    pub tail_bound: S,
    /// Mean particle movement over the whole outer step, in parameter space.
    pub x_step_norm: S,
}

/// Wall-clock attribution per algorithm phase, in seconds. The gradient
/// phase includes eigendecomposition time during adaptive runs.
#[derive(Clone, Debug, Default)]
pub struct PhaseTimings {
    pub gradient_s: f64,
    pub kernel_s: f64,
    pub update_s: f64,
    pub total_s: f64,
}

impl PhaseTimings {
    pub fn phase_sum(&self) -> f64 {
        self.gradient_s + self.kernel_s + self.update_s
    }
}

/// Diagnostics for a complete run.
#[derive(Clone, Debug, Default)]
pub struct RunRecord<S: Real> {
    pub iterations: Vec<IterationRecord<S>>,
    pub adaptations: Vec<AdaptationRecord<S>>,
    pub timings: PhaseTimings,
}

impl<S: Real> RunRecord<S> {
    pub fn new() -> Self {
        Self {
            iterations: Vec::new(),
            adaptations: Vec::new(),
            timings: PhaseTimings::default(),
        }
    }

    /// Appends another record's iterations and phase times (total time is
    /// tracked by the caller owning the outer loop).
    pub fn absorb(&mut self, other: RunRecord<S>) {
        self.iterations.extend(other.iterations);
        self.adaptations.extend(other.adaptations);
        self.timings.gradient_s += other.timings.gradient_s;
        self.timings.kernel_s += other.timings.kernel_s;
        self.timings.update_s += other.timings.update_s;
    }
}
