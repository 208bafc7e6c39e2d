//! Critical points of the discrete energy.
//!
//! * [`minimize`]: preconditioned gradient descent with Armijo backtracking.
//! * [`newton_solve`]: inexact Newton on the gradient with MINRES inner solves.
//! * [`deflated_search`]: Newton with deflation, for finding several solutions.
//! * [`nonexistence_certificate`]: the inequality chain that rules out
//!   nontrivial solutions when `λ S_F < 1`.
//! * [`sweep`] and [`perturbation_stability`]: batch drivers over λ and μ.
//!
//! Failing to converge is reported in the returned [`Solution`], never raised.

mod certificate;
mod deflation;
mod descent;
mod newton;
mod starts;
mod sweep;

pub use certificate::{
    nodewise_bound_violation, nonexistence_certificate, CertificateReport, CertificateVerdict,
};
pub use deflation::{deflated_search, deflated_search_with_starts, SearchOutcome};
pub use descent::minimize;
pub use newton::newton_solve;
pub use starts::{constant_starts, random_starts, standard_starts};
pub use sweep::{
    perturbation_stability, sweep, PerturbationReport, PerturbationRow, SolutionSummary,
    SweepReport, SweepRow,
};

use serde::Serialize;

use crate::discretization::{DiscreteSystem, StatePair};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub grad_tol_abs: f64,
    /// Relative gradient tolerance; `None` means `1e-12·√nodes`.
    pub grad_tol_rel: Option<f64>,
    pub max_iters: usize,
    pub n_starts: usize,
    pub rng_seed: u64,
    /// Minimum normalized energy-norm distance between distinct solutions.
    pub distinct_tol: f64,
    pub deflation_power: f64,
    pub deflation_shift: f64,
    /// Upper bound on deflation rounds; a round that finds nothing new ends the search.
    pub max_rounds: usize,
    pub parallel: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            grad_tol_abs: 1e-10,
            grad_tol_rel: None,
            max_iters: 200,
            n_starts: 20,
            rng_seed: 0,
            distinct_tol: 1e-3,
            deflation_power: 2.0,
            deflation_shift: 1.0,
            max_rounds: 3,
            parallel: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grad_tol_abs", self.grad_tol_abs),
            ("grad_tol_rel", self.grad_tol_rel.unwrap_or(1.0)),
            ("distinct_tol", self.distinct_tol),
            ("deflation_power", self.deflation_power),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::Usage(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.deflation_shift >= 0.0 && self.deflation_shift.is_finite()) {
            return Err(LabError::Usage(format!(
                "deflation_shift must be nonnegative, got {}",
                self.deflation_shift
            )));
        }
        if self.n_starts == 0 || self.max_iters == 0 || self.max_rounds == 0 {
            return Err(LabError::Usage(
                "n_starts, max_iters and max_rounds must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn rel_tol(&self, nodes: usize) -> f64 {
        self.grad_tol_rel.unwrap_or(1e-12 * (nodes as f64).sqrt())
    }

    /// Gradient-norm tolerance at `state`: absolute part plus a part relative
    /// to the size of the linear term `(A_a u, A_b v)`.
    pub fn tolerance(&self, sys: &DiscreteSystem, state: &StatePair) -> f64 {
        let mut q = vec![0.0; state.as_flat().len()];
        sys.quadratic_apply(state.as_flat(), &mut q);
        self.grad_tol_abs + self.rel_tol(sys.nodes()) * crate::linalg::norm(&q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Trivial,
    NontrivialNegativeEnergy,
    NontrivialNonnegativeEnergy,
}

impl Classification {
    pub fn is_trivial(self) -> bool {
        self == Classification::Trivial
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Trivial => "trivial",
            Classification::NontrivialNegativeEnergy => "nontrivial-negative-energy",
            Classification::NontrivialNonnegativeEnergy => "nontrivial-nonnegative-energy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Classification::Trivial,
            Classification::NontrivialNegativeEnergy,
            Classification::NontrivialNonnegativeEnergy,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

/// Trivial iff the Euclidean norm of the state is below `1e-8·√nodes`.
pub fn classify(state: &StatePair, energy: f64) -> Classification {
    if state.norm() < 1e-8 * (state.nodes() as f64).sqrt() {
        Classification::Trivial
    } else if energy < 0.0 {
        Classification::NontrivialNegativeEnergy
    } else {
        Classification::NontrivialNonnegativeEnergy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub state: StatePair,
    pub energy: f64,
    /// Euclidean norm of the energy gradient at `state`.
    pub residual_norm: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub classification: Classification,
    pub iterations: usize,
    /// Index into the start list that produced this solution; `None` for
    /// states supplied to the search as already known.
    pub start_id: Option<usize>,
}

impl Solution {
    /// Evaluates energy and residual of `state` and classifies it.
    pub fn evaluate(
        sys: &DiscreteSystem,
        state: StatePair,
        cfg: &SolveConfig,
        iterations: usize,
        start_id: Option<usize>,
    ) -> Result<Self> {
        let energy = sys.energy(&state)?;
        let residual_norm = sys.energy_gradient(&state)?.norm();
        let tolerance = cfg.tolerance(sys, &state);
        Ok(Solution {
            classification: classify(&state, energy),
            converged: residual_norm <= tolerance,
            state,
            energy,
            residual_norm,
            tolerance,
            iterations,
            start_id,
        })
    }

    pub fn is_trivial(&self) -> bool {
        self.classification.is_trivial()
    }
}
