use serde::Serialize;

use crate::discretization::{DiscreteSystem, StatePair};
use crate::error::{LabError, Result};

use super::SolveConfig;

/// Slack allowed in the inequality chain, relative to `lhs`.
const CHAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateVerdict {
    /// The chain holds and `λ S_F < 1`: no nontrivial solution exists, so in
    /// particular this state is not one.
    NonexistenceCertified,
    /// The chain holds but `λ S_F ≥ 1`, so it proves nothing.
    Inconclusive,
    /// `mid > λ S_F lhs`: the supplied `S_F` is not an upper bound.
    Violated,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// `‖u‖²_a + ‖v‖²_b`
    pub lhs: f64,
    /// `λ Σ w c (F_s u + F_t v)`
    pub mid: f64,
    /// `λ S_F · lhs`
    pub rhs: f64,
    /// `mid / lhs`; equals one at any nontrivial solution.
    pub ratio: f64,
    pub lambda_times_big_s_f: f64,
    pub residual_norm: f64,
    /// Whether `state` solves the system within the configured tolerance.
    pub is_solution: bool,
    pub verdict: CertificateVerdict,
}

/// Evaluates the nonexistence chain
///
/// ```text
/// lhs = ‖u‖²_a + ‖v‖²_b,   mid = λ Σ wᵢcᵢ(F_s uᵢ + F_t vᵢ)
/// mid ≤ λ S_F Σ wᵢcᵢ(α uᵢ² + β vᵢ²) ≤ λ S_F Σ wᵢ(aᵢuᵢ² + bᵢvᵢ²) ≤ λ S_F lhs
/// ```
///
/// with `α = 1/‖c/a‖_∞`, `β = 1/‖c/b‖_∞`. At a solution `lhs = mid`, so when
/// `λ S_F < 1` the chain forces `lhs = 0`. The zero state makes every term
/// vanish and is rejected.
pub fn nonexistence_certificate(
    sys: &DiscreteSystem,
    state: &StatePair,
    big_s_f: f64,
    cfg: &SolveConfig,
) -> Result<CertificateReport> {
    if sys.perturbation().is_some() {
        return Err(LabError::Usage(
            "the nonexistence certificate applies to the unperturbed system".into(),
        ));
    }
    if !(big_s_f > 0.0 && big_s_f.is_finite()) {
        return Err(LabError::Usage(format!(
            "S_F must be positive, got {big_s_f}"
        )));
    }
    if state.as_flat().iter().all(|x| *x == 0.0) {
        return Err(LabError::Usage(
            "the certificate is vacuous at the zero state".into(),
        ));
    }
    let (lhs, mid, _) = sys.tested_terms(state)?;
    let lambda = sys.lambda();
    let rhs = lambda * big_s_f * lhs;
    let residual_norm = sys.energy_gradient(state)?.norm();
    let verdict = if mid > rhs + CHAIN_SLACK * lhs {
        CertificateVerdict::Violated
    } else if lambda * big_s_f < 1.0 {
        CertificateVerdict::NonexistenceCertified
    } else {
        CertificateVerdict::Inconclusive
    };
    Ok(CertificateReport {
        lhs,
        mid,
        rhs,
        ratio: mid / lhs,
        lambda_times_big_s_f: lambda * big_s_f,
        residual_norm,
        is_solution: residual_norm <= cfg.tolerance(sys, state),
        verdict,
    })
}

/// Largest relative violation over the nodes of `state` of
/// `|s F_s + t F_t| ≤ S_F (α s² + β t²)`. Nonpositive when the bound holds.
pub fn nodewise_bound_violation(
    sys: &DiscreteSystem,
    state: &StatePair,
    big_s_f: f64,
) -> Result<f64> {
    if state.nodes() != sys.nodes() {
        return Err(LabError::LengthMismatch {
            expected: sys.nodes(),
            got: state.nodes(),
        });
    }
    let nb = sys.coeffs().norms();
    let (alpha, beta) = (1.0 / nb.c_over_a_inf, 1.0 / nb.c_over_b_inf);
    let nl = sys.nonlinearity();
    let mut worst = f64::NEG_INFINITY;
    for (&s, &t) in state.u().iter().zip(state.v()) {
        let bound = big_s_f * (alpha * s * s + beta * t * t);
        let (fs, ft) = nl.grad(s, t)?;
        let value = (s * fs + t * ft).abs();
        let violation = if bound > 0.0 {
            (value - bound) / bound
        } else if value > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}
