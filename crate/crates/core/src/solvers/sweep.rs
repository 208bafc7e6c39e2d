use serde::Serialize;

use crate::discretization::{DiscreteSystem, StatePair};
use crate::error::{LabError, Result};
use crate::nonlinearity::{check_growth_bound, log_spaced, GrowthReport, Nonlinearity};
use crate::par;
use crate::thresholds::ThresholdReport;

use super::deflation::{deflated_search, deflated_search_with_starts, SearchOutcome};
use super::starts::standard_starts;
use super::{Classification, Solution, SolveConfig};

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub classification: Classification,
    pub energy: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub start_id: Option<usize>,
}

impl From<&Solution> for SolutionSummary {
    fn from(s: &Solution) -> Self {
        SolutionSummary {
            classification: s.classification,
            energy: s.energy,
            residual_norm: s.residual_norm,
            iterations: s.iterations,
            start_id: s.start_id,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub lambda_times_s_f: f64,
    pub lambda_times_big_s_f: f64,
    pub n_nontrivial: usize,
    /// Smallest energy among all solutions found, the trivial one included.
    pub min_energy: f64,
    pub max_residual: f64,
    /// `ok`, or `failed: <reason>` when the search at this λ errored.
    pub status: String,
    pub solutions: Vec<SolutionSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    #[serde(rename = "s_F")]
    pub s_f: f64,
    #[serde(rename = "S_F")]
    pub big_s_f: f64,
    /// `1/S_F`
    pub lambda_lower: f64,
    /// `1/s_F`
    pub lambda_upper: f64,
    /// λ values dropped because they repeated an earlier entry.
    pub duplicates_removed: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// Runs [`deflated_search`] at every λ. Rows come back sorted by λ with
/// repeated values removed; a failing λ yields a flagged row instead of
/// aborting the sweep.
pub fn sweep(
    base: &DiscreteSystem,
    lambdas: &[f64],
    thresholds: &ThresholdReport,
    cfg: &SolveConfig,
) -> Result<SweepReport> {
    cfg.validate()?;
    if lambdas.is_empty() {
        return Err(LabError::Usage("the λ list is empty".into()));
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(LabError::Usage(format!(
            "λ values must be finite and nonnegative, got {bad}"
        )));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut unique: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut duplicates_removed = Vec::new();
    for l in sorted {
        if unique.last() == Some(&l) {
            duplicates_removed.push(l);
        } else {
            unique.push(l);
        }
    }
    if !duplicates_removed.is_empty() {
        log::warn!("removed repeated λ values: {duplicates_removed:?}");
    }
    let anchor = thresholds.argmax_s_f;
    let rows = par::map_slice(&unique, cfg.parallel, |&lambda| {
        let result = base
            .with_lambda(lambda)
            .and_then(|sys| deflated_search(&sys, anchor, cfg));
        let mut row = SweepRow {
            lambda,
            lambda_times_s_f: lambda * thresholds.s_f,
            lambda_times_big_s_f: lambda * thresholds.big_s_f,
            n_nontrivial: 0,
            min_energy: f64::NAN,
            max_residual: f64::NAN,
            status: "ok".into(),
            solutions: Vec::new(),
        };
        match result {
            Ok(outcome) => {
                row.n_nontrivial = outcome.nontrivial_count();
                row.min_energy = outcome
                    .solutions
                    .iter()
                    .map(|s| s.energy)
                    .fold(f64::INFINITY, f64::min);
                row.max_residual = outcome
                    .solutions
                    .iter()
                    .map(|s| s.residual_norm)
                    .fold(0.0, f64::max);
                row.solutions = outcome
                    .solutions
                    .iter()
                    .map(SolutionSummary::from)
                    .collect();
            }
            Err(e) => row.status = format!("failed: {e}"),
        }
        row
    });
    Ok(SweepReport {
        s_f: thresholds.s_f,
        big_s_f: thresholds.big_s_f,
        lambda_lower: thresholds.lambda_lower(),
        lambda_upper: thresholds.lambda_upper(),
        duplicates_removed,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationRow {
    pub mu: f64,
    pub n_nontrivial: usize,
    pub preserved: bool,
    /// Largest distance from an unperturbed nontrivial solution to its
    /// nearest perturbed one (normalized energy norm).
    pub max_drift: f64,
    pub solutions: Vec<SolutionSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub lambda: f64,
    pub growth: GrowthReport,
    pub base_nontrivial: usize,
    pub base: Vec<SolutionSummary>,
    pub rows: Vec<PerturbationRow>,
}

/// Tracks the solution set of the system with the extra term `μ d G` for
/// each `μ`.
///
/// Every search, the unperturbed reference included, uses the same starts:
/// the nontrivial solutions of a plain [`deflated_search`] followed by the
/// standard starts. At `μ = 0` the row therefore reproduces the reference.
pub fn perturbation_stability(
    sys: &DiscreteSystem,
    g: &Nonlinearity,
    d: Vec<f64>,
    mus: &[f64],
    growth_exponent: f64,
    thresholds: &ThresholdReport,
    cfg: &SolveConfig,
) -> Result<PerturbationReport> {
    cfg.validate()?;
    if sys.perturbation().is_some() {
        return Err(LabError::Usage("system is already perturbed".into()));
    }
    if !(sys.lambda() > thresholds.lambda_upper()) {
        return Err(LabError::Usage(format!(
            "perturbation stability needs λ > 1/s_F = {}, got {}",
            thresholds.lambda_upper(),
            sys.lambda()
        )));
    }
    if mus.is_empty() {
        return Err(LabError::Usage("the μ list is empty".into()));
    }
    if let Some(bad) = mus.iter().find(|m| !m.is_finite()) {
        return Err(LabError::Usage(format!(
            "μ values must be finite, got {bad}"
        )));
    }
    let growth = check_growth_bound(g, growth_exponent, &log_spaced(1e-2, 1e4, 61), 64)?;
    if !growth.ok {
        return Err(LabError::Usage(format!(
            "G fails the growth bound with exponent {growth_exponent}"
        )));
    }
    let with_d = DiscreteSystem::new(
        sys.coeffs().with_d(d)?,
        sys.nonlinearity().clone(),
        sys.lambda(),
    )?;

    let anchor = thresholds.argmax_s_f;
    let first = deflated_search(sys, anchor, cfg)?;
    let mut starts: Vec<StatePair> = first.nontrivial().map(|s| s.state.clone()).collect();
    starts.extend(standard_starts(
        sys.grid(),
        anchor,
        cfg.n_starts,
        cfg.rng_seed,
    ));

    let base = deflated_search_with_starts(sys, &starts, &[], cfg)?;
    let base_states: Vec<&StatePair> = base.nontrivial().map(|s| &s.state).collect();
    let mut rows = Vec::with_capacity(mus.len());
    for &mu in mus {
        let psys = with_d.with_perturbation(mu, g.clone())?;
        let outcome: SearchOutcome = deflated_search_with_starts(&psys, &starts, &[], cfg)?;
        let perturbed: Vec<&StatePair> = outcome.nontrivial().map(|s| &s.state).collect();
        let max_drift = base_states
            .iter()
            .map(|b| {
                perturbed
                    .iter()
                    .map(|p| psys.energy_distance(b, p))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        rows.push(PerturbationRow {
            mu,
            n_nontrivial: perturbed.len(),
            preserved: perturbed.len() == base_states.len(),
            max_drift,
            solutions: outcome
                .solutions
                .iter()
                .map(SolutionSummary::from)
                .collect(),
        });
    }
    Ok(PerturbationReport {
        lambda: sys.lambda(),
        growth,
        base_nontrivial: base_states.len(),
        base: base.solutions.iter().map(SolutionSummary::from).collect(),
        rows,
    })
}
