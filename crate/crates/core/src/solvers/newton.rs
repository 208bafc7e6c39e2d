use crate::discretization::{DiscreteSystem, Linearization, StatePair};
use crate::error::{LabError, Result};
use crate::linalg;

use super::{Solution, SolveConfig};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

/// Inner solves never ask for more than this relative accuracy.
const MAX_FORCING: f64 = 1e-4;

/// Relative inner-solve tolerance for the final polishing step.
const POLISH_FORCING: f64 = 1e-12;

/// A MINRES solve that reduced the residual by less than this factor is
/// treated as stagnated.
const STAGNATION: f64 = 0.5;

/// Search direction for `φ = ½‖∇I‖²` together with its directional derivative.
pub(super) struct Direction {
    pub step: StatePair,
    pub slope: f64,
}

/// Inexact Newton step `H δ = −g` solved by MINRES with a diagonal
/// preconditioner built from `|diag H|`.
pub(super) fn newton_step(
    lin: &Linearization<'_>,
    grad: &StatePair,
    rtol: f64,
) -> (StatePair, bool) {
    let n2 = grad.as_flat().len();
    let diag = lin.diagonal();
    let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let floor = (1e-8 * scale).max(f64::MIN_POSITIVE);
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d.abs().max(floor)).collect();
    let rhs: Vec<f64> = grad.as_flat().iter().map(|g| -g).collect();
    let (delta, info) = linalg::minres(|x, y| lin.apply(x, y), &inv, &rhs, rtol, 4 * n2 + 100);
    let usable = info.converged || info.relative_residual <= STAGNATION;
    (StatePair::from_flat(delta), usable)
}

/// Steepest descent for `φ`: `d = −α₀ H g` with `α₀ = ⟨g,H²g⟩/‖H²g‖²`, the
/// minimizer of the linearized residual along `−Hg`.
pub(super) fn residual_descent(lin: &Linearization<'_>, grad: &StatePair) -> Option<Direction> {
    let n2 = grad.as_flat().len();
    let mut hg = vec![0.0; n2];
    lin.apply(grad.as_flat(), &mut hg);
    let mut hhg = vec![0.0; n2];
    lin.apply(&hg, &mut hhg);
    let denom = linalg::dot(&hhg, &hhg);
    let hg_sq = linalg::dot(&hg, &hg);
    if !(denom > 0.0 && hg_sq > 0.0) {
        return None;
    }
    let alpha0 = hg_sq / denom;
    Some(Direction {
        step: StatePair::from_flat(hg.iter().map(|x| -alpha0 * x).collect()),
        slope: -alpha0 * hg_sq,
    })
}

fn slope_of(lin: &Linearization<'_>, grad: &StatePair, step: &StatePair) -> f64 {
    let mut hd = vec![0.0; step.as_flat().len()];
    lin.apply(step.as_flat(), &mut hd);
    linalg::dot(grad.as_flat(), &hd)
}

/// Forcing term: loose far from the root, tight enough near it that a
/// quadratic energy converges in a single step.
pub(super) fn forcing(gnorm: f64, tol: f64) -> f64 {
    MAX_FORCING.min(0.01 * tol / gnorm)
}

/// Backtracking on `½‖∇I‖²`. Returns the accepted state and its gradient.
fn line_search(
    sys: &DiscreteSystem,
    x: &StatePair,
    gnorm: f64,
    dir: &Direction,
    iteration: usize,
    trace: &[f64],
) -> Result<Option<(StatePair, StatePair)>> {
    let phi = 0.5 * gnorm * gnorm;
    let mut alpha = 1.0;
    for _ in 0..MAX_HALVINGS {
        let trial = x.plus(alpha, &dir.step);
        let g = sys
            .energy_gradient(&trial)
            .map_err(|_| LabError::LineSearch {
                iteration,
                trace: trace.to_vec(),
            })?;
        let gn = g.norm();
        if 0.5 * gn * gn <= phi + ARMIJO_C * alpha * dir.slope || gn < 0.5 * gnorm {
            return Ok(Some((trial, g)));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

/// Newton's method on `∇I = 0` with a line search on `½‖∇I‖²`.
///
/// When MINRES stagnates or its step is not a descent direction for the
/// residual, the step falls back to residual steepest descent. Running out
/// of iterations or line-search progress yields a non-converged solution.
pub fn newton_solve(
    sys: &DiscreteSystem,
    start: &StatePair,
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if start.nodes() != sys.nodes() {
        return Err(LabError::LengthMismatch {
            expected: sys.nodes(),
            got: start.nodes(),
        });
    }
    let mut x = start.clone();
    let mut grad = sys.energy_gradient(&x)?;
    let mut trace = vec![grad.norm()];
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let gnorm = grad.norm();
        let tol = cfg.tolerance(sys, &x);
        if gnorm <= tol {
            break;
        }
        let lin = sys.linearize(&x)?;
        let (delta, usable) = newton_step(&lin, &grad, forcing(gnorm, tol));
        let mut step = None;
        if usable {
            let slope = slope_of(&lin, &grad, &delta);
            if slope < 0.0 {
                let dir = Direction { step: delta, slope };
                step = line_search(sys, &x, gnorm, &dir, iterations, &trace)?;
            }
        }
        if step.is_none() {
            if let Some(dir) = residual_descent(&lin, &grad) {
                step = line_search(sys, &x, gnorm, &dir, iterations, &trace)?;
            }
        }
        let Some((next, g)) = step else {
            log::debug!("newton: no progress at iteration {iterations}, residual {gnorm:e}");
            break;
        };
        x = next;
        grad = g;
        trace.push(grad.norm());
        iterations += 1;
    }
    let x = polish(sys, x, grad, cfg)?;
    Solution::evaluate(sys, x, cfg, iterations, None)
}

/// One extra full Newton step with a tight inner solve once the gradient
/// test is met, kept only if it lowers the residual. The gradient carries
/// the quadrature weights, so meeting the tolerance can still leave the
/// nodal error a factor `1/w` larger; near a nondegenerate root this step
/// removes that at the cost of a single linear solve.
pub(super) fn polish(
    sys: &DiscreteSystem,
    x: StatePair,
    grad: StatePair,
    cfg: &SolveConfig,
) -> Result<StatePair> {
    let gnorm = grad.norm();
    if gnorm == 0.0 || gnorm > cfg.tolerance(sys, &x) {
        return Ok(x);
    }
    let lin = sys.linearize(&x)?;
    let (delta, usable) = newton_step(&lin, &grad, POLISH_FORCING);
    if !usable {
        return Ok(x);
    }
    let trial = x.plus(1.0, &delta);
    match sys.energy_gradient(&trial) {
        Ok(g) if g.norm() < gnorm => Ok(trial),
        _ => Ok(x),
    }
}
