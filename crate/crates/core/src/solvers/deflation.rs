use std::cmp::Ordering;

use crate::discretization::{DiscreteSystem, StatePair};
use crate::error::{LabError, Result};
use crate::linalg;
use crate::par;
use crate::thresholds::Point;

use super::newton::{newton_solve, newton_step};
use super::starts::standard_starts;
use super::{Solution, SolveConfig};

/// Relative residual at which the deflated iteration hands over to plain
/// Newton for the final digits.
const POLISH_REL: f64 = 1e-6;
const DEFLATED_RTOL: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Distinct solutions, sorted by energy.
    pub solutions: Vec<Solution>,
    pub rounds: usize,
    /// Deflated solves started, over all rounds.
    pub attempts: usize,
    /// Deflated solves that ended without a converged solution.
    pub unconverged: usize,
}

impl SearchOutcome {
    pub fn nontrivial(&self) -> impl Iterator<Item = &Solution> {
        self.solutions.iter().filter(|s| !s.is_trivial())
    }

    pub fn nontrivial_count(&self) -> usize {
        self.nontrivial().count()
    }
}

/// Deflated Newton from the constant starts around `anchor` (the `s_F`
/// maximizer) plus `cfg.n_starts` seeded random starts.
pub fn deflated_search(
    sys: &DiscreteSystem,
    anchor: Point,
    cfg: &SolveConfig,
) -> Result<SearchOutcome> {
    let starts = standard_starts(sys.grid(), anchor, cfg.n_starts, cfg.rng_seed);
    deflated_search_with_starts(sys, &starts, &[], cfg)
}

/// Deflated Newton from explicit starts.
///
/// The found set begins with the trivial state (when it solves the system)
/// and any `known` states. The search runs in rounds: every start is solved
/// against the found set as it stood at the end of the previous round, and
/// the new candidates are merged in order of energy. Because no start sees
/// another start's result from the same round, the outcome does not depend
/// on the order of `starts`. A round that adds nothing ends the search.
pub fn deflated_search_with_starts(
    sys: &DiscreteSystem,
    starts: &[StatePair],
    known: &[StatePair],
    cfg: &SolveConfig,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let n = sys.nodes();
    if let Some(bad) = starts.iter().chain(known).find(|s| s.nodes() != n) {
        return Err(LabError::LengthMismatch {
            expected: n,
            got: bad.nodes(),
        });
    }
    let mut found: Vec<Solution> = Vec::new();
    let zero = Solution::evaluate(sys, StatePair::zeros(n), cfg, 0, None)?;
    if zero.converged {
        found.push(zero);
    }
    for state in known {
        let sol = Solution::evaluate(sys, state.clone(), cfg, 0, None)?;
        if is_new(sys, &found, &sol.state, cfg.distinct_tol) {
            found.push(sol);
        }
    }

    let mut rounds = 0;
    let mut attempts = 0;
    let mut unconverged = 0;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let deflate: Vec<StatePair> = found.iter().map(|s| s.state.clone()).collect();
        let results = par::map_indexed(starts.len(), cfg.parallel, |i| {
            deflated_newton(sys, &starts[i], &deflate, cfg).map(|o| {
                o.map(|mut sol| {
                    sol.start_id = Some(i);
                    sol
                })
            })
        });
        attempts += results.len();
        let mut candidates = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(Some(sol)) => candidates.push(sol),
                Ok(None) => unconverged += 1,
                Err(e) => {
                    log::warn!("deflated solve from start {i} failed: {e}");
                    unconverged += 1;
                }
            }
        }
        candidates.sort_by(canonical_order);
        let before = found.len();
        for sol in candidates {
            if is_new(sys, &found, &sol.state, cfg.distinct_tol) {
                found.push(sol);
            }
        }
        log::debug!(
            "deflation round {rounds}: {} new, {} total",
            found.len() - before,
            found.len()
        );
        if found.len() == before {
            break;
        }
    }
    found.sort_by(canonical_order);
    Ok(SearchOutcome {
        solutions: found,
        rounds,
        attempts,
        unconverged,
    })
}

/// Energy first, then the nodal values, so ties cannot depend on start order.
fn canonical_order(a: &Solution, b: &Solution) -> Ordering {
    a.energy.total_cmp(&b.energy).then_with(|| {
        a.state
            .as_flat()
            .iter()
            .zip(b.state.as_flat())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn is_new(sys: &DiscreteSystem, found: &[Solution], state: &StatePair, tol: f64) -> bool {
    found
        .iter()
        .all(|f| sys.energy_distance(&f.state, state) > tol)
}

/// `A(x − x_k)` paired with its coefficient `c_k`, one entry per found state.
type DeflationTerms = Vec<(Vec<f64>, f64)>;

/// Deflation factors `m_k = shift + d_k^{-p}` with `d_k` the normalized
/// energy distance to the k-th found state. Returns `ln Π m_k` and, per found
/// state, the coefficient `c_k` with `∇ln M = Σ c_k A(x − x_k)`.
fn deflation(
    sys: &DiscreteSystem,
    x: &StatePair,
    found: &[StatePair],
    cfg: &SolveConfig,
) -> Option<(f64, DeflationTerms)> {
    let nodes = sys.nodes() as f64;
    let p = cfg.deflation_power;
    let mut log_m = 0.0;
    let mut terms = Vec::with_capacity(found.len());
    for xk in found {
        let e = x.plus(-1.0, xk);
        let mut ae = vec![0.0; e.as_flat().len()];
        sys.quadratic_apply(e.as_flat(), &mut ae);
        let d = (linalg::dot(&ae, e.as_flat()).max(0.0) / nodes).sqrt();
        if !(d > 0.0) {
            return None;
        }
        let m = cfg.deflation_shift + d.powf(-p);
        log_m += m.ln();
        let coef = -p * d.powf(-p - 1.0) / m / (nodes * d);
        terms.push((ae, coef));
    }
    log_m.is_finite().then_some((log_m, terms))
}

/// Newton on the deflated residual `M(x)·∇I(x)`, then plain Newton once the
/// undeflated residual is small. `None` when the start does not converge.
fn deflated_newton(
    sys: &DiscreteSystem,
    start: &StatePair,
    found: &[StatePair],
    cfg: &SolveConfig,
) -> Result<Option<Solution>> {
    let mut x = start.clone();
    let mut grad = sys.energy_gradient(&x)?;
    let Some((mut log_m, mut terms)) = deflation(sys, &x, found, cfg) else {
        return Ok(None);
    };
    let mut iterations = 0;
    loop {
        let gnorm = grad.norm();
        let mut q = vec![0.0; 2 * sys.nodes()];
        sys.quadratic_apply(x.as_flat(), &mut q);
        if gnorm <= cfg.tolerance(sys, &x) + POLISH_REL * linalg::norm(&q) {
            break;
        }
        if iterations >= cfg.max_iters || !(gnorm > 0.0) {
            return Ok(None);
        }
        let lin = sys.linearize(&x)?;
        let (delta, _) = newton_step(&lin, &grad, DEFLATED_RTOL);
        // Newton for M·g scales the undeflated step by τ = 1/(1 − ∇ln M·δ).
        let eta_delta: f64 = terms
            .iter()
            .map(|(ae, c)| c * linalg::dot(ae, delta.as_flat()))
            .sum();
        let tau = if 1.0 - eta_delta > 1e-4 {
            1.0 / (1.0 - eta_delta)
        } else {
            1.0
        };
        let merit = log_m + gnorm.ln();
        let mut alpha = tau;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = x.plus(alpha, &delta);
            if let (Ok(g), Some((lm, t))) = (
                sys.energy_gradient(&trial),
                deflation(sys, &trial, found, cfg),
            ) {
                let gn = g.norm();
                if lm + gn.ln() <= merit + (1.0 - 1e-4 * (alpha / tau).min(1.0)).ln() {
                    accepted = Some((trial, g, lm, t));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((next, g, lm, t)) = accepted else {
            return Ok(None);
        };
        x = next;
        grad = g;
        log_m = lm;
        terms = t;
        iterations += 1;
    }
    let polished = newton_solve(sys, &x, cfg)?;
    if !polished.converged {
        return Ok(None);
    }
    Ok(Some(Solution {
        iterations: iterations + polished.iterations,
        ..polished
    }))
}
