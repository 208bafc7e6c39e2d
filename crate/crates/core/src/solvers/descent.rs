use crate::discretization::{DiscreteSystem, StatePair};
use crate::error::{LabError, Result};
use crate::linalg;

use super::{newton, Solution, SolveConfig};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Relative size below which an energy decrease is lost in rounding; the line
/// search then falls back to asking for a smaller gradient instead.
const ENERGY_RESOLUTION: f64 = 1e3 * f64::EPSILON;

/// Gradient descent with Armijo backtracking (initial step 1, halving,
/// sufficient-decrease constant `1e-4`).
///
/// The descent direction is the gradient measured in the energy inner
/// product, `d = −A⁻¹ ∇I`, obtained by preconditioned CG. In the Euclidean
/// metric the condition number of the stiffness matrix grows like `h⁻²`,
/// which would stall a plain gradient method; in the energy metric the step
/// is mesh-independent and the trivial quadratic case converges in one step.
pub fn minimize(sys: &DiscreteSystem, start: &StatePair, cfg: &SolveConfig) -> Result<Solution> {
    cfg.validate()?;
    let n = sys.nodes();
    if start.nodes() != n {
        return Err(LabError::LengthMismatch {
            expected: n,
            got: start.nodes(),
        });
    }
    let inv_diag: Vec<f64> = sys.quadratic_diagonal().iter().map(|d| 1.0 / d).collect();
    let apply = |x: &[f64], out: &mut [f64]| sys.quadratic_apply(x, out);

    let mut x = start.clone();
    let mut energy = sys.energy(&x)?;
    let mut grad = sys.energy_gradient(&x)?;
    let mut trace = vec![energy];
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        let gnorm = grad.norm();
        if gnorm <= cfg.tolerance(sys, &x) {
            break;
        }
        let (mut dir, _) = linalg::pcg(apply, &inv_diag, grad.as_flat(), 1e-10, 8 * n + 100);
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut dir = StatePair::from_flat(dir);
        let mut slope = grad.dot(&dir);
        if !(slope < 0.0) {
            dir = grad.scaled(-1.0);
            slope = -gnorm * gnorm;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = x.plus(alpha, &dir);
            let e = sys.energy(&trial).map_err(|_| LabError::LineSearch {
                iteration: iterations,
                trace: trace.clone(),
            })?;
            let resolvable = (alpha * slope).abs() > ENERGY_RESOLUTION * energy.abs();
            let ok = if resolvable {
                e <= energy + ARMIJO_C * alpha * slope
            } else {
                e <= energy + ENERGY_RESOLUTION * energy.abs()
                    && sys.energy_gradient(&trial)?.norm() < gnorm
            };
            if ok {
                accepted = Some((trial, e));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, e)) = accepted else {
            log::debug!("minimize: line search stalled at iteration {iterations}");
            break;
        };
        x = trial;
        energy = e;
        grad = sys.energy_gradient(&x)?;
        trace.push(energy);
        iterations += 1;
    }
    let x = newton::polish(sys, x, grad, cfg)?;
    Solution::evaluate(sys, x, cfg, iterations, None)
}
