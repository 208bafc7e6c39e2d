//! The threshold constants `s_F` and `S_F`.
//!
//! ```text
//! s_F = 2‖c‖₁ max F(s,t) / (‖a‖₁ s² + ‖b‖₁ t²)
//! S_F = max |s F_s + t F_t| / (‖c/a‖_∞⁻¹ s² + ‖c/b‖_∞⁻¹ t²)
//! ```
//!
//! Both maxima are taken over `(s,t) ≠ (0,0)`. The search evaluates the
//! ratio on a log-polar grid and then polishes the best grid points with
//! Nelder–Mead in `(ln r, θ)` coordinates. Every evaluated point is a witness,
//! so the reported value is a lower bound on the true maximum.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::Serialize;

use crate::domain::NormBundle;
use crate::error::{LabError, Result};
use crate::nonlinearity::Nonlinearity;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub radii: usize,
    pub angles: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Nelder–Mead stops once the simplex diameter in `(ln r, θ)` drops below this.
    pub refine_tol: f64,
    /// Number of grid points refined (K).
    pub starts: usize,
    pub max_refine_iters: usize,
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            radii: 200,
            angles: 512,
            r_min: 1e-4,
            r_max: 1e4,
            refine_tol: 1e-8,
            starts: 5,
            max_refine_iters: 5000,
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radii < 2 || self.angles < 8 {
            return Err(LabError::Usage(format!(
                "search grid needs at least 2 radii and 8 angles, got {} x {}",
                self.radii, self.angles
            )));
        }
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(LabError::Usage(format!(
                "search annulus [{}, {}] is invalid",
                self.r_min, self.r_max
            )));
        }
        if !(self.refine_tol > 0.0) || self.starts == 0 {
            return Err(LabError::Usage(
                "refine_tol must be positive and starts at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn reject_origin(s: f64, t: f64) -> Result<()> {
    if !(s.is_finite() && t.is_finite()) {
        return Err(LabError::NonFiniteInput {
            what: "ratio",
            s,
            t,
        });
    }
    if s == 0.0 && t == 0.0 {
        return Err(LabError::Usage(
            "threshold ratios are undefined at (0,0); the limit value is 0".into(),
        ));
    }
    Ok(())
}

fn lower_ratio(nl: &Nonlinearity, nb: &NormBundle, s: f64, t: f64) -> f64 {
    2.0 * nb.c_l1 * nl.value(s, t) / (nb.a_l1 * s * s + nb.b_l1 * t * t)
}

fn upper_ratio(nl: &Nonlinearity, nb: &NormBundle, s: f64, t: f64) -> f64 {
    let (fs, ft) = nl.gradient(s, t);
    (s * fs + t * ft).abs() / (s * s / nb.c_over_a_inf + t * t / nb.c_over_b_inf)
}

/// `2‖c‖₁ F(s,t) / (‖a‖₁s² + ‖b‖₁t²)`.
pub fn ratio_s_f(nl: &Nonlinearity, nb: &NormBundle, s: f64, t: f64) -> Result<f64> {
    reject_origin(s, t)?;
    Ok(lower_ratio(nl, nb, s, t))
}

/// `|sF_s + tF_t| / (‖c/a‖_∞⁻¹s² + ‖c/b‖_∞⁻¹t²)`.
pub fn ratio_big_s_f(nl: &Nonlinearity, nb: &NormBundle, s: f64, t: f64) -> Result<f64> {
    reject_origin(s, t)?;
    Ok(upper_ratio(nl, nb, s, t))
}

/// `|s₀F_s + t₀F_t − 2F|` at `(s₀, t₀)`. Vanishes at any critical point of
/// the `s_F` ratio.
pub fn stationarity_residual(nl: &Nonlinearity, s0: f64, t0: f64) -> Result<f64> {
    reject_origin(s0, t0)?;
    let (fs, ft) = nl.gradient(s0, t0);
    Ok((s0 * fs + t0 * ft - 2.0 * nl.value(s0, t0)).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub s: f64,
    pub t: f64,
}

impl Point {
    fn polar(log_r: f64, theta: f64) -> Self {
        let r = log_r.exp();
        Point {
            s: r * theta.cos(),
            t: r * theta.sin(),
        }
    }

    pub fn radius(&self) -> f64 {
        self.s.hypot(self.t)
    }

    /// Angle in `[0, 2π)`.
    pub fn angle(&self) -> f64 {
        let a = self.t.atan2(self.s);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchTrace {
    pub radii: usize,
    pub angles: usize,
    pub grid_best: f64,
    /// Nelder–Mead iterations, one entry per refined start.
    pub refinement_iterations: Vec<usize>,
    /// Simplex diameter at termination, per refined start.
    pub final_simplex_sizes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxSearch {
    pub value: f64,
    pub argmax: Point,
    /// Every refined point within 1e-8 (relative) of the best value.
    pub maximizers: Vec<Point>,
    pub trace: SearchTrace,
}

pub fn compute_s_f(nl: &Nonlinearity, nb: &NormBundle, cfg: &SearchConfig) -> Result<MaxSearch> {
    maximize(|s, t| lower_ratio(nl, nb, s, t), cfg)
}

pub fn compute_big_s_f(
    nl: &Nonlinearity,
    nb: &NormBundle,
    cfg: &SearchConfig,
) -> Result<MaxSearch> {
    maximize(|s, t| upper_ratio(nl, nb, s, t), cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    #[serde(rename = "s_F")]
    pub s_f: f64,
    #[serde(rename = "S_F")]
    pub big_s_f: f64,
    #[serde(rename = "argmax_s_F")]
    pub argmax_s_f: Point,
    #[serde(rename = "argmax_S_F")]
    pub argmax_big_s_f: Point,
    #[serde(rename = "maximizers_s_F")]
    pub maximizers_s_f: Vec<Point>,
    #[serde(rename = "maximizers_S_F")]
    pub maximizers_big_s_f: Vec<Point>,
    pub stationarity_residual: f64,
    pub norms: NormBundle,
    #[serde(rename = "trace_s_F")]
    pub trace_s_f: SearchTrace,
    #[serde(rename = "trace_S_F")]
    pub trace_big_s_f: SearchTrace,
}

impl ThresholdReport {
    /// `1/S_F`: below it only the trivial solution exists.
    pub fn lambda_lower(&self) -> f64 {
        1.0 / self.big_s_f
    }

    /// `1/s_F`: above it at least two nontrivial solutions exist.
    pub fn lambda_upper(&self) -> f64 {
        1.0 / self.s_f
    }
}

pub fn compute_thresholds(
    nl: &Nonlinearity,
    nb: &NormBundle,
    cfg: &SearchConfig,
) -> Result<ThresholdReport> {
    let lower = compute_s_f(nl, nb, cfg)?;
    let upper = compute_big_s_f(nl, nb, cfg)?;
    let stationarity = stationarity_residual(nl, lower.argmax.s, lower.argmax.t)?;
    Ok(ThresholdReport {
        s_f: lower.value,
        big_s_f: upper.value,
        argmax_s_f: lower.argmax,
        argmax_big_s_f: upper.argmax,
        maximizers_s_f: lower.maximizers,
        maximizers_big_s_f: upper.maximizers,
        stationarity_residual: stationarity,
        norms: *nb,
        trace_s_f: lower.trace,
        trace_big_s_f: upper.trace,
    })
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    value: f64,
    ri: usize,
    ai: usize,
}

fn nan_to_neg_inf(x: f64) -> f64 {
    if x.is_nan() {
        f64::NEG_INFINITY
    } else {
        x
    }
}

fn maximize<F>(ratio: F, cfg: &SearchConfig) -> Result<MaxSearch>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    cfg.validate()?;
    let (lo, hi) = (cfg.r_min.ln(), cfg.r_max.ln());
    let d_rho = (hi - lo) / (cfg.radii - 1) as f64;
    let d_theta = 2.0 * PI / cfg.angles as f64;
    let objective = |rho: f64, theta: f64| {
        let p = Point::polar(rho, theta);
        nan_to_neg_inf(ratio(p.s, p.t))
    };

    let rows = par::map_indexed(cfg.radii, cfg.parallel, |ri| {
        let rho = lo + d_rho * ri as f64;
        (0..cfg.angles)
            .map(|ai| Sample {
                value: objective(rho, d_theta * ai as f64),
                ri,
                ai,
            })
            .collect::<Vec<_>>()
    });
    let mut samples: Vec<Sample> = rows.into_iter().flatten().collect();
    if samples
        .iter()
        .all(|s| s.value == 0.0 || s.value == f64::NEG_INFINITY)
    {
        return Err(LabError::Search(
            "F vanished on entire search grid (F may be identically zero on the annulus)".into(),
        ));
    }
    // best first; ties by smaller radius then smaller angle
    samples.sort_by(|x, y| {
        y.value
            .total_cmp(&x.value)
            .then(x.ri.cmp(&y.ri))
            .then(x.ai.cmp(&y.ai))
    });
    let grid_best = samples[0].value;
    let seeds: Vec<Sample> = samples.into_iter().take(cfg.starts).collect();

    let refined = par::map_slice(&seeds, cfg.parallel, |seed| {
        nelder_mead_max(
            &objective,
            [lo + d_rho * seed.ri as f64, d_theta * seed.ai as f64],
            [0.5 * d_rho, 0.5 * d_theta],
            cfg.refine_tol,
            cfg.max_refine_iters,
        )
    });

    let best = refined
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut maximizers: Vec<Point> = Vec::new();
    for r in &refined {
        if best - r.value <= 1e-8 * best.abs() {
            let p = Point::polar(r.x[0], r.x[1]);
            let dup = maximizers
                .iter()
                .any(|q| (q.s - p.s).hypot(q.t - p.t) <= 1e-6 * p.radius().max(q.radius()));
            if !dup {
                maximizers.push(p);
            }
        }
    }
    maximizers.sort_by(tie_break);
    let argmax = maximizers[0];
    let value = nan_to_neg_inf(ratio(argmax.s, argmax.t));
    let value = value.max(best);

    Ok(MaxSearch {
        value,
        argmax,
        maximizers,
        trace: SearchTrace {
            radii: cfg.radii,
            angles: cfg.angles,
            grid_best,
            refinement_iterations: refined.iter().map(|r| r.iterations).collect(),
            final_simplex_sizes: refined.iter().map(|r| r.diameter).collect(),
        },
    })
}

/// Smaller radius first (radii within 1e-6 relative count as equal), then
/// smaller angle.
fn tie_break(p: &Point, q: &Point) -> Ordering {
    let (rp, rq) = (p.radius(), q.radius());
    if (rp - rq).abs() > 1e-6 * rp.max(rq) {
        return rp.total_cmp(&rq);
    }
    p.angle().total_cmp(&q.angle())
}

struct Refined {
    x: [f64; 2],
    value: f64,
    iterations: usize,
    diameter: f64,
}

fn diameter(simplex: &[[f64; 2]; 3]) -> f64 {
    let d = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    d(&simplex[0], &simplex[1])
        .max(d(&simplex[0], &simplex[2]))
        .max(d(&simplex[1], &simplex[2]))
}

/// Two-dimensional Nelder–Mead maximization with the standard coefficients
/// (reflection 1, expansion 2, contraction ½, shrink ½). The starting point is
/// a vertex, so the result never falls below it.
fn nelder_mead_max<F>(f: &F, x0: [f64; 2], step: [f64; 2], tol: f64, max_iters: usize) -> Refined
where
    F: Fn(f64, f64) -> f64,
{
    let eval = |x: &[f64; 2]| f(x[0], x[1]);
    let mut simplex = [x0, [x0[0] + step[0], x0[1]], [x0[0], x0[1] + step[1]]];
    let mut values = [eval(&simplex[0]), eval(&simplex[1]), eval(&simplex[2])];
    let mut iterations = 0;

    loop {
        // order: best (largest) first; stable so earlier vertices win ties
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        simplex = [simplex[idx[0]], simplex[idx[1]], simplex[idx[2]]];
        values = [values[idx[0]], values[idx[1]], values[idx[2]]];

        let diam = diameter(&simplex);
        if diam < tol || iterations >= max_iters {
            return Refined {
                x: simplex[0],
                value: values[0],
                iterations,
                diameter: diam,
            };
        }
        iterations += 1;

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |coef: f64| {
            [
                centroid[0] + coef * (centroid[0] - simplex[2][0]),
                centroid[1] + coef * (centroid[1] - simplex[2][1]),
            ]
        };

        let reflected = along(1.0);
        let fr = eval(&reflected);
        if fr > values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded);
            if fe > fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
            continue;
        }
        if fr > values[1] {
            simplex[2] = reflected;
            values[2] = fr;
            continue;
        }
        // outside contraction when the reflection beat the worst vertex
        let outside = fr > values[2];
        let contracted = along(if outside { 0.5 } else { -0.5 });
        let fc = eval(&contracted);
        let accept = if outside { fc >= fr } else { fc > values[2] };
        if accept {
            simplex[2] = contracted;
            values[2] = fc;
            continue;
        }
        for k in 1..3 {
            simplex[k] = [
                simplex[0][0] + 0.5 * (simplex[k][0] - simplex[0][0]),
                simplex[0][1] + 0.5 * (simplex[k][1] - simplex[0][1]),
            ];
            values[k] = eval(&simplex[k]);
        }
    }
}
