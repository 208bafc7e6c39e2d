//! The TOML run configuration.
//!
//! Every section and field is optional; omitted values take the defaults
//! documented on each field. Unknown keys are rejected so that typos surface
//! as errors instead of silently falling back to defaults.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use neumann_core::domain::{CoefficientField, GridDomain};
use neumann_core::expr::Expr;
use neumann_core::nonlinearity::{log_spaced, Nonlinearity};
use neumann_core::solvers::SolveConfig;
use neumann_core::thresholds::{SearchConfig, ThresholdReport};
use serde::Deserialize;

use crate::error::CliError;

/// A literal number or an expression string.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Expr(String),
}

impl Value {
    /// Evaluates with the given variables bound. `field` names the config key
    /// in error messages.
    pub fn resolve(&self, field: &str, vars: &[&str], values: &[f64]) -> Result<f64, CliError> {
        let v = match self {
            Value::Number(x) => *x,
            Value::Expr(src) => {
                let e = Expr::parse(src, vars).map_err(|e| CliError::config(field, e))?;
                e.eval::<f64>(values)
            }
        };
        if !v.is_finite() {
            return Err(CliError::config(
                field,
                format!("value is not finite ({v})"),
            ));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Seed for the random starts; `--seed` overrides. Default 0.
    pub seed: Option<u64>,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub coefficients: CoefficientSection,
    #[serde(default)]
    pub nonlinearity: NonlinearitySection,
    pub lambda: Option<LambdaSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub thresholds: ThresholdSection,
    #[serde(default)]
    pub hypotheses: HypothesisSection,
    pub perturbation: Option<PerturbationSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    /// 1 or 2. Default 2.
    pub dim: usize,
    /// Side lengths, one per dimension. Default all 1.
    pub lengths: Option<Vec<f64>>,
    /// Nodes per side including both endpoints. Default 17 per side.
    pub counts: Option<Vec<usize>>,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection {
            dim: 2,
            lengths: None,
            counts: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientSection {
    /// Numbers or expressions in `x`, `y`. Defaults: `a = b = c = 1`, no `d`.
    pub a: Value,
    pub b: Value,
    pub c: Value,
    pub d: Option<Value>,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        CoefficientSection {
            a: Value::Number(1.0),
            b: Value::Number(1.0),
            c: Value::Number(1.0),
            d: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearitySection {
    /// Catalog name or expression in `s`, `t`. Default `log-coupled`.
    pub f: String,
}

impl Default for NonlinearitySection {
    fn default() -> Self {
        NonlinearitySection {
            f: "log-coupled".into(),
        }
    }
}

/// Exactly one of `value`, `list` or `linspace`. Entries may be expressions
/// in `s_F` and `S_F`, resolved after the thresholds are computed.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSection {
    pub value: Option<Value>,
    pub list: Option<Vec<Value>>,
    pub linspace: Option<Linspace>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: Value,
    pub stop: Value,
    pub count: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub grad_tol_abs: Option<f64>,
    pub grad_tol_rel: Option<f64>,
    pub max_iters: Option<usize>,
    pub n_starts: Option<usize>,
    pub distinct_tol: Option<f64>,
    pub deflation_power: Option<f64>,
    pub deflation_shift: Option<f64>,
    pub max_rounds: Option<usize>,
    pub parallel: Option<bool>,
    /// Evaluate the nonexistence certificate in `solve`. Default true.
    pub certify: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub radii: Option<usize>,
    pub angles: Option<usize>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub refine_tol: Option<f64>,
    pub starts: Option<usize>,
    pub max_refine_iters: Option<usize>,
    pub parallel: Option<bool>,
    /// Run the hypothesis check before computing thresholds. Default false.
    pub check_hypotheses: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesisSection {
    pub r_min: f64,
    pub r_max: f64,
    pub radii: usize,
    pub angles: usize,
    pub tol: f64,
}

impl Default for HypothesisSection {
    fn default() -> Self {
        HypothesisSection {
            r_min: 1e-4,
            r_max: 1e4,
            radii: 81,
            angles: 64,
            tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    /// Catalog name or expression in `s`, `t`. Default `log-coupled`.
    #[serde(default = "default_g")]
    pub g: String,
    /// μ values; expressions may use `s_F`, `S_F` and `lambda`.
    pub mu: Vec<Value>,
    /// Exponent `p` of the growth bound checked for `G`. Default 3.
    #[serde(default = "default_growth")]
    pub growth_exponent: f64,
}

fn default_g() -> String {
    "log-coupled".into()
}

fn default_growth() -> f64 {
    3.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; `--out` overrides. Default `neumann-out`.
    pub dir: Option<PathBuf>,
}

/// Fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: Arc<GridDomain>,
    pub coeffs: CoefficientField,
    /// Present when `[coefficients] d` is given.
    pub d: Option<Vec<f64>>,
    pub nonlinearity: Nonlinearity,
    pub lambda: Option<LambdaSection>,
    pub solver: SolveConfig,
    pub certify: bool,
    pub search: SearchConfig,
    pub precheck_hypotheses: bool,
    pub hypotheses: HypothesisSection,
    pub perturbation: Option<PerturbationSection>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, seed, out)
    }

    pub fn parse(text: &str, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_raw(raw, seed, out)
    }

    pub fn from_raw(
        raw: RawConfig,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let dim = raw.domain.dim;
        if !(dim == 1 || dim == 2) {
            return Err(CliError::config(
                "domain.dim",
                format!("must be 1 or 2, got {dim}"),
            ));
        }
        let lengths = raw.domain.lengths.clone().unwrap_or_else(|| vec![1.0; dim]);
        let counts = raw.domain.counts.clone().unwrap_or_else(|| vec![17; dim]);
        let grid = GridDomain::build_uniform_grid(dim, &lengths, &counts)
            .map_err(|e| CliError::config("domain", e))?;
        let grid = Arc::new(grid);

        let field = |name: &str, v: &Value| -> Result<Vec<f64>, CliError> {
            let key = format!("coefficients.{name}");
            match v {
                Value::Number(x) => Ok(vec![*x; grid.node_count()]),
                Value::Expr(src) => {
                    let e = Expr::parse(src, &["x", "y"]).map_err(|e| CliError::config(&key, e))?;
                    Ok(grid.sample(|x, y| e.eval::<f64>(&[x, y])))
                }
            }
        };
        let co = &raw.coefficients;
        let (a, b, c) = (field("a", &co.a)?, field("b", &co.b)?, field("c", &co.c)?);
        let d = co.d.as_ref().map(|v| field("d", v)).transpose()?;
        let coeffs = CoefficientField::new(grid.clone(), a, b, c, d.clone()).map_err(|e| {
            CliError::config(
                "coefficients",
                format!("{e}; a, b, c must lie in Π₊ (bounded, positive)"),
            )
        })?;

        let nonlinearity = Nonlinearity::resolve(&raw.nonlinearity.f)
            .map_err(|e| CliError::config("nonlinearity.f", e))?;

        let defaults = SolveConfig::default();
        let sv = &raw.solver;
        let solver = SolveConfig {
            grad_tol_abs: sv.grad_tol_abs.unwrap_or(defaults.grad_tol_abs),
            grad_tol_rel: sv.grad_tol_rel.or(defaults.grad_tol_rel),
            max_iters: sv.max_iters.unwrap_or(defaults.max_iters),
            n_starts: sv.n_starts.unwrap_or(defaults.n_starts),
            rng_seed: seed.or(raw.seed).unwrap_or(0),
            distinct_tol: sv.distinct_tol.unwrap_or(defaults.distinct_tol),
            deflation_power: sv.deflation_power.unwrap_or(defaults.deflation_power),
            deflation_shift: sv.deflation_shift.unwrap_or(defaults.deflation_shift),
            max_rounds: sv.max_rounds.unwrap_or(defaults.max_rounds),
            parallel: sv.parallel.unwrap_or(defaults.parallel),
        };
        solver
            .validate()
            .map_err(|e| CliError::config("solver", e))?;

        let sd = SearchConfig::default();
        let th = &raw.thresholds;
        let search = SearchConfig {
            radii: th.radii.unwrap_or(sd.radii),
            angles: th.angles.unwrap_or(sd.angles),
            r_min: th.r_min.unwrap_or(sd.r_min),
            r_max: th.r_max.unwrap_or(sd.r_max),
            refine_tol: th.refine_tol.unwrap_or(sd.refine_tol),
            starts: th.starts.unwrap_or(sd.starts),
            max_refine_iters: th.max_refine_iters.unwrap_or(sd.max_refine_iters),
            parallel: th.parallel.unwrap_or(sd.parallel),
        };
        search
            .validate()
            .map_err(|e| CliError::config("thresholds", e))?;

        let hy = &raw.hypotheses;
        if !(hy.r_min > 0.0 && hy.r_max > hy.r_min && hy.r_max.is_finite() && hy.radii >= 2) {
            return Err(CliError::config(
                "hypotheses",
                "need 0 < r_min < r_max and at least 2 radii",
            ));
        }
        if hy.tol.is_nan() || hy.tol <= 0.0 {
            return Err(CliError::config("hypotheses.tol", "must be positive"));
        }

        if let Some(lam) = &raw.lambda {
            let given = [
                lam.value.is_some(),
                lam.list.is_some(),
                lam.linspace.is_some(),
            ]
            .iter()
            .filter(|b| **b)
            .count();
            if given != 1 {
                return Err(CliError::config(
                    "lambda",
                    "give exactly one of `value`, `list` or `linspace`",
                ));
            }
        }

        Ok(RunConfig {
            seed: solver.rng_seed,
            grid,
            coeffs,
            d,
            nonlinearity,
            lambda: raw.lambda,
            solver,
            certify: sv.certify.unwrap_or(true),
            search,
            precheck_hypotheses: th.check_hypotheses.unwrap_or(false),
            hypotheses: raw.hypotheses.clone(),
            perturbation: raw.perturbation,
            out_dir: out
                .or(raw.output.dir)
                .unwrap_or_else(|| PathBuf::from("neumann-out")),
        })
    }

    pub fn hypothesis_radii(&self) -> Vec<f64> {
        log_spaced(
            self.hypotheses.r_min,
            self.hypotheses.r_max,
            self.hypotheses.radii,
        )
    }

    /// All λ values of the `[lambda]` section, thresholds substituted.
    pub fn lambdas(&self, th: &ThresholdReport) -> Result<Vec<f64>, CliError> {
        let Some(section) = &self.lambda else {
            return Err(CliError::config("lambda", "section is missing"));
        };
        let vars = ["s_F", "S_F"];
        let vals = [th.s_f, th.big_s_f];
        let out = if let Some(v) = &section.value {
            vec![v.resolve("lambda.value", &vars, &vals)?]
        } else if let Some(list) = &section.list {
            list.iter()
                .enumerate()
                .map(|(i, v)| v.resolve(&format!("lambda.list[{i}]"), &vars, &vals))
                .collect::<Result<_, _>>()?
        } else if let Some(ls) = &section.linspace {
            let start = ls.start.resolve("lambda.linspace.start", &vars, &vals)?;
            let stop = ls.stop.resolve("lambda.linspace.stop", &vars, &vals)?;
            match ls.count {
                0 => Vec::new(),
                1 => vec![start],
                n => (0..n)
                    .map(|k| start + (stop - start) * k as f64 / (n - 1) as f64)
                    .collect(),
            }
        } else {
            Vec::new()
        };
        if out.is_empty() {
            return Err(CliError::config("lambda", "the λ list is empty"));
        }
        if let Some(bad) = out.iter().find(|l| **l < 0.0) {
            return Err(CliError::config(
                "lambda",
                format!("λ must be nonnegative, got {bad}"),
            ));
        }
        Ok(out)
    }

    /// The single λ of `solve` and `perturb`.
    pub fn single_lambda(&self, th: &ThresholdReport) -> Result<f64, CliError> {
        let all = self.lambdas(th)?;
        match all.as_slice() {
            [l] => Ok(*l),
            _ => Err(CliError::config(
                "lambda",
                format!("this command needs a single λ, got {}", all.len()),
            )),
        }
    }

    pub fn mus(&self, th: &ThresholdReport, lambda: f64) -> Result<Vec<f64>, CliError> {
        let Some(p) = &self.perturbation else {
            return Err(CliError::config("perturbation", "section is missing"));
        };
        if p.mu.is_empty() {
            return Err(CliError::config("perturbation.mu", "the μ list is empty"));
        }
        p.mu.iter()
            .enumerate()
            .map(|(i, v)| {
                v.resolve(
                    &format!("perturbation.mu[{i}]"),
                    &["s_F", "S_F", "lambda"],
                    &[th.s_f, th.big_s_f, lambda],
                )
            })
            .collect()
    }
}
