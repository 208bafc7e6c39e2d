//! Plain-text state files: `#`-prefixed header lines followed by one
//! `x [y] u v` row per node, in full double precision.
//!
//! ```text
//! # dim 2
//! # counts 17 17
//! # lengths 1.0000000000000000e0 1.0000000000000000e0
//! # lambda 2.4852735126600520e0
//! # residual 3.7641166807862210e-11
//! # energy -3.1026021217000000e0
//! # classification nontrivial-negative-energy
//! 0.0000000000000000e0 0.0000000000000000e0 2.1819... 2.1819...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use neumann_core::discretization::StatePair;
use neumann_core::domain::GridDomain;
use neumann_core::solvers::{Classification, Solution};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub dim: usize,
    pub counts: Vec<usize>,
    pub lengths: Vec<f64>,
    pub lambda: f64,
    pub residual: f64,
    pub energy: f64,
    pub classification: Classification,
    pub state: StatePair,
}

fn full(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render(grid: &GridDomain, lambda: f64, sol: &Solution) -> String {
    let mut out = String::new();
    let join = |v: Vec<String>| v.join(" ");
    let _ = writeln!(out, "# dim {}", grid.dim());
    let _ = writeln!(
        out,
        "# counts {}",
        join(grid.counts().iter().map(|c| c.to_string()).collect())
    );
    let _ = writeln!(
        out,
        "# lengths {}",
        join(grid.lengths().iter().map(|l| full(*l)).collect())
    );
    let _ = writeln!(out, "# lambda {}", full(lambda));
    let _ = writeln!(out, "# residual {}", full(sol.residual_norm));
    let _ = writeln!(out, "# energy {}", full(sol.energy));
    let _ = writeln!(out, "# classification {}", sol.classification.as_str());
    let (u, v) = (sol.state.u(), sol.state.v());
    for k in 0..grid.node_count() {
        let (x, y) = grid.coords(k);
        if grid.dim() == 2 {
            let _ = writeln!(out, "{} {} {} {}", full(x), full(y), full(u[k]), full(v[k]));
        } else {
            let _ = writeln!(out, "{} {} {}", full(x), full(u[k]), full(v[k]));
        }
    }
    out
}

pub fn write(path: &Path, grid: &GridDomain, lambda: f64, sol: &Solution) -> Result<(), CliError> {
    std::fs::write(path, render(grid, lambda, sol)).map_err(|e| CliError::io(path, e))
}

pub fn read(path: &Path) -> Result<StateFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|msg| CliError::Config(format!("{}: {msg}", path.display())))
}

pub fn parse(text: &str) -> Result<StateFile, String> {
    let mut dim = None;
    let mut counts = None;
    let mut lengths = None;
    let mut lambda = None;
    let mut residual = None;
    let mut energy = None;
    let mut classification = None;
    let mut u = Vec::new();
    let mut v = Vec::new();
    let num = |s: &str, line: usize| s.parse::<f64>().map_err(|e| format!("line {line}: {e}"));
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let mut parts = header.split_whitespace();
            let key = parts.next().unwrap_or("");
            let rest: Vec<&str> = parts.collect();
            let one = || {
                rest.first()
                    .copied()
                    .ok_or(format!("line {line_no}: `{key}` has no value"))
            };
            match key {
                "dim" => {
                    dim = Some(
                        one()?
                            .parse::<usize>()
                            .map_err(|e| format!("line {line_no}: {e}"))?,
                    )
                }
                "counts" => {
                    counts = Some(
                        rest.iter()
                            .map(|c| {
                                c.parse::<usize>()
                                    .map_err(|e| format!("line {line_no}: {e}"))
                            })
                            .collect::<Result<Vec<_>, _>>()?,
                    )
                }
                "lengths" => {
                    lengths = Some(
                        rest.iter()
                            .map(|c| num(c, line_no))
                            .collect::<Result<Vec<_>, _>>()?,
                    )
                }
                "lambda" => lambda = Some(num(one()?, line_no)?),
                "residual" => residual = Some(num(one()?, line_no)?),
                "energy" => energy = Some(num(one()?, line_no)?),
                "classification" => {
                    let c = one()?;
                    classification = Some(
                        Classification::parse(c)
                            .ok_or(format!("line {line_no}: unknown classification `{c}`"))?,
                    )
                }
                _ => {}
            }
            continue;
        }
        let d = dim.ok_or(format!("line {line_no}: data before the `dim` header"))?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != d + 2 {
            return Err(format!(
                "line {line_no}: expected {} columns, got {}",
                d + 2,
                cols.len()
            ));
        }
        u.push(num(cols[d], line_no)?);
        v.push(num(cols[d + 1], line_no)?);
    }
    let missing = |k: &str| format!("missing `{k}` header");
    let counts: Vec<usize> = counts.ok_or(missing("counts"))?;
    let expected: usize = counts.iter().product();
    if u.len() != expected {
        return Err(format!("expected {expected} node rows, got {}", u.len()));
    }
    Ok(StateFile {
        dim: dim.ok_or(missing("dim"))?,
        counts,
        lengths: lengths.ok_or(missing("lengths"))?,
        lambda: lambda.ok_or(missing("lambda"))?,
        residual: residual.ok_or(missing("residual"))?,
        energy: energy.ok_or(missing("energy"))?,
        classification: classification.ok_or(missing("classification"))?,
        state: StatePair::from_parts(u, v).map_err(|e| e.to_string())?,
    })
}
