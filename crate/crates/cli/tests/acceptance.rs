//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Tolerances and time limits are the constants below.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use neumann_core::discretization::{DiscreteSystem, StatePair};
use neumann_core::domain::{CoefficientField, GridDomain};
use neumann_core::nonlinearity::Nonlinearity;
use neumann_core::solvers::{
    deflated_search, minimize, newton_solve, nodewise_bound_violation, random_starts, SolveConfig,
};
use neumann_core::thresholds::{compute_thresholds, stationarity_residual, SearchConfig};
use neumann_lab::commands::{self, Reporter};
use neumann_lab::config::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const S_F_REFERENCE: f64 = 0.8046;
const S_F_TOL: f64 = 2e-3;
const BIG_S_F_REFERENCE: f64 = 1.0;
const BIG_S_F_TOL: f64 = 1e-6;
const THRESHOLD_TIME: Duration = Duration::from_secs(5);

const ORDERING_SLACK: f64 = 1e-9;
const RANDOM_FIELDS: u64 = 20;

const STATIONARITY_TOL: f64 = 1e-5;

const GRADIENT_REL_TOL: f64 = 1e-6;
const HESSIAN_REL_TOL: f64 = 1e-5;
const SYMMETRY_TOL: f64 = 1e-10;
const FD_STEP: f64 = 1e-6;
const CALCULUS_STATES: u64 = 20;

const TRIVIAL_NORM: f64 = 1e-8;
const NONEXISTENCE_STARTS: usize = 20;
const NODEWISE_STATES: usize = 10_000;
const NODEWISE_TOL: f64 = 1e-12;
const NONEXISTENCE_TIME: Duration = Duration::from_secs(30);

const MULTIPLICITY_RESIDUAL: f64 = 1e-8;
const MULTIPLICITY_DISTANCE: f64 = 1e-3;
const MULTIPLICITY_TIME: Duration = Duration::from_secs(60);

const SCALING_REL_TOL: f64 = 1e-12;
const SCALING_STATES: u64 = 20;

const DRIFT_TOL: f64 = 1e-2;

const REFERENCE: &str = r#"
[domain]
dim = 2
lengths = [1.0, 1.0]
counts = [17, 17]

[coefficients]
a = 1.0
b = 1.0
c = 1.0

[nonlinearity]
f = "log-coupled"
"#;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn unit_square(n: usize) -> CoefficientField {
    let g = Arc::new(GridDomain::rectangle(1.0, 1.0, n, n).unwrap());
    CoefficientField::constant(g, 1.0, 1.0, 1.0).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> StatePair {
    StatePair::from_flat(
        (0..2 * n)
            .map(|_| scale * rng.random_range(-1.0..1.0))
            .collect(),
    )
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_neumann-lab")
}

fn run_cli(args: &[&str], config: &Path) -> std::process::Output {
    Command::new(binary())
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

/// 1. `thresholds` on the reference problem, single-threaded.
fn threshold_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("reference.toml");
    std::fs::write(
        &config,
        format!(
            "{REFERENCE}\n[thresholds]\nparallel = false\n\n[output]\ndir = \"{}\"\n",
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let start = Instant::now();
    let out = run_cli(&["thresholds"], &config);
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!("exit status {:?}", out.status.code()));
    }
    let json: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/thresholds.json")).unwrap(),
    )
    .unwrap();
    let s_f = json["s_F"].as_f64().unwrap();
    let big_s_f = json["S_F"].as_f64().unwrap();
    check(
        (s_f - S_F_REFERENCE).abs() <= S_F_TOL
            && (big_s_f - BIG_S_F_REFERENCE).abs() <= BIG_S_F_TOL
            && elapsed < THRESHOLD_TIME,
        format!("s_F = {s_f:.7}, S_F = {big_s_f:.10}, {elapsed:.2?} single-threaded"),
    )
}

/// 2. `S_F ≥ s_F` over catalog nonlinearities and random Π₊ coefficients.
fn ordering_property() -> Outcome {
    let grid = Arc::new(GridDomain::rectangle(1.0, 1.0, 9, 9).unwrap());
    let mut worst = f64::INFINITY;
    let mut cases = 0;
    for seed in 0..RANDOM_FIELDS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut field = || {
            let (k, l, amp, base) = (
                rng.random_range(0..4) as f64,
                rng.random_range(0..4) as f64,
                rng.random_range(0.1..2.0),
                rng.random_range(-1.0..1.0),
            );
            grid.sample(move |x, y| {
                (base
                    + amp
                        * (k * std::f64::consts::PI * x).cos()
                        * (l * std::f64::consts::PI * y).cos())
                .exp()
            })
        };
        let coeffs = CoefficientField::new(grid.clone(), field(), field(), field(), None).unwrap();
        for nl in Nonlinearity::all_catalog() {
            let th = compute_thresholds(&nl, &coeffs.norms(), &SearchConfig::default())
                .map_err(|e| e.to_string())?;
            worst = worst.min(th.big_s_f - th.s_f);
            cases += 1;
        }
    }
    check(
        worst >= -ORDERING_SLACK,
        format!("{cases} cases, min(S_F - s_F) = {worst:.6e}"),
    )
}

/// 3. `s₀F_s + t₀F_t = 2F` at the computed `s_F` maximizer.
fn stationarity_identity() -> Outcome {
    let nb = unit_square(3).norms();
    let mut worst: f64 = 0.0;
    for nl in Nonlinearity::all_catalog() {
        let th =
            compute_thresholds(&nl, &nb, &SearchConfig::default()).map_err(|e| e.to_string())?;
        let p = th.argmax_s_f;
        let residual = stationarity_residual(&nl, p.s, p.t).map_err(|e| e.to_string())?;
        worst = worst.max(residual / nl.value(p.s, p.t).max(1.0));
    }
    check(
        worst <= STATIONARITY_TOL,
        format!("max scaled residual {worst:.3e} over the catalog"),
    )
}

/// 4. Gradient, Hessian and symmetry against finite differences.
fn calculus_consistency() -> Outcome {
    let nl = Nonlinearity::catalog_log();
    let lambda = 2.0 / 0.804_742_342_549_411_8;
    let mut systems = Vec::new();
    for grid in [
        GridDomain::interval(1.0, 33).unwrap(),
        GridDomain::rectangle(1.0, 1.0, 17, 17).unwrap(),
    ] {
        let g = Arc::new(grid);
        let unit = CoefficientField::constant(g.clone(), 1.0, 1.0, 1.0).unwrap();
        systems.push(DiscreteSystem::new(unit, nl.clone(), lambda).unwrap());
        let varied = CoefficientField::new(
            g.clone(),
            g.sample(|x, y| 1.0 + x + 0.5 * y),
            g.sample(|x, y| 2.0 - x * y),
            g.sample(|x, _| 1.0 + 0.5 * (3.0 * x).sin()),
            None,
        )
        .unwrap();
        systems.push(DiscreteSystem::new(varied, nl.clone(), lambda).unwrap());
    }
    let (mut g_err, mut h_err, mut s_err) = (0.0f64, 0.0f64, 0.0f64);
    for (i, sys) in systems.iter().enumerate() {
        let n = sys.nodes();
        for k in 0..CALCULUS_STATES {
            let mut rng = ChaCha8Rng::seed_from_u64(100 * i as u64 + k);
            let x = random_state(&mut rng, n, 2.0);
            let p = random_state(&mut rng, n, 1.0);
            let z = random_state(&mut rng, n, 1.0);
            let e = |s: &StatePair| sys.energy(s).unwrap();
            let fd = (e(&x.plus(FD_STEP, &p)) - e(&x.plus(-FD_STEP, &p))) / (2.0 * FD_STEP);
            let exact = sys.energy_gradient(&x).unwrap().dot(&p);
            g_err = g_err.max((fd - exact).abs() / exact.abs());

            let gp = sys.energy_gradient(&x.plus(FD_STEP, &p)).unwrap();
            let gm = sys.energy_gradient(&x.plus(-FD_STEP, &p)).unwrap();
            let fd_h = gp.plus(-1.0, &gm).scaled(0.5 / FD_STEP);
            let hp = sys.energy_hessian_apply(&x, &p).unwrap();
            h_err = h_err.max(fd_h.plus(-1.0, &hp).norm() / hp.norm());

            // symmetry relative to the Cauchy–Schwarz scale ‖Hp‖‖z‖
            let hz = sys.energy_hessian_apply(&x, &z).unwrap();
            s_err = s_err.max((hp.dot(&z) - p.dot(&hz)).abs() / (hp.norm() * z.norm()));
        }
    }
    check(
        g_err <= GRADIENT_REL_TOL && h_err <= HESSIAN_REL_TOL && s_err <= SYMMETRY_TOL,
        format!(
            "gradient {g_err:.2e}, hessian {h_err:.2e}, symmetry {s_err:.2e} on n=33 and 17x17"
        ),
    )
}

/// 5. Only the trivial solution below `1/S_F`, and the nodewise bound.
fn discrete_nonexistence() -> Outcome {
    let start = Instant::now();
    let coeffs = unit_square(17);
    let nl = Nonlinearity::catalog_log();
    let th = compute_thresholds(&nl, &coeffs.norms(), &SearchConfig::default())
        .map_err(|e| e.to_string())?;
    let sys = DiscreteSystem::new(coeffs, nl, 0.5 / th.big_s_f).unwrap();
    let cfg = SolveConfig::default();
    let mut worst_norm: f64 = 0.0;
    let mut all_converged = true;
    for s in random_starts(sys.grid(), th.argmax_s_f, NONEXISTENCE_STARTS, 5) {
        for sol in [minimize(&sys, &s, &cfg), newton_solve(&sys, &s, &cfg)] {
            let sol = sol.map_err(|e| e.to_string())?;
            all_converged &= sol.converged;
            worst_norm = worst_norm.max(sol.state.norm());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst_violation = f64::NEG_INFINITY;
    for _ in 0..NODEWISE_STATES {
        let scale = 10f64.powf(rng.random_range(-4.0..4.0));
        let state = random_state(&mut rng, sys.nodes(), scale);
        worst_violation =
            worst_violation.max(nodewise_bound_violation(&sys, &state, th.big_s_f).unwrap());
    }
    let elapsed = start.elapsed();
    check(
        all_converged && worst_norm < TRIVIAL_NORM && worst_violation <= NODEWISE_TOL && elapsed < NONEXISTENCE_TIME,
        format!(
            "{} minimize + {} newton runs converged: {all_converged}, max final norm {worst_norm:.2e}, \
             max nodewise violation {worst_violation:.2e} over {NODEWISE_STATES} states, {elapsed:.2?}",
            NONEXISTENCE_STARTS, NONEXISTENCE_STARTS
        ),
    )
}

/// 6. At least two distinct nontrivial solutions above `1/s_F`.
fn discrete_multiplicity() -> Outcome {
    let start = Instant::now();
    let coeffs = unit_square(17);
    let nl = Nonlinearity::catalog_log();
    let th = compute_thresholds(&nl, &coeffs.norms(), &SearchConfig::default())
        .map_err(|e| e.to_string())?;
    let sys = DiscreteSystem::new(coeffs, nl, 2.0 / th.s_f).unwrap();
    let out =
        deflated_search(&sys, th.argmax_s_f, &SolveConfig::default()).map_err(|e| e.to_string())?;
    let nontrivial: Vec<_> = out.nontrivial().collect();
    let max_residual = nontrivial
        .iter()
        .map(|s| s.residual_norm)
        .fold(0.0, f64::max);
    let mut min_distance = f64::INFINITY;
    for (i, a) in nontrivial.iter().enumerate() {
        for b in &nontrivial[i + 1..] {
            min_distance = min_distance.min(sys.energy_distance(&a.state, &b.state));
        }
    }
    let negative = nontrivial.iter().filter(|s| s.energy < 0.0).count();
    let elapsed = start.elapsed();
    check(
        nontrivial.len() >= 2
            && max_residual < MULTIPLICITY_RESIDUAL
            && min_distance > MULTIPLICITY_DISTANCE
            && negative >= 1
            && elapsed < MULTIPLICITY_TIME,
        format!(
            "{} nontrivial ({negative} with negative energy), max residual {max_residual:.2e}, \
             min pairwise distance {min_distance:.3e}, {elapsed:.2?}",
            nontrivial.len()
        ),
    )
}

/// 7. Sweep picture and byte-identical CSV across runs.
fn sweep_phase_picture() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        format!("seed = 11\n{REFERENCE}\n[lambda]\nlinspace = {{ start = \"0.2/S_F\", stop = \"3/s_F\", count = 12 }}\n"),
    )
    .unwrap();
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = run_cli(&["sweep", "--out", out_dir.to_str().unwrap()], &config);
        if !out.status.success() {
            return Err(format!("run {run}: exit status {:?}", out.status.code()));
        }
        csvs.push(std::fs::read(out_dir.join("sweep.csv")).unwrap());
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/sweep.json")).unwrap())
            .unwrap();
    let lower = json["lambda_lower"].as_f64().unwrap();
    let upper = json["lambda_upper"].as_f64().unwrap();
    let rows = json["rows"].as_array().unwrap();
    let (mut below, mut above, mut gap, mut ok) = (0, 0, 0, true);
    for row in rows {
        let lambda = row["lambda"].as_f64().unwrap();
        let n = row["n_nontrivial"].as_u64().unwrap();
        if lambda < lower {
            below += 1;
            ok &= n == 0;
        } else if lambda > upper {
            above += 1;
            ok &= n >= 2;
        } else {
            gap += 1;
        }
    }
    let identical = csvs[0] == csvs[1];
    check(
        ok && identical && rows.len() == 12,
        format!(
            "{} rows: {below} below 1/S_F, {gap} in the gap (unchecked), {above} above 1/s_F; \
             regimes as expected: {ok}; CSV byte-identical: {identical}",
            rows.len()
        ),
    )
}

/// 8. (F, λ) and (2F, λ/2) give identical gradients and solution sets.
fn scaling_equivariance() -> Outcome {
    let single = format!("{REFERENCE}\n[lambda]\nvalue = \"2/s_F\"\n");
    let cfg_f = RunConfig::parse(
        &single.replace("\"log-coupled\"", "\"ln(1 + s^2*t^2)\""),
        None,
        None,
    )
    .map_err(|e| e.to_string())?;
    let cfg_2f = RunConfig::parse(
        &single.replace("\"log-coupled\"", "\"2*ln(1 + s^2*t^2)\""),
        None,
        None,
    )
    .map_err(|e| e.to_string())?;
    let build = |cfg: &RunConfig| {
        let th = commands::thresholds(cfg).unwrap();
        let lambda = cfg.single_lambda(&th).unwrap();
        (
            DiscreteSystem::new(cfg.coeffs.clone(), cfg.nonlinearity.clone(), lambda).unwrap(),
            th,
        )
    };
    let (sys_f, th_f) = build(&cfg_f);
    let (sys_2f, th_2f) = build(&cfg_2f);
    let mut worst: f64 = 0.0;
    for k in 0..SCALING_STATES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + k);
        let x = random_state(&mut rng, sys_f.nodes(), 3.0);
        let g1 = sys_f.energy_gradient(&x).unwrap();
        let g2 = sys_2f.energy_gradient(&x).unwrap();
        worst = worst.max(g1.plus(-1.0, &g2).norm() / g1.norm());
    }
    let cfg = SolveConfig::default();
    let a = deflated_search(&sys_f, th_f.argmax_s_f, &cfg).map_err(|e| e.to_string())?;
    let b = deflated_search(&sys_2f, th_2f.argmax_s_f, &cfg).map_err(|e| e.to_string())?;
    let matched = a.solutions.len() == b.solutions.len()
        && a.solutions.iter().all(|s| {
            b.solutions
                .iter()
                .any(|o| sys_f.energy_distance(&s.state, &o.state) <= cfg.distinct_tol)
        });
    check(
        worst <= SCALING_REL_TOL && matched,
        format!(
            "λ = {:.10} vs λ/2 = {:.10}; max relative gradient difference {worst:.2e}; \
             {} vs {} solutions, sets match: {matched}",
            sys_f.lambda(),
            sys_2f.lambda(),
            a.solutions.len(),
            b.solutions.len()
        ),
    )
}

/// 9. Small perturbation μ d G keeps the count and barely moves the branches.
fn perturbation_stability() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{}\n[lambda]\nvalue = \"2/s_F\"\n\n[perturbation]\ng = \"ln(1 + s^2*t^2)\"\nmu = [\"1e-4*lambda\"]\n",
        REFERENCE.replace("c = 1.0\n", "c = 1.0\nd = 1.0\n")
    );
    let cfg =
        RunConfig::parse(&text, None, Some(dir.path().to_path_buf())).map_err(|e| e.to_string())?;
    let report =
        commands::cmd_perturb(&cfg, &Reporter { quiet: true }).map_err(|e| e.to_string())?;
    let row = &report.rows[0];
    check(
        row.preserved && row.max_drift < DRIFT_TOL,
        format!(
            "μ = {:.4e}: {} → {} nontrivial, max branch drift {:.3e}",
            row.mu, report.base_nontrivial, row.n_nontrivial, row.max_drift
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("threshold reproduction", threshold_reproduction),
        ("ordering S_F >= s_F", ordering_property),
        ("stationarity identity", stationarity_identity),
        ("calculus consistency", calculus_consistency),
        ("discrete nonexistence", discrete_nonexistence),
        ("discrete multiplicity", discrete_multiplicity),
        ("sweep phase picture", sweep_phase_picture),
        ("scaling equivariance", scaling_equivariance),
        ("perturbation stability", perturbation_stability),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  criterion {}: {name} — {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL  criterion {}: {name} — {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
