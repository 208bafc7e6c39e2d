use std::fs;
use std::path::{Path, PathBuf};

use neumann_core::discretization::DiscreteSystem;
use neumann_core::error::LabError;
use neumann_core::nonlinearity::{check_hypotheses, HypothesisReport, Nonlinearity, Verdict};
use neumann_core::solvers::{
    deflated_search, nonexistence_certificate, perturbation_stability, standard_starts, sweep,
    CertificateVerdict, PerturbationReport, SolutionSummary, SweepReport,
};
use neumann_core::thresholds::{compute_thresholds, ThresholdReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::statefile;

/// Where human-readable output goes; `--quiet` silences it.
pub struct Reporter {
    pub quiet: bool,
}

impl Reporter {
    pub fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn lab_error(e: LabError) -> CliError {
    match e {
        LabError::Search(msg) => CliError::Search(msg),
        other => CliError::Config(other.to_string()),
    }
}

fn hypothesis_report(cfg: &RunConfig, nl: &Nonlinearity) -> Result<HypothesisReport, CliError> {
    check_hypotheses(
        nl,
        &cfg.hypothesis_radii(),
        cfg.hypotheses.angles,
        cfg.hypotheses.tol,
    )
    .map_err(|e| CliError::config("hypotheses", e))
}

fn fail_reasons(report: &HypothesisReport) -> String {
    match &report.verdict {
        Verdict::Pass => String::new(),
        Verdict::Fail(reasons) => reasons.join("; "),
    }
}

/// `s_F`, `S_F` for the configured nonlinearity and coefficients.
pub fn thresholds(cfg: &RunConfig) -> Result<ThresholdReport, CliError> {
    if cfg.precheck_hypotheses {
        let report = hypothesis_report(cfg, &cfg.nonlinearity)?;
        if !report.passed() {
            return Err(CliError::Hypothesis(fail_reasons(&report)));
        }
    }
    compute_thresholds(&cfg.nonlinearity, &cfg.coeffs.norms(), &cfg.search).map_err(lab_error)
}

fn system(cfg: &RunConfig, lambda: f64) -> Result<DiscreteSystem, CliError> {
    DiscreteSystem::new(cfg.coeffs.clone(), cfg.nonlinearity.clone(), lambda)
        .map_err(|e| CliError::config("lambda", e))
}

#[derive(Serialize)]
struct ThresholdOutput<'a> {
    nonlinearity: &'a str,
    #[serde(flatten)]
    report: &'a ThresholdReport,
    lambda_lower: f64,
    lambda_upper: f64,
}

pub fn cmd_thresholds(cfg: &RunConfig, out: &Reporter) -> Result<ThresholdReport, CliError> {
    let th = thresholds(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    write_json(
        &cfg.out_dir.join("thresholds.json"),
        &ThresholdOutput {
            nonlinearity: cfg.nonlinearity.name(),
            report: &th,
            lambda_lower: th.lambda_lower(),
            lambda_upper: th.lambda_upper(),
        },
    )?;
    out.say(format!("nonlinearity          {}", cfg.nonlinearity.name()));
    out.say(format!(
        "s_F                   {:.10}   at (s, t) = ({:.8}, {:.8})",
        th.s_f, th.argmax_s_f.s, th.argmax_s_f.t
    ));
    for p in th.maximizers_s_f.iter().skip(1) {
        out.say(format!(
            "                      also at (s, t) = ({:.8}, {:.8})",
            p.s, p.t
        ));
    }
    out.say(format!(
        "S_F                   {:.10}   at (s, t) = ({:.8}, {:.8})",
        th.big_s_f, th.argmax_big_s_f.s, th.argmax_big_s_f.t
    ));
    out.say(format!(
        "stationarity residual {:.3e}",
        th.stationarity_residual
    ));
    out.say(format!(
        "only trivial solution for λ < 1/S_F = {:.10}",
        th.lambda_lower()
    ));
    out.say(format!(
        "two nontrivial solutions for λ > 1/s_F = {:.10}",
        th.lambda_upper()
    ));
    Ok(th)
}

pub fn cmd_check_hypotheses(cfg: &RunConfig, out: &Reporter) -> Result<HypothesisReport, CliError> {
    let report = hypothesis_report(cfg, &cfg.nonlinearity)?;
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("hypotheses.json"), &report)?;
    out.say(format!("nonlinearity  {}", cfg.nonlinearity.name()));
    out.say(format!(
        "sign          {}",
        if report.f_plus_ok { "ok" } else { "violated" }
    ));
    out.say(format!("M estimate    {:.6e}", report.m_estimate));
    if let (Some(first), Some(last)) = (report.f0_profile.first(), report.f_inf_profile.last()) {
        out.say(format!("ratio at r={:.1e}: {:.3e}", first.0, first.1));
        out.say(format!("ratio at r={:.1e}: {:.3e}", last.0, last.1));
    }
    if report.passed() {
        out.say("verdict       pass");
        Ok(report)
    } else {
        let reasons = fail_reasons(&report);
        out.say(format!("verdict       fail: {reasons}"));
        Err(CliError::Hypothesis(reasons))
    }
}

#[derive(Debug, Serialize)]
pub struct SolutionRecord {
    pub index: usize,
    #[serde(flatten)]
    pub summary: SolutionSummary,
    pub tolerance: f64,
    pub state_file: String,
}

#[derive(Debug, Serialize)]
pub struct CertificateSummary {
    pub evaluated: usize,
    pub certified: usize,
    pub inconclusive: usize,
    pub violated: usize,
    /// Nontrivial converged solutions that the certificate claims cannot
    /// exist; any such case is a failure.
    pub contradictions: usize,
    pub max_ratio_over_bound: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub lambda: f64,
    #[serde(rename = "lambda_times_s_F")]
    pub lambda_times_s_f: f64,
    #[serde(rename = "lambda_times_S_F")]
    pub lambda_times_big_s_f: f64,
    pub n_nontrivial: usize,
    pub rounds: usize,
    pub attempts: usize,
    pub unconverged_attempts: usize,
    pub solutions: Vec<SolutionRecord>,
    pub certificate: Option<CertificateSummary>,
}

pub fn cmd_solve(cfg: &RunConfig, out: &Reporter) -> Result<SolveOutput, CliError> {
    let th = thresholds(cfg)?;
    let lambda = cfg.single_lambda(&th)?;
    let sys = system(cfg, lambda)?;
    let outcome = deflated_search(&sys, th.argmax_s_f, &cfg.solver).map_err(lab_error)?;

    let states_dir = cfg.out_dir.join("states");
    ensure_dir(&states_dir)?;
    let mut records = Vec::new();
    for (i, sol) in outcome.solutions.iter().enumerate() {
        let name = format!("solution_{i:03}.txt");
        statefile::write(&states_dir.join(&name), &cfg.grid, lambda, sol)?;
        records.push(SolutionRecord {
            index: i,
            summary: SolutionSummary::from(sol),
            tolerance: sol.tolerance,
            state_file: format!("states/{name}"),
        });
    }

    let certificate = if cfg.certify {
        let mut probes: Vec<(bool, _)> = outcome
            .nontrivial()
            .map(|s| (true, s.state.clone()))
            .collect();
        probes.extend(
            standard_starts(
                &cfg.grid,
                th.argmax_s_f,
                cfg.solver.n_starts,
                cfg.solver.rng_seed,
            )
            .into_iter()
            .map(|s| (false, s)),
        );
        let mut summary = CertificateSummary {
            evaluated: 0,
            certified: 0,
            inconclusive: 0,
            violated: 0,
            contradictions: 0,
            max_ratio_over_bound: 0.0,
            passed: true,
        };
        for (is_found, state) in &probes {
            let rep = nonexistence_certificate(&sys, state, th.big_s_f, &cfg.solver)
                .map_err(lab_error)?;
            summary.evaluated += 1;
            if rep.rhs > 0.0 {
                summary.max_ratio_over_bound = summary.max_ratio_over_bound.max(rep.mid / rep.rhs);
            }
            match rep.verdict {
                CertificateVerdict::NonexistenceCertified => {
                    summary.certified += 1;
                    if *is_found && rep.is_solution {
                        summary.contradictions += 1;
                    }
                }
                CertificateVerdict::Inconclusive => summary.inconclusive += 1,
                CertificateVerdict::Violated => summary.violated += 1,
            }
        }
        summary.passed = summary.violated == 0 && summary.contradictions == 0;
        Some(summary)
    } else {
        None
    };

    let output = SolveOutput {
        lambda,
        lambda_times_s_f: lambda * th.s_f,
        lambda_times_big_s_f: lambda * th.big_s_f,
        n_nontrivial: outcome.nontrivial_count(),
        rounds: outcome.rounds,
        attempts: outcome.attempts,
        unconverged_attempts: outcome.unconverged,
        solutions: records,
        certificate,
    };
    write_solutions_csv(
        &cfg.out_dir.join("solutions.csv"),
        lambda,
        &output.solutions,
    )?;
    write_json(&cfg.out_dir.join("solve.json"), &output)?;

    out.say(format!(
        "λ = {lambda:.10}   λ·s_F = {:.6}   λ·S_F = {:.6}",
        output.lambda_times_s_f, output.lambda_times_big_s_f
    ));
    out.say(format!(
        "{} solution(s), {} nontrivial",
        output.solutions.len(),
        output.n_nontrivial
    ));
    for r in &output.solutions {
        out.say(format!(
            "  [{:>3}] {:<30} energy {:>+.10e}  residual {:.2e}  {}",
            r.index,
            r.summary.classification.as_str(),
            r.summary.energy,
            r.summary.residual_norm,
            r.state_file
        ));
    }
    if let Some(c) = &output.certificate {
        out.say(format!(
            "certificate: {} evaluated, {} nonexistence-certified, {} inconclusive, {} violated, {} contradictions",
            c.evaluated, c.certified, c.inconclusive, c.violated, c.contradictions
        ));
        if !c.passed {
            return Err(CliError::Certificate(format!(
                "{} violated, {} contradictions",
                c.violated, c.contradictions
            )));
        }
    }
    Ok(output)
}

/// Shortest round-trip representation; scientific notation outside
/// `[1e-4, 1e6)` so tiny residuals stay readable.
pub fn csv_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e6).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn write_solutions_csv(
    path: &Path,
    lambda: f64,
    records: &[SolutionRecord],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let row_err = |e: csv::Error| CliError::io(path, e);
    w.write_record([
        "lambda",
        "index",
        "classification",
        "energy",
        "residual_norm",
        "tolerance",
        "iterations",
        "state_file",
    ])
    .map_err(row_err)?;
    for r in records {
        w.write_record([
            csv_num(lambda),
            r.index.to_string(),
            r.summary.classification.as_str().to_string(),
            csv_num(r.summary.energy),
            csv_num(r.summary.residual_norm),
            csv_num(r.tolerance),
            r.summary.iterations.to_string(),
            r.state_file.clone(),
        ])
        .map_err(row_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Column order of `sweep.csv`.
pub const SWEEP_COLUMNS: [&str; 7] = [
    "lambda",
    "lambda_times_sF",
    "lambda_times_SF",
    "n_nontrivial",
    "min_energy",
    "max_residual",
    "status",
];

pub fn sweep_csv(report: &SweepReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(format!("sweep csv: {e}"));
    w.write_record(SWEEP_COLUMNS).map_err(err)?;
    for row in &report.rows {
        w.write_record([
            csv_num(row.lambda),
            csv_num(row.lambda_times_s_f),
            csv_num(row.lambda_times_big_s_f),
            row.n_nontrivial.to_string(),
            csv_num(row.min_energy),
            csv_num(row.max_residual),
            row.status.clone(),
        ])
        .map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Io(format!("sweep csv: {e}")))
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Reporter) -> Result<SweepReport, CliError> {
    let th = thresholds(cfg)?;
    let lambdas = cfg.lambdas(&th)?;
    let base = system(cfg, 0.0)?;
    let report = sweep(&base, &lambdas, &th, &cfg.solver).map_err(lab_error)?;
    ensure_dir(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("sweep.csv");
    fs::write(&csv_path, sweep_csv(&report)?).map_err(|e| CliError::io(&csv_path, e))?;
    write_json(&cfg.out_dir.join("sweep.json"), &report)?;

    if !report.duplicates_removed.is_empty() {
        log::warn!(
            "removed {} repeated λ value(s): {:?}",
            report.duplicates_removed.len(),
            report.duplicates_removed
        );
    }
    out.say(format!(
        "1/S_F = {:.8}   1/s_F = {:.8}",
        report.lambda_lower, report.lambda_upper
    ));
    out.say(format!(
        "{:>14} {:>10} {:>10} {:>6} {:>16} {:>10}  status",
        "lambda", "λ·s_F", "λ·S_F", "n", "min_energy", "residual"
    ));
    for row in &report.rows {
        out.say(format!(
            "{:>14.8} {:>10.5} {:>10.5} {:>6} {:>16.8e} {:>10.2e}  {}",
            row.lambda,
            row.lambda_times_s_f,
            row.lambda_times_big_s_f,
            row.n_nontrivial,
            row.min_energy,
            row.max_residual,
            row.status
        ));
    }
    let failed = report.rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        return Err(CliError::Search(format!("{failed} sweep row(s) failed")));
    }
    Ok(report)
}

pub fn cmd_perturb(cfg: &RunConfig, out: &Reporter) -> Result<PerturbationReport, CliError> {
    let Some(section) = &cfg.perturbation else {
        return Err(CliError::config("perturbation", "section is missing"));
    };
    let g = Nonlinearity::resolve(&section.g).map_err(|e| CliError::config("perturbation.g", e))?;
    let th = thresholds(cfg)?;
    let lambda = cfg.single_lambda(&th)?;
    let mus = cfg.mus(&th, lambda)?;
    let d = cfg
        .d
        .clone()
        .unwrap_or_else(|| vec![1.0; cfg.grid.node_count()]);
    let sys = system(cfg, lambda)?;
    let report =
        perturbation_stability(&sys, &g, d, &mus, section.growth_exponent, &th, &cfg.solver)
            .map_err(|e| CliError::config("perturbation", e))?;

    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("perturb.json"), &report)?;
    let path = cfg.out_dir.join("perturb.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
    let row_err = |e: csv::Error| CliError::io(&path, e);
    w.write_record([
        "mu",
        "n_nontrivial",
        "base_nontrivial",
        "preserved",
        "max_drift",
    ])
    .map_err(row_err)?;
    for row in &report.rows {
        w.write_record([
            csv_num(row.mu),
            row.n_nontrivial.to_string(),
            report.base_nontrivial.to_string(),
            row.preserved.to_string(),
            csv_num(row.max_drift),
        ])
        .map_err(row_err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    out.say(format!(
        "λ = {:.10}   G = {}   unperturbed nontrivial solutions: {}",
        report.lambda,
        g.name(),
        report.base_nontrivial
    ));
    for row in &report.rows {
        out.say(format!(
            "  μ = {:<14.6e} nontrivial {:>3}  preserved {:<5}  max drift {:.3e}",
            row.mu, row.n_nontrivial, row.preserved, row.max_drift
        ));
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
pub struct VerifyLine {
    pub file: PathBuf,
    pub recorded_residual: f64,
    pub residual: f64,
    pub ok: bool,
}

/// Re-evaluates the gradient at each state file. Without explicit files,
/// verifies every state listed in `<out>/solutions.csv`.
pub fn cmd_verify(
    cfg: &RunConfig,
    files: &[PathBuf],
    out: &Reporter,
) -> Result<Vec<VerifyLine>, CliError> {
    let files: Vec<PathBuf> = if files.is_empty() {
        let listing = cfg.out_dir.join("solutions.csv");
        let mut r = csv::Reader::from_path(&listing).map_err(|e| CliError::io(&listing, e))?;
        let headers = r.headers().map_err(|e| CliError::io(&listing, e))?.clone();
        let col = headers
            .iter()
            .position(|h| h == "state_file")
            .ok_or_else(|| {
                CliError::Config(format!("{}: no state_file column", listing.display()))
            })?;
        let mut files = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::io(&listing, e))?;
            files.push(cfg.out_dir.join(&rec[col]));
        }
        files
    } else {
        files.to_vec()
    };
    if files.is_empty() {
        return Err(CliError::Config("no state files to verify".into()));
    }
    let mut lines = Vec::new();
    for file in files {
        let sf = statefile::read(&file)?;
        let grid = &cfg.grid;
        let same_grid = sf.dim == grid.dim()
            && sf.counts == grid.counts()
            && sf.lengths.iter().zip(grid.lengths()).all(|(a, b)| a == b);
        if !same_grid {
            return Err(CliError::Config(format!(
                "{}: grid does not match the configuration",
                file.display()
            )));
        }
        let sys = system(cfg, sf.lambda)?;
        let residual = sys.energy_gradient(&sf.state).map_err(lab_error)?.norm();
        let ok = residual <= sf.residual + 1e-12;
        out.say(format!(
            "{} {}  residual {:.3e} (recorded {:.3e})",
            if ok { "ok  " } else { "FAIL" },
            file.display(),
            residual,
            sf.residual
        ));
        lines.push(VerifyLine {
            file,
            recorded_residual: sf.residual,
            residual,
            ok,
        });
    }
    let failed = lines.iter().filter(|l| !l.ok).count();
    if failed > 0 {
        return Err(CliError::Certificate(format!(
            "{failed} state file(s) failed verification"
        )));
    }
    Ok(lines)
}
