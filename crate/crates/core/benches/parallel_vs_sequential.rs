//! Rayon-backed versus sequential execution of the three data-parallel
//! workloads: the threshold grid search, deflated search over many starts,
//! and a λ-sweep. Build with `--no-default-features` to measure the
//! sequential fallback alone.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use neumann_core::discretization::DiscreteSystem;
use neumann_core::domain::{CoefficientField, GridDomain};
use neumann_core::nonlinearity::Nonlinearity;
use neumann_core::solvers::{deflated_search, sweep, SolveConfig};
use neumann_core::thresholds::{compute_thresholds, SearchConfig, ThresholdReport};

const MODES: [(&str, bool); 2] = [("parallel", true), ("sequential", false)];

fn unit_system(n: usize) -> (DiscreteSystem, ThresholdReport) {
    let grid = Arc::new(GridDomain::rectangle(1.0, 1.0, n, n).unwrap());
    let coeffs = CoefficientField::constant(grid, 1.0, 1.0, 1.0).unwrap();
    let nl = Nonlinearity::catalog_log();
    let th = compute_thresholds(&nl, &coeffs.norms(), &SearchConfig::default()).unwrap();
    let sys = DiscreteSystem::new(coeffs, nl, 2.0 / th.s_f).unwrap();
    (sys, th)
}

fn thresholds(c: &mut Criterion) {
    let nl = Nonlinearity::catalog_log();
    let grid = Arc::new(GridDomain::rectangle(1.0, 1.0, 3, 3).unwrap());
    let nb = CoefficientField::constant(grid, 1.0, 1.0, 1.0)
        .unwrap()
        .norms();
    let mut group = c.benchmark_group("thresholds");
    for (name, parallel) in MODES {
        let cfg = SearchConfig {
            parallel,
            ..SearchConfig::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| compute_thresholds(black_box(&nl), &nb, &cfg).unwrap())
        });
    }
    group.finish();
}

fn deflation(c: &mut Criterion) {
    let mut group = c.benchmark_group("deflated_search");
    group.sample_size(10);
    for n in [9, 17] {
        let (sys, th) = unit_system(n);
        for (name, parallel) in MODES {
            let cfg = SolveConfig {
                parallel,
                ..SolveConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| deflated_search(black_box(&sys), th.argmax_s_f, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn lambda_sweep(c: &mut Criterion) {
    let (sys, th) = unit_system(9);
    let lambdas: Vec<f64> = (0..12).map(|k| 0.2 + 0.25 * k as f64).collect();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, parallel) in MODES {
        let cfg = SolveConfig {
            parallel,
            n_starts: 8,
            ..SolveConfig::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| sweep(black_box(&sys), &lambdas, &th, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, thresholds, deflation, lambda_sweep);
criterion_main!(benches);
