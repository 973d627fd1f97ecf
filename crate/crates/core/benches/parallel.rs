use std::hint::black_box;

use bdry_geom::functionals::{evaluate, ExecutionTag};
use bdry_geom::models;
use bdry_geom::par::Execution;
use bdry_geom::quadrature::QuadratureRule;
use bdry_geom::report::{run_suites, Suite, SuiteConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn functional_sweep(c: &mut Criterion) {
    let patch = models::warped_default(false).unwrap();
    let rule = QuadratureRule::new(&patch.chart, 8).unwrap();
    let mut group = c.benchmark_group("functional_sweep_8^4");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(name, |b| b.iter(|| black_box(evaluate(&patch, &rule, exec).unwrap())));
    }
    group.finish();
}

fn curvature_suite(c: &mut Criterion) {
    let patch = models::perturbed_flat(0.05, 7, models::Perturbation::Generic).unwrap();
    let mut group = c.benchmark_group("curvature_symmetries_suite");
    group.sample_size(10);
    for (name, exec) in [("sequential", ExecutionTag::Sequential), ("parallel", ExecutionTag::Parallel)] {
        let cfg = SuiteConfig {
            suites: vec![Suite::CurvatureSymmetries],
            exec,
            ..Default::default()
        };
        group.bench_function(name, |b| b.iter(|| black_box(run_suites(&patch, &cfg).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, functional_sweep, curvature_suite);
criterion_main!(benches);
