use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use damopt_bench::forward;
use damopt_core::benchmarks::optimize_case;
use damopt_core::{
    case_one, case_two, project_reference, solve_adjoint, ControlProblem, Level, MassMode,
    OptimizerConfig, SolverConfig, StateOperators, Stepper,
};

fn forward_solve(c: &mut Criterion) {
    let case = case_two();
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("forward");
    g.sample_size(10);
    for k in [32usize, 64, 128] {
        g.bench_with_input(BenchmarkId::new("case2", k), &k, |b, &k| {
            b.iter(|| forward(&case, Level::new(k, k), &cfg))
        });
    }
    g.finish();
}

fn steppers(c: &mut Criterion) {
    let case = case_one();
    let level = Level::new(512, 64);
    let fixed = SolverConfig { mass_mode: MassMode::Lumped, ..SolverConfig::default() };
    let closed = SolverConfig { stepper: Stepper::ClosedForm, ..fixed };
    let mut g = c.benchmark_group("lumped_stepper");
    g.sample_size(10);
    g.bench_function("fixed_point", |b| b.iter(|| forward(&case, level, &fixed)));
    g.bench_function("closed_form", |b| b.iter(|| forward(&case, level, &closed)));
    g.finish();
}

fn adjoint(c: &mut Criterion) {
    let case = case_two();
    let cfg = SolverConfig::default();
    let (mesh, fwd) = forward(&case, Level::new(64, 64), &cfg);
    let ops = StateOperators::new(&case.params, &mesh.space, &cfg.quad).unwrap();
    let mut g = c.benchmark_group("adjoint");
    g.sample_size(10);
    g.bench_function("case2_64x64", |b| {
        b.iter(|| solve_adjoint(&ops, black_box(&fwd), &case, &mesh, &cfg).unwrap())
    });

    let opt = OptimizerConfig::default();
    let l_ref = project_reference(|t, x| case.l(t, x), &mesh);
    let problem = ControlProblem::new(&case.params, mesh.clone(), &case, &|_| 0.0, l_ref.clone(), case.norm_variant, &cfg, &opt).unwrap();
    g.bench_function("objective_and_gradient", |b| b.iter(|| problem.evaluate(black_box(&l_ref)).unwrap()));
    g.finish();
}

fn descent(c: &mut Criterion) {
    let case = case_two();
    let mut g = c.benchmark_group("descent");
    g.sample_size(10);
    g.bench_function("case2_32x8", |b| {
        b.iter(|| optimize_case(&case, Level::new(32, 8), &SolverConfig::default(), &OptimizerConfig::default(), None).unwrap())
    });
    g.finish();
}

criterion_group!(benches, forward_solve, steppers, adjoint, descent);
criterion_main!(benches);
