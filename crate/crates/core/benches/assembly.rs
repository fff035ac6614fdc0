//! Parallel versus sequential element loops and line-search trials.
//!
//! The "parallel" variants run on the global rayon pool; the "sequential"
//! variants run the same code inside a one-thread pool. Building with
//! `--no-default-features` replaces both with the plain-iterator fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use topopt::levelset::{HeavisideKernel, ScalarField};
use topopt::optimizer::line_search;
use topopt::presets;
use topopt::sensitivity::compute_d;
use topopt::state::{solve_state, Problem};

fn setup(nx: usize, ny: usize) -> (Problem, ScalarField, HeavisideKernel) {
    let preset = presets::cantilever();
    let problem = preset.problem(nx, ny).expect("aligned mesh");
    let g = preset.initial_g(problem.space.mesh());
    (problem, g, preset.state_kernel())
}

#[cfg(feature = "parallel")]
fn modes() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    vec![("parallel", None), ("sequential", Some(single))]
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(&'static str, Option<()>)> {
    vec![("sequential", None)]
}

#[cfg(feature = "parallel")]
fn within<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn within<R: Send>(_: &Option<()>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

fn assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("stiffness_assembly");
    for (nx, ny) in [(60, 30), (120, 60)] {
        let (problem, g, kernel) = setup(nx, ny);
        let coeff = g.apply(&kernel);
        for (name, pool) in modes() {
            group.bench_with_input(BenchmarkId::new(name, format!("{nx}x{ny}")), &coeff, |b, coeff| {
                b.iter(|| within(&pool, || problem.space.assemble_system(&problem.material, black_box(coeff)).unwrap()))
            });
        }
    }
    group.finish();
}

fn sensitivity(c: &mut Criterion) {
    let mut group = c.benchmark_group("sensitivity");
    let (problem, g, kernel) = setup(120, 60);
    let state = solve_state(&problem, &g, &kernel).unwrap();
    for (name, pool) in modes() {
        group.bench_function(name, |b| b.iter(|| within(&pool, || compute_d(&problem, black_box(&state)))));
    }
    group.finish();
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("line_search");
    group.sample_size(10);
    let (problem, g, kernel) = setup(60, 30);
    let w = ScalarField::constant(problem.space.mesh(), -0.05);
    for (name, pool) in modes() {
        group.bench_function(name, |b| {
            b.iter(|| {
                within(&pool, || {
                    line_search(0.6, 4, |lambda| {
                        solve_state(&problem, &g.add_scaled(lambda, &w), &kernel).map(|s| (s.cost, ()))
                    })
                    .trials
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, sensitivity, trials);
criterion_main!(benches);
