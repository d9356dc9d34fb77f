use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graphdr::harness::random_start;
use graphdr::{
    generate_problem, graph_dr_step, pierra_angle, run, Algorithm, DimMode, IterationState, LimitOracle, Problem,
    RunConfig, SplittingOperator,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(p: usize, n: usize) -> (Problem, DMatrix<f64>) {
    let rng = &mut ChaCha8Rng::seed_from_u64(17);
    let problem = generate_problem(p, n, DimMode::default_for(p), rng).unwrap();
    let v0 = random_start(p, n, rng);
    (problem, v0)
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    for n in [3, 6, 12] {
        let (problem, v0) = instance(50, n);
        for alg in [Algorithm::Sequential, Algorithm::Complete, Algorithm::MalitskyTam] {
            let op = SplittingOperator::named(alg, n).unwrap();
            let state = IterationState::new(v0.clone());
            group.bench_with_input(BenchmarkId::new(alg.name(), n), &state, |b, s| {
                b.iter(|| graph_dr_step(&problem, &op, 1.0, black_box(s)).unwrap())
            });
        }
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    for n in [3, 6] {
        let (problem, v0) = instance(50, n);
        let op = SplittingOperator::named(Algorithm::Complete, n).unwrap();
        let v_star = LimitOracle::new(&problem, &op).unwrap().limits(&v0).unwrap().v_star;
        let config = RunConfig::new(1.0).unwrap();
        group.bench_function(BenchmarkId::new("complete", n), |b| {
            b.iter(|| run(&problem, &op, &config, black_box(&v0), &v_star).unwrap().iterations)
        });
    }
    group.finish();
}

fn precompute(c: &mut Criterion) {
    let mut group = c.benchmark_group("precompute");
    group.sample_size(20);
    for n in [3, 6, 12] {
        let (problem, _) = instance(50, n);
        let op = SplittingOperator::named(Algorithm::GeneralizedRyu, n).unwrap();
        group.bench_function(BenchmarkId::new("limit_oracle", n), |b| {
            b.iter(|| LimitOracle::new(black_box(&problem), &op).unwrap())
        });
        group.bench_function(BenchmarkId::new("pierra_angle", n), |b| {
            b.iter(|| pierra_angle(black_box(&problem)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, solve, precompute);
criterion_main!(benches);
