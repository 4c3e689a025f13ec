use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use taut_bench::{brownian, pinned_problem, SEED, WIDTH};
use taut_core::extrema::{crossing_skeleton, decompose};
use taut_core::oracle::{qp_oracle, random_instance};
use taut_core::pathkit::{generate_brownian, replicate_rng};
use taut_core::renewal::sample_renewal;
use taut_core::tautstring::solve_values;
use taut_core::PenaltySpec;

fn generate(c: &mut Criterion) {
    let mut g = c.benchmark_group("generate");
    for horizon in [10.0, 100.0] {
        g.throughput(Throughput::Elements((horizon * 1e3) as u64));
        g.bench_with_input(BenchmarkId::from_parameter(horizon), &horizon, |b, &t| {
            b.iter(|| generate_brownian(black_box(t), 1e-3, SEED).unwrap())
        });
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for horizon in [10.0, 100.0, 1000.0] {
        let problem = pinned_problem(horizon);
        g.throughput(Throughput::Elements(problem.path.len() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(horizon), &problem, |b, p| {
            b.iter(|| solve_values(black_box(p)))
        });
    }
    g.finish();
}

fn extrema(c: &mut Criterion) {
    let path = brownian(100.0);
    c.bench_function("decompose/100", |b| b.iter(|| decompose(black_box(&path), WIDTH).unwrap()));
    c.bench_function("skeleton/100", |b| b.iter(|| crossing_skeleton(black_box(&path), WIDTH).unwrap()));
}

fn oracle(c: &mut Criterion) {
    let problem = random_instance(&mut replicate_rng(SEED, 0), 64).unwrap();
    c.bench_function("oracle/quadratic", |b| {
        b.iter(|| qp_oracle(black_box(&problem), &PenaltySpec::Quadratic, 1e-12).unwrap())
    });
}

fn renewal(c: &mut Criterion) {
    let mut g = c.benchmark_group("renewal");
    g.sample_size(10);
    g.bench_function("sample_renewal/200", |b| {
        b.iter(|| sample_renewal(WIDTH, &[PenaltySpec::Quadratic], 200, 1e-3, SEED).unwrap())
    });
    g.finish();
}

criterion_group!(benches, generate, solve, extrema, oracle, renewal);
criterion_main!(benches);
