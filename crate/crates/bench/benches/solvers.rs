//! Solver throughput on small fixed instances.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imopt::ot::{proximal_sinkhorn, sinkhorn, ProxSinkhornConfig, TransportPlan};
use imopt::zoo::{make_vi_operator_model, MatrixGameOperator, OperatorConstants};
use imopt::{fgm_solve, gm_solve, mirror_prox_solve, FeasibleSet, FgmConfig, GmConfig, MpParams, ProxSetup};
use imopt_cli::problems::{planted_quadratic, random_game, random_ot};

fn min_methods(c: &mut Criterion) {
    let eu = ProxSetup::euclidean();
    let mut group = c.benchmark_group("quadratic");
    for n in [10, 50] {
        let p = planted_quadratic(n, 0.1, 10.0, 3);
        group.bench_with_input(BenchmarkId::new("gm", n), &p, |b, p| {
            let cfg = GmConfig::new(p.l, 200);
            b.iter(|| gm_solve(p.model.as_ref(), &eu, &p.set, black_box(&p.x0), p.r2(), &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fgm", n), &p, |b, p| {
            let cfg = FgmConfig::new(p.l, 200);
            b.iter(|| fgm_solve(p.model.as_ref(), &eu, &p.set, black_box(&p.x0), p.r2(), &cfg).unwrap())
        });
    }
    group.finish();
}

fn matrix_game(c: &mut Criterion) {
    let entropy = ProxSetup::entropy();
    let mut group = c.benchmark_group("matrix_game");
    for n in [5, 20] {
        let a = random_game(n, n, 8);
        let l = a.max_abs();
        let model =
            make_vi_operator_model(Arc::new(MatrixGameOperator { a }), OperatorConstants::Lipschitz(l), None)
                .unwrap();
        let set = FeasibleSet::ProductOfSimplices(n, n);
        let z0 = entropy.prox_center(&set).unwrap();
        let params = MpParams {
            eps: 1e-3,
            delta: 0.0,
            l0: l,
            max_iter: 10_000,
            delta_tilde: 0.0,
            v_max: entropy.max_divergence(&set, &z0).unwrap(),
        };
        group.bench_function(BenchmarkId::new("mirror_prox", n), |b| {
            b.iter(|| mirror_prox_solve(&model, &entropy, &set, black_box(&params)).unwrap())
        });
    }
    group.finish();
}

fn transport(c: &mut Criterion) {
    let mut group = c.benchmark_group("transport");
    group.sample_size(20);
    for n in [10, 30] {
        let inst = random_ot(n, 1000, 5).unwrap();
        let prior = TransportPlan::outer(&inst.l, &inst.w);
        group.bench_function(BenchmarkId::new("sinkhorn", n), |b| {
            b.iter(|| sinkhorn(&inst, black_box(0.05), &prior, 1e-8, 100_000).unwrap())
        });
        let cfg = ProxSinkhornConfig::default();
        group.bench_function(BenchmarkId::new("proximal_sinkhorn", n), |b| {
            b.iter(|| proximal_sinkhorn(&inst, black_box(0.5), 1e-2, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, min_methods, matrix_game, transport);
criterion_main!(benches);
