use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use risd2d_bench::Fixture;
use risd2d_core::ee_optimizer::{dinkelbach, static_power};
use risd2d_core::harness::realization;
use risd2d_core::se_optimizer::{fp_step, sca_step};
use risd2d_core::{maximize_ee, maximize_se, FeasibleSet};

fn reflection_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("reflection_step");
    for m in [50, 200, 500] {
        let f = Fixture::new(m);
        group.bench_with_input(BenchmarkId::from_parameter(m), &f, |b, f| {
            b.iter(|| fp_step(&f.model, black_box(&f.alloc), f.cfg.solver.barrier_tol, true).unwrap())
        });
    }
    group.finish();
}

fn power_steps(c: &mut Criterion) {
    let f = Fixture::new(200);
    let tol = f.cfg.solver.barrier_tol;
    c.bench_function("sca_step", |b| b.iter(|| sca_step(&f.model, black_box(&f.alloc), tol).unwrap()));
    let ps = static_power(&f.cfg, f.cfg.bits).unwrap();
    let s = &f.cfg.solver;
    c.bench_function("dinkelbach", |b| {
        b.iter(|| dinkelbach(&f.model, black_box(&f.alloc), ps, tol, s.delta, s.max_dinkelbach_iterations).unwrap())
    });
}

fn full_runs(c: &mut Criterion) {
    let f = Fixture::new(200);
    let mut group = c.benchmark_group("alternating");
    group.sample_size(10);
    group.bench_function("maximize_se/200", |b| b.iter(|| maximize_se(black_box(&f.ch), &f.cfg, FeasibleSet::F1).unwrap()));
    group.bench_function("maximize_ee/200", |b| b.iter(|| maximize_ee(black_box(&f.ch), &f.cfg, FeasibleSet::F3(3)).unwrap()));
    group.finish();
}

fn channel_draw(c: &mut Criterion) {
    let f = Fixture::new(200);
    c.bench_function("draw_realization/200", |b| b.iter(|| realization(&f.cfg, black_box(7)).unwrap()));
}

criterion_group!(benches, reflection_step, power_steps, full_runs, channel_draw);
criterion_main!(benches);
