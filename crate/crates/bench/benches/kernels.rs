use criterion::{black_box, criterion_group, criterion_main, Criterion};

use quadtherm_core::dynamics::period3_orbits;
use quadtherm_core::induced::enumerate_return_branches;
use quadtherm_core::pressure::tree_pressure;
use quadtherm_core::search::{find_parameter, SearchOptions};
use quadtherm_core::{Parameter, TreeMode};

fn pressure(c: &mut Criterion) {
    let mut g = c.benchmark_group("tree_pressure");
    g.sample_size(10);
    for m in [12, 16] {
        g.bench_function(format!("complex_m{m}"), |b| {
            b.iter(|| tree_pressure(black_box(-2.0), 1.0, m, TreeMode::Complex).unwrap())
        });
    }
    g.bench_function("real_m18", |b| b.iter(|| tree_pressure(black_box(-1.99), 2.0, 18, TreeMode::Real).unwrap()));
    g.finish();
}

fn search(c: &mut Criterion) {
    let mut g = c.benchmark_group("find_parameter");
    g.sample_size(10);
    let prefix = "1111".parse().unwrap();
    g.bench_function("n8_prefix1111", |b| {
        b.iter(|| find_parameter(8, black_box(&prefix), 1e-10, &SearchOptions::default()).unwrap())
    });
    g.finish();
}

fn branches(c: &mut Criterion) {
    let cm2 = Parameter::from_f64(-2.0, 106).unwrap();
    let mut g = c.benchmark_group("enumerate_return_branches");
    g.sample_size(10);
    for m in [14, 18] {
        g.bench_function(format!("chebyshev_m{m}"), |b| b.iter(|| enumerate_return_branches(black_box(&cm2), 2, m).unwrap()));
    }
    g.finish();
}

fn cycles(c: &mut Criterion) {
    let cm2 = Parameter::from_f64(-2.0, 106).unwrap();
    c.bench_function("period3_orbits", |b| b.iter(|| period3_orbits(black_box(&cm2)).unwrap()));
}

criterion_group!(benches, pressure, search, branches, cycles);
criterion_main!(benches);
