use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use starkecho::analysis::{fit_decay, DecayModel};
use starkecho::analytic;
use starkecho::ensemble::{self, SimulationSettings};
use starkecho::pathways::enumerate_pathways;
use starkecho::reproduce::synthetic_decay_curve;
use starkecho::scenario::bundled;

fn pathways(c: &mut Criterion) {
    let s = bundled("backward").unwrap();
    let seq = s.sequence().unwrap();
    c.bench_function("enumerate_pathways/backward", |b| {
        b.iter(|| enumerate_pathways(black_box(&seq), &s.scheme, &s.material))
    });
}

fn oracle(c: &mut Criterion) {
    let s = bundled("forward").unwrap();
    let seq = s.sequence().unwrap();
    let settings = SimulationSettings {
        n_ions: 1000,
        grid_us: Some((31.0, 33.0)),
        ..s.simulation.clone()
    };
    let mut g = c.benchmark_group("oracle");
    g.sample_size(20);
    g.bench_function("forward/n=1000", |b| {
        b.iter(|| ensemble::simulate(black_box(&seq), &s.scheme, &s.material, &settings).unwrap())
    });
    g.finish();
}

fn analytic_models(c: &mut Criterion) {
    c.bench_function("optimize_cavity/d=0.1", |b| {
        b.iter(|| analytic::optimize_cavity(black_box(0.1), 0.999).unwrap())
    });
    c.bench_function("find_decay_split", |b| {
        b.iter(|| analytic::find_decay_split(17.4, 21.9, 11.0, black_box(0.222), 29.0).unwrap())
    });
}

fn fitting(c: &mut Criterion) {
    let curve = synthetic_decay_curve(3, 21.9, 11.0);
    c.bench_function("fit_decay/eq5-excited", |b| {
        b.iter(|| fit_decay(black_box(&curve), DecayModel::Excited).unwrap())
    });
}

criterion_group!(benches, pathways, oracle, analytic_models, fitting);
criterion_main!(benches);
