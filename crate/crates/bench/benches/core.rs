use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mlz_core::catalog::{analytic_probabilities, make_model, Params};
use mlz_core::*;

fn ten_state() -> Params {
    Params::parse(&["N=5,NF=2,x=2.5,beta=1,g1=0.44,g2=0.36,g3=0.28,g4=0.34,e1=2.5,e2=1.3,e3=-0.6,e4=-2.7"]).unwrap()
}

fn integrability(c: &mut Criterion) {
    let ten = make_model("fermionic", &ten_state()).unwrap();
    let b6 = make_model("bosonic6", &Params::new()).unwrap();
    c.bench_function("level graph, ten-state", |b| b.iter(|| build_level_graph(black_box(&ten))));
    c.bench_function("zero-area check, ten-state", |b| b.iter(|| check_ic1(black_box(&ten))));
    c.bench_function("exact-crossing check, bosonic6", |b| b.iter(|| check_ic2(black_box(&b6), &[1.0, 0.5]).unwrap()));
}

fn solutions(c: &mut Criterion) {
    let ten = make_model("fermionic", &ten_state()).unwrap();
    c.bench_function("ansatz, ten-state", |b| b.iter(|| ansatz_probabilities(black_box(&ten)).unwrap()));
    let p = Params::parse(&["N=5,NF=2,x=-0.5,beta=1,g1=0.4,g2=0.35,g3=0.45,g4=0.3,e1=-0.75,e2=-0.25,e3=0.4,e4=1"]).unwrap();
    c.bench_function("determinant formula, ten-state", |b| b.iter(|| analytic_probabilities("fermionic", black_box(&p)).unwrap()));
    let spec = SecondQuantizedSpec::fermion(1.0, (0..7).map(|k| k as f64 - 3.0).collect(), vec![0.4; 7], 0.5);
    c.bench_function("fermion sector, 8 sites 4 particles", |b| b.iter(|| build_sector_model(black_box(&spec), 4).unwrap()));
}

fn propagation(c: &mut Criterion) {
    let do3 = make_model("do3", &Params::new()).unwrap();
    let cfg = IntegrationConfig { t_half: 100.0, dt: 2e-3, frame: Frame::Rotating };
    let mut group = c.benchmark_group("propagation");
    group.sample_size(10);
    group.bench_function("do3, 1e5 steps", |b| b.iter(|| transition_matrix_numeric(black_box(&do3), &cfg).unwrap()));
    let b6 = make_model("bosonic6", &Params::new()).unwrap();
    group.bench_function("bosonic6 one column, 1e5 steps", |b| b.iter(|| transition_columns(black_box(&b6), &cfg, &[0]).unwrap()));
    group.finish();
}

criterion_group!(benches, integrability, solutions, propagation);
criterion_main!(benches);
