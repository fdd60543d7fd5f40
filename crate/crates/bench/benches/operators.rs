use std::f64::consts::PI;
use std::hint::black_box;

use cone_exponents::exponents::{c_of_beta, EigenMap, ProfileResolution};
use cone_exponents::operator::ReducedOperator;
use cone_exponents::{ConeSpec, OperatorSpec, QuadratureConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn operators() -> [(&'static str, OperatorSpec); 3] {
    [
        ("fractional", OperatorSpec::fractional(0.5)),
        ("pucci_plus", OperatorSpec::pucci_plus(0.5, 1.0, 2.0)),
        ("pucci_minus", OperatorSpec::pucci_minus(0.5, 1.0, 2.0)),
    ]
}

fn symbol(c: &mut Criterion) {
    let cfg = QuadratureConfig::coarse();
    let mut g = c.benchmark_group("radial_symbol");
    for (name, op) in operators() {
        g.bench_function(name, |b| b.iter(|| c_of_beta(black_box(0.7), &op, 2, &cfg).unwrap()));
    }
    g.finish();
}

fn apply(c: &mut Criterion) {
    let cfg = QuadratureConfig::coarse();
    let mut g = c.benchmark_group("apply_quarter_plane");
    g.sample_size(10);
    for (name, op) in operators() {
        let r = ReducedOperator::new(&op, &ConeSpec::sector(PI / 2.0), 0.7, &cfg, 12, 0.5).unwrap();
        let f = r.positive_start();
        g.bench_function(name, |b| b.iter(|| r.apply_unknowns(black_box(&f)).unwrap()));
    }
    g.finish();
}

fn eigenvalue(c: &mut Criterion) {
    let cfg = QuadratureConfig::coarse();
    let res = ProfileResolution::with_nodes(12);
    let mut g = c.benchmark_group("principal_eigenvalue");
    g.sample_size(10);
    for (name, op) in operators() {
        g.bench_function(name, |b| {
            b.iter(|| {
                let mut map = EigenMap::new(&op, &ConeSpec::sector(PI / 2.0), &cfg, &res).unwrap();
                map.mu(black_box(0.7)).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, symbol, apply, eigenvalue);
criterion_main!(benches);
