use clb_bench::{d1q3_block_encoding, d2q9, d2q9_system, kolmogorov_field};
use clb_core::carleman::{build_relaxation_capped, fast_second_order_path, lift, single_site_relaxation};
use clb_core::lbm::lbm_step;
use clb_core::pauli::truncation_curve;
use clb_core::qsim::{apply, encode_carleman_state};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn bench_lbm_step(c: &mut Criterion) {
    let field = kolmogorov_field(64);
    c.bench_function("lbm_step d2q9 64x64", |b| {
        b.iter(|| lbm_step(black_box(&field), 1.0).unwrap())
    });
}

fn bench_fast_path(c: &mut Criterion) {
    let field = kolmogorov_field(16);
    let system = d2q9_system(&[16, 16]);
    c.bench_function("carleman fast path d2q9 16x16 (1 step)", |b| {
        b.iter(|| fast_second_order_path(black_box(&field), &system, 1).unwrap())
    });
}

fn bench_sparse_matvec(c: &mut Criterion) {
    let system = build_relaxation_capped(&d2q9(), 1.0, &[2, 2], 1 << 26).unwrap();
    let r = system.relaxation().unwrap().clone();
    let x = vec![1.0f64; r.ncols()];
    c.bench_function("relaxation matvec d2q9 N=4", |b| {
        b.iter(|| r.matvec(black_box(&x)).unwrap())
    });
}

fn bench_pauli_expansion(c: &mut Criterion) {
    let r1 = single_site_relaxation(&d2q9(), 1.0).unwrap();
    let mut group = c.benchmark_group("pauli");
    group.sample_size(10);
    group.bench_function("truncation curve d2q9 90->128", |b| {
        b.iter(|| truncation_curve(black_box(&r1)).unwrap())
    });
    group.finish();
}

fn bench_statevector(c: &mut Criterion) {
    let (_, circuit) = d1q3_block_encoding(4);
    let field = clb_core::lbm::DistributionField::from_values(
        clb_core::make_model(clb_core::ModelKind::D1Q3),
        vec![4],
        (0..12).map(|i| 0.1 + 0.01 * i as f64).collect(),
    )
    .unwrap();
    let (state, _) = encode_carleman_state(&lift(&field), &circuit.layout).unwrap();
    let mut group = c.benchmark_group("statevector");
    group.sample_size(20);
    group.bench_function("block encoding apply d1q3 N=4 (15 qubits)", |b| {
        b.iter(|| apply(black_box(&circuit), &state).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_lbm_step,
    bench_fast_path,
    bench_sparse_matvec,
    bench_pauli_expansion,
    bench_statevector
);
criterion_main!(benches);
