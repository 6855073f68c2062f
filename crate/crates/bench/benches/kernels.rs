use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tsproc_core::algebra::{bases_for, decompose, LabeledOperator};
use tsproc_core::distributions::joint_from_process;
use tsproc_core::inequalities::{classical_bound_oracle, Direction, Game, SettingConvention, DEFAULT_STRATEGY_CAP};
use tsproc_core::operations::random_physical_operation;
use tsproc_core::processes::build_ocb;
use tsproc_core::HilbertFactor;

fn bench_decompose(c: &mut Criterion) {
    let fs: Vec<HilbertFactor> = ["A_I", "A_O", "B_I", "B_O"]
        .iter()
        .map(|l| HilbertFactor::new(*l, 2).unwrap())
        .collect();
    let w = LabeledOperator::identity(fs).unwrap().scale(0.25);
    let bases = bases_for(&w).unwrap();
    c.bench_function("decompose_qubit_process", |b| {
        b.iter(|| decompose(black_box(&w), &bases).unwrap())
    });
}

fn bench_joint(c: &mut Criterion) {
    let w = build_ocb().unwrap();
    let a = random_physical_operation("A", 2, 2, 2, 1).unwrap();
    let b = random_physical_operation("B", 2, 2, 2, 2).unwrap();
    c.bench_function("joint_from_process_ocb", |bench| {
        bench.iter(|| joint_from_process(black_box(&w), &a, &b).unwrap())
    });
}

fn bench_oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    g.bench_function("lgyni_forward_2x2", |b| {
        b.iter(|| {
            classical_bound_oracle(
                Game::Lgyni,
                Direction::Forward,
                2,
                2,
                SettingConvention::default(),
                DEFAULT_STRATEGY_CAP,
            )
            .unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, bench_decompose, bench_joint, bench_oracle);
criterion_main!(benches);
