use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use specmuon_bench::fixture_block;
use specmuon_core::optimizers::{
    adam_step, muon_step, specmuon_practical_step, specmuon_theory_step, AdamConfig, AdamState, ModeState,
    MomentumBuffer, OptimError, ParamBlock, SpecMuonConfig,
};

const SHAPE: (usize, usize) = (32, 64);

fn steps(c: &mut Criterion) {
    let (rows, cols) = SHAPE;
    let mut group = c.benchmark_group("step_32x64");
    group.bench_function("adam", |b| {
        let cfg = AdamConfig::default();
        b.iter_batched(
            || (fixture_block(rows, cols), AdamState::new(rows, cols)),
            |(mut blk, mut st)| adam_step(&mut blk, &mut st, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.bench_function("muon", |b| {
        b.iter_batched(
            || fixture_block(rows, cols),
            |mut blk| muon_step(&mut blk, 0.02, 5).unwrap(),
            BatchSize::SmallInput,
        )
    });
    for rtop in [2, 6] {
        let cfg = SpecMuonConfig::practical(0.01, rtop);
        group.bench_function(format!("specmuon_practical_rtop{rtop}"), |b| {
            b.iter_batched(
                || {
                    (
                        fixture_block(rows, cols),
                        ModeState::new(rtop, 1.0).unwrap(),
                        MomentumBuffer::new(rows, cols),
                    )
                },
                |(mut blk, mut modes, mut buf)| {
                    specmuon_practical_step(&mut blk, &mut modes, &mut buf, black_box(1.0), &cfg).unwrap()
                },
                BatchSize::SmallInput,
            )
        });
    }
    let cfg = SpecMuonConfig::theory(0.01, 6);
    group.bench_function("specmuon_theory_rtop6", |b| {
        b.iter_batched(
            || (vec![fixture_block(rows, cols)], vec![ModeState::new(6, 1.5).unwrap()]),
            |(mut blocks, mut modes)| {
                let mut eval = |_: &[ParamBlock]| Ok::<_, OptimError>(0.9);
                specmuon_theory_step(&mut blocks, &mut modes, black_box(1.25), &mut eval, &cfg).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, steps);
criterion_main!(benches);
