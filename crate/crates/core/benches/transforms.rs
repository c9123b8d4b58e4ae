//! Forward, accumulation and differentiation on a 128² lattice.
//!
//! With the `parallel` feature each kernel runs twice: on the global rayon pool
//! and inside a one-thread pool, which takes the same code path with no
//! parallelism. Without the feature only the sequential build is measured.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vline::{
    accumulate_cone_integral, forward_perpendicular, invert_mixed_partial, make_phantom, ConeFrame2, DiffMode,
    DiffScheme, Grid, PhantomSpec,
};

const N: usize = 128;

fn run_modes(c: &mut Criterion, name: &str, mut kernel: impl FnMut() + Send) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        let threads = rayon::current_num_threads();
        group.bench_function(BenchmarkId::new("rayon", threads), |b| b.iter(&mut kernel));
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("one-thread pool");
        group.bench_function(BenchmarkId::new("sequential", 1), |b| b.iter(|| single.install(&mut kernel)));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function(BenchmarkId::new("sequential", 1), |b| b.iter(&mut kernel));
    group.finish();
}

fn transforms(c: &mut Criterion) {
    let grid = Grid::unit(&[N, N]).unwrap();
    let spec = PhantomSpec::Gaussian { amplitude: 1.0, center: vec![0.5, 0.5], width: 0.1 };
    let f = make_phantom(&spec, &grid).unwrap();
    let step = grid.default_step();
    let frame = ConeFrame2::perpendicular();
    let g = forward_perpendicular(&f, step).unwrap();
    let big_f = accumulate_cone_integral(&g, &frame).unwrap();
    let scheme = DiffScheme::default_for(&grid, DiffMode::MixedPartial);

    run_modes(c, "forward", || {
        black_box(forward_perpendicular(black_box(&f), step).unwrap());
    });
    run_modes(c, "accumulate", || {
        black_box(accumulate_cone_integral(black_box(&g), &frame).unwrap());
    });
    run_modes(c, "differentiate", || {
        black_box(invert_mixed_partial(black_box(&big_f), &scheme).unwrap());
    });
}

criterion_group!(benches, transforms);
criterion_main!(benches);
