use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use kagome_bench::{omega_r, star, t_high, weak_disorder};
use kagome_core::disorder::{mode_histogram, HistogramGrid, CHUNK};
use kagome_core::spectrum::{diagonalize, eigenfrequencies};
use kagome_core::transmission::{find_peaks, synthesize_for_graph, FrequencyGrid, PeakSearch, SynthesisOptions};
use kagome_core::units::mhz;
use kagome_core::HamiltonianSpec;

fn single_device(c: &mut Criterion) {
    let g = star();
    let model = weak_disorder(1);
    let spec = HamiltonianSpec::new(&g, omega_r(), t_high()).with_deltas(model.sample(0, g.n_sites()));
    c.bench_function("eigenfrequencies", |b| b.iter(|| eigenfrequencies(black_box(&spec)).unwrap()));
    c.bench_function("diagonalize", |b| b.iter(|| diagonalize(black_box(&spec), None).unwrap()));
}

fn histogram_chunk(c: &mut Criterion) {
    let g = star();
    let model = weak_disorder(CHUNK);
    let grid = HistogramGrid::default_for(omega_r(), t_high(), model.sigma);
    c.bench_function("histogram_chunk", |b| {
        b.iter(|| mode_histogram(&g, omega_r(), t_high(), black_box(&model), &grid).unwrap())
    });
}

fn transmission(c: &mut Criterion) {
    let g = star();
    let model = weak_disorder(1);
    let spec = HamiltonianSpec::new(&g, omega_r(), t_high()).with_deltas(model.sample(0, g.n_sites()));
    let s = diagonalize(&spec, None).unwrap();
    let kappa = mhz(0.05);
    let grid = FrequencyGrid::default_for(&s, kappa);
    let opts = SynthesisOptions::default();
    c.bench_function("synthesize", |b| b.iter(|| synthesize_for_graph(black_box(&s), &g, kappa, &grid, &opts).unwrap()));
    c.bench_function("find_peaks", |b| {
        b.iter_batched(
            || synthesize_for_graph(&s, &g, kappa, &grid, &opts).unwrap(),
            |trace| find_peaks(&trace, &PeakSearch::for_trace(&trace)),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, single_device, histogram_chunk, transmission);
criterion_main!(benches);
