use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use svgloo::artifact::DetectOptions;
use svgloo::raster::ssim;
use svgloo::{detect, loo_analyze, DetectionMethod, LooOptions, RenderSettings, SimilarityBackend};
use svgloo_bench::injected_fixture;

fn render(c: &mut Criterion) {
    let mut group = c.benchmark_group("render");
    let (doc, _, _) = injected_fixture(1, 384);
    for size in [128, 384] {
        let settings = RenderSettings::new(size);
        group.bench_with_input(BenchmarkId::from_parameter(size), &settings, |b, s| {
            b.iter(|| s.render(&doc).unwrap())
        });
    }
    group.finish();
}

fn similarity(c: &mut Criterion) {
    let (doc, reference, _) = injected_fixture(2, 384);
    let image = RenderSettings::new(384).render(&doc).unwrap();
    c.bench_function("ssim_384", |b| b.iter(|| ssim(&image, &reference).unwrap()));
    c.bench_function("neg_mse_384", |b| {
        b.iter(|| SimilarityBackend::NegMse.score(&image, &reference).unwrap())
    });
}

fn loo(c: &mut Criterion) {
    let mut group = c.benchmark_group("loo");
    group.sample_size(10);
    let (doc, reference, truth) = injected_fixture(3, 384);
    for workers in [1, 4] {
        let options = LooOptions {
            workers,
            ..LooOptions::default()
        };
        group.bench_with_input(BenchmarkId::new("neg_mse", workers), &options, |b, o| {
            b.iter(|| loo_analyze(&doc, &reference, &SimilarityBackend::NegMse, o).unwrap())
        });
    }
    let options = DetectOptions::default();
    group.bench_function("detect_loo_ssim_backend", |b| {
        b.iter(|| {
            detect(
                &doc,
                &reference,
                &truth,
                DetectionMethod::Loo,
                &SimilarityBackend::Ssim,
                &options,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, render, similarity, loo);
criterion_main!(benches);
