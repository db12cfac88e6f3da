use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ecsgfx::bench::build_bench_scene;
use ecsgfx::Strategy;
use ecsgfx_bench::FrameFixture;

fn ecs_tick(c: &mut Criterion) {
    let mut group = c.benchmark_group("tick");
    for index in [1, 3, 5] {
        let mut scene = build_bench_scene(index).unwrap();
        group.bench_function(BenchmarkId::from_parameter(index), |b| {
            b.iter(|| scene.tick(1.0 / 60.0).unwrap())
        });
    }
    group.finish();
}

fn render_frame(c: &mut Criterion) {
    let mut group = c.benchmark_group("frame");
    group.sample_size(10);
    for index in [3, 5] {
        for strategy in Strategy::BOTH {
            let mut fx = FrameFixture::new(index, 128).unwrap();
            group.bench_function(BenchmarkId::new(strategy.to_string(), index), |b| {
                b.iter(|| {
                    fx.renderer
                        .render_frame(&fx.scene, &fx.resources, strategy, &fx.target)
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, ecs_tick, render_frame);
criterion_main!(benches);
