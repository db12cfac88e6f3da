use ecsgfx::bench::{
    build_bench_scene, read_csv_from, register_bench_resources, run_bench, run_suite, write_csv, write_csv_to,
    BenchConfig, BenchRecord, BenchScene, CSV_HEADER,
};
use ecsgfx::gallery::default_assets_root;
use ecsgfx::gpu::Device;
use ecsgfx::{Error, Resources, Strategy};
use proptest::prelude::*;

fn record(i: usize) -> BenchRecord {
    BenchRecord {
        scene: i % 5 + 1,
        strategy: if i % 2 == 0 { Strategy::Instanced } else { Strategy::PerObject },
        frames: 100 + i,
        avg_fps: 60.0 + i as f64 / 3.0,
        avg_ms: 1000.0 / (60.0 + i as f64 / 3.0),
        draw_calls: 2 + i as u64,
        cpu_mb: 12.5 * i as f64,
        gpu_mb: (i % 3 != 0).then_some(i as f64 * 0.1),
    }
}

fn resources(device: &Device) -> Resources {
    let mut res = Resources::new(device, default_assets_root()).unwrap();
    register_bench_resources(&mut res).unwrap();
    res
}

fn tiny() -> BenchConfig {
    BenchConfig {
        warmup: 1,
        frames: 3,
        width: 32,
        height: 32,
    }
}

#[test]
fn csv_line_counts() {
    let mut out = Vec::new();
    write_csv_to(&[], &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    let records: Vec<_> = (0..10).map(record).collect();
    let mut out = Vec::new();
    write_csv_to(&records, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), 11);
}

#[test]
fn csv_rejects_foreign_headers() {
    assert!(read_csv_from("a,b\n1,2\n".as_bytes()).is_err());
    let bad = format!("{}\n1,sideways,1,1,1,1,1,\n", CSV_HEADER.join(","));
    assert!(matches!(read_csv_from(bad.as_bytes()), Err(Error::Bench(_))));
}

proptest! {
    #[test]
    fn csv_parses_back(records in prop::collection::vec(
        (1usize..6, any::<bool>(), 1usize..5000, 0.0f64..1e5, 0.0f64..1e4, 0u64..1000, 0.0f64..1e4, prop::option::of(0.0f64..1e4)),
        0..20,
    )) {
        let records: Vec<BenchRecord> = records
            .into_iter()
            .map(|(scene, inst, frames, avg_fps, avg_ms, draw_calls, cpu_mb, gpu_mb)| BenchRecord {
                scene,
                strategy: if inst { Strategy::Instanced } else { Strategy::PerObject },
                frames,
                avg_fps,
                avg_ms,
                draw_calls,
                cpu_mb,
                gpu_mb,
            })
            .collect();
        let mut out = Vec::new();
        write_csv_to(&records, &mut out).unwrap();
        prop_assert_eq!(read_csv_from(out.as_slice()).unwrap(), records);
    }
}

#[test]
fn scene_indices_are_checked() {
    assert!(matches!(BenchScene::get(0), Err(Error::BenchSceneIndex(0))));
    assert!(matches!(build_bench_scene(6), Err(Error::BenchSceneIndex(6))));
    assert_eq!(BenchScene::get(5).unwrap().models, 100);
    assert!(BenchScene::get(4).unwrap().rotating && !BenchScene::get(3).unwrap().rotating);
}

#[test]
fn zero_frames_is_an_error() {
    let device = Device::new();
    let res = resources(&device);
    let mut scene = build_bench_scene(1).unwrap();
    let config = BenchConfig { frames: 0, ..tiny() };
    assert!(matches!(
        run_bench(&mut scene, 1, &res, Strategy::Instanced, &config),
        Err(Error::Bench(_))
    ));
}

#[test]
fn records_are_consistent() {
    let device = Device::new();
    let res = resources(&device);
    let records = run_suite(&res, &[1, 3, 4], &Strategy::BOTH, &tiny()).unwrap();
    assert_eq!(records.len(), 6);
    for r in &records {
        assert!((r.avg_fps * r.avg_ms / 1000.0 - 1.0).abs() <= 0.05, "{r:?}");
        assert_eq!(r.frames, 3);
        assert!(r.gpu_mb.unwrap() > 0.0);
    }
    let draws = |scene, strategy| {
        records
            .iter()
            .find(|r| r.scene == scene && r.strategy == strategy)
            .unwrap()
            .draw_calls
    };
    assert_eq!(draws(1, Strategy::Instanced), 2);
    assert_eq!(draws(3, Strategy::PerObject), 51);
    for s in Strategy::BOTH {
        assert_eq!(draws(3, s), draws(4, s));
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    write_csv(&records, &path).unwrap();
    assert_eq!(ecsgfx::bench::read_csv(&path).unwrap(), records);
}

#[test]
fn rotating_scenes_advance_with_frames() {
    let device = Device::new();
    let res = resources(&device);
    let mut scene = build_bench_scene(4).unwrap();
    let first = scene.entities()[0];
    run_bench(&mut scene, 4, &res, Strategy::Instanced, &tiny()).unwrap();
    let rot = scene.get::<ecsgfx::TransformComponent>(first).unwrap().rotation.y;
    // Four ticks of 1/60 s at the default 45 degrees per second.
    assert!((rot - 4.0 * 45.0 / 60.0).abs() < 1e-9, "{rot}");
}
