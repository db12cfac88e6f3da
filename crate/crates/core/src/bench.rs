//! Headless frame-rate benchmarks over five fixed scenes.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use glam::DVec3;

use crate::components::{RotateComponent, RotationSystem};
use crate::ecs::Scene;
use crate::error::{Error, Result};
use crate::renderer::{
    CameraComponent, LightComponent, MaterialComponent, MeshComponent, OffscreenTarget, Renderer, SkyboxComponent,
    Strategy,
};
use crate::resources::{MaterialData, MeshSource, Resources, ShaderSource, TextureData};
use crate::scenegraph::{looking_at, LinkComponent, TransformComponent, TransformSystem};

pub const MESH: &str = "bench-torus";
pub const MATERIAL: &str = "bench-material";
pub const SHADER: &str = "bench-lit";
pub const SKYBOX: &str = "bench-sky";

pub const CSV_HEADER: [&str; 8] = ["scene", "strategy", "frames", "avg_fps", "avg_ms", "draw_calls", "cpu_mb", "gpu_mb"];

/// Simulation step per frame, independent of wall-clock time.
pub const FRAME_STEP: f64 = 1.0 / 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchScene {
    pub index: usize,
    pub models: usize,
    pub rotating: bool,
    pub skybox: bool,
}

impl BenchScene {
    pub const ALL: [BenchScene; 5] = [
        BenchScene::new(1, 1, false),
        BenchScene::new(2, 10, false),
        BenchScene::new(3, 50, false),
        BenchScene::new(4, 50, true),
        BenchScene::new(5, 100, true),
    ];

    const fn new(index: usize, models: usize, rotating: bool) -> Self {
        BenchScene {
            index,
            models,
            rotating,
            skybox: true,
        }
    }

    pub fn get(index: usize) -> Result<BenchScene> {
        index
            .checked_sub(1)
            .and_then(|i| Self::ALL.get(i))
            .copied()
            .ok_or(Error::BenchSceneIndex(index))
    }
}

/// Registers the model, material and skybox shared by every bench scene.
pub fn register_bench_resources(resources: &mut Resources) -> Result<()> {
    resources.build_mesh(MESH, MeshSource::Obj("models/torus.obj".into()))?;
    resources.build_shader(SHADER, ShaderSource::file("shaders/lit_blinn_phong.wgsl"))?;
    resources.build_material(
        MATERIAL,
        MaterialData::new(SHADER, &[])
            .with_base_color([0.85, 0.45, 0.2, 1.0])
            .with_glossiness(2.0),
    )?;
    let faces = ["px", "nx", "py", "ny", "pz", "nz"].map(|f| TextureData::file(format!("textures/sky/{f}.png")));
    resources.build_cubemap(SKYBOX, faces)?;
    Ok(())
}

/// Builds scene `index` (1 to 5): copies of one model on a grid facing the
/// camera, a skybox and a light. Scenes 4 and 5 spin every model about Y.
pub fn build_bench_scene(index: usize) -> Result<Scene> {
    let spec = BenchScene::get(index)?;
    let mut scene = Scene::new(format!("bench-{index}"));
    if spec.rotating {
        scene.register_system(RotationSystem)?;
    }
    scene.register_system(TransformSystem)?;

    let cols = (spec.models as f64).sqrt().ceil() as usize;
    let rows = spec.models.div_ceil(cols);
    let spacing = 3.0;
    for i in 0..spec.models {
        let (c, r) = ((i % cols) as f64, (i / cols) as f64);
        let x = (c - (cols as f64 - 1.0) / 2.0) * spacing;
        let y = ((rows as f64 - 1.0) / 2.0 - r) * spacing;
        let e = scene.enroll_entity();
        scene.add_component(
            e,
            TransformComponent::from_translation(DVec3::new(x, y, 0.0)).with_rotation(DVec3::new(60.0, 0.0, 0.0)),
        )?;
        scene.add_component(e, LinkComponent::new(None))?;
        scene.add_component(e, MeshComponent::new(MESH))?;
        scene.add_component(e, MaterialComponent::new(MATERIAL))?;
        if spec.rotating {
            scene.add_component(e, RotateComponent::default())?;
        }
    }

    let half = cols.max(rows) as f64 * spacing / 2.0;
    let distance = half / 22.5f64.to_radians().tan() + 2.0;
    let camera = scene.enroll_entity();
    scene.add_component(
        camera,
        TransformComponent::from_translation(DVec3::new(0.0, 0.0, distance)).with_rotation(looking_at(DVec3::NEG_Z)),
    )?;
    scene.add_component(camera, LinkComponent::new(None))?;
    scene.add_component(
        camera,
        CameraComponent {
            far: distance * 4.0,
            ..CameraComponent::default()
        },
    )?;
    let light = scene.enroll_entity();
    scene.add_component(light, LightComponent::directional(DVec3::new(-0.4, -0.6, -1.0)))?;
    if spec.skybox {
        let sky = scene.enroll_entity();
        scene.add_component(sky, SkyboxComponent::new(SKYBOX))?;
    }
    scene.tick(0.0)?;
    Ok(scene)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchConfig {
    pub warmup: usize,
    pub frames: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            warmup: 120,
            frames: 1000,
            width: 256,
            height: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub scene: usize,
    pub strategy: Strategy,
    pub frames: usize,
    pub avg_fps: f64,
    pub avg_ms: f64,
    pub draw_calls: u64,
    pub cpu_mb: f64,
    /// Live device allocations; absent when the device does not report them.
    pub gpu_mb: Option<f64>,
}

/// Resident set size of this process in MiB, where the platform exposes it.
pub fn resident_memory_mb() -> Option<f64> {
    let statm = std::fs::read_to_string("/proc/self/statm").ok()?;
    let pages: u64 = statm.split_whitespace().nth(1)?.parse().ok()?;
    Some(pages as f64 * 4096.0 / (1024.0 * 1024.0))
}

/// Ticks and renders `scene` offscreen, discarding the warmup frames.
pub fn run_bench(
    scene: &mut Scene,
    scene_index: usize,
    resources: &Resources,
    strategy: Strategy,
    config: &BenchConfig,
) -> Result<BenchRecord> {
    if config.frames == 0 {
        return Err(Error::Bench("measured frame count must be at least 1".into()));
    }
    let device = resources.device();
    let target = OffscreenTarget::new(device, config.width, config.height)?;
    let mut renderer = Renderer::new(resources)?;
    for _ in 0..config.warmup {
        scene.tick(FRAME_STEP)?;
        renderer.render_frame(scene, resources, strategy, &target)?;
    }
    let mut draw_calls = 0;
    let start = Instant::now();
    for _ in 0..config.frames {
        scene.tick(FRAME_STEP)?;
        draw_calls = renderer.render_frame(scene, resources, strategy, &target)?.draw_calls;
    }
    let seconds = start.elapsed().as_secs_f64().max(1e-9);
    let avg_ms = seconds * 1e3 / config.frames as f64;
    Ok(BenchRecord {
        scene: scene_index,
        strategy,
        frames: config.frames,
        avg_fps: config.frames as f64 / seconds,
        avg_ms,
        draw_calls,
        cpu_mb: resident_memory_mb().unwrap_or(0.0),
        gpu_mb: Some(device.stats().live_bytes as f64 / (1024.0 * 1024.0)),
    })
}

/// Runs every (scene, strategy) pair on fresh scenes, scenes outermost.
pub fn run_suite(
    resources: &Resources,
    scenes: &[usize],
    strategies: &[Strategy],
    config: &BenchConfig,
) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &index in scenes {
        for &strategy in strategies {
            let mut scene = build_bench_scene(index)?;
            let record = run_bench(&mut scene, index, resources, strategy, config)?;
            log::info!(
                "scene {index} {strategy}: {:.1} fps, {} draws",
                record.avg_fps,
                record.draw_calls
            );
            out.push(record);
        }
    }
    Ok(out)
}

pub fn write_csv_to<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.scene.to_string(),
            r.strategy.to_string(),
            r.frames.to_string(),
            r.avg_fps.to_string(),
            r.avg_ms.to_string(),
            r.draw_calls.to_string(),
            r.cpu_mb.to_string(),
            r.gpu_mb.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    write_csv_to(records, std::fs::File::create(path)?)
}

pub fn read_csv_from<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Bench(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |col: &str| Error::Bench(format!("line {line}: bad `{col}` value"));
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| field(i).parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
        out.push(BenchRecord {
            scene: field(0).parse().map_err(|_| bad("scene"))?,
            strategy: Strategy::parse(field(1)).ok_or_else(|| bad("strategy"))?,
            frames: field(2).parse().map_err(|_| bad("frames"))?,
            avg_fps: num(3)?,
            avg_ms: num(4)?,
            draw_calls: field(5).parse().map_err(|_| bad("draw_calls"))?,
            cpu_mb: num(6)?,
            gpu_mb: if field(7).is_empty() { None } else { Some(num(7)?) },
        });
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    read_csv_from(std::fs::File::open(path)?)
}
