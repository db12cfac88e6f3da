//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits nonzero if any criterion fails.
//!
//! `UPDATE_GOLDENS=1` rewrites the stored golden images, after checking the
//! fresh renders against the CPU pixel oracle.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use ecsgfx::bench::{self, BenchConfig, BenchRecord};
use ecsgfx::ecs::{ComponentType, Entity, Scene, System};
use ecsgfx::gallery::{default_assets_root, run_example, PixelOracle};
use ecsgfx::glam::{DMat4, DVec3};
use ecsgfx::gpu::Device;
use ecsgfx::renderer::{build_batches, collect_renderables, dispatch_image_filter, filter_reference, FilterKind};
use ecsgfx::scene_io::{load_scene, save_scene, Manifest};
use ecsgfx::{
    CameraComponent, ComponentRegistry, Error, GravityComponent, GravitySystem, Image, InfoComponent,
    LightComponent, LinkComponent, MaterialComponent, MaterialData, MeshComponent, MeshSource, OffscreenTarget,
    Primitive, Projection, ResourceDescriptor, ResourceKind, Resources, RotateComponent, ShaderSource,
    SkyboxComponent, Strategy, TextureData, TransformComponent, TransformSystem,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T>(r: ecsgfx::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// ECS cache coherence.

#[derive(Clone, Debug)]
struct K0;
#[derive(Clone, Debug)]
struct K1;
#[derive(Clone, Debug)]
struct K2;
#[derive(Clone, Debug)]
struct K3;
#[derive(Clone, Debug)]
struct K4;
#[derive(Clone, Debug)]
struct K5;

const KINDS: usize = 6;

fn kind(i: usize) -> ComponentType {
    [
        ComponentType::of::<K0>(),
        ComponentType::of::<K1>(),
        ComponentType::of::<K2>(),
        ComponentType::of::<K3>(),
        ComponentType::of::<K4>(),
        ComponentType::of::<K5>(),
    ][i]
}

fn attach(scene: &mut Scene, e: Entity, k: usize) -> ecsgfx::Result<()> {
    match k {
        0 => scene.add_component(e, K0),
        1 => scene.add_component(e, K1),
        2 => scene.add_component(e, K2),
        3 => scene.add_component(e, K3),
        4 => scene.add_component(e, K4),
        _ => scene.add_component(e, K5),
    }
}

struct Needs(Vec<ComponentType>);

impl System for Needs {
    fn required(&self) -> Vec<ComponentType> {
        self.0.clone()
    }
}

fn ecs_cache_coherence() -> Outcome {
    let start = Instant::now();
    let sequences = 5;
    let steps = 1000;
    let mut checks = 0usize;
    for seed in 0..sequences {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut scene = Scene::new("coherence");
        let mut alive: Vec<(Entity, BTreeSet<usize>)> = Vec::new();
        let mut systems: Vec<BTreeSet<usize>> = Vec::new();
        for step in 0..steps {
            match rng.random_range(0..20) {
                0..=3 => alive.push((scene.enroll_entity(), BTreeSet::new())),
                4..=10 if !alive.is_empty() => {
                    let i = rng.random_range(0..alive.len());
                    let k = rng.random_range(0..KINDS);
                    ok(attach(&mut scene, alive[i].0, k))?;
                    alive[i].1.insert(k);
                }
                11..=15 if !alive.is_empty() => {
                    let i = rng.random_range(0..alive.len());
                    let k = rng.random_range(0..KINDS);
                    ok(scene.remove_component_dyn(alive[i].0, kind(k)))?;
                    alive[i].1.remove(&k);
                }
                16 if !alive.is_empty() => {
                    let i = rng.random_range(0..alive.len());
                    ok(scene.destroy_entity(alive.remove(i).0))?;
                }
                17 => {
                    let mask: usize = rng.random_range(0..1 << KINDS);
                    let set: BTreeSet<usize> = (0..KINDS).filter(|k| mask >> k & 1 == 1).collect();
                    ok(scene.register_system(Needs(set.iter().map(|&k| kind(k)).collect())).map(|_| ()))?;
                    systems.push(set);
                }
                _ => {}
            }
            for (s, required) in systems.iter().enumerate() {
                let cached: BTreeSet<Entity> = scene.system_cache(s).unwrap_or(&[]).iter().copied().collect();
                let brute: BTreeSet<Entity> = alive
                    .iter()
                    .filter(|(_, set)| required.is_subset(set))
                    .map(|(e, _)| *e)
                    .collect();
                ensure(cached == brute, || {
                    format!("seed {seed} step {step} system {s}: cache {} vs brute force {}", cached.len(), brute.len())
                })?;
                checks += 1;
            }
            scene
                .check_integrity()
                .map_err(|e| format!("seed {seed} step {step}: {e}"))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "{sequences} sequences x {steps} steps over {KINDS} types, {checks} cache comparisons, {secs:.2} s"
    ))
}

// Gravity.

fn gravity() -> Outcome {
    let mut scene = Scene::new("gravity");
    ok(scene.register_system(GravitySystem))?;
    let e = scene.enroll_entity();
    ok(scene.add_component(e, GravityComponent::default()))?;
    ok(scene.add_component(e, TransformComponent::default()))?;
    let y = |s: &Scene| s.get::<TransformComponent>(e).expect("transform").translation.y;
    let mut worst_step: f64 = 0.0;
    for _ in 0..100 {
        let before = y(&scene);
        ok(scene.tick(0.016))?;
        worst_step = worst_step.max((y(&scene) - before + 0.08).abs());
    }
    let end = y(&scene);
    ensure(worst_step < 1e-12, || format!("per-tick step off by {worst_step:e}"))?;
    ensure((end + 8.0).abs() <= 1e-9, || format!("y after 100 ticks = {end}"))?;
    Ok(format!("y after 100 ticks = {end:.12}, per-tick error {worst_step:.1e}"))
}

// Hierarchy.

type M4 = [[f64; 4]; 4];

fn mat_mul(a: &M4, b: &M4) -> M4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn trs_oracle(t: DVec3, r: DVec3, s: DVec3) -> M4 {
    let (sx, cx) = r.x.to_radians().sin_cos();
    let (sy, cy) = r.y.to_radians().sin_cos();
    let (sz, cz) = r.z.to_radians().sin_cos();
    let tm = [[1.0, 0.0, 0.0, t.x], [0.0, 1.0, 0.0, t.y], [0.0, 0.0, 1.0, t.z], [0.0, 0.0, 0.0, 1.0]];
    let rx = [[1.0, 0.0, 0.0, 0.0], [0.0, cx, -sx, 0.0], [0.0, sx, cx, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let ry = [[cy, 0.0, sy, 0.0], [0.0, 1.0, 0.0, 0.0], [-sy, 0.0, cy, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let rz = [[cz, -sz, 0.0, 0.0], [sz, cz, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let sm = [[s.x, 0.0, 0.0, 0.0], [0.0, s.y, 0.0, 0.0], [0.0, 0.0, s.z, 0.0], [0.0, 0.0, 0.0, 1.0]];
    mat_mul(&tm, &mat_mul(&rz, &mat_mul(&ry, &mat_mul(&rx, &sm))))
}

fn max_deviation(world: DMat4, m: &M4) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((world.col(j)[i] - v).abs());
        }
    }
    worst
}

fn hierarchy() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let cases = 500;
    for case in 0..cases {
        let depth = rng.random_range(1..=8);
        let mut scene = Scene::new("chain");
        ok(scene.register_system(TransformSystem))?;
        let ids: Vec<Entity> = (0..depth).map(|_| scene.enroll_entity()).collect();
        let mut expected = trs_oracle(DVec3::ZERO, DVec3::ZERO, DVec3::ONE);
        let mut wanted = Vec::new();
        // Attach children before parents to exercise ordering.
        let mut links = Vec::new();
        for (i, &id) in ids.iter().enumerate() {
            let mut v = || DVec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let t = v();
            let r = v() * 36.0;
            let s = DVec3::from_array([0, 1, 2].map(|_| {
                let m: f64 = rng.random_range(0.2..3.0);
                if rng.random_bool(0.2) { -m } else { m }
            }));
            expected = mat_mul(&expected, &trs_oracle(t, r, s));
            wanted.push(expected);
            links.push((id, TransformComponent::new(t, r, s), (i > 0).then(|| ids[i - 1])));
        }
        for (id, transform, parent) in links.into_iter().rev() {
            ok(scene.add_component(id, transform))?;
            ok(scene.add_component(id, LinkComponent::new(parent)))?;
        }
        ok(scene.tick(0.0))?;
        for (i, id) in ids.iter().enumerate() {
            let world = scene.get::<TransformComponent>(*id).expect("transform").world;
            let d = max_deviation(world, &wanted[i]);
            worst = worst.max(d);
            ensure(d <= 1e-6, || format!("case {case} depth {i}: deviation {d:e}"))?;
        }
    }
    Ok(format!("{cases} chains up to depth 8, worst element error {worst:.2e}"))
}

// Resource idempotence.

const UNLIT: &str = include_str!("../../core/assets/shaders/unlit.wgsl");

fn resource_idempotence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    ok(Image::filled(2, 2, [200, 100, 50, 255]).save_png(&dir.path().join("t.png")))?;
    let device = Device::new();
    let mut res = ok(Resources::new(&device, dir.path()))?;
    let s0 = device.stats();
    let t1 = ok(res.build_texture("albedo", TextureData::file("t.png")))?;
    let t2 = ok(res.build_texture("albedo", TextureData::file("t.png")))?;
    let sh1 = ok(res.build_shader("unlit", ShaderSource::Wgsl(UNLIT.into())))?;
    let sh2 = ok(res.build_shader("unlit", ShaderSource::Wgsl(UNLIT.into())))?;
    let s1 = device.stats();
    let m1 = ok(res.build_material("m", MaterialData::new("unlit", &["albedo"])))?;
    let s2 = device.stats();
    let m2 = ok(res.build_material("m", MaterialData::new("unlit", &["albedo"])))?;
    let s3 = device.stats();
    ensure(t1 == t2 && sh1 == sh2 && m1 == m2, || "rebuild returned a new handle".into())?;
    ensure(s1.textures_created - s0.textures_created == 1, || {
        format!("{} texture allocations", s1.textures_created - s0.textures_created)
    })?;
    ensure(s2.buffers_created - s1.buffers_created == 1, || "material uniform not allocated once".into())?;
    ensure(s3.buffers_created == s2.buffers_created && s3.textures_created == s2.textures_created, || {
        "material rebuild allocated".into()
    })?;
    for k in [ResourceKind::Texture, ResourceKind::Shader, ResourceKind::Material] {
        ensure(res.count(k) == 1, || format!("{} {k:?} entries", res.count(k)))?;
    }
    match res.build_material("late", MaterialData::new("unlit", &["missing_tex"])) {
        Err(Error::DanglingResource { name, .. }) if name == "missing_tex" => {}
        other => return Err(format!("dangling material gave {other:?}")),
    }
    ensure(res.lookup(ResourceKind::Material, "late").is_none(), || "failed material registered".into())?;
    Ok("texture/shader/material rebuilds: 1 allocation, 1 handle each; dangling texture named in error".into())
}

// Batching.

fn bench_resources(device: &Device) -> Result<Resources, String> {
    let mut res = ok(Resources::new(device, default_assets_root()))?;
    ok(bench::register_bench_resources(&mut res))?;
    Ok(res)
}

fn frame_stats(res: &Resources, index: usize, strategy: Strategy, size: u32) -> Result<(ecsgfx::FrameStats, Image), String> {
    let scene = ok(bench::build_bench_scene(index))?;
    let target = ok(OffscreenTarget::new(res.device(), size, size))?;
    let mut renderer = ok(ecsgfx::Renderer::new(res))?;
    let stats = ok(renderer.render_frame(&scene, res, strategy, &target))?;
    Ok((stats, ok(target.readback(res.device()))?))
}

fn batching() -> Outcome {
    let device = Device::new();
    let res = bench_resources(&device)?;
    let mut notes = Vec::new();
    for index in 1..=5 {
        let scene = ok(bench::build_bench_scene(index))?;
        let items = ok(collect_renderables(&scene, &res))?;
        let total: usize = build_batches(&items).iter().map(|b| b.instance_count()).sum();
        ensure(total == items.len(), || format!("scene {index}: {total} instances for {} renderables", items.len()))?;
    }
    for (index, per_object_draws) in [(3, 51), (5, 101)] {
        let (inst, _) = frame_stats(&res, index, Strategy::Instanced, 32)?;
        let (per, _) = frame_stats(&res, index, Strategy::PerObject, 32)?;
        ensure(inst.draw_calls == 2 && per.draw_calls == per_object_draws, || {
            format!("scene {index}: instanced {} / per-object {}", inst.draw_calls, per.draw_calls)
        })?;
        notes.push(format!("scene {index}: {} vs {}", inst.draw_calls, per.draw_calls));
    }
    Ok(format!("{}; instance sums match renderables on scenes 1-5", notes.join(", ")))
}

fn strategy_equivalence() -> Outcome {
    let device = Device::new();
    let res = bench_resources(&device)?;
    let mut diffs = Vec::new();
    for index in 1..=3 {
        let (_, a) = frame_stats(&res, index, Strategy::Instanced, 256)?;
        let (_, b) = frame_stats(&res, index, Strategy::PerObject, 256)?;
        let d = a.mean_abs_diff(&b).ok_or("size mismatch")?;
        ensure(d <= 2.0, || format!("scene {index}: mean diff {d:.3}/255"))?;
        diffs.push(format!("{d:.3}"));
    }
    Ok(format!("mean abs diff (x/255) scenes 1-3 at 256x256: {}", diffs.join(", ")))
}

// Golden images.

const GOLDENS: [&str; 5] = ["triangle", "textured-cube", "blinn-phong", "environment", "shadow"];
const GOLDEN_SIZE: u32 = 256;

fn golden_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/goldens"))
}

fn golden_images() -> Outcome {
    let device = Device::new();
    let update = std::env::var_os("UPDATE_GOLDENS").is_some_and(|v| v == "1");
    let mut notes = Vec::new();
    for name in GOLDENS {
        let run = ok(run_example(name, &device, &default_assets_root(), GOLDEN_SIZE, GOLDEN_SIZE))?;
        let oracle = ok(PixelOracle::new(&run))?;
        let path = golden_dir().join(format!("{name}.png"));
        if update {
            let fresh = oracle.compare(&run.image, 4);
            ensure(fresh.max_error <= 2.0, || format!("{name}: fresh render off oracle by {:.2}", fresh.max_error))?;
            std::fs::create_dir_all(golden_dir()).map_err(|e| e.to_string())?;
            ok(run.image.save_png(&path))?;
        }
        let golden = ok(Image::load(&path)).map_err(|e| format!("{name}: {e}"))?;
        let probes = oracle.compare(&golden, 4);
        ensure(probes.checked >= 1000 && probes.max_error <= 2.0, || {
            format!("{name}: golden off oracle by {:.2} over {} probes", probes.max_error, probes.checked)
        })?;
        let diff = run.image.max_abs_diff(&golden).ok_or_else(|| format!("{name}: size mismatch"))?;
        ensure(diff <= 2, || format!("{name}: render differs from golden by {diff}/255"))?;
        notes.push(format!("{name} {diff}/255 ({} probes)", probes.checked));
    }
    Ok(notes.join(", "))
}

// Compute filter.

fn compute_filter() -> Outcome {
    let device = Device::new();
    let mut rng = StdRng::seed_from_u64(5);
    let img = ok(Image::new(64, 64, (0..64 * 64 * 4).map(|_| rng.random()).collect()))?;
    let mut worst = 0;
    for kind in [FilterKind::Grayscale, FilterKind::BoxBlur3] {
        let gpu = ok(dispatch_image_filter(&device, &img, kind))?;
        // Integer-arithmetic references, independent of the library's.
        for y in 0..64 {
            for x in 0..64 {
                let g = gpu.pixel(x, y);
                for c in 0..4 {
                    let want = match kind {
                        FilterKind::Grayscale if c < 3 => {
                            let p = img.pixel(x, y);
                            ((2126 * p[0] as u32 + 7152 * p[1] as u32 + 722 * p[2] as u32 + 5000) / 10000) as u8
                        }
                        FilterKind::Grayscale => img.pixel(x, y)[3],
                        FilterKind::BoxBlur3 => {
                            let mut sum = 0u32;
                            for dy in -1i64..=1 {
                                for dx in -1i64..=1 {
                                    let sx = (x as i64 + dx).clamp(0, 63) as u32;
                                    let sy = (y as i64 + dy).clamp(0, 63) as u32;
                                    sum += img.pixel(sx, sy)[c] as u32;
                                }
                            }
                            ((2 * sum + 9) / 18) as u8
                        }
                    };
                    worst = worst.max(g[c].abs_diff(want));
                }
            }
        }
        let lib = filter_reference(&img, kind);
        worst = worst.max(gpu.max_abs_diff(&lib).unwrap_or(u8::MAX));
    }
    ensure(worst <= 1, || format!("GPU vs CPU differs by {worst}/255"))?;
    let red = ok(Image::new(1, 1, vec![255, 0, 0, 255]))?;
    let gray = ok(dispatch_image_filter(&device, &red, FilterKind::Grayscale))?.pixel(0, 0);
    ensure(gray == [54, 54, 54, 255], || format!("grayscale(255,0,0) = {gray:?}"))?;
    Ok(format!("64x64 random image, max GPU/CPU diff {worst}/255; grayscale(255,0,0) = 54"))
}

// Serialization.

fn catalog() -> Manifest {
    let mut m = Manifest::new();
    m.insert("cube", ResourceDescriptor::Mesh(MeshSource::Primitive(Primitive::Cube)));
    m.insert("torus", ResourceDescriptor::Mesh(MeshSource::Obj("models/torus.obj".into())));
    m.insert("lit", ResourceDescriptor::Shader(ShaderSource::file("shaders/lit_blinn_phong.wgsl")));
    m.insert("checker", ResourceDescriptor::Texture(TextureData::file("textures/checker.png")));
    m.insert("tiles", ResourceDescriptor::Material(MaterialData::new("lit", &["checker"])));
    m.insert("clay", ResourceDescriptor::Material(MaterialData::new("lit", &[]).with_glossiness(2.0)));
    let faces = ["px", "nx", "py", "ny", "pz", "nz"].map(|f| TextureData::file(format!("textures/sky/{f}.png")));
    m.insert("sky", ResourceDescriptor::Cubemap(Box::new(faces)));
    m
}

fn random_scene(rng: &mut StdRng, name: &str) -> ecsgfx::Result<Scene> {
    let mut scene = Scene::new(name);
    let mut ids: Vec<Entity> = Vec::new();
    let n = rng.random_range(0..=50);
    let f = |rng: &mut StdRng| rng.random_range(-100.0..100.0);
    for _ in 0..n {
        let e = scene.enroll_entity();
        if rng.random_bool(0.6) {
            let label: String = (0..rng.random_range(0..10))
                .map(|_| *[b'a', b'Z', b' ', b'"', b'\\', b'\n', b'7'].get(rng.random_range(0..7)).unwrap() as char)
                .collect();
            scene.add_component(e, InfoComponent::new(label))?;
        }
        if rng.random_bool(0.7) {
            let t = DVec3::new(f(rng), f(rng), f(rng));
            let r = DVec3::new(f(rng), f(rng), f(rng));
            let s = DVec3::new(rng.random_range(0.1..4.0), -rng.random_range(0.1..4.0), rng.random_range(0.1..4.0));
            scene.add_component(e, TransformComponent::new(t, r, s))?;
        }
        if rng.random_bool(0.5) {
            let parent = (!ids.is_empty() && rng.random_bool(0.7)).then(|| ids[rng.random_range(0..ids.len())]);
            scene.add_component(e, LinkComponent::new(parent))?;
        }
        if rng.random_bool(0.3) {
            scene.add_component(e, GravityComponent { force: f(rng) })?;
        }
        if rng.random_bool(0.3) {
            scene.add_component(e, RotateComponent { degrees_per_second: f(rng) })?;
        }
        if rng.random_bool(0.4) {
            scene.add_component(e, MeshComponent::new(if rng.random_bool(0.5) { "cube" } else { "torus" }))?;
        }
        if rng.random_bool(0.4) {
            scene.add_component(e, MaterialComponent::new(if rng.random_bool(0.5) { "tiles" } else { "clay" }))?;
        }
        if rng.random_bool(0.15) {
            let near = rng.random_range(0.01..1.0);
            scene.add_component(
                e,
                CameraComponent {
                    projection: if rng.random_bool(0.5) { Projection::Perspective } else { Projection::Orthographic },
                    fov_y: rng.random_range(10.0..120.0),
                    ortho_height: rng.random_range(0.5..50.0),
                    near,
                    far: near + rng.random_range(1.0..500.0),
                    primary: rng.random_bool(0.5),
                },
            )?;
        }
        if rng.random_bool(0.15) {
            let light = LightComponent {
                direction: DVec3::new(f(rng), f(rng), f(rng)).normalize_or(DVec3::NEG_Y),
                color: DVec3::new(rng.random(), rng.random(), rng.random()),
                intensity: rng.random_range(0.0..5.0),
                casts_shadows: rng.random_bool(0.5),
            };
            scene.add_component(e, light)?;
        }
        if rng.random_bool(0.1) {
            scene.add_component(e, SkyboxComponent::new("sky"))?;
        }
        ids.push(e);
    }
    Ok(scene)
}

/// Entity ids with every reflected field value, in enrollment order.
fn fingerprint(scene: &Scene, registry: &ComponentRegistry) -> Vec<(Entity, Vec<String>)> {
    scene
        .entities()
        .iter()
        .map(|&e| {
            let comps = registry
                .entries()
                .iter()
                .filter_map(|entry| entry.read(scene, e).map(|fields| format!("{} {fields:?}", entry.tag)))
                .collect();
            (e, comps)
        })
        .collect()
}

fn serialization() -> Outcome {
    let registry = ComponentRegistry::standard();
    let manifest = catalog();
    let mut rng = StdRng::seed_from_u64(2024);
    let scenes = 200;
    let mut components = BTreeSet::new();
    for i in 0..scenes {
        let scene = ok(random_scene(&mut rng, &format!("scene {i}")))?;
        for &e in scene.entities() {
            for ty in ok(scene.component_types(e))? {
                components.insert(ty.name());
            }
        }
        let text = ok(save_scene(&scene, &registry, &manifest))?;
        let again = ok(save_scene(&scene, &registry, &manifest))?;
        ensure(text == again, || format!("scene {i}: save is not byte-stable"))?;
        let doc = ok(load_scene(&text, &registry))?;
        ensure(doc.scene.name() == scene.name(), || format!("scene {i}: name changed"))?;
        ensure(fingerprint(&doc.scene, &registry) == fingerprint(&scene, &registry), || {
            format!("scene {i}: loaded scene differs")
        })?;
        let resaved = ok(save_scene(&doc.scene, &registry, &doc.manifest))?;
        ensure(resaved == text, || format!("scene {i}: save(load(save)) differs"))?;
    }
    ensure(components.len() == 10, || format!("only {} component types exercised", components.len()))?;

    let mut big = ok(random_scene(&mut rng, "fuzz"))?;
    while big.entities().len() < 30 {
        big = ok(random_scene(&mut rng, "fuzz"))?;
    }
    let text = ok(save_scene(&big, &registry, &manifest))?;
    let full = fingerprint(&big, &registry);
    let mut rejected = 0;
    for case in 0..1000 {
        let mut cut = rng.random_range(0..text.len());
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        match load_scene(&text[..cut], &registry) {
            Err(_) => rejected += 1,
            Ok(doc) => {
                let complete = text[..cut].trim_end() == text.trim_end() && fingerprint(&doc.scene, &registry) == full;
                ensure(complete, || format!("truncation case {case} at byte {cut} loaded a partial scene"))?;
            }
        }
    }
    Ok(format!(
        "{scenes} random scenes round-trip byte-stably over {} component types; {rejected}/1000 truncations rejected, none partial",
        components.len()
    ))
}

// Bench.

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ecsgfx"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("`ecsgfx {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })?;
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn best_fps(res: &Resources, index: usize) -> Result<(f64, f64), String> {
    let config = BenchConfig {
        warmup: 1,
        frames: 3,
        ..BenchConfig::default()
    };
    let (mut inst, mut per) = (0.0f64, 0.0f64);
    for round in 0..6 {
        let order = if round % 2 == 0 {
            [Strategy::Instanced, Strategy::PerObject]
        } else {
            [Strategy::PerObject, Strategy::Instanced]
        };
        for strategy in order {
            let mut scene = ok(bench::build_bench_scene(index))?;
            let r = ok(bench::run_bench(&mut scene, index, res, strategy, &config))?;
            match strategy {
                Strategy::Instanced => inst = inst.max(r.avg_fps),
                Strategy::PerObject => per = per.max(r.avg_fps),
            }
        }
    }
    Ok((inst, per))
}

fn bench_harness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("bench.csv");
    let csv_arg = csv.to_string_lossy().into_owned();
    let args = [
        "bench", "--scene", "all", "--strategy", "both", "--frames", "2", "--warmup", "1", "--csv", &csv_arg, "--headless",
    ];
    run_cli(&args)?;
    let from_cli = ok(bench::read_csv(&csv))?;
    ensure(from_cli.len() == 10, || format!("{} CSV rows from the CLI", from_cli.len()))?;
    for r in &from_cli {
        let want = if r.strategy == Strategy::Instanced { 2 } else { [2, 11, 51, 51, 101][r.scene - 1] };
        ensure(r.draw_calls == want, || format!("scene {} {}: {} draws", r.scene, r.strategy, r.draw_calls))?;
    }

    let device = Device::new();
    let res = bench_resources(&device)?;
    let config = BenchConfig {
        warmup: 0,
        frames: 1,
        width: 64,
        height: 64,
    };
    let records = ok(bench::run_suite(&res, &[1, 2, 3, 4, 5], &Strategy::BOTH, &config))?;
    let path = dir.path().join("records.csv");
    ok(bench::write_csv(&records, &path))?;
    let parsed: Vec<BenchRecord> = ok(bench::read_csv(&path))?;
    ensure(parsed == records, || "CSV parse-back differs from the records".into())?;

    let mut notes = Vec::new();
    for index in 3..=5 {
        let (inst, per) = best_fps(&res, index)?;
        ensure(inst >= per, || format!("scene {index}: instanced {inst:.2} fps < per-object {per:.2} fps"))?;
        notes.push(format!("scene {index} {inst:.1} vs {per:.1} fps"));
    }
    Ok(format!("CLI run headless, CSV parse-back equal; {}", notes.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("ecs-cache-coherence", ecs_cache_coherence),
        ("gravity", gravity),
        ("hierarchy", hierarchy),
        ("resource-idempotence", resource_idempotence),
        ("batching", batching),
        ("strategy-equivalence", strategy_equivalence),
        ("golden-images", golden_images),
        ("compute-filter", compute_filter),
        ("serialization", serialization),
        ("bench", bench_harness),
    ];
    let only: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

