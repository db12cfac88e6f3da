use ecsgfx::bench::{build_bench_scene, register_bench_resources};
use ecsgfx::gallery::{default_assets_root, run_example, PixelOracle};
use ecsgfx::gpu::{
    BindGroupEntry, BindingResource, BufferDescriptor, BufferUsages, Color, ComputePipelineDescriptor, Device,
    SamplerDescriptor,
};
use ecsgfx::renderer::oracle::{
    reflect, sample_environment, shade_blinn_phong, shadow_visibility, DepthMap, RayScene,
};
use ecsgfx::renderer::{build_batches, collect_renderables, Renderable, SHADOW_BIAS};
use ecsgfx::{
    CameraComponent, Error, Image, LinkComponent, MaterialComponent, MaterialData, MeshComponent, MeshSource,
    OffscreenTarget, Primitive, Renderer, Resources, Scene, ShaderSource, Strategy, TextureData,
    TransformComponent, TransformSystem,
};
use glam::{DMat4, DVec3};
use rand::{Rng, SeedableRng};

fn bench_resources(device: &Device) -> Resources {
    let mut res = Resources::new(device, default_assets_root()).unwrap();
    register_bench_resources(&mut res).unwrap();
    res
}

fn render(scene: &Scene, res: &Resources, strategy: Strategy, size: u32) -> (ecsgfx::FrameStats, Image) {
    let target = OffscreenTarget::new(res.device(), size, size).unwrap();
    let mut renderer = Renderer::new(res).unwrap();
    let stats = renderer.render_frame(scene, res, strategy, &target).unwrap();
    (stats, target.readback(res.device()).unwrap())
}

#[test]
fn bench_scene_batching_laws() {
    let device = Device::new();
    let res = bench_resources(&device);
    for (index, renderables) in [(1, 1), (2, 10), (3, 50), (4, 50), (5, 100)] {
        let scene = build_bench_scene(index).unwrap();
        let items = collect_renderables(&scene, &res).unwrap();
        assert_eq!(items.len(), renderables);
        let batches = build_batches(&items);
        assert_eq!(batches.iter().map(|b| b.instance_count()).sum::<usize>(), renderables);

        let (instanced, _) = render(&scene, &res, Strategy::Instanced, 32);
        let (per_object, _) = render(&scene, &res, Strategy::PerObject, 32);
        // One draw per batch or per object, plus the skybox.
        assert_eq!(instanced.draw_calls, 2, "scene {index}");
        assert_eq!(per_object.draw_calls, renderables as u64 + 1, "scene {index}");
        assert_eq!(instanced.instances_drawn, renderables as u64);
        assert_eq!(per_object.instances_drawn, renderables as u64);
    }
}

#[test]
fn strategies_render_the_same_image() {
    let device = Device::new();
    let res = bench_resources(&device);
    for index in 1..=3 {
        let scene = build_bench_scene(index).unwrap();
        let (_, a) = render(&scene, &res, Strategy::Instanced, 256);
        let (_, b) = render(&scene, &res, Strategy::PerObject, 256);
        let diff = a.mean_abs_diff(&b).unwrap();
        assert!(diff <= 2.0, "scene {index}: mean diff {diff}");
    }
}

fn unlit_resources(device: &Device) -> Resources {
    let mut res = Resources::new(device, default_assets_root()).unwrap();
    res.build_shader("unlit", ShaderSource::file("shaders/unlit.wgsl")).unwrap();
    res.build_material("red", MaterialData::new("unlit", &[]).with_base_color([1.0, 0.0, 0.0, 1.0]))
        .unwrap();
    res.build_material("blue", MaterialData::new("unlit", &[]).with_base_color([0.0, 0.0, 1.0, 1.0]))
        .unwrap();
    res.build_mesh("cube", MeshSource::Primitive(Primitive::Cube)).unwrap();
    res
}

fn model(scene: &mut Scene, material: Option<&str>, x: f64) -> ecsgfx::Entity {
    let e = scene.enroll_entity();
    scene
        .add_component(e, TransformComponent::from_translation(DVec3::new(x, 0.0, 0.0)))
        .unwrap();
    scene.add_component(e, LinkComponent::new(None)).unwrap();
    scene.add_component(e, MeshComponent::new("cube")).unwrap();
    if let Some(m) = material {
        scene.add_component(e, MaterialComponent::new(m)).unwrap();
    }
    e
}

#[test]
fn collect_tracks_component_changes() {
    let device = Device::new();
    let res = unlit_resources(&device);
    let mut scene = Scene::new("c");
    scene.register_system(TransformSystem).unwrap();
    for i in 0..3 {
        model(&mut scene, Some("red"), i as f64);
    }
    let partial = model(&mut scene, None, 5.0);
    assert_eq!(collect_renderables(&scene, &res).unwrap().len(), 3);
    scene.add_component(partial, MaterialComponent::new("blue")).unwrap();
    assert_eq!(collect_renderables(&scene, &res).unwrap().len(), 4);
    scene.remove_component::<MeshComponent>(partial).unwrap();
    assert_eq!(collect_renderables(&scene, &res).unwrap().len(), 3);
}

#[test]
fn collect_reports_unregistered_names() {
    let device = Device::new();
    let res = unlit_resources(&device);
    let mut scene = Scene::new("c");
    model(&mut scene, Some("missing"), 0.0);
    match collect_renderables(&scene, &res) {
        Err(Error::DanglingResource { name, .. }) => assert_eq!(name, "missing"),
        other => panic!("expected a dangling material, got {other:?}"),
    }
}

#[test]
fn batches_group_by_material_in_first_seen_order() {
    let device = Device::new();
    let res = unlit_resources(&device);
    let mut scene = Scene::new("b");
    scene.register_system(TransformSystem).unwrap();
    for i in 0..10 {
        model(&mut scene, Some(if i % 2 == 0 { "red" } else { "blue" }), i as f64);
    }
    scene.tick(0.0).unwrap();
    let items = collect_renderables(&scene, &res).unwrap();
    let batches = build_batches(&items);
    assert_eq!(batches.len(), 2);
    assert!(batches.iter().all(|b| b.instance_count() == 5));
    assert_eq!(batches[0].material, res.lookup(ecsgfx::ResourceKind::Material, "red").unwrap());
    assert_eq!(batches[0].matrices[1].w_axis.x, 2.0);
    assert!(build_batches(&[] as &[Renderable]).is_empty());
}

#[test]
fn clear_color_reads_back_exactly() {
    let device = Device::new();
    let target = OffscreenTarget::new(&device, 7, 5).unwrap();
    target
        .clear(
            &device,
            Color {
                r: 0.2,
                g: 0.3,
                b: 0.4,
                a: 1.0,
            },
        )
        .unwrap();
    let img = target.readback(&device).unwrap();
    assert_eq!((img.width, img.height), (7, 5));
    assert!(img.pixels.chunks(4).all(|p| p == [51, 77, 102, 255]));
}

#[test]
fn empty_targets_are_rejected() {
    let device = Device::new();
    for (w, h) in [(0, 0), (0, 4), (4, 0)] {
        assert!(matches!(
            OffscreenTarget::new(&device, w, h),
            Err(Error::EmptyTarget { .. })
        ));
    }
}

#[test]
fn readback_is_deterministic() {
    let device = Device::new();
    let res = bench_resources(&device);
    let scene = build_bench_scene(2).unwrap();
    let target = OffscreenTarget::new(&device, 96, 64).unwrap();
    let mut renderer = Renderer::new(&res).unwrap();
    renderer.render_frame(&scene, &res, Strategy::Instanced, &target).unwrap();
    let a = target.readback(&device).unwrap();
    let b = target.readback(&device).unwrap();
    renderer.render_frame(&scene, &res, Strategy::Instanced, &target).unwrap();
    let c = target.readback(&device).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn scenes_need_a_camera() {
    let device = Device::new();
    let res = unlit_resources(&device);
    let mut scene = Scene::new("dark");
    model(&mut scene, Some("red"), 0.0);
    let target = OffscreenTarget::new(&device, 8, 8).unwrap();
    let mut renderer = Renderer::new(&res).unwrap();
    assert!(matches!(
        renderer.render_frame(&scene, &res, Strategy::Instanced, &target),
        Err(Error::NoCamera)
    ));
    let cam = scene.enroll_entity();
    scene
        .add_component(cam, CameraComponent { primary: false, ..CameraComponent::default() })
        .unwrap();
    scene.add_component(cam, TransformComponent::default()).unwrap();
    assert!(matches!(
        renderer.render_frame(&scene, &res, Strategy::Instanced, &target),
        Err(Error::NoCamera)
    ));
}

#[test]
fn blinn_phong_scalar_cases() {
    let n = DVec3::Z;
    let a = 60f64.to_radians();
    let l = DVec3::new(a.sin(), 0.0, a.cos());
    let one = DVec3::ONE;
    let diffuse = shade_blinn_phong(n, l, n, one, one, 0.0, 1.0, 0.0, 2.0);
    assert!((diffuse - DVec3::splat(0.5)).abs().max_element() < 1e-6);
    // H sits halfway between N and L, at 30 degrees from N.
    let spec = shade_blinn_phong(n, l, n, one, one, 0.0, 0.0, 0.2, 2.0);
    let expected = 0.2 * 30f64.to_radians().cos().powi(64);
    assert!((spec - DVec3::splat(expected)).abs().max_element() < 1e-6);
    let behind = shade_blinn_phong(n, -l, n, one, DVec3::new(0.5, 0.4, 0.3), 0.1, 0.7, 0.2, 2.0);
    assert!((behind - DVec3::new(0.05, 0.04, 0.03)).abs().max_element() < 1e-12);
    let grazing = shade_blinn_phong(n, DVec3::X, n, one, one, 0.1, 0.7, 0.2, 2.0);
    assert!((grazing - DVec3::splat(0.1)).abs().max_element() < 1e-12);
}

#[test]
fn blinn_phong_example_matches_oracle() {
    let device = Device::new();
    let run = run_example("blinn-phong", &device, &default_assets_root(), 128, 128).unwrap();
    let report = PixelOracle::new(&run).unwrap().compare(&run.image, 2);
    assert!(report.checked > 3000, "{report:?}");
    assert!(report.max_error <= 2.0, "{report:?}");
}

#[test]
fn reflection_examples() {
    assert_eq!(reflect(DVec3::NEG_Z, DVec3::Z), DVec3::Z);
    let r = reflect(DVec3::new(1.0, -1.0, 0.0).normalize(), DVec3::Y);
    assert!((r - DVec3::new(1.0, 1.0, 0.0).normalize()).length() < 1e-12);
}

const CUBE_PROBE: &str = "
@group(0) @binding(0) var env_map: texture_cube<f32>;
@group(0) @binding(1) var env_sampler: sampler;
@group(0) @binding(2) var<storage, read> dirs: array<vec4<f32>>;
@group(0) @binding(3) var<storage, read_write> colors: array<vec4<f32>>;

@compute @workgroup_size(8, 1, 1)
fn main(@builtin(global_invocation_id) id: vec3<u32>) {
    colors[id.x] = textureSampleLevel(env_map, env_sampler, dirs[id.x].xyz, 0.0);
}
";

/// Samples `cubemap` on the device along each direction (count divisible by 8).
fn sample_cube_on_device(res: &Resources, cubemap: &str, dirs: &[DVec3]) -> Vec<DVec3> {
    let device = res.device();
    let module = device.create_shader_module("cube probe", CUBE_PROBE).unwrap();
    let pipeline = device
        .create_compute_pipeline(&ComputePipelineDescriptor {
            label: None,
            layout: None,
            module: &module,
            entry_point: "main",
        })
        .unwrap();
    let input: Vec<f32> = dirs.iter().flat_map(|d| [d.x as f32, d.y as f32, d.z as f32, 0.0]).collect();
    let input = device
        .create_buffer_init(None, bytemuck::cast_slice(&input), BufferUsages::STORAGE)
        .unwrap();
    let size = dirs.len() as u64 * 16;
    let output = device
        .create_buffer(&BufferDescriptor {
            label: None,
            size,
            usage: BufferUsages::STORAGE | BufferUsages::COPY_SRC,
        })
        .unwrap();
    let readback = device
        .create_buffer(&BufferDescriptor {
            label: None,
            size,
            usage: BufferUsages::COPY_DST | BufferUsages::MAP_READ,
        })
        .unwrap();
    let sampler = device.create_sampler(&SamplerDescriptor::linear_clamp()).unwrap();
    let group = device
        .create_bind_group(
            &pipeline.get_bind_group_layout(0).unwrap(),
            &[
                BindGroupEntry {
                    binding: 0,
                    resource: BindingResource::TextureView(res.cubemap(cubemap).unwrap().view.clone()),
                },
                BindGroupEntry {
                    binding: 1,
                    resource: BindingResource::Sampler(sampler),
                },
                BindGroupEntry {
                    binding: 2,
                    resource: BindingResource::whole_buffer(&input),
                },
                BindGroupEntry {
                    binding: 3,
                    resource: BindingResource::whole_buffer(&output),
                },
            ],
        )
        .unwrap();
    let mut enc = device.create_command_encoder().unwrap();
    {
        let mut pass = enc.begin_compute_pass();
        pass.set_pipeline(&pipeline);
        pass.set_bind_group(0, &group);
        pass.dispatch_workgroups(dirs.len() as u32 / 8, 1, 1);
    }
    enc.copy_buffer_to_buffer(&output, 0, &readback, 0, size);
    device.queue().submit([enc.finish()]).unwrap();
    let bytes = readback.map_read().unwrap();
    let floats: &[f32] = bytemuck::cast_slice(&bytes);
    floats
        .chunks_exact(4)
        .map(|c| DVec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect()
}

#[test]
fn environment_sampling_matches_cpu_reference() {
    let device = Device::new();
    let res = bench_resources(&device);
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let dirs: Vec<DVec3> = (0..1000)
        .map(|_| loop {
            let d = DVec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if (0.01..=1.0).contains(&d.length_squared()) {
                break d.normalize();
            }
        })
        .collect();
    let gpu = sample_cube_on_device(&res, ecsgfx::bench::SKYBOX, &dirs);
    let faces = &res.cubemap(ecsgfx::bench::SKYBOX).unwrap().images;
    let worst = dirs
        .iter()
        .zip(&gpu)
        .map(|(d, g)| (*g - sample_environment(*d, faces)).abs().max_element())
        .fold(0.0, f64::max);
    assert!(worst <= 2.0 / 255.0, "worst {worst}");
}

#[test]
fn uniform_face_returns_its_color() {
    let device = Device::new();
    let mut res = Resources::new(&device, ".").unwrap();
    let colors = [[200, 10, 30, 255], [1, 2, 3, 255], [9, 9, 9, 255], [40, 40, 40, 255], [0, 90, 0, 255], [0, 0, 90, 255]];
    let faces = colors.map(|c| TextureData::rgba(&Image::filled(4, 4, c)));
    res.build_cubemap("flat", faces).unwrap();
    let dirs: Vec<DVec3> = (0..16)
        .map(|i| DVec3::new(1.0, (i % 4) as f64 * 0.2 - 0.3, (i / 4) as f64 * 0.2 - 0.3))
        .collect();
    for got in sample_cube_on_device(&res, "flat", &dirs) {
        assert_eq!((got * 255.0).round(), DVec3::new(200.0, 10.0, 30.0));
    }
}

#[test]
fn unoccupied_shadow_map_is_fully_lit() {
    let map = DepthMap {
        size: 16,
        depths: vec![1.0; 256],
    };
    let light = DMat4::orthographic_rh(-5.0, 5.0, -5.0, 5.0, 0.1, 20.0) * DMat4::look_at_rh(DVec3::Y * 10.0, DVec3::ZERO, DVec3::Z);
    for p in [DVec3::ZERO, DVec3::new(2.0, 1.0, -3.0), DVec3::new(100.0, 0.0, 0.0)] {
        assert_eq!(shadow_visibility(p, DVec3::Y, DVec3::Y, light, &map, SHADOW_BIAS), 1.0);
    }
}

#[test]
fn shadow_map_agrees_with_ray_occlusion() {
    let device = Device::new();
    let run = run_example("shadow", &device, &default_assets_root(), 64, 64).unwrap();
    let frame = run.frame.unwrap();
    let map = run.shadow_map.as_ref().unwrap();
    let scene = run.scene.as_ref().unwrap();
    let mut rays = RayScene::new();
    for r in collect_renderables(scene, &run.resources).unwrap() {
        rays.add(&run.resources.mesh_by_handle(r.mesh).unwrap().data, r.world);
    }
    let visibility = |p: DVec3| shadow_visibility(p, DVec3::Y, frame.to_light, frame.light_view_proj, map, SHADOW_BIAS);
    let occluded = |p: DVec3| rays.occluded(p + DVec3::Y * 1e-4, frame.to_light);

    // Straight down the light ray from the box center onto the floor.
    let under = DVec3::new(0.0, 0.75, 0.0) - frame.to_light * (0.75 / frame.to_light.y);
    assert!(occluded(under));
    assert_eq!(visibility(under), 0.0);
    let open = DVec3::new(2.5, 0.0, 2.5);
    assert!(!occluded(open));
    assert_eq!(visibility(open), 1.0);

    // Walking out of the shadow passes through a partially lit band.
    let steps: Vec<f64> = (0..=400)
        .map(|i| visibility(under.lerp(open, i as f64 / 400.0)))
        .collect();
    assert!(steps.iter().any(|v| *v > 0.0 && *v < 1.0));

    // Away from that band the map and the ray caster agree.
    let mut agree = 0;
    let mut total = 0;
    for i in 0..40 {
        for j in 0..40 {
            let p = DVec3::new(-2.9 + i as f64 * 0.145, 0.0, -2.9 + j as f64 * 0.145);
            let v = visibility(p);
            if v == 0.0 || v == 1.0 {
                total += 1;
                agree += usize::from((v == 0.0) == occluded(p));
            }
        }
    }
    assert!(total > 1400);
    assert!(agree as f64 >= 0.98 * total as f64, "{agree}/{total}");
}
