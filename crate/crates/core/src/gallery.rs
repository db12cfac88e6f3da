//! Small example programs, from a bare device triangle up to shadowed scenes.

use std::path::{Path, PathBuf};

use ecsgfx_gpu as gpu;
use glam::{DVec2, DVec3, DVec4};
use gpu::{
    BufferUsages, Color, ColorTargetState, LoadOp, PrimitiveState, RenderPassColorAttachment, RenderPassDescriptor,
    RenderPipelineDescriptor, VertexAttribute, VertexBufferLayout, VertexFormat, VertexState, VertexStepMode,
};

use crate::components::{RotateComponent, RotationSystem};
use crate::ecs::{Entity, Scene};
use crate::editing::is_editor_entity;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::renderer::oracle::{
    reflect, sample_bilinear, sample_environment, shade_blinn_phong_shadowed, shadow_visibility, DepthMap, Hit, RayScene,
};
use crate::renderer::{
    collect_renderables, dispatch_image_filter, filter_reference, CameraComponent, FilterKind, FrameInfo, LightComponent, MaterialComponent, MeshComponent,
    OffscreenTarget, Renderer, SkyboxComponent, Strategy, CLEAR_COLOR, COLOR_FORMAT, SHADOW_BIAS,
};
use crate::resources::{MaterialData, MeshSource, Primitive, Resources, ShaderSource, TextureData};
use crate::scenegraph::{looking_at, set_parent, LinkComponent, TransformComponent, TransformSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Example {
    pub name: &'static str,
    pub description: &'static str,
}

pub const EXAMPLES: [Example; 7] = [
    Example {
        name: "triangle",
        description: "vertex-colored triangle drawn with the raw device API",
    },
    Example {
        name: "textured-cube",
        description: "unlit cube with a checker texture",
    },
    Example {
        name: "scenegraph",
        description: "cubes orbiting a spinning torus through parent links",
    },
    Example {
        name: "blinn-phong",
        description: "torus model under a directional light",
    },
    Example {
        name: "environment",
        description: "reflective sphere in front of a skybox",
    },
    Example {
        name: "compute-filter",
        description: "grayscale then box blur of a texture in compute shaders",
    },
    Example {
        name: "shadow",
        description: "cube casting a filtered shadow onto a plane",
    },
];

/// Light travel direction shared by the lit examples.
pub const LIGHT_DIRECTION: DVec3 = DVec3::new(-0.5, -0.7, -0.6);

/// Triangle vertices as (x, y) in clip space and rgb.
pub const TRIANGLE: [([f32; 2], [f32; 3]); 3] = [
    ([0.0, 0.6], [1.0, 0.0, 0.0]),
    ([-0.6, -0.5], [0.0, 1.0, 0.0]),
    ([0.6, -0.5], [0.0, 0.0, 1.0]),
];

/// Asset directory: `$ECSGFX_ASSETS` if set, else the one shipped with this crate.
pub fn default_assets_root() -> PathBuf {
    std::env::var_os("ECSGFX_ASSETS")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/assets")))
}

/// Output of one example, with what is needed to check it independently.
#[derive(Debug)]
pub struct ExampleRun {
    pub name: String,
    pub image: Image,
    pub scene: Option<Scene>,
    pub resources: Resources,
    pub frame: Option<FrameInfo>,
    pub shadow_map: Option<DepthMap>,
}

pub fn run_example(name: &str, device: &gpu::Device, assets: &Path, width: u32, height: u32) -> Result<ExampleRun> {
    let mut resources = Resources::new(device, assets)?;
    let scene = match name {
        "triangle" => {
            let image = triangle(device, width, height)?;
            return Ok(ExampleRun {
                name: name.to_owned(),
                image,
                scene: None,
                resources,
                frame: None,
                shadow_map: None,
            });
        }
        "compute-filter" => {
            resources.build_texture("checker", TextureData::file("textures/checker.png"))?;
            let source = resources.texture("checker").expect("just built").image.clone();
            let gray = dispatch_image_filter(device, &source, FilterKind::Grayscale)?;
            let image = dispatch_image_filter(device, &gray, FilterKind::BoxBlur3)?;
            return Ok(ExampleRun {
                name: name.to_owned(),
                image,
                scene: None,
                resources,
                frame: None,
                shadow_map: None,
            });
        }
        "textured-cube" => textured_cube(&mut resources)?,
        "scenegraph" => scenegraph(&mut resources)?,
        "blinn-phong" => blinn_phong(&mut resources)?,
        "environment" => environment(&mut resources)?,
        "shadow" => shadow(&mut resources)?,
        _ => return Err(Error::UnknownExample(name.to_owned())),
    };
    let target = OffscreenTarget::new(device, width, height)?;
    let mut renderer = Renderer::new(&resources)?;
    renderer.render_frame(&scene, &resources, Strategy::Instanced, &target)?;
    let image = target.readback(device)?;
    let frame = renderer.last_frame().copied();
    let shadow_map = match frame {
        Some(f) if f.shadows => Some(renderer.read_shadow_map()?),
        _ => None,
    };
    Ok(ExampleRun {
        name: name.to_owned(),
        image,
        scene: Some(scene),
        resources,
        frame,
        shadow_map,
    })
}

const TRIANGLE_WGSL: &str = include_str!("../assets/shaders/triangle.wgsl");

fn triangle(device: &gpu::Device, width: u32, height: u32) -> Result<Image> {
    let target = OffscreenTarget::new(device, width, height)?;
    let module = device.create_shader_module("triangle", TRIANGLE_WGSL)?;
    let pipeline = device.create_render_pipeline(&RenderPipelineDescriptor {
        label: Some("triangle"),
        layout: None,
        vertex: VertexState {
            module: &module,
            entry_point: "vs_main",
            buffers: &[VertexBufferLayout {
                array_stride: 20,
                step_mode: VertexStepMode::Vertex,
                attributes: vec![
                    VertexAttribute {
                        format: VertexFormat::Float32x2,
                        offset: 0,
                        shader_location: 0,
                    },
                    VertexAttribute {
                        format: VertexFormat::Float32x3,
                        offset: 8,
                        shader_location: 1,
                    },
                ],
            }],
        },
        fragment: Some(gpu::FragmentState {
            module: &module,
            entry_point: "fs_main",
            targets: &[ColorTargetState {
                format: COLOR_FORMAT,
                blend: None,
            }],
        }),
        primitive: PrimitiveState::default(),
        depth_stencil: None,
    })?;
    let data: Vec<f32> = TRIANGLE.iter().flat_map(|(p, c)| p.iter().chain(c).copied()).collect();
    let vertices = device.create_buffer_init(Some("triangle"), bytemuck::cast_slice(&data), BufferUsages::VERTEX)?;
    let view = target.color.create_view(&Default::default())?;
    let mut enc = device.create_command_encoder()?;
    {
        let mut pass = enc.begin_render_pass(&RenderPassDescriptor {
            label: Some("triangle"),
            color_attachments: vec![RenderPassColorAttachment {
                view,
                load: LoadOp::Clear(Color::BLACK),
            }],
            depth_attachment: None,
        });
        pass.set_pipeline(&pipeline);
        pass.set_vertex_buffer(0, &vertices, 0);
        pass.draw(0..3, 0..1);
    }
    device.queue().submit([enc.finish()])?;
    target.readback(device)
}

/// A scene with the transform system and a primary camera at `eye` looking at
/// the origin. With `spin`, rotation runs before transform propagation.
fn base_scene(name: &str, eye: DVec3, spin: bool) -> Result<Scene> {
    let mut scene = Scene::new(name);
    if spin {
        scene.register_system(RotationSystem)?;
    }
    scene.register_system(TransformSystem)?;
    let camera = scene.enroll_entity();
    scene.add_component(
        camera,
        TransformComponent::from_translation(eye).with_rotation(looking_at(-eye)),
    )?;
    scene.add_component(camera, LinkComponent::new(None))?;
    scene.add_component(camera, CameraComponent::default())?;
    Ok(scene)
}

fn add_model(scene: &mut Scene, mesh: &str, material: &str, transform: TransformComponent) -> Result<Entity> {
    let e = scene.enroll_entity();
    scene.add_component(e, transform)?;
    scene.add_component(e, LinkComponent::new(None))?;
    scene.add_component(e, MeshComponent::new(mesh))?;
    scene.add_component(e, MaterialComponent::new(material))?;
    Ok(e)
}

fn add_light(scene: &mut Scene, shadows: bool) -> Result<()> {
    let e = scene.enroll_entity();
    scene.add_component(e, LightComponent::directional(LIGHT_DIRECTION).with_shadows(shadows))?;
    Ok(())
}

fn textured_cube(res: &mut Resources) -> Result<Scene> {
    res.build_shader("unlit", ShaderSource::file("shaders/unlit.wgsl"))?;
    res.build_texture("checker", TextureData::file("textures/checker.png"))?;
    res.build_material("checker", MaterialData::new("unlit", &["checker"]))?;
    res.build_mesh("cube", MeshSource::Primitive(Primitive::Cube))?;
    let mut scene = base_scene("textured-cube", DVec3::new(0.0, 0.0, 3.2), false)?;
    add_model(
        &mut scene,
        "cube",
        "checker",
        TransformComponent::default()
            .with_rotation(DVec3::new(25.0, 35.0, 0.0))
            .with_scale(DVec3::splat(1.2)),
    )?;
    scene.tick(0.0)?;
    Ok(scene)
}

fn scenegraph(res: &mut Resources) -> Result<Scene> {
    res.build_shader("lit", ShaderSource::file("shaders/lit_blinn_phong.wgsl"))?;
    res.build_material("gold", MaterialData::new("lit", &[]).with_base_color([0.9, 0.7, 0.2, 1.0]))?;
    res.build_material("teal", MaterialData::new("lit", &[]).with_base_color([0.2, 0.7, 0.7, 1.0]))?;
    res.build_mesh("torus", MeshSource::Obj("models/torus.obj".into()))?;
    res.build_mesh("cube", MeshSource::Primitive(Primitive::Cube))?;
    let mut scene = base_scene("scenegraph", DVec3::new(0.0, 3.0, 6.0), true)?;
    add_light(&mut scene, false)?;
    let root = add_model(&mut scene, "torus", "gold", TransformComponent::default())?;
    scene.add_component(root, RotateComponent { degrees_per_second: 90.0 })?;
    for i in 0..4 {
        let angle = i as f64 * std::f64::consts::FRAC_PI_2;
        let child = add_model(
            &mut scene,
            "cube",
            "teal",
            TransformComponent::from_translation(DVec3::new(2.0 * angle.cos(), 0.0, 2.0 * angle.sin()))
                .with_scale(DVec3::splat(0.4)),
        )?;
        set_parent(&mut scene, child, Some(root))?;
    }
    for _ in 0..30 {
        scene.tick(1.0 / 60.0)?;
    }
    Ok(scene)
}

/// Material of the lit model example.
pub fn blinn_phong_material() -> MaterialData {
    MaterialData::new("lit", &[])
        .with_base_color([0.9, 0.5, 0.3, 1.0])
        .with_glossiness(2.0)
}

fn blinn_phong(res: &mut Resources) -> Result<Scene> {
    res.build_shader("lit", ShaderSource::file("shaders/lit_blinn_phong.wgsl"))?;
    res.build_material("clay", blinn_phong_material())?;
    res.build_mesh("torus", MeshSource::Obj("models/torus.obj".into()))?;
    let mut scene = base_scene("blinn-phong", DVec3::new(0.0, 0.0, 4.5), false)?;
    add_light(&mut scene, false)?;
    add_model(
        &mut scene,
        "torus",
        "clay",
        TransformComponent::default().with_rotation(DVec3::new(60.0, 20.0, 0.0)),
    )?;
    scene.tick(0.0)?;
    Ok(scene)
}

pub const SKY_FACES: [&str; 6] = ["px", "nx", "py", "ny", "pz", "nz"];

fn environment(res: &mut Resources) -> Result<Scene> {
    res.build_shader("env", ShaderSource::file("shaders/env_reflect.wgsl"))?;
    res.build_cubemap("sky", SKY_FACES.map(|f| TextureData::file(format!("textures/sky/{f}.png"))))?;
    res.build_material(
        "chrome",
        MaterialData::new("env", &[])
            .with_base_color([0.8, 0.8, 0.85, 1.0])
            .with_reflectivity(0.7),
    )?;
    res.build_mesh("sphere", MeshSource::Primitive(Primitive::Sphere))?;
    let mut scene = base_scene("environment", DVec3::new(0.0, 0.4, 3.6), false)?;
    add_light(&mut scene, false)?;
    add_model(&mut scene, "sphere", "chrome", TransformComponent::default())?;
    let sky = scene.enroll_entity();
    scene.add_component(sky, SkyboxComponent::new("sky"))?;
    scene.tick(0.0)?;
    Ok(scene)
}

fn shadow(res: &mut Resources) -> Result<Scene> {
    res.build_shader("lit", ShaderSource::file("shaders/lit_blinn_phong.wgsl"))?;
    res.build_material("floor", MaterialData::new("lit", &[]).with_base_color([0.8, 0.8, 0.8, 1.0]))?;
    res.build_material("box", MaterialData::new("lit", &[]).with_base_color([0.3, 0.5, 0.9, 1.0]))?;
    res.build_mesh("plane", MeshSource::Primitive(Primitive::Plane))?;
    res.build_mesh("cube", MeshSource::Primitive(Primitive::Cube))?;
    let mut scene = base_scene("shadow", DVec3::new(0.0, 3.0, 4.5), false)?;
    add_light(&mut scene, true)?;
    add_model(
        &mut scene,
        "plane",
        "floor",
        TransformComponent::default().with_scale(DVec3::new(3.0, 1.0, 3.0)),
    )?;
    add_model(
        &mut scene,
        "cube",
        "box",
        TransformComponent::from_translation(DVec3::new(0.0, 0.75, 0.0)).with_rotation(DVec3::new(0.0, 30.0, 0.0)),
    )?;
    scene.tick(0.0)?;
    Ok(scene)
}

/// Result of comparing an image against [`PixelOracle`] predictions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProbeReport {
    pub checked: usize,
    pub skipped: usize,
    /// Largest channel error over the checked pixels, in 8-bit units.
    pub max_error: f64,
}

struct Shading<'a> {
    shader: &'a str,
    material: &'a MaterialData,
    albedo_map: Option<&'a Image>,
}

struct SceneOracle<'a> {
    rays: RayScene,
    objects: Vec<Shading<'a>>,
    frame: FrameInfo,
    sky: Option<&'a [Image]>,
    shadow_map: Option<&'a DepthMap>,
}

enum OracleKind<'a> {
    Triangle,
    Image(Image),
    Scene(Box<SceneOracle<'a>>),
}

/// Predicts example pixels on the CPU: barycentric interpolation for the
/// triangle, the reference filters for the compute example and ray casting
/// with the shading oracles for scene examples.
pub struct PixelOracle<'a> {
    width: u32,
    height: u32,
    kind: OracleKind<'a>,
}

impl<'a> PixelOracle<'a> {
    pub fn new(run: &'a ExampleRun) -> Result<Self> {
        let (width, height) = (run.image.width, run.image.height);
        let kind = match run.name.as_str() {
            "triangle" => OracleKind::Triangle,
            "compute-filter" => {
                let source = &run.resources.texture("checker").expect("built by the example").image;
                let gray = filter_reference(source, FilterKind::Grayscale);
                OracleKind::Image(filter_reference(&gray, FilterKind::BoxBlur3))
            }
            _ => {
                let scene = run.scene.as_ref().expect("scene examples keep their scene");
                let frame = run.frame.ok_or(Error::NoCamera)?;
                let res = &run.resources;
                let mut rays = RayScene::new();
                let mut objects = Vec::new();
                for r in collect_renderables(scene, res)? {
                    let mesh = res.mesh_by_handle(r.mesh).expect("collected meshes exist");
                    let material = res.material_by_handle(r.material).expect("collected materials exist");
                    rays.add(&mesh.data, r.world);
                    objects.push(Shading {
                        shader: &res.shader_by_handle(material.shader).expect("materials own a shader").name,
                        material: &material.data,
                        albedo_map: material.data.textures.first().and_then(|t| res.texture(t)).map(|t| &t.image),
                    });
                }
                let sky = scene
                    .entities()
                    .iter()
                    .filter(|e| !is_editor_entity(scene, **e))
                    .find_map(|e| scene.get::<SkyboxComponent>(*e))
                    .and_then(|s| res.cubemap(&s.cubemap))
                    .map(|c| c.images.as_slice());
                OracleKind::Scene(Box::new(SceneOracle {
                    rays,
                    objects,
                    frame,
                    sky,
                    shadow_map: run.shadow_map.as_ref(),
                }))
            }
        };
        Ok(PixelOracle { width, height, kind })
    }

    /// Expected linear rgb of pixel `(x, y)`, or `None` where the prediction is
    /// not robust: silhouettes, triangle edges and penumbra boundaries.
    pub fn predict(&self, x: u32, y: u32) -> Option<DVec3> {
        match &self.kind {
            OracleKind::Triangle => self.triangle(x, y),
            OracleKind::Image(img) => {
                let p = img.pixel(x, y);
                Some(DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64) / 255.0)
            }
            OracleKind::Scene(s) => self.scene(s, x, y),
        }
    }

    /// Checks every `step`-th pixel in both directions.
    pub fn compare(&self, image: &Image, step: u32) -> ProbeReport {
        let mut report = ProbeReport::default();
        for y in (step / 2..image.height).step_by(step as usize) {
            for x in (step / 2..image.width).step_by(step as usize) {
                let Some(expected) = self.predict(x, y) else {
                    report.skipped += 1;
                    continue;
                };
                let p = image.pixel(x, y);
                let got = DVec3::new(p[0] as f64, p[1] as f64, p[2] as f64);
                let err = (got - expected * 255.0).abs().max_element();
                report.max_error = report.max_error.max(err);
                report.checked += 1;
            }
        }
        report
    }

    fn ndc(&self, x: f64, y: f64) -> DVec2 {
        DVec2::new(
            (x + 0.5) / self.width as f64 * 2.0 - 1.0,
            1.0 - (y + 0.5) / self.height as f64 * 2.0,
        )
    }

    fn triangle(&self, x: u32, y: u32) -> Option<DVec3> {
        let p = self.ndc(x as f64, y as f64);
        let v = TRIANGLE.map(|(pos, _)| DVec2::new(pos[0] as f64, pos[1] as f64));
        let area = (v[1] - v[0]).perp_dot(v[2] - v[0]);
        let w = [
            (v[2] - v[1]).perp_dot(p - v[1]) / area,
            (v[0] - v[2]).perp_dot(p - v[2]) / area,
            (v[1] - v[0]).perp_dot(p - v[0]) / area,
        ];
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        if min.abs() < 0.02 {
            return None;
        }
        if min < 0.0 {
            return Some(DVec3::ZERO);
        }
        Some((0..3).map(|i| DVec3::from(TRIANGLE[i].1.map(f64::from)) * w[i]).sum())
    }

    fn scene(&self, s: &SceneOracle<'_>, x: u32, y: u32) -> Option<DVec3> {
        const OFFSETS: [(f64, f64); 5] = [(0.0, 0.0), (-0.45, -0.45), (0.45, -0.45), (-0.45, 0.45), (0.45, 0.45)];
        let mut center = None;
        let mut first: Option<(Option<usize>, f64)> = None;
        for (dx, dy) in OFFSETS {
            let (origin, dir) = self.ray(s, x as f64 + dx, y as f64 + dy);
            let hit = s.rays.intersect(origin, dir, 0.0);
            if hit.is_some_and(|h| !h.front) {
                return None;
            }
            let visibility = hit.map_or(1.0, |h| self.visibility(s, &h));
            let key = (hit.map(|h| h.object), visibility);
            match first {
                None => {
                    first = Some(key);
                    center = Some((dir, hit));
                }
                Some(k) if k != key => return None,
                Some(_) => {}
            }
        }
        let (dir, hit) = center?;
        let Some(hit) = hit else {
            return Some(match s.sky {
                Some(faces) => sample_environment(dir, faces),
                None => DVec3::new(CLEAR_COLOR.r, CLEAR_COLOR.g, CLEAR_COLOR.b),
            });
        };
        let obj = &s.objects[hit.object];
        let m = obj.material;
        let texel = obj.albedo_map.map_or(DVec4::ONE, |img| sample_bilinear(img, hit.uv, true));
        let albedo = (texel * DVec4::from(m.base_color)).truncate();
        let lit = || {
            let v = (s.frame.camera_pos - hit.position).normalize();
            let k = [m.ka, m.kd, m.ks, m.glossiness];
            let visibility = self.visibility(s, &hit);
            shade_blinn_phong_shadowed(hit.normal, s.frame.to_light, v, s.frame.radiance, albedo, k, visibility)
        };
        match obj.shader {
            "unlit" => Some(albedo),
            "lit" => Some(lit()),
            "env" => {
                let v = (s.frame.camera_pos - hit.position).normalize();
                let env = sample_environment(reflect(-v, hit.normal), s.sky?);
                Some(lit().lerp(env, m.reflectivity))
            }
            _ => None,
        }
    }

    fn ray(&self, s: &SceneOracle<'_>, x: f64, y: f64) -> (DVec3, DVec3) {
        let p = self.ndc(x, y);
        let near = s.frame.inv_view_proj.project_point3(p.extend(0.0));
        let far = s.frame.inv_view_proj.project_point3(p.extend(1.0));
        (near, (far - near).normalize())
    }

    fn visibility(&self, s: &SceneOracle<'_>, hit: &Hit) -> f64 {
        match s.shadow_map {
            Some(map) if s.frame.shadows && hit.normal.dot(s.frame.to_light) > 0.0 => shadow_visibility(
                hit.position,
                hit.normal,
                s.frame.to_light,
                s.frame.light_view_proj,
                map,
                SHADOW_BIAS,
            ),
            _ => 1.0,
        }
    }
}
