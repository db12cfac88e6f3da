//! Forward renderer with two draw strategies over the same components.
//!
//! [`Strategy::PerObject`] issues one draw per renderable entity with its model
//! matrix in a uniform slot. [`Strategy::Instanced`] groups renderables by
//! (material, mesh) and issues one instanced draw per group, with model
//! matrices streamed through a per-frame instance buffer. A directional light
//! may cast PCF-filtered shadows from an orthographic depth pass, and a skybox
//! is drawn last behind everything.

mod components;
pub mod filter;
pub mod oracle;

use std::collections::HashMap;
use std::time::Instant;

use ecsgfx_gpu as gpu;
use glam::{DMat4, DVec3};
use gpu::{
    BindGroup, BindGroupEntry, BindingResource, Buffer, BufferDescriptor, BufferUsages, Color, ColorTargetState,
    CompareFunction, DepthStencilState, Device, Extent3d, Face, FragmentState, IndexFormat, LoadOp, PrimitiveState,
    RenderPass, RenderPassColorAttachment, RenderPassDepthAttachment, RenderPassDescriptor, RenderPipeline,
    RenderPipelineDescriptor, Sampler, SamplerDescriptor, Texture, TextureDescriptor, TextureFormat, TextureUsages,
    TextureView, TextureViewDescriptor, TextureViewDimension, VertexAttribute, VertexBufferLayout, VertexFormat,
    VertexState, VertexStepMode,
};

pub use components::{CameraComponent, LightComponent, MaterialComponent, MeshComponent, Projection, SkyboxComponent};
pub use filter::{dispatch_filter, dispatch_image_filter, filter_reference, FilterKind};

use crate::ecs::{Entity, Scene};
use crate::editing::is_editor_entity;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::resources::{Handle, ResourceKind, Resources, Vertex, FRAME_UNIFORM_SIZE, OBJECT_SLOT_SIZE};
use crate::scenegraph::TransformComponent;

/// Background of frames without a skybox.
pub const CLEAR_COLOR: Color = Color {
    r: 0.1,
    g: 0.1,
    b: 0.12,
    a: 1.0,
};
pub const SHADOW_MAP_SIZE: u32 = 512;
pub const SHADOW_BIAS: f64 = 0.005;
/// Bytes per instance: model matrix then normal matrix, column-major `f32`.
pub const INSTANCE_STRIDE: u64 = 128;
pub const COLOR_FORMAT: TextureFormat = TextureFormat::Rgba8Unorm;
pub const DEPTH_FORMAT: TextureFormat = TextureFormat::Depth24Plus;

const SKYBOX_WGSL: &str = include_str!("../../assets/shaders/skybox.wgsl");
const SHADOW_WGSL: &str = include_str!("../../assets/shaders/shadow.wgsl");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// One draw call per renderable entity.
    PerObject,
    /// One instanced draw call per (material, mesh) batch.
    #[default]
    Instanced,
}

impl Strategy {
    pub const BOTH: [Strategy; 2] = [Strategy::Instanced, Strategy::PerObject];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::PerObject => "per-object",
            Strategy::Instanced => "instanced",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-object" => Some(Strategy::PerObject),
            "instanced" => Some(Strategy::Instanced),
            _ => None,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameStats {
    /// Draw calls in the main pass, skybox included.
    pub draw_calls: u64,
    /// Mesh instances drawn in the main pass.
    pub instances_drawn: u64,
    /// Distinct (material, mesh) groups.
    pub batches: u64,
    /// Draw calls in the shadow depth pass.
    pub shadow_draw_calls: u64,
    pub frame_time_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Renderable {
    pub entity: Entity,
    pub mesh: Handle,
    pub material: Handle,
    pub world: DMat4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderBatch {
    pub material: Handle,
    pub mesh: Handle,
    pub matrices: Vec<DMat4>,
}

impl RenderBatch {
    pub fn instance_count(&self) -> usize {
        self.matrices.len()
    }
}

/// Entities with mesh, material and transform, in enrollment order. Editor
/// entities are skipped. Mesh and material names must be registered.
pub fn collect_renderables(scene: &Scene, resources: &Resources) -> Result<Vec<Renderable>> {
    let types = crate::component_set![MeshComponent, MaterialComponent, TransformComponent];
    let mut out = Vec::new();
    for e in scene.entities_with(&types) {
        if is_editor_entity(scene, e) {
            continue;
        }
        let mesh_name = &scene.get::<MeshComponent>(e).expect("filtered").mesh;
        let material_name = &scene.get::<MaterialComponent>(e).expect("filtered").material;
        let dangling = |kind, name: &str| Error::DanglingResource {
            kind,
            name: name.to_owned(),
            referrer: format!("entity {e}"),
        };
        let mesh = resources
            .lookup(ResourceKind::Mesh, mesh_name)
            .ok_or_else(|| dangling(ResourceKind::Mesh, mesh_name))?;
        let material = resources
            .lookup(ResourceKind::Material, material_name)
            .ok_or_else(|| dangling(ResourceKind::Material, material_name))?;
        out.push(Renderable {
            entity: e,
            mesh,
            material,
            world: scene.get::<TransformComponent>(e).expect("filtered").world,
        });
    }
    Ok(out)
}

/// Groups renderables by (material, mesh) in order of first appearance.
pub fn build_batches(renderables: &[Renderable]) -> Vec<RenderBatch> {
    let mut index: HashMap<(Handle, Handle), usize> = HashMap::new();
    let mut batches: Vec<RenderBatch> = Vec::new();
    for r in renderables {
        let i = *index.entry((r.material, r.mesh)).or_insert_with(|| {
            batches.push(RenderBatch {
                material: r.material,
                mesh: r.mesh,
                matrices: Vec::new(),
            });
            batches.len() - 1
        });
        batches[i].matrices.push(r.world);
    }
    batches
}

/// Color and depth attachments that can be read back.
#[derive(Clone, Debug)]
pub struct OffscreenTarget {
    pub color: Texture,
    pub depth: Texture,
    color_view: TextureView,
    depth_view: TextureView,
}

impl OffscreenTarget {
    pub const GOLDEN_SIZE: u32 = 256;

    pub fn new(device: &Device, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyTarget { width, height });
        }
        let make = |label, format, usage| {
            device.create_texture(&TextureDescriptor {
                label: Some(label),
                size: Extent3d::new_2d(width, height),
                format,
                usage,
            })
        };
        let color = make(
            "offscreen color",
            COLOR_FORMAT,
            TextureUsages::RENDER_ATTACHMENT | TextureUsages::COPY_SRC,
        )?;
        let depth = make("offscreen depth", DEPTH_FORMAT, TextureUsages::RENDER_ATTACHMENT)?;
        Ok(OffscreenTarget {
            color_view: color.create_view(&TextureViewDescriptor::default())?,
            depth_view: depth.create_view(&TextureViewDescriptor::default())?,
            color,
            depth,
        })
    }

    pub fn width(&self) -> u32 {
        self.color.width()
    }

    pub fn height(&self) -> u32 {
        self.color.height()
    }

    /// Fills the color attachment with `color`.
    pub fn clear(&self, device: &Device, color: Color) -> Result<()> {
        let mut enc = device.create_command_encoder()?;
        enc.begin_render_pass(&RenderPassDescriptor {
            label: Some("clear"),
            color_attachments: vec![RenderPassColorAttachment {
                view: self.color_view.clone(),
                load: LoadOp::Clear(color),
            }],
            depth_attachment: None,
        });
        device.queue().submit([enc.finish()])?;
        Ok(())
    }

    /// Copies the color attachment to the host.
    pub fn readback(&self, device: &Device) -> Result<Image> {
        let (w, h) = (self.width(), self.height());
        let data = read_texture(device, &self.color, 4)?;
        Image::new(w, h, data)
    }
}

/// Copies layer 0 of `texture` into tightly packed rows.
fn read_texture(device: &Device, texture: &Texture, texel_bytes: u32) -> Result<Vec<u8>> {
    let row = texture.width() * texel_bytes;
    let padded = row.div_ceil(gpu::COPY_BYTES_PER_ROW_ALIGNMENT) * gpu::COPY_BYTES_PER_ROW_ALIGNMENT;
    let buffer = device.create_buffer(&BufferDescriptor {
        label: Some("readback"),
        size: padded as u64 * texture.height() as u64,
        usage: BufferUsages::COPY_DST | BufferUsages::MAP_READ,
    })?;
    let mut enc = device.create_command_encoder()?;
    enc.copy_texture_to_buffer(texture, 0, &buffer, 0, padded);
    device.queue().submit([enc.finish()])?;
    let data = buffer.map_read()?;
    let mut out = Vec::with_capacity((row * texture.height()) as usize);
    for y in 0..texture.height() as usize {
        let at = y * padded as usize;
        out.extend_from_slice(&data[at..at + row as usize]);
    }
    Ok(out)
}

/// Camera and light state of the most recent frame, in double precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameInfo {
    pub view_proj: DMat4,
    pub inv_view_proj: DMat4,
    pub light_view_proj: DMat4,
    pub camera_pos: DVec3,
    /// Unit vector towards the light.
    pub to_light: DVec3,
    pub radiance: DVec3,
    pub shadows: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Variant {
    Object,
    Instanced,
}

fn mat_cols(m: DMat4) -> [f32; 16] {
    m.as_mat4().to_cols_array()
}

fn normal_matrix(m: DMat4) -> DMat4 {
    m.inverse().transpose()
}

fn vertex_layout() -> VertexBufferLayout {
    VertexBufferLayout {
        array_stride: Vertex::STRIDE,
        step_mode: VertexStepMode::Vertex,
        attributes: vec![
            VertexAttribute {
                format: VertexFormat::Float32x3,
                offset: 0,
                shader_location: 0,
            },
            VertexAttribute {
                format: VertexFormat::Float32x3,
                offset: 12,
                shader_location: 1,
            },
            VertexAttribute {
                format: VertexFormat::Float32x2,
                offset: 24,
                shader_location: 2,
            },
        ],
    }
}

fn instance_layout(columns: u32) -> VertexBufferLayout {
    VertexBufferLayout {
        array_stride: INSTANCE_STRIDE,
        step_mode: VertexStepMode::Instance,
        attributes: (0..columns)
            .map(|i| VertexAttribute {
                format: VertexFormat::Float32x4,
                offset: i as u64 * 16,
                shader_location: 3 + i,
            })
            .collect(),
    }
}

/// Frame-level GPU state reused across frames.
pub struct Renderer {
    device: Device,
    mesh_pipelines: HashMap<(Handle, Variant), RenderPipeline>,
    skybox_pipeline: RenderPipeline,
    shadow_pipelines: [RenderPipeline; 2],
    frame_uniform: Buffer,
    shadow_map: Texture,
    shadow_view: TextureView,
    shadow_sampler: Sampler,
    env_sampler: Sampler,
    black_cube: TextureView,
    frame_group: Option<(Option<String>, BindGroup)>,
    shadow_frame_group: BindGroup,
    object_buffer: Option<Buffer>,
    object_groups: Vec<BindGroup>,
    instance_buffer: Option<Buffer>,
    pub clear_color: Color,
    last_frame: Option<FrameInfo>,
}

impl std::fmt::Debug for Renderer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Renderer")
            .field("pipelines", &self.mesh_pipelines.len())
            .field("last_frame", &self.last_frame)
            .finish()
    }
}

impl Renderer {
    pub fn new(resources: &Resources) -> Result<Self> {
        let device = resources.device().clone();
        let layouts = resources.layouts();
        let frame_uniform = device.create_buffer(&BufferDescriptor {
            label: Some("frame uniforms"),
            size: FRAME_UNIFORM_SIZE,
            usage: BufferUsages::UNIFORM | BufferUsages::COPY_DST,
        })?;
        let shadow_map = device.create_texture(&TextureDescriptor {
            label: Some("shadow map"),
            size: Extent3d::new_2d(SHADOW_MAP_SIZE, SHADOW_MAP_SIZE),
            format: TextureFormat::Depth32Float,
            usage: TextureUsages::RENDER_ATTACHMENT | TextureUsages::TEXTURE_BINDING | TextureUsages::COPY_SRC,
        })?;
        let shadow_view = shadow_map.create_view(&TextureViewDescriptor::default())?;
        let shadow_sampler = device.create_sampler(&SamplerDescriptor {
            compare: Some(CompareFunction::LessEqual),
            ..Default::default()
        })?;
        let env_sampler = device.create_sampler(&SamplerDescriptor::linear_clamp())?;
        let black = device.create_texture(&TextureDescriptor {
            label: Some("black cube"),
            size: Extent3d {
                width: 1,
                height: 1,
                depth_or_array_layers: 6,
            },
            format: TextureFormat::Rgba8Unorm,
            usage: TextureUsages::TEXTURE_BINDING | TextureUsages::COPY_DST,
        })?;
        for layer in 0..6 {
            device.queue().write_texture(&black, layer, &[0, 0, 0, 255], 4)?;
        }
        let black_cube = black.create_view(&TextureViewDescriptor {
            label: Some("black cube"),
            dimension: Some(TextureViewDimension::Cube),
        })?;

        let skybox_module = device.create_shader_module("skybox", SKYBOX_WGSL)?;
        let skybox_layout = device.create_pipeline_layout(&[&layouts.frame])?;
        let skybox_pipeline = device.create_render_pipeline(&RenderPipelineDescriptor {
            label: Some("skybox"),
            layout: Some(&skybox_layout),
            vertex: VertexState {
                module: &skybox_module,
                entry_point: "vs_main",
                buffers: &[],
            },
            fragment: Some(FragmentState {
                module: &skybox_module,
                entry_point: "fs_main",
                targets: &[ColorTargetState {
                    format: COLOR_FORMAT,
                    blend: None,
                }],
            }),
            primitive: PrimitiveState::default(),
            depth_stencil: Some(DepthStencilState {
                format: DEPTH_FORMAT,
                depth_write_enabled: false,
                depth_compare: CompareFunction::LessEqual,
            }),
        })?;

        let shadow_module = device.create_shader_module("shadow", SHADOW_WGSL)?;
        let shadow_object_layout = device.create_pipeline_layout(&[&layouts.shadow_frame, &layouts.object])?;
        let shadow_instanced_layout = device.create_pipeline_layout(&[&layouts.shadow_frame])?;
        let shadow_pipeline = |variant: Variant| {
            let (layout, entry, buffers) = match variant {
                Variant::Object => (&shadow_object_layout, "vs_object", vec![vertex_layout()]),
                Variant::Instanced => (&shadow_instanced_layout, "vs_instanced", vec![vertex_layout(), instance_layout(4)]),
            };
            device.create_render_pipeline(&RenderPipelineDescriptor {
                label: Some("shadow"),
                layout: Some(layout),
                vertex: VertexState {
                    module: &shadow_module,
                    entry_point: entry,
                    buffers: &buffers,
                },
                fragment: None,
                primitive: PrimitiveState::default(),
                depth_stencil: Some(DepthStencilState {
                    format: TextureFormat::Depth32Float,
                    depth_write_enabled: true,
                    depth_compare: CompareFunction::Less,
                }),
            })
        };
        let shadow_pipelines = [shadow_pipeline(Variant::Object)?, shadow_pipeline(Variant::Instanced)?];
        let shadow_frame_group = device.create_bind_group(
            &layouts.shadow_frame,
            &[BindGroupEntry {
                binding: 0,
                resource: BindingResource::whole_buffer(&frame_uniform),
            }],
        )?;
        Ok(Renderer {
            device,
            mesh_pipelines: HashMap::new(),
            skybox_pipeline,
            shadow_pipelines,
            frame_uniform,
            shadow_map,
            shadow_view,
            shadow_sampler,
            env_sampler,
            black_cube,
            frame_group: None,
            shadow_frame_group,
            object_buffer: None,
            object_groups: Vec::new(),
            instance_buffer: None,
            clear_color: CLEAR_COLOR,
            last_frame: None,
        })
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Camera and light matrices used by the last rendered frame.
    pub fn last_frame(&self) -> Option<&FrameInfo> {
        self.last_frame.as_ref()
    }

    /// Copies the shadow map of the last frame to the host.
    pub fn read_shadow_map(&self) -> Result<oracle::DepthMap> {
        let bytes = read_texture(&self.device, &self.shadow_map, 4)?;
        Ok(oracle::DepthMap {
            size: SHADOW_MAP_SIZE,
            depths: bytemuck::pod_collect_to_vec(&bytes),
        })
    }

    fn mesh_pipeline(&mut self, resources: &Resources, shader: Handle, variant: Variant) -> Result<RenderPipeline> {
        if let Some(p) = self.mesh_pipelines.get(&(shader, variant)) {
            return Ok(p.clone());
        }
        let entry = resources
            .shader_by_handle(shader)
            .ok_or_else(|| Error::Bench(format!("stale shader handle {shader:?}")))?;
        let layouts = resources.layouts();
        let (layout, vs, buffers) = match variant {
            Variant::Object => (
                self.device
                    .create_pipeline_layout(&[&layouts.frame, &layouts.material, &layouts.object])?,
                "vs_object",
                vec![vertex_layout()],
            ),
            Variant::Instanced => (
                self.device.create_pipeline_layout(&[&layouts.frame, &layouts.material])?,
                "vs_instanced",
                vec![vertex_layout(), instance_layout(8)],
            ),
        };
        let pipeline = self.device.create_render_pipeline(&RenderPipelineDescriptor {
            label: Some(&entry.name),
            layout: Some(&layout),
            vertex: VertexState {
                module: &entry.module,
                entry_point: vs,
                buffers: &buffers,
            },
            fragment: Some(FragmentState {
                module: &entry.module,
                entry_point: "fs_main",
                targets: &[ColorTargetState {
                    format: COLOR_FORMAT,
                    blend: None,
                }],
            }),
            primitive: PrimitiveState {
                cull_mode: Some(Face::Back),
                ..Default::default()
            },
            depth_stencil: Some(DepthStencilState {
                format: DEPTH_FORMAT,
                depth_write_enabled: true,
                depth_compare: CompareFunction::Less,
            }),
        })?;
        self.mesh_pipelines.insert((shader, variant), pipeline.clone());
        Ok(pipeline)
    }

    fn frame_group(&mut self, resources: &Resources, cubemap: Option<&str>) -> Result<BindGroup> {
        if let Some((name, group)) = &self.frame_group {
            if name.as_deref() == cubemap {
                return Ok(group.clone());
            }
        }
        let cube = match cubemap {
            Some(n) => resources
                .cubemap(n)
                .ok_or_else(|| Error::DanglingResource {
                    kind: ResourceKind::Cubemap,
                    name: n.to_owned(),
                    referrer: "skybox".into(),
                })?
                .view
                .clone(),
            None => self.black_cube.clone(),
        };
        let group = self.device.create_bind_group(
            &resources.layouts().frame,
            &[
                BindGroupEntry {
                    binding: 0,
                    resource: BindingResource::whole_buffer(&self.frame_uniform),
                },
                BindGroupEntry {
                    binding: 1,
                    resource: BindingResource::TextureView(self.shadow_view.clone()),
                },
                BindGroupEntry {
                    binding: 2,
                    resource: BindingResource::Sampler(self.shadow_sampler.clone()),
                },
                BindGroupEntry {
                    binding: 3,
                    resource: BindingResource::TextureView(cube),
                },
                BindGroupEntry {
                    binding: 4,
                    resource: BindingResource::Sampler(self.env_sampler.clone()),
                },
            ],
        )?;
        self.frame_group = Some((cubemap.map(str::to_owned), group.clone()));
        Ok(group)
    }

    /// Ensures `count` object uniform slots exist.
    fn object_slots(&mut self, resources: &Resources, count: usize) -> Result<()> {
        if self.object_groups.len() >= count {
            return Ok(());
        }
        let capacity = count.next_power_of_two().max(16);
        let buffer = self.device.create_buffer(&BufferDescriptor {
            label: Some("object uniforms"),
            size: capacity as u64 * OBJECT_SLOT_SIZE,
            usage: BufferUsages::UNIFORM | BufferUsages::COPY_DST,
        })?;
        self.object_groups = (0..capacity)
            .map(|i| {
                self.device.create_bind_group(
                    &resources.layouts().object,
                    &[BindGroupEntry {
                        binding: 0,
                        resource: BindingResource::Buffer {
                            buffer: buffer.clone(),
                            offset: i as u64 * OBJECT_SLOT_SIZE,
                            size: Some(OBJECT_SLOT_SIZE),
                        },
                    }],
                )
            })
            .collect::<gpu::Result<_>>()?;
        self.object_buffer = Some(buffer);
        Ok(())
    }

    fn instance_buffer(&mut self, bytes: u64) -> Result<Buffer> {
        if let Some(b) = &self.instance_buffer {
            if b.size() >= bytes {
                return Ok(b.clone());
            }
        }
        let buffer = self.device.create_buffer(&BufferDescriptor {
            label: Some("instances"),
            size: bytes.next_power_of_two().max(INSTANCE_STRIDE * 16),
            usage: BufferUsages::VERTEX | BufferUsages::COPY_DST,
        })?;
        self.instance_buffer = Some(buffer.clone());
        Ok(buffer)
    }

    /// Renders the scene's primary camera view into `target`.
    pub fn render_frame(
        &mut self,
        scene: &Scene,
        resources: &Resources,
        strategy: Strategy,
        target: &OffscreenTarget,
    ) -> Result<FrameStats> {
        let start = Instant::now();
        let aspect = target.width() as f64 / target.height() as f64;

        let camera = scene
            .entities_with(&crate::component_set![CameraComponent, TransformComponent])
            .into_iter()
            .find(|e| scene.get::<CameraComponent>(*e).is_some_and(|c| c.primary))
            .ok_or(Error::NoCamera)?;
        let cam = scene.get::<CameraComponent>(camera).expect("filtered");
        let cam_world = scene.get::<TransformComponent>(camera).expect("filtered").world;
        let view = cam_world.inverse();
        let view_proj = cam.projection_matrix(aspect) * view;
        let camera_pos = cam_world.w_axis.truncate();

        let renderables = collect_renderables(scene, resources)?;
        let batches = build_batches(&renderables);

        let light = scene
            .entities()
            .iter()
            .find_map(|e| scene.get::<LightComponent>(*e))
            .cloned();
        let skybox = scene
            .entities()
            .iter()
            .filter(|e| !is_editor_entity(scene, **e))
            .find_map(|e| scene.get::<SkyboxComponent>(*e))
            .map(|s| s.cubemap.clone());

        let (to_light, radiance) = match &light {
            Some(l) => (l.to_light(), l.radiance()),
            None => (DVec3::Y, DVec3::ZERO),
        };
        let shadows = light.as_ref().is_some_and(|l| l.casts_shadows) && !renderables.is_empty();
        let light_view_proj = if shadows {
            fit_light_frustum(&renderables, resources, -to_light)
        } else {
            DMat4::IDENTITY
        };
        let info = FrameInfo {
            view_proj,
            inv_view_proj: view_proj.inverse(),
            light_view_proj,
            camera_pos,
            to_light,
            radiance,
            shadows,
        };
        self.write_frame_uniforms(&info)?;

        // Per-draw data.
        let mut instance_ranges = Vec::new();
        match strategy {
            Strategy::PerObject => {
                self.object_slots(resources, renderables.len())?;
                let mut data = Vec::with_capacity(renderables.len() * OBJECT_SLOT_SIZE as usize);
                for r in &renderables {
                    let mut slot = [0f32; (OBJECT_SLOT_SIZE / 4) as usize];
                    slot[..16].copy_from_slice(&mat_cols(r.world));
                    slot[16..32].copy_from_slice(&mat_cols(normal_matrix(r.world)));
                    data.extend_from_slice(bytemuck::cast_slice(&slot));
                }
                if let Some(buffer) = &self.object_buffer {
                    self.device.queue().write_buffer(buffer, 0, &data)?;
                }
            }
            Strategy::Instanced => {
                let mut data: Vec<f32> = Vec::with_capacity(renderables.len() * 32);
                for b in &batches {
                    instance_ranges.push((data.len() as u64 * 4, b.instance_count() as u32));
                    for m in &b.matrices {
                        data.extend_from_slice(&mat_cols(*m));
                        data.extend_from_slice(&mat_cols(normal_matrix(*m)));
                    }
                }
                if !data.is_empty() {
                    let buffer = self.instance_buffer(data.len() as u64 * 4)?;
                    self.device.queue().write_buffer(&buffer, 0, bytemuck::cast_slice(&data))?;
                }
            }
        }

        // Shadow pass.
        let before = self.device.stats();
        {
            let mut enc = self.device.create_command_encoder()?;
            {
                let mut pass = enc.begin_render_pass(&RenderPassDescriptor {
                    label: Some("shadow"),
                    color_attachments: Vec::new(),
                    depth_attachment: Some(RenderPassDepthAttachment {
                        view: self.shadow_view.clone(),
                        load: LoadOp::Clear(1.0),
                    }),
                });
                if shadows {
                    self.encode_meshes(&mut pass, resources, strategy, &renderables, &batches, &instance_ranges, None)?;
                }
            }
            self.device.queue().submit([enc.finish()])?;
        }
        let after_shadow = self.device.stats();

        // Main pass.
        let frame_group = self.frame_group(resources, skybox.as_deref())?;
        let mut pipelines = HashMap::new();
        for b in &batches {
            let shader = resources.material_by_handle(b.material).expect("collected").shader;
            let variant = match strategy {
                Strategy::PerObject => Variant::Object,
                Strategy::Instanced => Variant::Instanced,
            };
            if let std::collections::hash_map::Entry::Vacant(v) = pipelines.entry(shader) {
                v.insert(self.mesh_pipeline(resources, shader, variant)?);
            }
        }
        {
            let mut enc = self.device.create_command_encoder()?;
            {
                let mut pass = enc.begin_render_pass(&RenderPassDescriptor {
                    label: Some("main"),
                    color_attachments: vec![RenderPassColorAttachment {
                        view: target.color_view.clone(),
                        load: LoadOp::Clear(self.clear_color),
                    }],
                    depth_attachment: Some(RenderPassDepthAttachment {
                        view: target.depth_view.clone(),
                        load: LoadOp::Clear(1.0),
                    }),
                });
                pass.set_bind_group(0, &frame_group);
                self.encode_meshes(
                    &mut pass,
                    resources,
                    strategy,
                    &renderables,
                    &batches,
                    &instance_ranges,
                    Some(&pipelines),
                )?;
                if skybox.is_some() {
                    pass.set_pipeline(&self.skybox_pipeline);
                    pass.set_bind_group(0, &frame_group);
                    pass.draw(0..3, 0..1);
                }
            }
            self.device.queue().submit([enc.finish()])?;
        }
        let after = self.device.stats();
        self.last_frame = Some(info);
        Ok(FrameStats {
            draw_calls: after.draw_calls - after_shadow.draw_calls,
            instances_drawn: after.instances - after_shadow.instances - u64::from(skybox.is_some()),
            batches: batches.len() as u64,
            shadow_draw_calls: after_shadow.draw_calls - before.draw_calls,
            frame_time_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    fn write_frame_uniforms(&self, f: &FrameInfo) -> Result<()> {
        let mut words = [0f32; (FRAME_UNIFORM_SIZE / 4) as usize];
        words[0..16].copy_from_slice(&mat_cols(f.view_proj));
        words[16..32].copy_from_slice(&mat_cols(f.inv_view_proj));
        words[32..48].copy_from_slice(&mat_cols(f.light_view_proj));
        words[48..52].copy_from_slice(&f.camera_pos.as_vec3().extend(1.0).to_array());
        words[52..56].copy_from_slice(&f.to_light.as_vec3().extend(0.0).to_array());
        let shadow_flag = if f.shadows { 1.0 } else { 0.0 };
        words[56..60].copy_from_slice(&f.radiance.as_vec3().extend(shadow_flag).to_array());
        words[60..64].copy_from_slice(&[1.0 / SHADOW_MAP_SIZE as f32, SHADOW_BIAS as f32, 0.0, 0.0]);
        self.device
            .queue()
            .write_buffer(&self.frame_uniform, 0, bytemuck::cast_slice(&words))?;
        Ok(())
    }

    /// Records mesh draws. With `pipelines` set this is the main pass, otherwise the shadow pass.
    #[allow(clippy::too_many_arguments)]
    fn encode_meshes(
        &self,
        pass: &mut RenderPass<'_>,
        resources: &Resources,
        strategy: Strategy,
        renderables: &[Renderable],
        batches: &[RenderBatch],
        instance_ranges: &[(u64, u32)],
        pipelines: Option<&HashMap<Handle, RenderPipeline>>,
    ) -> Result<()> {
        let shadow_group = 0;
        let object_group = if pipelines.is_some() { 2 } else { 1 };
        if pipelines.is_none() {
            pass.set_bind_group(shadow_group, &self.shadow_frame_group);
        }
        let bind_mesh = |pass: &mut RenderPass<'_>, mesh: Handle| -> u32 {
            let m = resources.mesh_by_handle(mesh).expect("collected");
            pass.set_vertex_buffer(0, &m.vertex_buffer, 0);
            pass.set_index_buffer(&m.index_buffer, IndexFormat::Uint32, 0);
            m.index_count
        };
        let bind_material = |pass: &mut RenderPass<'_>, material: Handle| {
            let m = resources.material_by_handle(material).expect("collected");
            if let Some(p) = pipelines {
                pass.set_pipeline(&p[&m.shader]);
                pass.set_bind_group(1, &m.bind_group);
            }
        };
        match strategy {
            Strategy::PerObject => {
                if pipelines.is_none() {
                    pass.set_pipeline(&self.shadow_pipelines[0]);
                }
                for (i, r) in renderables.iter().enumerate() {
                    bind_material(pass, r.material);
                    let count = bind_mesh(pass, r.mesh);
                    pass.set_bind_group(object_group, &self.object_groups[i]);
                    pass.draw_indexed(0..count, 0, 0..1);
                }
            }
            Strategy::Instanced => {
                if pipelines.is_none() {
                    pass.set_pipeline(&self.shadow_pipelines[1]);
                }
                let Some(instances) = &self.instance_buffer else {
                    return Ok(());
                };
                for (b, &(offset, n)) in batches.iter().zip(instance_ranges) {
                    bind_material(pass, b.material);
                    let count = bind_mesh(pass, b.mesh);
                    pass.set_vertex_buffer(1, instances, offset);
                    pass.draw_indexed(0..count, 0, 0..n);
                }
            }
        }
        Ok(())
    }
}

/// Orthographic light projection enclosing every renderable's world bounds.
fn fit_light_frustum(renderables: &[Renderable], resources: &Resources, dir: DVec3) -> DMat4 {
    let mut lo = DVec3::INFINITY;
    let mut hi = DVec3::NEG_INFINITY;
    for r in renderables {
        let (a, b) = resources.mesh_by_handle(r.mesh).expect("collected").bounds;
        let (a, b) = (a.as_dvec3(), b.as_dvec3());
        for i in 0..8 {
            let corner = DVec3::new(
                if i & 1 == 0 { a.x } else { b.x },
                if i & 2 == 0 { a.y } else { b.y },
                if i & 4 == 0 { a.z } else { b.z },
            );
            let p = r.world.transform_point3(corner);
            lo = lo.min(p);
            hi = hi.max(p);
        }
    }
    let center = (lo + hi) * 0.5;
    let radius = ((hi - lo).length() * 0.5).max(1e-3);
    let dir = dir.normalize();
    let up = if dir.y.abs() > 0.99 { DVec3::Z } else { DVec3::Y };
    let eye = center - dir * radius * 2.0;
    let view = DMat4::look_at_rh(eye, center, up);
    let proj = DMat4::orthographic_rh(-radius, radius, -radius, radius, radius * 0.5, radius * 3.5);
    proj * view
}
