//! Render and compute pipelines.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::binding::{BindGroup, BindGroupLayout, BindGroupLayoutEntry, BindingResource, BindingType, PipelineLayout};
use crate::error::{GpuError, Result};
use crate::shader::interp::{Bound, Env};
use crate::shader::value::Val;
use crate::shader::{CompiledModule, IoBinding, IoSlot, ShaderModule, ShaderStage};
use crate::types::*;

pub struct VertexState<'a> {
    pub module: &'a ShaderModule,
    pub entry_point: &'a str,
    pub buffers: &'a [VertexBufferLayout],
}

pub struct FragmentState<'a> {
    pub module: &'a ShaderModule,
    pub entry_point: &'a str,
    pub targets: &'a [ColorTargetState],
}

pub struct RenderPipelineDescriptor<'a> {
    pub label: Option<&'a str>,
    /// `None` derives the layout from the shaders.
    pub layout: Option<&'a PipelineLayout>,
    pub vertex: VertexState<'a>,
    pub fragment: Option<FragmentState<'a>>,
    pub primitive: PrimitiveState,
    pub depth_stencil: Option<DepthStencilState>,
}

pub struct ComputePipelineDescriptor<'a> {
    pub label: Option<&'a str>,
    pub layout: Option<&'a PipelineLayout>,
    pub module: &'a ShaderModule,
    pub entry_point: &'a str,
}

/// One resource a stage reads, resolved against the pipeline layout.
#[derive(Clone, Debug)]
pub(crate) struct StageBinding {
    pub group: u32,
    pub binding: u32,
    pub global: usize,
    pub ty: BindingType,
}

pub(crate) struct Stage {
    pub module: Arc<CompiledModule>,
    pub entry: usize,
    pub inputs: Vec<IoSlot>,
    pub outputs: Vec<IoSlot>,
    pub arg_slots: Vec<usize>,
    pub bindings: Vec<StageBinding>,
    pub has_kill: bool,
}

impl Stage {
    fn new(module: &ShaderModule, entry_point: &str, stage: ShaderStage) -> Result<Stage> {
        let m = module.inner.clone();
        let entry = m.entry_index(entry_point, Some(stage))?;
        m.check_supported(entry)?;
        let fun = &m.module.entry_points[entry].function;
        let arg_slots = fun.arguments.iter().map(|a| m.types.slots(a.ty)).collect();
        let mut bindings = Vec::new();
        for rb in m.used_bindings(entry)? {
            let (global, _) = m
                .module
                .global_variables
                .iter()
                .find(|(_, g)| {
                    g.binding.as_ref().is_some_and(|b| b.group == rb.group && b.binding == rb.binding)
                })
                .expect("reflected binding exists");
            bindings.push(StageBinding {
                group: rb.group,
                binding: rb.binding,
                global: global.index(),
                ty: rb.ty,
            });
        }
        Ok(Stage {
            inputs: m.inputs(entry)?,
            outputs: m.outputs(entry)?,
            has_kill: m.has_kill(entry),
            arg_slots,
            bindings,
            entry,
            module: m,
        })
    }

    /// Zeroed argument values for `lanes` invocations.
    pub(crate) fn empty_args(&self, lanes: usize) -> Vec<Val> {
        self.arg_slots.iter().map(|&s| Val::zeroed(s, lanes)).collect()
    }

    pub(crate) fn output(&self, binding: IoBinding) -> Option<&IoSlot> {
        self.outputs.iter().find(|o| o.binding == binding)
    }

    /// Builds the resource environment from bind groups. Writable resources are
    /// copied in; the returned list says where to copy them back.
    pub(crate) fn env(&self, groups: &[Option<BindGroup>]) -> Result<(Env, Vec<WriteBack>)> {
        let mut env = Env {
            globals: vec![None; self.module.module.global_variables.len()],
            ..Default::default()
        };
        let mut write_back = Vec::new();
        for b in &self.bindings {
            let group = groups
                .get(b.group as usize)
                .and_then(|g| g.as_ref())
                .ok_or_else(|| GpuError::validation("draw", format!("bind group {} is not set", b.group)))?;
            let res = group.resource(b.binding).ok_or_else(|| {
                GpuError::validation(
                    "draw",
                    format!("bind group {} has no binding {}", b.group, b.binding),
                )
            })?;
            let bound = match (res, b.ty) {
                (
                    BindingResource::Buffer {
                        buffer,
                        offset,
                        size,
                    },
                    ty,
                ) => {
                    let offset = *offset as usize;
                    let size = size.unwrap_or(buffer.size() - offset as u64) as usize;
                    match ty {
                        BindingType::StorageBuffer {
                            read_only: false, ..
                        } => {
                            env.rw_buffers.push(buffer.snapshot().as_ref().clone());
                            write_back.push(WriteBack::Buffer(buffer.clone()));
                            Bound::RwBuffer {
                                slot: env.rw_buffers.len() - 1,
                                offset,
                                size,
                            }
                        }
                        _ => Bound::Buffer {
                            data: buffer.snapshot(),
                            offset,
                            size,
                        },
                    }
                }
                (BindingResource::TextureView(view), BindingType::StorageTexture { access, .. }) => {
                    env.rw_textures.push(view.texture().snapshot().as_ref().clone());
                    if access != crate::binding::StorageTextureAccess::ReadOnly {
                        write_back.push(WriteBack::Texture(view.texture().clone(), env.rw_textures.len() - 1));
                    }
                    Bound::StorageTexture {
                        slot: env.rw_textures.len() - 1,
                        dim: view.dimension(),
                    }
                }
                (BindingResource::TextureView(view), _) => Bound::Texture {
                    store: view.texture().snapshot(),
                    dim: view.dimension(),
                },
                (BindingResource::Sampler(s), _) => Bound::Sampler(*s.descriptor()),
            };
            env.globals[b.global] = Some(bound);
        }
        Ok((env, write_back))
    }
}

pub(crate) enum WriteBack {
    Buffer(crate::Buffer),
    /// Texture and its slot in [`Env::rw_textures`].
    Texture(crate::Texture, usize),
}

pub(crate) fn apply_write_back(env: &mut Env, write_back: Vec<WriteBack>) {
    let mut buffers = std::mem::take(&mut env.rw_buffers).into_iter();
    for wb in write_back {
        match wb {
            WriteBack::Buffer(buf) => {
                if let Some(data) = buffers.next() {
                    buf.with_data_mut(|d| *d = data);
                }
            }
            WriteBack::Texture(tex, slot) => {
                tex.replace(Arc::new(env.rw_textures[slot].clone()));
            }
        }
    }
}

/// Derives or checks the pipeline layout for a set of stages.
fn resolve_layout(label: &str, explicit: Option<&PipelineLayout>, stages: &[&Stage]) -> Result<PipelineLayout> {
    let err = |r: String| GpuError::validation("pipeline layout", format!("`{label}`: {r}"));
    let stage_flag = |s: &Stage| match s.module.module.entry_points[s.entry].stage {
        naga::ShaderStage::Vertex => ShaderStages::VERTEX,
        naga::ShaderStage::Fragment => ShaderStages::FRAGMENT,
        _ => ShaderStages::COMPUTE,
    };
    if let Some(layout) = explicit {
        for s in stages {
            for b in &s.bindings {
                let group = layout
                    .groups
                    .get(b.group as usize)
                    .ok_or_else(|| err(format!("shader uses group {} beyond the layout", b.group)))?;
                let entry = group
                    .entry(b.binding)
                    .ok_or_else(|| err(format!("group {} has no binding {}", b.group, b.binding)))?;
                if !entry.ty.accepts(&b.ty) {
                    return Err(err(format!(
                        "binding ({}, {}) is {:?} in the layout but the shader declares {:?}",
                        b.group, b.binding, entry.ty, b.ty
                    )));
                }
                if !entry.visibility.contains(stage_flag(s)) {
                    return Err(err(format!(
                        "binding ({}, {}) is not visible to the {:?} stage",
                        b.group,
                        b.binding,
                        stage_flag(s)
                    )));
                }
            }
        }
        return Ok(layout.clone());
    }
    let mut merged: BTreeMap<(u32, u32), BindGroupLayoutEntry> = BTreeMap::new();
    for s in stages {
        for b in &s.bindings {
            let e = merged.entry((b.group, b.binding)).or_insert(BindGroupLayoutEntry {
                binding: b.binding,
                visibility: ShaderStages::empty(),
                ty: b.ty,
            });
            if e.ty != b.ty {
                return Err(err(format!(
                    "stages disagree on the type of binding ({}, {})",
                    b.group, b.binding
                )));
            }
            e.visibility |= stage_flag(s);
        }
    }
    let group_count = merged.keys().map(|(g, _)| g + 1).max().unwrap_or(0);
    let groups = (0..group_count)
        .map(|g| {
            let entries: Vec<_> = merged
                .iter()
                .filter(|((group, _), _)| *group == g)
                .map(|(_, e)| *e)
                .collect();
            BindGroupLayout::new(Some(&format!("{label} group {g}")), &entries)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineLayout { groups })
}

pub(crate) struct RenderPipelineInner {
    pub label: String,
    pub layout: PipelineLayout,
    pub vertex: Stage,
    pub fragment: Option<Stage>,
    pub buffers: Vec<VertexBufferLayout>,
    pub targets: Vec<ColorTargetState>,
    pub primitive: PrimitiveState,
    pub depth_stencil: Option<DepthStencilState>,
    /// Vertex output slot ranges feeding each fragment input, `(vertex slot, slots, flat)`,
    /// in fragment input order. Position is handled separately.
    pub varyings: Vec<Varying>,
    pub position_slot: usize,
    pub vertex_out_slots: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Varying {
    pub vertex_slot: usize,
    pub slots: usize,
    pub flat: bool,
}

#[derive(Clone)]
pub struct RenderPipeline {
    pub(crate) inner: Arc<RenderPipelineInner>,
}

impl std::fmt::Debug for RenderPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RenderPipeline").field("label", &self.inner.label).finish()
    }
}

impl RenderPipeline {
    pub(crate) fn new(desc: &RenderPipelineDescriptor<'_>) -> Result<Self> {
        let label = desc.label.unwrap_or("render pipeline").to_owned();
        let err = |r: String| GpuError::validation("render pipeline", format!("`{label}`: {r}"));
        let vertex = Stage::new(desc.vertex.module, desc.vertex.entry_point, ShaderStage::Vertex)?;
        let fragment = desc
            .fragment
            .as_ref()
            .map(|f| Stage::new(f.module, f.entry_point, ShaderStage::Fragment))
            .transpose()?;
        for s in [Some(&vertex), fragment.as_ref()].into_iter().flatten() {
            for b in &s.bindings {
                if matches!(
                    b.ty,
                    BindingType::StorageBuffer { read_only: false, .. } | BindingType::StorageTexture { .. }
                ) {
                    return Err(GpuError::Unsupported(
                        "writable storage resources in render pipelines".into(),
                    ));
                }
            }
        }

        // Vertex inputs must be fed by a buffer attribute of a compatible kind.
        for input in &vertex.inputs {
            if let IoBinding::Location { location, .. } = input.binding {
                let attr = desc
                    .vertex
                    .buffers
                    .iter()
                    .flat_map(|b| &b.attributes)
                    .find(|a| a.shader_location == location)
                    .ok_or_else(|| err(format!("vertex input @location({location}) has no attribute")))?;
                let float_attr = !matches!(attr.format, VertexFormat::Uint32 | VertexFormat::Sint32);
                let float_input = input.kind == naga::ScalarKind::Float;
                if float_attr != float_input {
                    return Err(err(format!(
                        "attribute {:?} cannot feed @location({location}) of kind {:?}",
                        attr.format, input.kind
                    )));
                }
            }
        }
        for (i, b) in desc.vertex.buffers.iter().enumerate() {
            for a in &b.attributes {
                if b.array_stride != 0 && a.offset + a.format.size() > b.array_stride {
                    return Err(err(format!("attribute in buffer {i} overruns its stride")));
                }
            }
        }
        let position = vertex
            .output(IoBinding::Position)
            .ok_or_else(|| err("vertex stage does not write @builtin(position)".into()))?
            .slot;
        let vertex_out_slots: usize = vertex.module.module.entry_points[vertex.entry]
            .function
            .result
            .as_ref()
            .map(|r| vertex.module.types.slots(r.ty))
            .unwrap_or(0);

        let mut varyings = Vec::new();
        if let Some(fs) = &fragment {
            for input in &fs.inputs {
                if let IoBinding::Location { location, flat } = input.binding {
                    let out = vertex
                        .outputs
                        .iter()
                        .find(|o| matches!(o.binding, IoBinding::Location { location: l, .. } if l == location))
                        .ok_or_else(|| {
                            err(format!("fragment input @location({location}) is not written by the vertex stage"))
                        })?;
                    if out.slots != input.slots || out.kind != input.kind {
                        return Err(err(format!("stage interface mismatch at @location({location})")));
                    }
                    varyings.push(Varying {
                        vertex_slot: out.slot,
                        slots: out.slots,
                        flat,
                    });
                }
            }
            for out in &fs.outputs {
                if let IoBinding::Location { location, .. } = out.binding {
                    let target = desc
                        .fragment
                        .as_ref()
                        .and_then(|f| f.targets.get(location as usize))
                        .ok_or_else(|| err(format!("fragment output @location({location}) has no target")))?;
                    if target.format.is_depth() {
                        return Err(err(format!("color target {location} uses depth format {:?}", target.format)));
                    }
                }
            }
        }
        if let Some(ds) = &desc.depth_stencil {
            if !ds.format.is_depth() {
                return Err(err(format!("depth attachment format {:?} is not a depth format", ds.format)));
            }
        }
        let stages: Vec<&Stage> = [Some(&vertex), fragment.as_ref()].into_iter().flatten().collect();
        let layout = resolve_layout(&label, desc.layout, &stages)?;
        Ok(RenderPipeline {
            inner: Arc::new(RenderPipelineInner {
                label,
                layout,
                vertex,
                fragment,
                buffers: desc.vertex.buffers.to_vec(),
                targets: desc.fragment.as_ref().map(|f| f.targets.to_vec()).unwrap_or_default(),
                primitive: desc.primitive,
                depth_stencil: desc.depth_stencil,
                varyings,
                position_slot: position,
                vertex_out_slots,
            }),
        })
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn get_bind_group_layout(&self, index: u32) -> Result<BindGroupLayout> {
        self.inner.layout.groups.get(index as usize).cloned().ok_or_else(|| {
            GpuError::validation(
                "render pipeline",
                format!("`{}` has no bind group {index}", self.inner.label),
            )
        })
    }

    pub fn layout(&self) -> &PipelineLayout {
        &self.inner.layout
    }
}

pub(crate) struct ComputePipelineInner {
    pub label: String,
    pub layout: PipelineLayout,
    pub stage: Stage,
    pub workgroup_size: [u32; 3],
}

#[derive(Clone)]
pub struct ComputePipeline {
    pub(crate) inner: Arc<ComputePipelineInner>,
}

impl std::fmt::Debug for ComputePipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComputePipeline").field("label", &self.inner.label).finish()
    }
}

impl ComputePipeline {
    pub(crate) fn new(desc: &ComputePipelineDescriptor<'_>) -> Result<Self> {
        let label = desc.label.unwrap_or("compute pipeline").to_owned();
        let stage = Stage::new(desc.module, desc.entry_point, ShaderStage::Compute)?;
        let layout = resolve_layout(&label, desc.layout, &[&stage])?;
        let workgroup_size = stage.module.module.entry_points[stage.entry].workgroup_size;
        Ok(ComputePipeline {
            inner: Arc::new(ComputePipelineInner {
                label,
                layout,
                stage,
                workgroup_size,
            }),
        })
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn get_bind_group_layout(&self, index: u32) -> Result<BindGroupLayout> {
        self.inner.layout.groups.get(index as usize).cloned().ok_or_else(|| {
            GpuError::validation(
                "compute pipeline",
                format!("`{}` has no bind group {index}", self.inner.label),
            )
        })
    }

    pub fn workgroup_size(&self) -> [u32; 3] {
        self.inner.workgroup_size
    }
}
