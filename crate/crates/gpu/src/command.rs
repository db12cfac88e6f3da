//! Command recording. Commands are validated as they are recorded; an invalid
//! command poisons the command buffer and is reported when it is submitted.

use std::ops::Range;
use std::sync::Arc;

use crate::binding::BindGroup;
use crate::device::DeviceShared;
use crate::error::{GpuError, Result};
use crate::pipeline::{ComputePipeline, RenderPipeline};
use crate::resource::{Buffer, Texture, TextureView};
use crate::types::*;

#[derive(Clone, Debug)]
pub struct RenderPassColorAttachment {
    pub view: TextureView,
    pub load: LoadOp<Color>,
}

#[derive(Clone, Debug)]
pub struct RenderPassDepthAttachment {
    pub view: TextureView,
    pub load: LoadOp<f32>,
}

#[derive(Clone, Debug, Default)]
pub struct RenderPassDescriptor<'a> {
    pub label: Option<&'a str>,
    pub color_attachments: Vec<RenderPassColorAttachment>,
    pub depth_attachment: Option<RenderPassDepthAttachment>,
}

#[derive(Clone, Debug)]
pub(crate) enum DrawKind {
    Direct {
        vertices: Range<u32>,
    },
    Indexed {
        indices: Range<u32>,
        base_vertex: i32,
        index: (Buffer, IndexFormat, u64),
    },
}

#[derive(Clone, Debug)]
pub(crate) struct DrawCmd {
    pub pipeline: RenderPipeline,
    pub bind_groups: Vec<Option<BindGroup>>,
    pub vertex_buffers: Vec<Option<(Buffer, u64)>>,
    pub kind: DrawKind,
    pub instances: Range<u32>,
}

#[derive(Clone, Debug)]
pub(crate) struct RenderPassRecord {
    pub colors: Vec<RenderPassColorAttachment>,
    pub depth: Option<RenderPassDepthAttachment>,
    pub draws: Vec<DrawCmd>,
}

#[derive(Clone, Debug)]
pub(crate) struct DispatchCmd {
    pub pipeline: ComputePipeline,
    pub bind_groups: Vec<Option<BindGroup>>,
    pub groups: [u32; 3],
}

#[derive(Clone, Debug)]
pub(crate) enum Command {
    Render(RenderPassRecord),
    Compute(Vec<DispatchCmd>),
    CopyBufferToBuffer {
        src: Buffer,
        src_offset: u64,
        dst: Buffer,
        dst_offset: u64,
        size: u64,
    },
    CopyTextureToBuffer {
        src: Texture,
        layer: u32,
        dst: Buffer,
        offset: u64,
        bytes_per_row: u32,
    },
}

/// A finished, immutable list of commands.
#[derive(Debug)]
pub struct CommandBuffer {
    pub(crate) commands: Vec<Command>,
    pub(crate) error: Option<GpuError>,
}

pub struct CommandEncoder {
    pub(crate) device: Arc<DeviceShared>,
    commands: Vec<Command>,
    error: Option<GpuError>,
}

impl CommandEncoder {
    pub(crate) fn new(device: Arc<DeviceShared>) -> Self {
        CommandEncoder {
            device,
            commands: Vec::new(),
            error: None,
        }
    }

    fn fail(&mut self, e: GpuError) {
        if self.error.is_none() {
            self.error = Some(e);
        }
    }

    pub fn begin_render_pass(&mut self, desc: &RenderPassDescriptor<'_>) -> RenderPass<'_> {
        let mut size = None;
        let mut check = |tex: &Texture, what: &str| -> Result<()> {
            if !tex.usage().contains(TextureUsages::RENDER_ATTACHMENT) {
                return Err(GpuError::validation(
                    "render pass",
                    format!("{what} `{}` lacks RENDER_ATTACHMENT usage", tex.label()),
                ));
            }
            let s = (tex.width(), tex.height());
            if *size.get_or_insert(s) != s {
                return Err(GpuError::validation("render pass", "attachment sizes differ"));
            }
            Ok(())
        };
        let mut err = None;
        for c in &desc.color_attachments {
            if c.view.texture().format().is_depth() {
                err = err.or(Some(GpuError::validation(
                    "render pass",
                    "depth texture used as a color attachment",
                )));
            }
            if let Err(e) = check(c.view.texture(), "color attachment") {
                err = err.or(Some(e));
            }
        }
        if let Some(d) = &desc.depth_attachment {
            if !d.view.texture().format().is_depth() {
                err = err.or(Some(GpuError::validation(
                    "render pass",
                    "depth attachment has a color format",
                )));
            }
            if let Err(e) = check(d.view.texture(), "depth attachment") {
                err = err.or(Some(e));
            }
        }
        if desc.color_attachments.is_empty() && desc.depth_attachment.is_none() {
            err = err.or(Some(GpuError::validation("render pass", "no attachments")));
        }
        if let Some(e) = err {
            self.fail(e);
        }
        RenderPass {
            encoder: self,
            record: RenderPassRecord {
                colors: desc.color_attachments.clone(),
                depth: desc.depth_attachment.clone(),
                draws: Vec::new(),
            },
            pipeline: None,
            bind_groups: Vec::new(),
            vertex_buffers: Vec::new(),
            index: None,
        }
    }

    pub fn begin_compute_pass(&mut self) -> ComputePass<'_> {
        ComputePass {
            encoder: self,
            dispatches: Vec::new(),
            pipeline: None,
            bind_groups: Vec::new(),
        }
    }

    pub fn copy_buffer_to_buffer(&mut self, src: &Buffer, src_offset: u64, dst: &Buffer, dst_offset: u64, size: u64) {
        let err = |r: String| GpuError::validation("buffer copy", r);
        if !src.usage().contains(BufferUsages::COPY_SRC) {
            return self.fail(err(format!("`{}` lacks COPY_SRC usage", src.label())));
        }
        if !dst.usage().contains(BufferUsages::COPY_DST) {
            return self.fail(err(format!("`{}` lacks COPY_DST usage", dst.label())));
        }
        if src_offset + size > src.size() || dst_offset + size > dst.size() {
            return self.fail(err("copy range out of bounds".into()));
        }
        if size % 4 != 0 || src_offset % 4 != 0 || dst_offset % 4 != 0 {
            return self.fail(err("offsets and size must be multiples of 4".into()));
        }
        self.commands.push(Command::CopyBufferToBuffer {
            src: src.clone(),
            src_offset,
            dst: dst.clone(),
            dst_offset,
            size,
        });
    }

    /// Copies one layer of `src` into `dst` row by row. `bytes_per_row` must be a
    /// multiple of [`COPY_BYTES_PER_ROW_ALIGNMENT`].
    pub fn copy_texture_to_buffer(&mut self, src: &Texture, layer: u32, dst: &Buffer, offset: u64, bytes_per_row: u32) {
        let err = |r: String| GpuError::validation("texture copy", r);
        if !src.usage().contains(TextureUsages::COPY_SRC) {
            return self.fail(err(format!("`{}` lacks COPY_SRC usage", src.label())));
        }
        if !src.format().is_copyable() {
            return self.fail(err(format!("format {:?} cannot be copied", src.format())));
        }
        if !dst.usage().contains(BufferUsages::COPY_DST) {
            return self.fail(err(format!("`{}` lacks COPY_DST usage", dst.label())));
        }
        if bytes_per_row % COPY_BYTES_PER_ROW_ALIGNMENT != 0 {
            return self.fail(err(format!(
                "bytes_per_row {bytes_per_row} is not a multiple of {COPY_BYTES_PER_ROW_ALIGNMENT}"
            )));
        }
        let row = src.width() * src.format().block_size();
        if bytes_per_row < row {
            return self.fail(err(format!("bytes_per_row {bytes_per_row} is smaller than a row ({row})")));
        }
        if layer >= src.size().depth_or_array_layers {
            return self.fail(err(format!("layer {layer} out of range")));
        }
        let needed = offset + bytes_per_row as u64 * (src.height() as u64 - 1) + row as u64;
        if needed > dst.size() {
            return self.fail(err(format!("destination needs {needed} bytes, has {}", dst.size())));
        }
        self.commands.push(Command::CopyTextureToBuffer {
            src: src.clone(),
            layer,
            dst: dst.clone(),
            offset,
            bytes_per_row,
        });
    }

    pub fn finish(self) -> CommandBuffer {
        let error = self.error.or_else(|| self.device.check_alive().err());
        CommandBuffer {
            commands: self.commands,
            error,
        }
    }
}

pub struct RenderPass<'a> {
    encoder: &'a mut CommandEncoder,
    record: RenderPassRecord,
    pipeline: Option<RenderPipeline>,
    bind_groups: Vec<Option<BindGroup>>,
    vertex_buffers: Vec<Option<(Buffer, u64)>>,
    index: Option<(Buffer, IndexFormat, u64)>,
}

impl RenderPass<'_> {
    pub fn set_pipeline(&mut self, pipeline: &RenderPipeline) {
        let p = &pipeline.inner;
        let colors: Vec<_> = self.record.colors.iter().map(|c| c.view.texture().format()).collect();
        let targets: Vec<_> = p.targets.iter().map(|t| t.format).collect();
        if colors != targets {
            self.encoder.fail(GpuError::validation(
                "render pass",
                format!(
                    "pipeline `{}` targets {targets:?} but the pass has {colors:?}",
                    p.label
                ),
            ));
        }
        let depth = self.record.depth.as_ref().map(|d| d.view.texture().format());
        if depth != p.depth_stencil.map(|d| d.format) {
            self.encoder.fail(GpuError::validation(
                "render pass",
                format!("pipeline `{}` depth state does not match the depth attachment", p.label),
            ));
        }
        self.pipeline = Some(pipeline.clone());
    }

    pub fn set_bind_group(&mut self, index: u32, group: &BindGroup) {
        let i = index as usize;
        if self.bind_groups.len() <= i {
            self.bind_groups.resize(i + 1, None);
        }
        self.bind_groups[i] = Some(group.clone());
    }

    pub fn set_vertex_buffer(&mut self, slot: u32, buffer: &Buffer, offset: u64) {
        if !buffer.usage().contains(BufferUsages::VERTEX) {
            return self.encoder.fail(GpuError::validation(
                "render pass",
                format!("`{}` lacks VERTEX usage", buffer.label()),
            ));
        }
        let i = slot as usize;
        if self.vertex_buffers.len() <= i {
            self.vertex_buffers.resize(i + 1, None);
        }
        self.vertex_buffers[i] = Some((buffer.clone(), offset));
    }

    pub fn set_index_buffer(&mut self, buffer: &Buffer, format: IndexFormat, offset: u64) {
        if !buffer.usage().contains(BufferUsages::INDEX) {
            return self.encoder.fail(GpuError::validation(
                "render pass",
                format!("`{}` lacks INDEX usage", buffer.label()),
            ));
        }
        self.index = Some((buffer.clone(), format, offset));
    }

    fn validate_draw(&mut self) -> Option<RenderPipeline> {
        let Some(pipeline) = self.pipeline.clone() else {
            self.encoder
                .fail(GpuError::validation("draw", "no pipeline set"));
            return None;
        };
        for (g, layout) in pipeline.inner.layout.groups.iter().enumerate() {
            let set = self.bind_groups.get(g).and_then(|b| b.as_ref());
            match set {
                Some(bg) if bg.layout().is_compatible(layout) => {}
                Some(_) => {
                    self.encoder.fail(GpuError::validation(
                        "draw",
                        format!("bind group {g} is incompatible with pipeline `{}`", pipeline.label()),
                    ));
                    return None;
                }
                None if layout.entries().is_empty() => {}
                None => {
                    self.encoder.fail(GpuError::validation(
                        "draw",
                        format!("bind group {g} is not set for pipeline `{}`", pipeline.label()),
                    ));
                    return None;
                }
            }
        }
        for i in 0..pipeline.inner.buffers.len() {
            if self.vertex_buffers.get(i).and_then(|v| v.as_ref()).is_none() {
                self.encoder.fail(GpuError::validation(
                    "draw",
                    format!("vertex buffer slot {i} is not set"),
                ));
                return None;
            }
        }
        Some(pipeline)
    }

    pub fn draw(&mut self, vertices: Range<u32>, instances: Range<u32>) {
        if let Some(pipeline) = self.validate_draw() {
            self.record.draws.push(DrawCmd {
                pipeline,
                bind_groups: self.bind_groups.clone(),
                vertex_buffers: self.vertex_buffers.clone(),
                kind: DrawKind::Direct { vertices },
                instances,
            });
        }
    }

    pub fn draw_indexed(&mut self, indices: Range<u32>, base_vertex: i32, instances: Range<u32>) {
        let Some(index) = self.index.clone() else {
            return self
                .encoder
                .fail(GpuError::validation("draw", "no index buffer set"));
        };
        let available = (index.0.size().saturating_sub(index.2)) / index.1.size();
        if indices.end as u64 > available {
            return self.encoder.fail(GpuError::validation(
                "draw",
                format!("index range {indices:?} exceeds the {available} indices bound"),
            ));
        }
        if let Some(pipeline) = self.validate_draw() {
            self.record.draws.push(DrawCmd {
                pipeline,
                bind_groups: self.bind_groups.clone(),
                vertex_buffers: self.vertex_buffers.clone(),
                kind: DrawKind::Indexed {
                    indices,
                    base_vertex,
                    index,
                },
                instances,
            });
        }
    }
}

impl Drop for RenderPass<'_> {
    fn drop(&mut self) {
        let record = RenderPassRecord {
            colors: std::mem::take(&mut self.record.colors),
            depth: self.record.depth.take(),
            draws: std::mem::take(&mut self.record.draws),
        };
        self.encoder.commands.push(Command::Render(record));
    }
}

pub struct ComputePass<'a> {
    encoder: &'a mut CommandEncoder,
    dispatches: Vec<DispatchCmd>,
    pipeline: Option<ComputePipeline>,
    bind_groups: Vec<Option<BindGroup>>,
}

impl ComputePass<'_> {
    pub fn set_pipeline(&mut self, pipeline: &ComputePipeline) {
        self.pipeline = Some(pipeline.clone());
    }

    pub fn set_bind_group(&mut self, index: u32, group: &BindGroup) {
        let i = index as usize;
        if self.bind_groups.len() <= i {
            self.bind_groups.resize(i + 1, None);
        }
        self.bind_groups[i] = Some(group.clone());
    }

    pub fn dispatch_workgroups(&mut self, x: u32, y: u32, z: u32) {
        let Some(pipeline) = self.pipeline.clone() else {
            return self
                .encoder
                .fail(GpuError::validation("dispatch", "no pipeline set"));
        };
        for (g, layout) in pipeline.inner.layout.groups.iter().enumerate() {
            let ok = match self.bind_groups.get(g).and_then(|b| b.as_ref()) {
                Some(bg) => bg.layout().is_compatible(layout),
                None => layout.entries().is_empty(),
            };
            if !ok {
                return self.encoder.fail(GpuError::validation(
                    "dispatch",
                    format!("bind group {g} is missing or incompatible with `{}`", pipeline.label()),
                ));
            }
        }
        self.dispatches.push(DispatchCmd {
            pipeline,
            bind_groups: self.bind_groups.clone(),
            groups: [x, y, z],
        });
    }
}

impl Drop for ComputePass<'_> {
    fn drop(&mut self) {
        let d = std::mem::take(&mut self.dispatches);
        self.encoder.commands.push(Command::Compute(d));
    }
}
