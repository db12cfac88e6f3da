//! Device, queue and resource accounting.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::binding::{BindGroup, BindGroupEntry, BindGroupLayout, BindGroupLayoutEntry, PipelineLayout};
use crate::command::{Command, CommandBuffer, CommandEncoder};
use crate::error::{GpuError, Result};
use crate::pipeline::{ComputePipeline, ComputePipelineDescriptor, RenderPipeline, RenderPipelineDescriptor};
use crate::resource::{Buffer, Sampler, Texture};
use crate::shader::ShaderModule;
use crate::types::*;

/// Counters shared by the device and every object it creates.
#[derive(Debug, Default)]
pub(crate) struct DeviceShared {
    lost: AtomicBool,
    live_bytes: AtomicU64,
    peak_bytes: AtomicU64,
    draws: AtomicU64,
    instances: AtomicU64,
    dispatches: AtomicU64,
    submits: AtomicU64,
    buffers_created: AtomicU64,
    textures_created: AtomicU64,
}

impl DeviceShared {
    pub fn acquire_bytes(&self, n: u64) {
        let now = self.live_bytes.fetch_add(n, Ordering::Relaxed) + n;
        self.peak_bytes.fetch_max(now, Ordering::Relaxed);
    }

    pub fn release_bytes(&self, n: u64) {
        self.live_bytes.fetch_sub(n, Ordering::Relaxed);
    }

    pub fn check_alive(&self) -> Result<()> {
        if self.lost.load(Ordering::Relaxed) {
            Err(GpuError::DeviceLost)
        } else {
            Ok(())
        }
    }
}

/// Cumulative device counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeviceStats {
    pub draw_calls: u64,
    pub instances: u64,
    pub dispatches: u64,
    pub submits: u64,
    pub buffers_created: u64,
    pub textures_created: u64,
    /// Bytes held by live buffers and textures.
    pub live_bytes: u64,
    pub peak_bytes: u64,
}

enum Staged {
    Buffer {
        buffer: Buffer,
        offset: u64,
        data: Vec<u8>,
    },
    Texture {
        texture: Texture,
        layer: u32,
        data: Vec<u8>,
        bytes_per_row: u32,
    },
}

/// Submission queue. Writes are staged and land at the next [`Queue::submit`],
/// ahead of the submitted command buffers.
#[derive(Clone)]
pub struct Queue {
    shared: Arc<DeviceShared>,
    staged: Arc<Mutex<Vec<Staged>>>,
}

impl Queue {
    pub fn write_buffer(&self, buffer: &Buffer, offset: u64, data: &[u8]) -> Result<()> {
        self.shared.check_alive()?;
        let err = |r: String| GpuError::validation("queue write", r);
        if !buffer.usage().contains(BufferUsages::COPY_DST) {
            return Err(err(format!("buffer `{}` lacks COPY_DST usage", buffer.label())));
        }
        if offset % 4 != 0 || data.len() % 4 != 0 {
            return Err(err("offset and size must be multiples of 4".into()));
        }
        if offset + data.len() as u64 > buffer.size() {
            return Err(err(format!(
                "write of {} bytes at {offset} overruns buffer `{}` of {} bytes",
                data.len(),
                buffer.label(),
                buffer.size()
            )));
        }
        self.staged.lock().expect("queue lock").push(Staged::Buffer {
            buffer: buffer.clone(),
            offset,
            data: data.to_vec(),
        });
        Ok(())
    }

    /// Writes one whole layer of `texture` from tightly or loosely packed rows.
    pub fn write_texture(&self, texture: &Texture, layer: u32, data: &[u8], bytes_per_row: u32) -> Result<()> {
        self.shared.check_alive()?;
        let err = |r: String| GpuError::validation("queue texture write", r);
        if !texture.usage().contains(TextureUsages::COPY_DST) {
            return Err(err(format!("texture `{}` lacks COPY_DST usage", texture.label())));
        }
        if !texture.format().is_copyable() {
            return Err(err(format!("format {:?} cannot be written", texture.format())));
        }
        if layer >= texture.size().depth_or_array_layers {
            return Err(err(format!("layer {layer} out of range")));
        }
        let row = texture.width() * texture.format().block_size();
        if bytes_per_row < row {
            return Err(err(format!("bytes_per_row {bytes_per_row} is smaller than a row ({row})")));
        }
        let needed = bytes_per_row as u64 * (texture.height() as u64 - 1) + row as u64;
        if (data.len() as u64) < needed {
            return Err(err(format!("{} bytes provided, {needed} needed", data.len())));
        }
        self.staged.lock().expect("queue lock").push(Staged::Texture {
            texture: texture.clone(),
            layer,
            data: data.to_vec(),
            bytes_per_row,
        });
        Ok(())
    }

    /// Applies staged writes, then executes the command buffers in order. Work is
    /// complete when this returns.
    pub fn submit(&self, buffers: impl IntoIterator<Item = CommandBuffer>) -> Result<()> {
        self.shared.check_alive()?;
        self.shared.submits.fetch_add(1, Ordering::Relaxed);
        let staged = std::mem::take(&mut *self.staged.lock().expect("queue lock"));
        for s in staged {
            match s {
                Staged::Buffer { buffer, offset, data } => buffer.with_data_mut(|d| {
                    d[offset as usize..offset as usize + data.len()].copy_from_slice(&data);
                }),
                Staged::Texture {
                    texture,
                    layer,
                    data,
                    bytes_per_row,
                } => {
                    let row = (texture.width() * texture.format().block_size()) as usize;
                    texture.with_data_mut(|store| {
                        for y in 0..store.height {
                            let at = y as usize * bytes_per_row as usize;
                            store.write_row_bytes(y, layer, &data[at..at + row]);
                        }
                    });
                }
            }
        }
        for cb in buffers {
            if let Some(e) = cb.error {
                return Err(e);
            }
            for cmd in &cb.commands {
                self.execute(cmd)?;
            }
        }
        Ok(())
    }

    fn execute(&self, cmd: &Command) -> Result<()> {
        match cmd {
            Command::Render(rec) => {
                let (draws, instances) = crate::raster::execute_render_pass(rec)?;
                self.shared.draws.fetch_add(draws, Ordering::Relaxed);
                self.shared.instances.fetch_add(instances, Ordering::Relaxed);
            }
            Command::Compute(dispatches) => {
                for d in dispatches {
                    crate::compute::execute_dispatch(d)?;
                    self.shared.dispatches.fetch_add(1, Ordering::Relaxed);
                }
            }
            Command::CopyBufferToBuffer {
                src,
                src_offset,
                dst,
                dst_offset,
                size,
            } => {
                let data = src.snapshot();
                let (s, d, n) = (*src_offset as usize, *dst_offset as usize, *size as usize);
                dst.with_data_mut(|out| out[d..d + n].copy_from_slice(&data[s..s + n]));
            }
            Command::CopyTextureToBuffer {
                src,
                layer,
                dst,
                offset,
                bytes_per_row,
            } => {
                let store = src.snapshot();
                let mut row = Vec::new();
                dst.with_data_mut(|out| {
                    for y in 0..store.height {
                        row.clear();
                        store.row_bytes(y, *layer, &mut row);
                        let at = *offset as usize + y as usize * *bytes_per_row as usize;
                        out[at..at + row.len()].copy_from_slice(&row);
                    }
                });
            }
        }
        Ok(())
    }
}

/// A software device with WebGPU object semantics.
#[derive(Clone)]
pub struct Device {
    shared: Arc<DeviceShared>,
    queue: Queue,
}

impl Default for Device {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for Device {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Device").field("stats", &self.stats()).finish()
    }
}

impl Device {
    pub fn new() -> Device {
        let shared = Arc::new(DeviceShared::default());
        Device {
            queue: Queue {
                shared: shared.clone(),
                staged: Arc::default(),
            },
            shared,
        }
    }

    pub fn queue(&self) -> &Queue {
        &self.queue
    }

    pub fn stats(&self) -> DeviceStats {
        let s = &self.shared;
        let get = |a: &AtomicU64| a.load(Ordering::Relaxed);
        DeviceStats {
            draw_calls: get(&s.draws),
            instances: get(&s.instances),
            dispatches: get(&s.dispatches),
            submits: get(&s.submits),
            buffers_created: get(&s.buffers_created),
            textures_created: get(&s.textures_created),
            live_bytes: get(&s.live_bytes),
            peak_bytes: get(&s.peak_bytes),
        }
    }

    /// Simulates device loss; every later call fails with [`GpuError::DeviceLost`].
    pub fn lose(&self) {
        self.shared.lost.store(true, Ordering::Relaxed);
    }

    pub fn is_lost(&self) -> bool {
        self.shared.lost.load(Ordering::Relaxed)
    }

    pub fn create_buffer(&self, desc: &BufferDescriptor<'_>) -> Result<Buffer> {
        self.shared.check_alive()?;
        if desc.usage.contains(BufferUsages::MAP_READ)
            && !(BufferUsages::MAP_READ | BufferUsages::COPY_DST).contains(desc.usage)
        {
            return Err(GpuError::validation(
                "buffer",
                "MAP_READ may only be combined with COPY_DST".to_owned(),
            ));
        }
        self.shared.buffers_created.fetch_add(1, Ordering::Relaxed);
        Ok(Buffer::new(self.shared.clone(), desc))
    }

    /// Creates a buffer holding `contents`, padded to a multiple of four bytes.
    pub fn create_buffer_init(&self, label: Option<&str>, contents: &[u8], usage: BufferUsages) -> Result<Buffer> {
        let size = (contents.len() as u64).div_ceil(4) * 4;
        let buffer = self.create_buffer(&BufferDescriptor {
            label,
            size,
            usage,
        })?;
        buffer.with_data_mut(|d| d[..contents.len()].copy_from_slice(contents));
        Ok(buffer)
    }

    pub fn create_texture(&self, desc: &TextureDescriptor<'_>) -> Result<Texture> {
        self.shared.check_alive()?;
        let s = desc.size;
        if s.width == 0 || s.height == 0 || s.depth_or_array_layers == 0 {
            return Err(GpuError::validation(
                "texture",
                format!("`{}` has a zero-sized extent {s:?}", desc.label.unwrap_or("")),
            ));
        }
        if desc.usage.is_empty() {
            return Err(GpuError::validation("texture", "usage must not be empty".to_owned()));
        }
        if desc.format.is_depth() && desc.usage.contains(TextureUsages::STORAGE_BINDING) {
            return Err(GpuError::validation(
                "texture",
                "depth formats cannot be storage textures".to_owned(),
            ));
        }
        self.shared.textures_created.fetch_add(1, Ordering::Relaxed);
        Ok(Texture::new(self.shared.clone(), desc))
    }

    pub fn create_sampler(&self, desc: &SamplerDescriptor) -> Result<Sampler> {
        self.shared.check_alive()?;
        Ok(Sampler { desc: *desc })
    }

    /// Compiles WGSL. Syntax and validation failures come back as
    /// [`GpuError::ShaderCompilation`] with rendered diagnostics.
    pub fn create_shader_module(&self, label: &str, source: &str) -> Result<ShaderModule> {
        self.shared.check_alive()?;
        ShaderModule::compile(label, source)
    }

    pub fn create_bind_group_layout(
        &self,
        label: Option<&str>,
        entries: &[BindGroupLayoutEntry],
    ) -> Result<BindGroupLayout> {
        self.shared.check_alive()?;
        BindGroupLayout::new(label, entries)
    }

    pub fn create_pipeline_layout(&self, groups: &[&BindGroupLayout]) -> Result<PipelineLayout> {
        self.shared.check_alive()?;
        Ok(PipelineLayout {
            groups: groups.iter().map(|g| (*g).clone()).collect(),
        })
    }

    pub fn create_bind_group(&self, layout: &BindGroupLayout, entries: &[BindGroupEntry]) -> Result<BindGroup> {
        self.shared.check_alive()?;
        BindGroup::new(layout, entries)
    }

    pub fn create_render_pipeline(&self, desc: &RenderPipelineDescriptor<'_>) -> Result<RenderPipeline> {
        self.shared.check_alive()?;
        RenderPipeline::new(desc)
    }

    pub fn create_compute_pipeline(&self, desc: &ComputePipelineDescriptor<'_>) -> Result<ComputePipeline> {
        self.shared.check_alive()?;
        ComputePipeline::new(desc)
    }

    pub fn create_command_encoder(&self) -> Result<CommandEncoder> {
        self.shared.check_alive()?;
        Ok(CommandEncoder::new(self.shared.clone()))
    }
}
