//! A WebGPU-class graphics device implemented in software.
//!
//! Shaders are WGSL, parsed and validated by naga and executed by a
//! lane-parallel interpreter. Rendering uses a fixed-point rasterizer with
//! top-left fill rules, homogeneous clipping and perspective-correct varyings.
//! The object model (devices, queues, buffers, textures, bind groups,
//! pipelines, command encoders) follows WebGPU, including record-time
//! validation and deferred queue writes.

mod binding;
mod command;
mod compute;
mod device;
mod error;
mod pipeline;
mod raster;
mod resource;
mod shader;
mod types;

pub use binding::{
    BindGroup, BindGroupEntry, BindGroupLayout, BindGroupLayoutEntry, BindingResource, BindingType,
    PipelineLayout, StorageTextureAccess, TextureSampleType,
};
pub use command::{
    CommandBuffer, CommandEncoder, ComputePass, RenderPass, RenderPassColorAttachment, RenderPassDepthAttachment,
    RenderPassDescriptor,
};
pub use device::{Device, DeviceStats, Queue};
pub use error::{GpuError, Result};
pub use pipeline::{
    ComputePipeline, ComputePipelineDescriptor, FragmentState, RenderPipeline, RenderPipelineDescriptor, VertexState,
};
pub use resource::{quantize_depth24, unorm8, Buffer, Sampler, Texture, TextureView};
pub use shader::{EntryPointInfo, ReflectedBinding, ShaderModule, ShaderStage};
pub use types::*;
