//! Bind group layouts, pipeline layouts and bind groups.

use std::sync::Arc;

use crate::error::{GpuError, Result};
use crate::resource::{Buffer, Sampler, TextureView};
use crate::types::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TextureSampleType {
    Float,
    Depth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StorageTextureAccess {
    WriteOnly,
    ReadOnly,
    ReadWrite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BindingType {
    UniformBuffer {
        min_binding_size: u64,
    },
    StorageBuffer {
        read_only: bool,
        min_binding_size: u64,
    },
    Texture {
        sample_type: TextureSampleType,
        view_dimension: TextureViewDimension,
    },
    StorageTexture {
        format: TextureFormat,
        access: StorageTextureAccess,
        view_dimension: TextureViewDimension,
    },
    Sampler {
        comparison: bool,
    },
}

impl BindingType {
    /// Whether a shader declaration of type `used` can be served by a layout slot of type `self`.
    pub(crate) fn accepts(&self, used: &BindingType) -> bool {
        match (self, used) {
            (
                BindingType::UniformBuffer { min_binding_size: a },
                BindingType::UniformBuffer { min_binding_size: b },
            ) => *a == 0 || a >= b,
            (
                BindingType::StorageBuffer {
                    read_only: ra,
                    min_binding_size: a,
                },
                BindingType::StorageBuffer {
                    read_only: rb,
                    min_binding_size: b,
                },
            ) => (*rb || !*ra) && (*a == 0 || a >= b),
            (a, b) => a == b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BindGroupLayoutEntry {
    pub binding: u32,
    pub visibility: ShaderStages,
    pub ty: BindingType,
}

#[derive(Debug)]
pub(crate) struct BindGroupLayoutInner {
    pub label: String,
    pub entries: Vec<BindGroupLayoutEntry>,
}

#[derive(Clone, Debug)]
pub struct BindGroupLayout {
    pub(crate) inner: Arc<BindGroupLayoutInner>,
}

impl BindGroupLayout {
    pub(crate) fn new(label: Option<&str>, entries: &[BindGroupLayoutEntry]) -> Result<Self> {
        let mut entries = entries.to_vec();
        entries.sort_by_key(|e| e.binding);
        if let Some(w) = entries.windows(2).find(|w| w[0].binding == w[1].binding) {
            return Err(GpuError::validation(
                "bind group layout",
                format!("binding {} declared twice", w[0].binding),
            ));
        }
        Ok(BindGroupLayout {
            inner: Arc::new(BindGroupLayoutInner {
                label: label.unwrap_or("").to_owned(),
                entries,
            }),
        })
    }

    pub fn entries(&self) -> &[BindGroupLayoutEntry] {
        &self.inner.entries
    }

    pub fn entry(&self, binding: u32) -> Option<&BindGroupLayoutEntry> {
        self.inner.entries.iter().find(|e| e.binding == binding)
    }

    /// Layouts are compatible when their entries are identical.
    pub fn is_compatible(&self, other: &BindGroupLayout) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.entries == other.inner.entries
    }
}

#[derive(Clone, Debug)]
pub struct PipelineLayout {
    pub(crate) groups: Vec<BindGroupLayout>,
}

impl PipelineLayout {
    pub fn bind_group_layouts(&self) -> &[BindGroupLayout] {
        &self.groups
    }
}

#[derive(Clone, Debug)]
pub enum BindingResource {
    Buffer {
        buffer: Buffer,
        offset: u64,
        /// `None` binds the rest of the buffer.
        size: Option<u64>,
    },
    TextureView(TextureView),
    Sampler(Sampler),
}

impl BindingResource {
    pub fn whole_buffer(buffer: &Buffer) -> Self {
        BindingResource::Buffer {
            buffer: buffer.clone(),
            offset: 0,
            size: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BindGroupEntry {
    pub binding: u32,
    pub resource: BindingResource,
}

#[derive(Debug)]
pub(crate) struct BindGroupInner {
    pub layout: BindGroupLayout,
    /// Resources in layout entry order.
    pub resources: Vec<BindingResource>,
}

#[derive(Clone, Debug)]
pub struct BindGroup {
    pub(crate) inner: Arc<BindGroupInner>,
}

impl BindGroup {
    pub(crate) fn new(layout: &BindGroupLayout, entries: &[BindGroupEntry]) -> Result<Self> {
        let err = |reason: String| GpuError::validation("bind group", reason);
        if entries.len() != layout.entries().len() {
            return Err(err(format!(
                "layout `{}` has {} entries but {} were provided",
                layout.inner.label,
                layout.entries().len(),
                entries.len()
            )));
        }
        let mut resources = Vec::with_capacity(entries.len());
        for le in layout.entries() {
            let provided: Vec<_> = entries.iter().filter(|e| e.binding == le.binding).collect();
            let [entry] = provided.as_slice() else {
                return Err(err(format!(
                    "binding {} must be provided exactly once",
                    le.binding
                )));
            };
            check_resource(le, &entry.resource).map_err(|r| err(format!("binding {}: {r}", le.binding)))?;
            resources.push(entry.resource.clone());
        }
        Ok(BindGroup {
            inner: Arc::new(BindGroupInner {
                layout: layout.clone(),
                resources,
            }),
        })
    }

    pub fn layout(&self) -> &BindGroupLayout {
        &self.inner.layout
    }

    pub(crate) fn resource(&self, binding: u32) -> Option<&BindingResource> {
        let idx = self
            .inner
            .layout
            .entries()
            .iter()
            .position(|e| e.binding == binding)?;
        self.inner.resources.get(idx)
    }
}

fn check_resource(le: &BindGroupLayoutEntry, res: &BindingResource) -> std::result::Result<(), String> {
    match (&le.ty, res) {
        (
            BindingType::UniformBuffer { min_binding_size } | BindingType::StorageBuffer { min_binding_size, .. },
            BindingResource::Buffer {
                buffer,
                offset,
                size,
            },
        ) => {
            let uniform = matches!(le.ty, BindingType::UniformBuffer { .. });
            let needed = if uniform {
                BufferUsages::UNIFORM
            } else {
                BufferUsages::STORAGE
            };
            if !buffer.usage().contains(needed) {
                return Err(format!("buffer `{}` lacks {needed:?} usage", buffer.label()));
            }
            if uniform && offset % UNIFORM_OFFSET_ALIGNMENT != 0 {
                return Err(format!(
                    "uniform offset {offset} is not a multiple of {UNIFORM_OFFSET_ALIGNMENT}"
                ));
            }
            let len = size.unwrap_or(buffer.size().saturating_sub(*offset));
            if offset + len > buffer.size() {
                return Err(format!(
                    "range {offset}+{len} exceeds buffer `{}` of {} bytes",
                    buffer.label(),
                    buffer.size()
                ));
            }
            if len < *min_binding_size {
                return Err(format!(
                    "bound range of {len} bytes is smaller than the required {min_binding_size}"
                ));
            }
            Ok(())
        }
        (
            BindingType::Texture {
                sample_type,
                view_dimension,
            },
            BindingResource::TextureView(view),
        ) => {
            let tex = view.texture();
            if !tex.usage().contains(TextureUsages::TEXTURE_BINDING) {
                return Err(format!("texture `{}` lacks TEXTURE_BINDING usage", tex.label()));
            }
            if view.dimension() != *view_dimension {
                return Err(format!(
                    "view dimension {:?} does not match {view_dimension:?}",
                    view.dimension()
                ));
            }
            let depth = tex.format().is_depth();
            match sample_type {
                TextureSampleType::Depth if !depth => {
                    Err(format!("texture `{}` is not a depth texture", tex.label()))
                }
                TextureSampleType::Float if depth => Err(format!(
                    "depth texture `{}` bound as a float texture",
                    tex.label()
                )),
                _ => Ok(()),
            }
        }
        (
            BindingType::StorageTexture {
                format,
                view_dimension,
                ..
            },
            BindingResource::TextureView(view),
        ) => {
            let tex = view.texture();
            if !tex.usage().contains(TextureUsages::STORAGE_BINDING) {
                return Err(format!("texture `{}` lacks STORAGE_BINDING usage", tex.label()));
            }
            if tex.format() != *format {
                return Err(format!(
                    "format {:?} does not match {format:?}",
                    tex.format()
                ));
            }
            if view.dimension() != *view_dimension {
                return Err(format!(
                    "view dimension {:?} does not match {view_dimension:?}",
                    view.dimension()
                ));
            }
            Ok(())
        }
        (BindingType::Sampler { comparison }, BindingResource::Sampler(s)) => {
            if s.descriptor().compare.is_some() != *comparison {
                return Err(format!(
                    "sampler comparison mode does not match (layout expects comparison: {comparison})"
                ));
            }
            Ok(())
        }
        (ty, res) => Err(format!("resource {res:?} does not fit layout type {ty:?}")),
    }
}
