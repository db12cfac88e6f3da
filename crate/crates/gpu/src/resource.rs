//! Buffers, textures, views and samplers.

use std::fmt;
use std::sync::{Arc, Mutex};

use crate::device::DeviceShared;
use crate::types::*;

/// Texel storage for one texture. Array layers (and cube faces) are stacked
/// row-major, layer after layer.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum TexelData {
    /// Four bytes per texel.
    Rgba8(Vec<u8>),
    /// `channels` floats per texel.
    Float { channels: usize, data: Vec<f32> },
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct TexelStore {
    pub width: u32,
    pub height: u32,
    pub layers: u32,
    pub format: TextureFormat,
    pub data: TexelData,
}

impl TexelStore {
    pub fn new(size: Extent3d, format: TextureFormat) -> Self {
        let count = size.width as usize * size.height as usize * size.depth_or_array_layers as usize;
        let data = match format {
            TextureFormat::Rgba8Unorm => TexelData::Rgba8(vec![0; count * 4]),
            TextureFormat::R32Float => TexelData::Float {
                channels: 1,
                data: vec![0.0; count],
            },
            TextureFormat::Rgba32Float => TexelData::Float {
                channels: 4,
                data: vec![0.0; count * 4],
            },
            TextureFormat::Depth24Plus | TextureFormat::Depth32Float => TexelData::Float {
                channels: 1,
                data: vec![0.0; count],
            },
        };
        TexelStore {
            width: size.width,
            height: size.height,
            layers: size.depth_or_array_layers,
            format,
            data,
        }
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, layer: u32) -> usize {
        (layer as usize * self.height as usize + y as usize) * self.width as usize + x as usize
    }

    /// Reads one texel as four floats; missing channels read as `(0, 0, 0, 1)`.
    #[inline]
    pub fn read(&self, x: u32, y: u32, layer: u32) -> [f32; 4] {
        let i = self.index(x, y, layer);
        match &self.data {
            TexelData::Rgba8(d) => {
                let p = &d[i * 4..i * 4 + 4];
                const S: f32 = 1.0 / 255.0;
                [p[0] as f32 * S, p[1] as f32 * S, p[2] as f32 * S, p[3] as f32 * S]
            }
            TexelData::Float { channels: 1, data } => [data[i], 0.0, 0.0, 1.0],
            TexelData::Float { data, .. } => {
                let p = &data[i * 4..i * 4 + 4];
                [p[0], p[1], p[2], p[3]]
            }
        }
    }

    #[inline]
    pub fn write(&mut self, x: u32, y: u32, layer: u32, v: [f32; 4]) {
        let i = self.index(x, y, layer);
        let format = self.format;
        match &mut self.data {
            TexelData::Rgba8(d) => {
                for c in 0..4 {
                    d[i * 4 + c] = unorm8(v[c]);
                }
            }
            TexelData::Float { channels: 1, data } => {
                data[i] = match format {
                    TextureFormat::Depth24Plus => quantize_depth24(v[0]),
                    TextureFormat::Depth32Float => v[0].clamp(0.0, 1.0),
                    _ => v[0],
                };
            }
            TexelData::Float { data, .. } => data[i * 4..i * 4 + 4].copy_from_slice(&v),
        }
    }

    #[inline]
    pub fn depth(&self, i: usize) -> f32 {
        match &self.data {
            TexelData::Float { data, .. } => data[i],
            TexelData::Rgba8(_) => 0.0,
        }
    }

    #[inline]
    pub fn set_depth(&mut self, i: usize, z: f32) {
        let z = if self.format == TextureFormat::Depth24Plus {
            quantize_depth24(z)
        } else {
            z
        };
        if let TexelData::Float { data, .. } = &mut self.data {
            data[i] = z;
        }
    }

    pub fn fill(&mut self, v: [f32; 4]) {
        match &mut self.data {
            TexelData::Rgba8(d) => {
                let px = [unorm8(v[0]), unorm8(v[1]), unorm8(v[2]), unorm8(v[3])];
                for chunk in d.chunks_exact_mut(4) {
                    chunk.copy_from_slice(&px);
                }
            }
            TexelData::Float { channels: 1, data } => {
                let z = match self.format {
                    TextureFormat::Depth24Plus => quantize_depth24(v[0]),
                    _ => v[0],
                };
                data.fill(z);
            }
            TexelData::Float { data, .. } => {
                for chunk in data.chunks_exact_mut(4) {
                    chunk.copy_from_slice(&v);
                }
            }
        }
    }

    /// Raw bytes of one texel row in the format's linear layout.
    pub fn row_bytes(&self, y: u32, layer: u32, out: &mut Vec<u8>) {
        let start = self.index(0, y, layer);
        let n = self.width as usize;
        match &self.data {
            TexelData::Rgba8(d) => out.extend_from_slice(&d[start * 4..(start + n) * 4]),
            TexelData::Float { channels, data } => {
                for f in &data[start * channels..(start + n) * channels] {
                    out.extend_from_slice(&f.to_le_bytes());
                }
            }
        }
    }

    pub fn write_row_bytes(&mut self, y: u32, layer: u32, bytes: &[u8]) {
        let start = self.index(0, y, layer);
        match &mut self.data {
            TexelData::Rgba8(d) => d[start * 4..start * 4 + bytes.len()].copy_from_slice(bytes),
            TexelData::Float { channels, data } => {
                for (k, b) in bytes.chunks_exact(4).enumerate() {
                    data[start * *channels + k] = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                }
            }
        }
    }
}

/// Float to 8-bit unorm conversion: clamp, scale, round to nearest.
#[inline]
pub fn unorm8(v: f32) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round() as u8
}

#[inline]
pub fn quantize_depth24(z: f32) -> f32 {
    const MAX: f64 = ((1u32 << 24) - 1) as f64;
    let z = if z.is_nan() { 0.0 } else { z.clamp(0.0, 1.0) };
    ((z as f64 * MAX).round() / MAX) as f32
}

pub(crate) struct BufferInner {
    pub label: String,
    pub size: u64,
    pub usage: BufferUsages,
    pub data: Mutex<Arc<Vec<u8>>>,
    device: Arc<DeviceShared>,
}

impl Drop for BufferInner {
    fn drop(&mut self) {
        self.device.release_bytes(self.size);
    }
}

/// A linear block of device memory.
#[derive(Clone)]
pub struct Buffer {
    pub(crate) inner: Arc<BufferInner>,
}

impl Buffer {
    pub(crate) fn new(device: Arc<DeviceShared>, desc: &BufferDescriptor<'_>) -> Buffer {
        device.acquire_bytes(desc.size);
        Buffer {
            inner: Arc::new(BufferInner {
                label: desc.label.unwrap_or("").to_owned(),
                size: desc.size,
                usage: desc.usage,
                data: Mutex::new(Arc::new(vec![0; desc.size as usize])),
                device,
            }),
        }
    }

    pub fn size(&self) -> u64 {
        self.inner.size
    }

    pub fn usage(&self) -> BufferUsages {
        self.inner.usage
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub(crate) fn snapshot(&self) -> Arc<Vec<u8>> {
        self.inner.data.lock().expect("buffer lock").clone()
    }

    pub(crate) fn with_data_mut<R>(&self, f: impl FnOnce(&mut Vec<u8>) -> R) -> R {
        let mut guard = self.inner.data.lock().expect("buffer lock");
        f(Arc::make_mut(&mut guard))
    }

    /// Reads the whole buffer. Requires `MAP_READ`; all submitted work has already
    /// completed because the queue executes synchronously.
    pub fn map_read(&self) -> crate::Result<Vec<u8>> {
        self.inner.device.check_alive()?;
        if !self.usage().contains(BufferUsages::MAP_READ) {
            return Err(crate::GpuError::validation(
                "buffer map",
                format!("buffer `{}` lacks MAP_READ usage", self.label()),
            ));
        }
        Ok(self.snapshot().as_ref().clone())
    }
}

impl fmt::Debug for Buffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Buffer")
            .field("label", &self.inner.label)
            .field("size", &self.inner.size)
            .field("usage", &self.inner.usage)
            .finish()
    }
}

impl PartialEq for Buffer {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }
}

pub(crate) struct TextureInner {
    pub label: String,
    pub size: Extent3d,
    pub format: TextureFormat,
    pub usage: TextureUsages,
    pub data: Mutex<Arc<TexelStore>>,
    bytes: u64,
    device: Arc<DeviceShared>,
}

impl Drop for TextureInner {
    fn drop(&mut self) {
        self.device.release_bytes(self.bytes);
    }
}

#[derive(Clone)]
pub struct Texture {
    pub(crate) inner: Arc<TextureInner>,
}

impl Texture {
    pub(crate) fn new(device: Arc<DeviceShared>, desc: &TextureDescriptor<'_>) -> Texture {
        let size = desc.size;
        let bytes = size.width as u64
            * size.height as u64
            * size.depth_or_array_layers as u64
            * desc.format.block_size() as u64;
        device.acquire_bytes(bytes);
        Texture {
            inner: Arc::new(TextureInner {
                label: desc.label.unwrap_or("").to_owned(),
                size,
                format: desc.format,
                usage: desc.usage,
                data: Mutex::new(Arc::new(TexelStore::new(size, desc.format))),
                bytes,
                device,
            }),
        }
    }

    pub fn size(&self) -> Extent3d {
        self.inner.size
    }

    pub fn width(&self) -> u32 {
        self.inner.size.width
    }

    pub fn height(&self) -> u32 {
        self.inner.size.height
    }

    pub fn format(&self) -> TextureFormat {
        self.inner.format
    }

    pub fn usage(&self) -> TextureUsages {
        self.inner.usage
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub(crate) fn snapshot(&self) -> Arc<TexelStore> {
        self.inner.data.lock().expect("texture lock").clone()
    }

    pub(crate) fn replace(&self, store: Arc<TexelStore>) {
        *self.inner.data.lock().expect("texture lock") = store;
    }

    pub(crate) fn with_data_mut<R>(&self, f: impl FnOnce(&mut TexelStore) -> R) -> R {
        let mut guard = self.inner.data.lock().expect("texture lock");
        f(Arc::make_mut(&mut guard))
    }

    pub fn create_view(&self, desc: &TextureViewDescriptor<'_>) -> crate::Result<TextureView> {
        let layers = self.inner.size.depth_or_array_layers;
        let dimension = desc.dimension.unwrap_or(if layers == 1 {
            TextureViewDimension::D2
        } else {
            TextureViewDimension::D2Array
        });
        match dimension {
            TextureViewDimension::D2 if layers != 1 => {
                return Err(crate::GpuError::validation(
                    "texture view",
                    format!("a 2D view needs exactly one layer, `{}` has {layers}", self.label()),
                ))
            }
            TextureViewDimension::Cube => {
                if layers != 6 || self.width() != self.height() {
                    return Err(crate::GpuError::validation(
                        "texture view",
                        format!(
                            "a cube view needs 6 square layers, `{}` is {}x{}x{layers}",
                            self.label(),
                            self.width(),
                            self.height()
                        ),
                    ));
                }
            }
            _ => {}
        }
        Ok(TextureView {
            texture: self.clone(),
            dimension,
        })
    }
}

impl fmt::Debug for Texture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Texture")
            .field("label", &self.inner.label)
            .field("size", &self.inner.size)
            .field("format", &self.inner.format)
            .finish()
    }
}

impl PartialEq for Texture {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextureView {
    pub(crate) texture: Texture,
    pub(crate) dimension: TextureViewDimension,
}

impl TextureView {
    pub fn texture(&self) -> &Texture {
        &self.texture
    }

    pub fn dimension(&self) -> TextureViewDimension {
        self.dimension
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sampler {
    pub(crate) desc: SamplerDescriptor,
}

impl Sampler {
    pub fn descriptor(&self) -> &SamplerDescriptor {
        &self.desc
    }
}
