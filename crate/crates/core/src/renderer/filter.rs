//! Image filters run as compute shaders, with CPU references.

use ecsgfx_gpu as gpu;
use gpu::{
    BindGroupEntry, BindingResource, BufferDescriptor, BufferUsages, ComputePipelineDescriptor, Device,
};

use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FilterKind {
    /// Rec. 709 luma into all three color channels; alpha is kept.
    Grayscale,
    /// 3x3 mean over every channel with clamp-to-edge borders.
    BoxBlur3,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Grayscale => "grayscale",
            FilterKind::BoxBlur3 => "box-blur",
        }
    }

    fn entry_point(self) -> &'static str {
        match self {
            FilterKind::Grayscale => "grayscale",
            FilterKind::BoxBlur3 => "box_blur",
        }
    }
}

const FILTER_WGSL: &str = include_str!("../../assets/shaders/filters.wgsl");
const WORKGROUP: u32 = 8;

/// Runs `kind` over interleaved 8-bit pixels on the device. Only 4-channel input is accepted.
pub fn dispatch_filter(
    device: &Device,
    width: u32,
    height: u32,
    channels: usize,
    pixels: &[u8],
    kind: FilterKind,
) -> Result<Image> {
    if channels != 4 {
        return Err(Error::UnsupportedFormat(channels));
    }
    let image = Image::new(width, height, pixels.to_vec())?;
    if width == 0 || height == 0 {
        return Ok(image);
    }
    let module = device.create_shader_module("filters", FILTER_WGSL)?;
    let pipeline = device.create_compute_pipeline(&ComputePipelineDescriptor {
        label: Some(kind.name()),
        layout: None,
        module: &module,
        entry_point: kind.entry_point(),
    })?;
    let size = image.pixels.len() as u64;
    let params: Vec<u8> = [width, height, 0, 0].iter().flat_map(|v| v.to_le_bytes()).collect();
    let params = device.create_buffer_init(Some("filter params"), &params, BufferUsages::UNIFORM)?;
    let input = device.create_buffer_init(Some("filter input"), &image.pixels, BufferUsages::STORAGE)?;
    let output = device.create_buffer(&BufferDescriptor {
        label: Some("filter output"),
        size,
        usage: BufferUsages::STORAGE | BufferUsages::COPY_SRC,
    })?;
    let readback = device.create_buffer(&BufferDescriptor {
        label: Some("filter readback"),
        size,
        usage: BufferUsages::COPY_DST | BufferUsages::MAP_READ,
    })?;
    let group = device.create_bind_group(
        &pipeline.get_bind_group_layout(0)?,
        &[
            BindGroupEntry {
                binding: 0,
                resource: BindingResource::whole_buffer(&params),
            },
            BindGroupEntry {
                binding: 1,
                resource: BindingResource::whole_buffer(&input),
            },
            BindGroupEntry {
                binding: 2,
                resource: BindingResource::whole_buffer(&output),
            },
        ],
    )?;
    let mut enc = device.create_command_encoder()?;
    {
        let mut pass = enc.begin_compute_pass();
        pass.set_pipeline(&pipeline);
        pass.set_bind_group(0, &group);
        pass.dispatch_workgroups(width.div_ceil(WORKGROUP), height.div_ceil(WORKGROUP), 1);
    }
    enc.copy_buffer_to_buffer(&output, 0, &readback, 0, size);
    device.queue().submit([enc.finish()])?;
    Image::new(width, height, readback.map_read()?)
}

/// Filters an RGBA8 image on the device.
pub fn dispatch_image_filter(device: &Device, image: &Image, kind: FilterKind) -> Result<Image> {
    dispatch_filter(device, image.width, image.height, 4, &image.pixels, kind)
}

/// CPU reference for [`dispatch_image_filter`].
pub fn filter_reference(image: &Image, kind: FilterKind) -> Image {
    let (w, h) = (image.width as i64, image.height as i64);
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            let i = ((y * w + x) * 4) as usize;
            match kind {
                FilterKind::Grayscale => {
                    let p = &image.pixels[i..i + 4];
                    let luma = 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64;
                    let g = luma.round().clamp(0.0, 255.0) as u8;
                    out.pixels[i..i + 3].fill(g);
                }
                FilterKind::BoxBlur3 => {
                    for c in 0..4 {
                        let mut sum = 0u32;
                        for dy in -1..=1 {
                            for dx in -1..=1 {
                                let sx = (x + dx).clamp(0, w - 1);
                                let sy = (y + dy).clamp(0, h - 1);
                                sum += image.pixels[((sy * w + sx) * 4) as usize + c] as u32;
                            }
                        }
                        out.pixels[i + c] = (sum as f64 / 9.0).round() as u8;
                    }
                }
            }
        }
    }
    out
}
