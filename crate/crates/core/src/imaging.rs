//! CPU-side RGBA8 images: decoding, encoding and comparison.

use std::path::Path;

use crate::error::{Error, Result};

/// Tightly packed RGBA8 pixels, rows top to bottom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Image> {
        if pixels.len() != width as usize * height as usize * 4 {
            return Err(Error::Decode {
                path: "<memory>".into(),
                reason: format!("{}x{} RGBA8 needs {} bytes, got {}", width, height, width * height * 4, pixels.len()),
            });
        }
        Ok(Image { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Image {
        Image {
            width,
            height,
            pixels: rgba.repeat(width as usize * height as usize),
        }
    }

    /// Expands 1 to 4 interleaved channels into RGBA8.
    pub fn from_channels(width: u32, height: u32, channels: u8, data: &[u8]) -> Result<Image> {
        let n = width as usize * height as usize;
        let bad = |reason: String| Error::Decode {
            path: "<memory>".into(),
            reason,
        };
        if !(1..=4).contains(&channels) {
            return Err(bad(format!("unsupported channel count {channels}")));
        }
        if data.len() != n * channels as usize {
            return Err(bad(format!(
                "{width}x{height}x{channels} needs {} bytes, got {}",
                n * channels as usize,
                data.len()
            )));
        }
        let pixels = data
            .chunks_exact(channels as usize)
            .flat_map(|p| match p {
                [l] => [*l, *l, *l, 255],
                [l, a] => [*l, *l, *l, *a],
                [r, g, b] => [*r, *g, *b, 255],
                [r, g, b, a] => [*r, *g, *b, *a],
                _ => unreachable!("channels checked above"),
            })
            .collect();
        Ok(Image { width, height, pixels })
    }

    /// Decodes a PNG or JPEG file.
    pub fn load(path: &Path) -> Result<Image> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_owned()));
        }
        let img = image::open(path).map_err(|e| Error::Decode {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let rgba = img.to_rgba8();
        Ok(Image {
            width: rgba.width(),
            height: rgba.height(),
            pixels: rgba.into_raw(),
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(path, &self.pixels, self.width, self.height, image::ColorType::Rgba8).map_err(|e| {
            Error::Decode {
                path: path.display().to_string(),
                reason: e.to_string(),
            }
        })
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].try_into().expect("4-byte pixel")
    }

    /// Mean absolute difference per channel, in 8-bit units.
    pub fn mean_abs_diff(&self, other: &Image) -> Option<f64> {
        if (self.width, self.height) != (other.width, other.height) {
            return None;
        }
        let total: u64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| a.abs_diff(*b) as u64)
            .sum();
        Some(total as f64 / self.pixels.len().max(1) as f64)
    }

    /// Largest per-channel difference, in 8-bit units.
    pub fn max_abs_diff(&self, other: &Image) -> Option<u8> {
        if (self.width, self.height) != (other.width, other.height) {
            return None;
        }
        Some(
            self.pixels
                .iter()
                .zip(&other.pixels)
                .map(|(a, b)| a.abs_diff(*b))
                .max()
                .unwrap_or(0),
        )
    }
}
