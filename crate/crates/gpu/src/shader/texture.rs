//! Texture addressing and filtering.
//!
//! Textures have a single mip level, so every sampling mode reads level 0.
//! Filtering uses the sampler's magnification filter.

use crate::resource::TexelStore;
use crate::types::{AddressMode, FilterMode, SamplerDescriptor};

#[inline]
fn address(i: i64, size: u32, mode: AddressMode) -> u32 {
    let n = size as i64;
    let r = match mode {
        AddressMode::ClampToEdge => i.clamp(0, n - 1),
        AddressMode::Repeat => i.rem_euclid(n),
        AddressMode::MirrorRepeat => {
            let m = i.rem_euclid(2 * n);
            if m < n {
                m
            } else {
                2 * n - 1 - m
            }
        }
    };
    r as u32
}

/// Bilinear taps along one axis: two texel indices and the weight of the second.
#[inline]
fn linear_taps(coord: f32, size: u32, mode: AddressMode) -> (u32, u32, f32) {
    let x = coord * size as f32 - 0.5;
    let x0 = x.floor();
    let frac = x - x0;
    let i0 = x0 as i64;
    (address(i0, size, mode), address(i0 + 1, size, mode), frac)
}

#[inline]
fn nearest_tap(coord: f32, size: u32, mode: AddressMode) -> u32 {
    address((coord * size as f32).floor() as i64, size, mode)
}

pub(crate) fn sample_2d(
    store: &TexelStore,
    layer: u32,
    u: f32,
    v: f32,
    s: &SamplerDescriptor,
    mode_u: AddressMode,
    mode_v: AddressMode,
) -> [f32; 4] {
    let (u, v) = (finite(u), finite(v));
    match s.mag_filter {
        FilterMode::Nearest => store.read(
            nearest_tap(u, store.width, mode_u),
            nearest_tap(v, store.height, mode_v),
            layer,
        ),
        FilterMode::Linear => {
            let (x0, x1, fx) = linear_taps(u, store.width, mode_u);
            let (y0, y1, fy) = linear_taps(v, store.height, mode_v);
            let a = store.read(x0, y0, layer);
            let b = store.read(x1, y0, layer);
            let c = store.read(x0, y1, layer);
            let d = store.read(x1, y1, layer);
            let mut out = [0.0; 4];
            for k in 0..4 {
                let top = a[k] + (b[k] - a[k]) * fx;
                let bottom = c[k] + (d[k] - c[k]) * fx;
                out[k] = top + (bottom - top) * fy;
            }
            out
        }
    }
}

#[inline]
fn finite(x: f32) -> f32 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

/// Maps a direction onto a cube face: `(layer, s, t)` with `s, t` in `[0, 1]`.
///
/// Layers are ordered +X, -X, +Y, -Y, +Z, -Z.
pub fn cube_face(dir: [f32; 3]) -> (u32, f32, f32) {
    let [x, y, z] = dir;
    let (ax, ay, az) = (x.abs(), y.abs(), z.abs());
    let (layer, sc, tc, ma) = if ax >= ay && ax >= az {
        if x >= 0.0 {
            (0, -z, -y, ax)
        } else {
            (1, z, -y, ax)
        }
    } else if ay >= az {
        if y >= 0.0 {
            (2, x, z, ay)
        } else {
            (3, x, -z, ay)
        }
    } else if z >= 0.0 {
        (4, x, -y, az)
    } else {
        (5, -x, -y, az)
    };
    if ma == 0.0 {
        return (layer, 0.5, 0.5);
    }
    (layer, (sc / ma + 1.0) * 0.5, (tc / ma + 1.0) * 0.5)
}

pub(crate) fn sample_cube(store: &TexelStore, dir: [f32; 3], s: &SamplerDescriptor) -> [f32; 4] {
    let (layer, u, v) = cube_face(dir);
    sample_2d(
        store,
        layer,
        u,
        v,
        s,
        AddressMode::ClampToEdge,
        AddressMode::ClampToEdge,
    )
}

/// Depth comparison sample: the fraction of filter taps for which
/// `reference <op> texel` holds.
pub(crate) fn sample_compare(
    store: &TexelStore,
    layer: u32,
    u: f32,
    v: f32,
    reference: f32,
    s: &SamplerDescriptor,
) -> f32 {
    let Some(op) = s.compare else {
        return sample_2d(store, layer, u, v, s, s.address_mode_u, s.address_mode_v)[0];
    };
    let (u, v) = (finite(u), finite(v));
    let test = |x: u32, y: u32| -> f32 {
        let texel = store.read(x, y, layer)[0];
        if op.passes(reference, texel) {
            1.0
        } else {
            0.0
        }
    };
    match s.mag_filter {
        FilterMode::Nearest => test(
            nearest_tap(u, store.width, s.address_mode_u),
            nearest_tap(v, store.height, s.address_mode_v),
        ),
        FilterMode::Linear => {
            let (x0, x1, fx) = linear_taps(u, store.width, s.address_mode_u);
            let (y0, y1, fy) = linear_taps(v, store.height, s.address_mode_v);
            let top = test(x0, y0) * (1.0 - fx) + test(x1, y0) * fx;
            let bottom = test(x0, y1) * (1.0 - fx) + test(x1, y1) * fx;
            top * (1.0 - fy) + bottom * fy
        }
    }
}
