//! Render pass execution: vertex shading, clipping, fixed-point rasterization,
//! fragment shading and output merging.
//!
//! Fragments of one draw are shaded in lane batches. When the fragment stage
//! neither discards nor writes depth, the depth test runs before shading and
//! only surviving fragments are shaded; otherwise the test runs after shading.
//! Either way, results are merged in primitive order.

use std::sync::Arc;

use crate::command::{DrawCmd, DrawKind, RenderPassRecord};
use crate::error::Result;
use crate::pipeline::{RenderPipelineInner, Stage};
use crate::resource::{quantize_depth24, TexelStore};
use crate::shader::interp::Machine;
use crate::shader::value::Val;
use crate::shader::IoBinding;
use crate::types::*;

/// Invocations per vertex-shader batch.
const VERTEX_BATCH: usize = 2048;
/// Invocations per fragment-shader batch.
const FRAGMENT_BATCH: usize = 512;
/// Sub-pixel precision of rasterizer coordinates, in bits.
const SUBPIXEL_BITS: u32 = 8;
/// Clip-space guard band, as a multiple of `w`, beyond which triangles are clipped in x and y.
const GUARD_BAND: f32 = 8.0;

/// Runs a recorded render pass against its attachments. Returns `(draws, instances)`.
pub(crate) fn execute_render_pass(rec: &RenderPassRecord) -> Result<(u64, u64)> {
    let mut colors: Vec<TexelStore> = rec
        .colors
        .iter()
        .map(|c| {
            let mut store = c.view.texture().snapshot().as_ref().clone();
            if let LoadOp::Clear(col) = c.load {
                store.fill([col.r as f32, col.g as f32, col.b as f32, col.a as f32]);
            }
            store
        })
        .collect();
    let mut depth: Option<TexelStore> = rec.depth.as_ref().map(|d| {
        let mut store = d.view.texture().snapshot().as_ref().clone();
        if let LoadOp::Clear(z) = d.load {
            store.fill([z, 0.0, 0.0, 0.0]);
        }
        store
    });
    let mut draws = 0;
    let mut instances = 0;
    for draw in &rec.draws {
        draw_one(draw, &mut colors, depth.as_mut())?;
        draws += 1;
        instances += draw.instances.len() as u64;
    }
    for (c, store) in rec.colors.iter().zip(colors) {
        c.view.texture().replace(Arc::new(store));
    }
    if let (Some(d), Some(store)) = (&rec.depth, depth) {
        d.view.texture().replace(Arc::new(store));
    }
    Ok((draws, instances))
}

#[derive(Clone, Copy, Debug)]
struct ClipVert {
    pos: [f32; 4],
    /// Barycentric coordinates relative to the unclipped triangle.
    bary: [f32; 3],
}

impl ClipVert {
    fn lerp(&self, o: &ClipVert, t: f32) -> ClipVert {
        let mut pos = [0.0; 4];
        let mut bary = [0.0; 3];
        for k in 0..4 {
            pos[k] = self.pos[k] + (o.pos[k] - self.pos[k]) * t;
        }
        for k in 0..3 {
            bary[k] = self.bary[k] + (o.bary[k] - self.bary[k]) * t;
        }
        ClipVert { pos, bary }
    }
}

/// Signed distances to the clip planes; a vertex is inside when all are non-negative.
fn plane_distances(p: &[f32; 4]) -> [f32; 7] {
    let [x, y, z, w] = *p;
    [
        z,
        w - z,
        x + GUARD_BAND * w,
        GUARD_BAND * w - x,
        y + GUARD_BAND * w,
        GUARD_BAND * w - y,
        w - 1e-6,
    ]
}

fn clip_polygon(tri: [ClipVert; 3]) -> Vec<ClipVert> {
    if tri.iter().all(|v| plane_distances(&v.pos).iter().all(|&d| d >= 0.0)) {
        return tri.to_vec();
    }
    let mut poly = tri.to_vec();
    for plane in 0..7 {
        if poly.is_empty() {
            break;
        }
        let mut out = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let da = plane_distances(&a.pos)[plane];
            let db = plane_distances(&b.pos)[plane];
            if da >= 0.0 {
                out.push(a);
            }
            if (da >= 0.0) != (db >= 0.0) {
                let t = da / (da - db);
                out.push(a.lerp(&b, t));
            }
        }
        poly = out;
    }
    poly
}

/// A rasterized fragment waiting for shading or merging.
#[derive(Clone, Copy, Debug)]
struct Frag {
    x: u32,
    y: u32,
    z: f32,
    inv_w: f32,
    /// Perspective-correct barycentrics relative to the source triangle.
    bary: [f32; 3],
    /// Vertex record indices of the source triangle.
    tri: [u32; 3],
    front: bool,
}

struct Target<'a> {
    colors: &'a mut [TexelStore],
    depth: Option<&'a mut TexelStore>,
    width: u32,
    height: u32,
}

fn decode_attribute(format: VertexFormat, bytes: &[u8], out: &mut [u32; 4]) {
    let word = |i: usize| -> u32 {
        bytes
            .get(i * 4..i * 4 + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .unwrap_or(0)
    };
    match format {
        VertexFormat::Uint32 | VertexFormat::Sint32 => {
            *out = [word(0), 0, 0, 1];
        }
        VertexFormat::Unorm8x4 => {
            for (k, o) in out.iter_mut().enumerate() {
                *o = (bytes.get(k).copied().unwrap_or(0) as f32 / 255.0).to_bits();
            }
        }
        _ => {
            let n = format.components();
            *out = [0, 0, 0, 1f32.to_bits()];
            for (k, o) in out.iter_mut().enumerate().take(n) {
                *o = word(k);
            }
        }
    }
}

struct AttributeFetch {
    data: Arc<Vec<u8>>,
    base: u64,
    stride: u64,
    step: VertexStepMode,
    format: VertexFormat,
}

fn draw_one(draw: &DrawCmd, colors: &mut [TexelStore], depth: Option<&mut TexelStore>) -> Result<()> {
    let p: &RenderPipelineInner = &draw.pipeline.inner;
    let (width, height) = colors
        .first()
        .map(|c| (c.width, c.height))
        .or(depth.as_ref().map(|d| (d.width, d.height)))
        .unwrap_or((0, 0));
    let mut target = Target {
        colors,
        depth,
        width,
        height,
    };

    // Primitive stream as vertex indices.
    let indices: Vec<u32> = match &draw.kind {
        DrawKind::Direct { vertices } => vertices.clone().collect(),
        DrawKind::Indexed {
            indices,
            base_vertex,
            index: (buffer, format, offset),
        } => {
            let data = buffer.snapshot();
            let size = format.size() as usize;
            indices
                .clone()
                .map(|i| {
                    let at = *offset as usize + i as usize * size;
                    let raw = match format {
                        IndexFormat::Uint16 => u16::from_le_bytes([data[at], data[at + 1]]) as i64,
                        IndexFormat::Uint32 => {
                            u32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]]) as i64
                        }
                    };
                    (raw + *base_vertex as i64).max(0) as u32
                })
                .collect()
        }
    };
    let mut unique = indices.clone();
    unique.sort_unstable();
    unique.dedup();
    let local: Vec<u32> = indices
        .iter()
        .map(|i| unique.binary_search(i).expect("index is unique") as u32)
        .collect();
    let instance_ids: Vec<u32> = draw.instances.clone().collect();
    if instance_ids.is_empty() || indices.len() < 3 {
        return Ok(());
    }

    let vout = shade_vertices(p, draw, &unique, &instance_ids)?;
    let stride = p.vertex_out_slots;

    let mut frags: Vec<Frag> = Vec::new();
    let early_z = p.fragment.as_ref().is_none_or(|fs| {
        !fs.has_kill && fs.output(IoBinding::FragDepth).is_none()
    });
    let mut fragment_runner = p
        .fragment
        .as_ref()
        .map(|fs| fs.env(&draw.bind_groups).map(|env| (fs, env.0)))
        .transpose()?;

    for (ii, _) in instance_ids.iter().enumerate() {
        let base = ii * unique.len();
        for t in local.chunks_exact(3) {
            let ids = [
                (base + t[0] as usize) as u32,
                (base + t[1] as usize) as u32,
                (base + t[2] as usize) as u32,
            ];
            let vert = |k: usize| -> ClipVert {
                let o = ids[k] as usize * stride + p.position_slot;
                let pos = [
                    f32::from_bits(vout[o]),
                    f32::from_bits(vout[o + 1]),
                    f32::from_bits(vout[o + 2]),
                    f32::from_bits(vout[o + 3]),
                ];
                let mut bary = [0.0; 3];
                bary[k] = 1.0;
                ClipVert { pos, bary }
            };
            let poly = clip_polygon([vert(0), vert(1), vert(2)]);
            for k in 1..poly.len().saturating_sub(1) {
                rasterize(
                    p,
                    [poly[0], poly[k], poly[k + 1]],
                    ids,
                    &mut target,
                    early_z,
                    &mut frags,
                );
                if frags.len() >= FRAGMENT_BATCH {
                    flush(p, &mut fragment_runner, &vout, &mut frags, &mut target, early_z)?;
                }
            }
        }
    }
    flush(p, &mut fragment_runner, &vout, &mut frags, &mut target, early_z)?;
    Ok(())
}

/// Runs the vertex stage over every (instance, unique vertex) pair. Returns the
/// flattened outputs, `vertex_out_slots` words per pair, instance-major.
fn shade_vertices(p: &RenderPipelineInner, draw: &DrawCmd, unique: &[u32], instances: &[u32]) -> Result<Vec<u32>> {
    let vs: &Stage = &p.vertex;
    let (mut env, _) = vs.env(&draw.bind_groups)?;
    let mut fetch: Vec<Option<AttributeFetch>> = Vec::new();
    for input in &vs.inputs {
        let f = match input.binding {
            IoBinding::Location { location, .. } => {
                p.buffers.iter().enumerate().find_map(|(slot, layout)| {
                    let attr = layout.attributes.iter().find(|a| a.shader_location == location)?;
                    let (buffer, offset) = draw.vertex_buffers.get(slot)?.as_ref()?;
                    Some(AttributeFetch {
                        data: buffer.snapshot(),
                        base: offset + attr.offset,
                        stride: layout.array_stride,
                        step: layout.step_mode,
                        format: attr.format,
                    })
                })
            }
            _ => None,
        };
        fetch.push(f);
    }

    let stride = p.vertex_out_slots;
    let total = unique.len() * instances.len();
    let mut out = vec![0u32; total * stride];
    let mut start = 0;
    while start < total {
        let lanes = (total - start).min(VERTEX_BATCH);
        let mut args = vs.empty_args(lanes);
        for (input, f) in vs.inputs.iter().zip(&fetch) {
            let arg = &mut args[input.arg];
            for l in 0..lanes {
                let g = start + l;
                let vertex = unique[g % unique.len()];
                let instance = instances[g / unique.len()];
                let words: [u32; 4] = match input.binding {
                    IoBinding::VertexIndex => [vertex, 0, 0, 0],
                    IoBinding::InstanceIndex => [instance, 0, 0, 0],
                    IoBinding::Location { .. } => {
                        let f = f.as_ref().expect("attribute validated at pipeline creation");
                        let element = match f.step {
                            VertexStepMode::Vertex => vertex,
                            VertexStepMode::Instance => instance,
                        } as u64;
                        let at = (f.base + element * f.stride) as usize;
                        let end = (at + f.format.size() as usize).min(f.data.len());
                        let mut w = [0u32; 4];
                        decode_attribute(f.format, &f.data[at.min(end)..end], &mut w);
                        w
                    }
                    _ => [0; 4],
                };
                for s in 0..input.slots.min(4) {
                    arg.data[(input.slot + s) * lanes + l] = words[s];
                }
            }
        }
        let mut machine = Machine::new(&vs.module, &mut env, lanes);
        let result = machine
            .run_entry(vs.entry, args)?
            .unwrap_or_else(|| Val::zeroed(stride, lanes));
        for s in 0..stride {
            for l in 0..lanes {
                out[(start + l) * stride + s] = result.get(s, l);
            }
        }
        start += lanes;
    }
    Ok(out)
}

#[inline]
fn edge(ax: i64, ay: i64, bx: i64, by: i64, px: i64, py: i64) -> i64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

fn rasterize(
    p: &RenderPipelineInner,
    tri: [ClipVert; 3],
    ids: [u32; 3],
    target: &mut Target<'_>,
    early_z: bool,
    frags: &mut Vec<Frag>,
) {
    let (w, h) = (target.width as f32, target.height as f32);
    let scale = (1u32 << SUBPIXEL_BITS) as f32;
    let mut sv = [(0i64, 0i64, 0f32, 0f32); 3];
    for (k, v) in tri.iter().enumerate() {
        let inv_w = 1.0 / v.pos[3];
        let nx = v.pos[0] * inv_w;
        let ny = v.pos[1] * inv_w;
        let nz = v.pos[2] * inv_w;
        let sx = (nx + 1.0) * 0.5 * w;
        let sy = (1.0 - ny) * 0.5 * h;
        sv[k] = ((sx * scale).round() as i64, (sy * scale).round() as i64, nz, inv_w);
    }
    let area = edge(sv[0].0, sv[0].1, sv[1].0, sv[1].1, sv[2].0, sv[2].1);
    if area == 0 {
        return;
    }
    // Counter-clockwise in normalized device coordinates is clockwise with y pointing down.
    let ccw = area < 0;
    let front = match p.primitive.front_face {
        FrontFace::Ccw => ccw,
        FrontFace::Cw => !ccw,
    };
    match p.primitive.cull_mode {
        Some(Face::Front) if front => return,
        Some(Face::Back) if !front => return,
        _ => {}
    }
    let mut order = [0usize, 1, 2];
    if area < 0 {
        order.swap(1, 2);
    }
    let area = area.abs();
    let v: [(i64, i64, f32, f32); 3] = [sv[order[0]], sv[order[1]], sv[order[2]]];
    let src: [ClipVert; 3] = [tri[order[0]], tri[order[1]], tri[order[2]]];

    let half = 1i64 << (SUBPIXEL_BITS - 1);
    let one = 1i64 << SUBPIXEL_BITS;
    let min_x = v.iter().map(|p| p.0).min().unwrap();
    let max_x = v.iter().map(|p| p.0).max().unwrap();
    let min_y = v.iter().map(|p| p.1).min().unwrap();
    let max_y = v.iter().map(|p| p.1).max().unwrap();
    let px0 = ((min_x - half) as f64 / one as f64).ceil().max(0.0) as i64;
    let px1 = (((max_x - half) as f64 / one as f64).floor() as i64).min(target.width as i64 - 1);
    let py0 = ((min_y - half) as f64 / one as f64).ceil().max(0.0) as i64;
    let py1 = (((max_y - half) as f64 / one as f64).floor() as i64).min(target.height as i64 - 1);
    if px0 > px1 || py0 > py1 {
        return;
    }

    // Edge k is opposite vertex k.
    let edges = [(1usize, 2usize), (2, 0), (0, 1)];
    let mut bias = [0i64; 3];
    let mut step_x = [0i64; 3];
    let mut step_y = [0i64; 3];
    let mut row = [0i64; 3];
    let sx0 = px0 * one + half;
    let sy0 = py0 * one + half;
    for (k, &(a, b)) in edges.iter().enumerate() {
        let dx = v[b].0 - v[a].0;
        let dy = v[b].1 - v[a].1;
        let top_left = dy < 0 || (dy == 0 && dx > 0);
        bias[k] = if top_left { 0 } else { -1 };
        step_x[k] = -dy * one;
        step_y[k] = dx * one;
        row[k] = edge(v[a].0, v[a].1, v[b].0, v[b].1, sx0, sy0);
    }

    let depth_state = p.depth_stencil;
    let depth24 = target
        .depth
        .as_ref()
        .is_some_and(|d| d.format == TextureFormat::Depth24Plus);
    let inv_area = 1.0 / area as f64;
    for py in py0..=py1 {
        let mut e = row;
        for px in px0..=px1 {
            if e[0] + bias[0] >= 0 && e[1] + bias[1] >= 0 && e[2] + bias[2] >= 0 {
                let l = [
                    (e[0] as f64 * inv_area) as f32,
                    (e[1] as f64 * inv_area) as f32,
                    (e[2] as f64 * inv_area) as f32,
                ];
                let z = (l[0] * v[0].2 + l[1] * v[1].2 + l[2] * v[2].2).clamp(0.0, 1.0);
                let q = [l[0] * v[0].3, l[1] * v[1].3, l[2] * v[2].3];
                let inv_w = q[0] + q[1] + q[2];
                let mut bary = [0f32; 3];
                for (k, qk) in q.iter().enumerate() {
                    let pk = qk / inv_w;
                    for (j, b) in bary.iter_mut().enumerate() {
                        *b += pk * src[k].bary[j];
                    }
                }
                let mut keep = true;
                if early_z {
                    if let (Some(ds), Some(depth)) = (depth_state, target.depth.as_deref_mut()) {
                        let i = depth.index(px as u32, py as u32, 0);
                        let zq = if depth24 { quantize_depth24(z) } else { z };
                        if ds.depth_compare.passes(zq, depth.depth(i)) {
                            if ds.depth_write_enabled {
                                depth.set_depth(i, zq);
                            }
                        } else {
                            keep = false;
                        }
                    }
                }
                if keep && p.fragment.is_some() {
                    frags.push(Frag {
                        x: px as u32,
                        y: py as u32,
                        z,
                        inv_w,
                        bary,
                        tri: ids,
                        front,
                    });
                }
            }
            for k in 0..3 {
                e[k] += step_x[k];
            }
        }
        for k in 0..3 {
            row[k] += step_y[k];
        }
    }
}

/// Shades pending fragments and merges them into the targets in order.
fn flush(
    p: &RenderPipelineInner,
    runner: &mut Option<(&Stage, crate::shader::interp::Env)>,
    vout: &[u32],
    frags: &mut Vec<Frag>,
    target: &mut Target<'_>,
    early_z: bool,
) -> Result<()> {
    if frags.is_empty() {
        return Ok(());
    }
    let Some((fs, env)) = runner.as_mut() else {
        frags.clear();
        return Ok(());
    };
    let lanes = frags.len();
    let stride = p.vertex_out_slots;
    let mut args = fs.empty_args(lanes);
    let mut varying = p.varyings.iter();
    for input in &fs.inputs {
        let arg = &mut args[input.arg];
        match input.binding {
            IoBinding::Position => {
                for (l, f) in frags.iter().enumerate() {
                    let pos = [f.x as f32 + 0.5, f.y as f32 + 0.5, f.z, f.inv_w];
                    for (s, c) in pos.iter().enumerate().take(input.slots) {
                        arg.data[(input.slot + s) * lanes + l] = c.to_bits();
                    }
                }
            }
            IoBinding::FrontFacing => {
                for (l, f) in frags.iter().enumerate() {
                    arg.data[input.slot * lanes + l] = f.front as u32;
                }
            }
            IoBinding::Location { .. } => {
                let var = varying.next().expect("varying plan matches inputs");
                for (l, f) in frags.iter().enumerate() {
                    let rec = |k: usize| f.tri[k] as usize * stride + var.vertex_slot;
                    for s in 0..var.slots {
                        let word = if var.flat {
                            vout[rec(0) + s]
                        } else {
                            let a = f32::from_bits(vout[rec(0) + s]);
                            let b = f32::from_bits(vout[rec(1) + s]);
                            let c = f32::from_bits(vout[rec(2) + s]);
                            (a * f.bary[0] + b * f.bary[1] + c * f.bary[2]).to_bits()
                        };
                        arg.data[(input.slot + s) * lanes + l] = word;
                    }
                }
            }
            _ => {}
        }
    }
    let mut machine = Machine::new(&fs.module, env, lanes);
    let result = machine.run_entry(fs.entry, args)?;
    let killed = std::mem::take(&mut machine.killed);
    drop(machine);
    let result = result.unwrap_or_default();
    let frag_depth = fs.output(IoBinding::FragDepth).map(|o| o.slot);
    let color_slots: Vec<Option<(usize, usize)>> = (0..p.targets.len())
        .map(|t| {
            fs.outputs.iter().find_map(|o| match o.binding {
                IoBinding::Location { location, .. } if location as usize == t => Some((o.slot, o.slots)),
                _ => None,
            })
        })
        .collect();
    let depth24 = target
        .depth
        .as_ref()
        .is_some_and(|d| d.format == TextureFormat::Depth24Plus);

    for (l, f) in frags.iter().enumerate() {
        if killed[l] {
            continue;
        }
        if !early_z {
            if let (Some(ds), Some(depth)) = (p.depth_stencil, target.depth.as_deref_mut()) {
                let z = match frag_depth {
                    Some(s) => result.f(s, l).clamp(0.0, 1.0),
                    None => f.z,
                };
                let zq = if depth24 { quantize_depth24(z) } else { z };
                let i = depth.index(f.x, f.y, 0);
                if !ds.depth_compare.passes(zq, depth.depth(i)) {
                    continue;
                }
                if ds.depth_write_enabled {
                    depth.set_depth(i, zq);
                }
            }
        }
        for (t, slots) in color_slots.iter().enumerate() {
            let Some((slot, n)) = *slots else { continue };
            let mut src = [0.0, 0.0, 0.0, 1.0];
            for (s, c) in src.iter_mut().enumerate().take(n) {
                *c = result.f(slot + s, l);
            }
            let store = &mut target.colors[t];
            let value = match p.targets[t].blend {
                None | Some(BlendState::Replace) => src,
                Some(BlendState::AlphaBlending) => {
                    let dst = store.read(f.x, f.y, 0);
                    let a = src[3];
                    [
                        src[0] * a + dst[0] * (1.0 - a),
                        src[1] * a + dst[1] * (1.0 - a),
                        src[2] * a + dst[2] * (1.0 - a),
                        a + dst[3] * (1.0 - a),
                    ]
                }
            };
            store.write(f.x, f.y, 0, value);
        }
    }
    frags.clear();
    Ok(())
}
