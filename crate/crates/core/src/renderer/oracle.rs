//! Double-precision CPU references for the GPU shading paths.
//!
//! Nothing here touches the device. Tests and golden-image validation compare
//! rendered pixels against these functions.

use glam::{DMat4, DVec2, DVec3, DVec4};

use crate::imaging::Image;
use crate::resources::MeshData;

/// Blinn-Phong with specular exponent `32 * glossiness`, clamped to `[0, 1]`.
///
/// Inputs are unit vectors; `l` and `v` point away from the surface. Surfaces
/// facing away from the light get the ambient term only.
#[allow(clippy::too_many_arguments)]
pub fn shade_blinn_phong(
    n: DVec3,
    l: DVec3,
    v: DVec3,
    light: DVec3,
    albedo: DVec3,
    ka: f64,
    kd: f64,
    ks: f64,
    glossiness: f64,
) -> DVec3 {
    shade_blinn_phong_shadowed(n, l, v, light, albedo, [ka, kd, ks, glossiness], 1.0)
}

/// [`shade_blinn_phong`] with diffuse and specular scaled by a shadow visibility factor.
pub fn shade_blinn_phong_shadowed(
    n: DVec3,
    l: DVec3,
    v: DVec3,
    light: DVec3,
    albedo: DVec3,
    [ka, kd, ks, glossiness]: [f64; 4],
    visibility: f64,
) -> DVec3 {
    let ndotl = n.dot(l);
    let mut c = albedo * ka * light;
    if ndotl > 0.0 {
        let h = (l + v).normalize();
        let spec = n.dot(h).max(0.0).powf(32.0 * glossiness);
        c += (albedo * kd * ndotl + DVec3::splat(ks * spec)) * light * visibility;
    }
    c.clamp(DVec3::ZERO, DVec3::ONE)
}

/// Mirror direction of `i` about the unit normal `n`.
pub fn reflect(i: DVec3, n: DVec3) -> DVec3 {
    i - 2.0 * n.dot(i) * n
}

/// Face index (+X, -X, +Y, -Y, +Z, -Z) and face coordinates in `[0, 1]` for a direction.
pub fn cube_lookup(d: DVec3) -> (usize, f64, f64) {
    let a = d.abs();
    // (face, major component, s axis, t axis) with s and t expressed as signed picks of d.
    let (face, major, s, t) = if a.x >= a.y && a.x >= a.z {
        if d.x >= 0.0 {
            (0, a.x, -d.z, -d.y)
        } else {
            (1, a.x, d.z, -d.y)
        }
    } else if a.y >= a.z {
        if d.y >= 0.0 {
            (2, a.y, d.x, d.z)
        } else {
            (3, a.y, d.x, -d.z)
        }
    } else if d.z >= 0.0 {
        (4, a.z, d.x, -d.y)
    } else {
        (5, a.z, -d.x, -d.y)
    };
    (face, 0.5 * (s / major + 1.0), 0.5 * (t / major + 1.0))
}

fn texel(img: &Image, x: i64, y: i64) -> DVec4 {
    let p = img.pixel(x as u32, y as u32);
    DVec4::new(p[0] as f64, p[1] as f64, p[2] as f64, p[3] as f64) / 255.0
}

/// Bilinear sample at normalized coordinates, clamping or wrapping at the edges.
pub fn sample_bilinear(img: &Image, uv: DVec2, wrap: bool) -> DVec4 {
    let (w, h) = (img.width as i64, img.height as i64);
    let fix = |i: i64, n: i64| if wrap { i.rem_euclid(n) } else { i.clamp(0, n - 1) };
    let x = uv.x * w as f64 - 0.5;
    let y = uv.y * h as f64 - 0.5;
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let t = |dx, dy| texel(img, fix(x0 + dx, w), fix(y0 + dy, h));
    let top = t(0, 0).lerp(t(1, 0), fx);
    let bottom = t(0, 1).lerp(t(1, 1), fx);
    top.lerp(bottom, fy)
}

/// Bilinear environment lookup on six faces ordered +X, -X, +Y, -Y, +Z, -Z.
pub fn sample_environment(dir: DVec3, faces: &[Image]) -> DVec3 {
    let (face, s, t) = cube_lookup(dir);
    sample_bilinear(&faces[face], DVec2::new(s, t), false).truncate()
}

/// A square depth texture read back from the device, rows top to bottom.
#[derive(Clone, Debug)]
pub struct DepthMap {
    pub size: u32,
    pub depths: Vec<f32>,
}

impl DepthMap {
    fn at(&self, x: i64, y: i64) -> f64 {
        let n = self.size as i64;
        let (x, y) = (x.clamp(0, n - 1), y.clamp(0, n - 1));
        self.depths[(y * n + x) as usize] as f64
    }
}

/// Depth bias grown with the surface slope relative to the light.
pub fn slope_bias(base: f64, n_dot_l: f64) -> f64 {
    let c = n_dot_l.clamp(0.0, 1.0);
    base * ((1.0 - c * c).sqrt() / c.max(1e-4)).clamp(1.0, 10.0)
}

/// 3x3 percentage-closer visibility of `world` in a shadow map: 1 is fully lit.
/// Points outside the light's view volume count as lit.
pub fn shadow_visibility(
    world: DVec3,
    normal: DVec3,
    to_light: DVec3,
    light_view_proj: DMat4,
    map: &DepthMap,
    bias_base: f64,
) -> f64 {
    let clip = light_view_proj * world.extend(1.0);
    let ndc = clip.truncate() / clip.w;
    let u = ndc.x * 0.5 + 0.5;
    let v = 0.5 - ndc.y * 0.5;
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) || !(0.0..=1.0).contains(&ndc.z) {
        return 1.0;
    }
    let reference = ndc.z - slope_bias(bias_base, normal.dot(to_light));
    let n = map.size as f64;
    let mut lit = 0.0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            let x = ((u + dx as f64 / n) * n).floor() as i64;
            let y = ((v + dy as f64 / n) * n).floor() as i64;
            if reference <= map.at(x, y) {
                lit += 1.0;
            }
        }
    }
    lit / 9.0
}

/// Eye ray through the center of pixel `(px, py)` of a `width` x `height` target.
pub fn camera_ray(inv_view_proj: DMat4, px: u32, py: u32, width: u32, height: u32) -> (DVec3, DVec3) {
    let x = (px as f64 + 0.5) / width as f64 * 2.0 - 1.0;
    let y = 1.0 - (py as f64 + 0.5) / height as f64 * 2.0;
    let near = inv_view_proj.project_point3(DVec3::new(x, y, 0.0));
    let far = inv_view_proj.project_point3(DVec3::new(x, y, 1.0));
    (near, (far - near).normalize())
}

#[derive(Clone, Copy, Debug)]
struct Tri {
    p: [DVec3; 3],
    n: [DVec3; 3],
    uv: [DVec2; 3],
    object: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub position: DVec3,
    /// Interpolated and normalized vertex normal.
    pub normal: DVec3,
    pub uv: DVec2,
    /// Index of the mesh instance, in the order added.
    pub object: usize,
    /// Whether the hit triangle faces the ray origin (counter-clockwise as seen from it).
    pub front: bool,
}

/// Brute-force ray caster over transformed triangle meshes.
#[derive(Clone, Debug, Default)]
pub struct RayScene {
    tris: Vec<Tri>,
    objects: usize,
}

impl RayScene {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `mesh` under `model`; returns its object index.
    pub fn add(&mut self, mesh: &MeshData, model: DMat4) -> usize {
        let normal_mat = model.inverse().transpose();
        let object = self.objects;
        self.objects += 1;
        for t in mesh.indices.chunks_exact(3) {
            let v = [t[0], t[1], t[2]].map(|i| &mesh.vertices[i as usize]);
            self.tris.push(Tri {
                p: v.map(|v| model.transform_point3(DVec3::from(v.position.map(f64::from)))),
                n: v.map(|v| normal_mat.transform_vector3(DVec3::from(v.normal.map(f64::from)))),
                uv: v.map(|v| DVec2::from(v.uv.map(f64::from))),
                object,
            });
        }
        object
    }

    /// Nearest hit with `t > min_t`.
    pub fn intersect(&self, origin: DVec3, dir: DVec3, min_t: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for tri in &self.tris {
            let e1 = tri.p[1] - tri.p[0];
            let e2 = tri.p[2] - tri.p[0];
            let pv = dir.cross(e2);
            let det = e1.dot(pv);
            if det.abs() < 1e-14 {
                continue;
            }
            let inv = 1.0 / det;
            let tv = origin - tri.p[0];
            let b1 = tv.dot(pv) * inv;
            if !(0.0..=1.0).contains(&b1) {
                continue;
            }
            let qv = tv.cross(e1);
            let b2 = dir.dot(qv) * inv;
            if b2 < 0.0 || b1 + b2 > 1.0 {
                continue;
            }
            let t = e2.dot(qv) * inv;
            if t <= min_t || best.is_some_and(|h| h.t <= t) {
                continue;
            }
            let b0 = 1.0 - b1 - b2;
            best = Some(Hit {
                t,
                position: origin + dir * t,
                normal: (tri.n[0] * b0 + tri.n[1] * b1 + tri.n[2] * b2).normalize(),
                uv: tri.uv[0] * b0 + tri.uv[1] * b1 + tri.uv[2] * b2,
                object: tri.object,
                front: det > 0.0,
            });
        }
        best
    }

    /// Whether anything blocks the ray from `origin` along `dir`.
    pub fn occluded(&self, origin: DVec3, dir: DVec3) -> bool {
        self.intersect(origin, dir, 1e-6).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_vectors_saturate() {
        let z = DVec3::Z;
        let c = shade_blinn_phong(z, z, z, DVec3::ONE, DVec3::ONE, 0.1, 0.7, 0.2, 2.0);
        assert!((c - DVec3::ONE).abs().max_element() < 1e-12, "{c}");
    }

    #[test]
    fn cube_lookup_centers() {
        assert_eq!(cube_lookup(DVec3::X), (0, 0.5, 0.5));
        assert_eq!(cube_lookup(DVec3::NEG_Z).0, 5);
        let (f, s, t) = cube_lookup(DVec3::new(0.5, 1.0, -0.5));
        assert_eq!(f, 2);
        assert!((s - 0.75).abs() < 1e-12 && (t - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ray_hits_front_of_unit_cube() {
        let mut s = RayScene::new();
        s.add(&MeshData::cube(), DMat4::IDENTITY);
        let h = s.intersect(DVec3::new(0.1, 0.2, 5.0), DVec3::NEG_Z, 0.0).unwrap();
        assert!((h.t - 4.5).abs() < 1e-12);
        assert!((h.normal - DVec3::Z).length() < 1e-12);
        assert!(h.front);
    }
}
