//! Indexed triangle meshes with interleaved position, normal and uv.

use std::f32::consts::{PI, TAU};
use std::path::Path;

use bytemuck::{Pod, Zeroable};
use glam::Vec3;

use crate::error::{Error, Result};

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Pod, Zeroable)]
pub struct Vertex {
    pub position: [f32; 3],
    pub normal: [f32; 3],
    pub uv: [f32; 2],
}

impl Vertex {
    pub const STRIDE: u64 = std::mem::size_of::<Vertex>() as u64;

    pub fn new(position: Vec3, normal: Vec3, uv: [f32; 2]) -> Self {
        Vertex {
            position: position.to_array(),
            normal: normal.to_array(),
            uv,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshData {
    pub vertices: Vec<Vertex>,
    pub indices: Vec<u32>,
}

/// Procedural meshes available without asset files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    /// One triangle in the XY plane facing +Z.
    Triangle,
    /// A 2x2 square in the XZ plane facing +Y.
    Plane,
    /// A unit cube centered on the origin.
    Cube,
    /// A unit-radius UV sphere.
    Sphere,
    /// A torus in the XZ plane with major radius 1 and minor radius 0.35.
    Torus,
}

impl Primitive {
    pub const ALL: [Primitive; 5] = [
        Primitive::Triangle,
        Primitive::Plane,
        Primitive::Cube,
        Primitive::Sphere,
        Primitive::Torus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Triangle => "triangle",
            Primitive::Plane => "plane",
            Primitive::Cube => "cube",
            Primitive::Sphere => "sphere",
            Primitive::Torus => "torus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Primitive::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn build(self) -> MeshData {
        match self {
            Primitive::Triangle => MeshData::triangle(),
            Primitive::Plane => MeshData::plane(1.0),
            Primitive::Cube => MeshData::cube(),
            Primitive::Sphere => MeshData::sphere(1.0, 32, 16),
            Primitive::Torus => MeshData::torus(1.0, 0.35, 24, 12),
        }
    }
}

impl MeshData {
    pub fn triangle() -> Self {
        let n = Vec3::Z;
        MeshData {
            vertices: vec![
                Vertex::new(Vec3::new(-0.5, -0.5, 0.0), n, [0.0, 1.0]),
                Vertex::new(Vec3::new(0.5, -0.5, 0.0), n, [1.0, 1.0]),
                Vertex::new(Vec3::new(0.0, 0.5, 0.0), n, [0.5, 0.0]),
            ],
            indices: vec![0, 1, 2],
        }
    }

    /// A square of side `2 * half` in the XZ plane.
    pub fn plane(half: f32) -> Self {
        let n = Vec3::Y;
        let c = [(-1.0, 1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)];
        let vertices = c
            .iter()
            .map(|&(x, z)| Vertex::new(Vec3::new(x * half, 0.0, z * half), n, [(x + 1.0) / 2.0, (z + 1.0) / 2.0]))
            .collect();
        MeshData {
            vertices,
            indices: vec![0, 1, 2, 0, 2, 3],
        }
    }

    pub fn cube() -> Self {
        let mut m = MeshData::default();
        for n in [Vec3::X, Vec3::NEG_X, Vec3::Y, Vec3::NEG_Y, Vec3::Z, Vec3::NEG_Z] {
            let u = if n.y.abs() > 0.5 { Vec3::X } else { Vec3::Y.cross(n) };
            let v = n.cross(u);
            let base = m.vertices.len() as u32;
            for (a, b, uv) in [(-1.0, -1.0, [0.0, 1.0]), (1.0, -1.0, [1.0, 1.0]), (1.0, 1.0, [1.0, 0.0]), (-1.0, 1.0, [0.0, 0.0])] {
                m.vertices.push(Vertex::new((n + u * a + v * b) * 0.5, n, uv));
            }
            m.indices.extend([base, base + 1, base + 2, base, base + 2, base + 3]);
        }
        m
    }

    pub fn sphere(radius: f32, segments: u32, rings: u32) -> Self {
        let mut m = MeshData::default();
        for r in 0..=rings {
            let theta = PI * r as f32 / rings as f32;
            for s in 0..=segments {
                let phi = TAU * s as f32 / segments as f32;
                let n = Vec3::new(theta.sin() * phi.cos(), theta.cos(), -theta.sin() * phi.sin());
                m.vertices.push(Vertex::new(
                    n * radius,
                    n,
                    [s as f32 / segments as f32, r as f32 / rings as f32],
                ));
            }
        }
        let row = segments + 1;
        for r in 0..rings {
            for s in 0..segments {
                let a = r * row + s;
                let b = a + row;
                if r != 0 {
                    m.indices.extend([a, b, a + 1]);
                }
                if r != rings - 1 {
                    m.indices.extend([a + 1, b, b + 1]);
                }
            }
        }
        m.orient_to_normals();
        m
    }

    pub fn torus(major: f32, minor: f32, segments: u32, sides: u32) -> Self {
        let mut m = MeshData::default();
        for i in 0..=segments {
            let u = TAU * i as f32 / segments as f32;
            let ring = Vec3::new(u.cos(), 0.0, -u.sin());
            for j in 0..=sides {
                let v = TAU * j as f32 / sides as f32;
                let n = ring * v.cos() + Vec3::Y * v.sin();
                m.vertices.push(Vertex::new(
                    ring * major + n * minor,
                    n,
                    [i as f32 / segments as f32, j as f32 / sides as f32],
                ));
            }
        }
        let row = sides + 1;
        for i in 0..segments {
            for j in 0..sides {
                let a = i * row + j;
                let b = a + row;
                m.indices.extend([a, b, a + 1, a + 1, b, b + 1]);
            }
        }
        m.orient_to_normals();
        m
    }

    /// Loads every object in a Wavefront OBJ file into one mesh.
    pub fn load_obj(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_owned()));
        }
        let opts = tobj::LoadOptions {
            triangulate: true,
            single_index: true,
            ..Default::default()
        };
        let (models, _) = tobj::load_obj(path, &opts).map_err(|e| Error::Decode {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut m = MeshData::default();
        let mut needs_normals = false;
        for model in models {
            let mesh = model.mesh;
            let base = m.vertices.len() as u32;
            let count = mesh.positions.len() / 3;
            needs_normals |= mesh.normals.len() != count * 3;
            for i in 0..count {
                let p = &mesh.positions[i * 3..i * 3 + 3];
                let n = mesh.normals.get(i * 3..i * 3 + 3).unwrap_or(&[0.0; 3]);
                let uv = match mesh.texcoords.get(i * 2..i * 2 + 2) {
                    Some(t) => [t[0], 1.0 - t[1]],
                    None => [0.0, 0.0],
                };
                m.vertices.push(Vertex {
                    position: [p[0], p[1], p[2]],
                    normal: [n[0], n[1], n[2]],
                    uv,
                });
            }
            m.indices.extend(mesh.indices.iter().map(|i| i + base));
        }
        if needs_normals {
            m.compute_normals();
        }
        m.validate().map_err(|reason| Error::Decode {
            path: path.display().to_string(),
            reason,
        })?;
        Ok(m)
    }

    /// Smooth normals from area-weighted face normals.
    pub fn compute_normals(&mut self) {
        let mut acc = vec![Vec3::ZERO; self.vertices.len()];
        for t in self.indices.chunks_exact(3) {
            let [a, b, c] = [t[0], t[1], t[2]].map(|i| Vec3::from(self.vertices[i as usize].position));
            let n = (b - a).cross(c - a);
            for &i in t {
                acc[i as usize] += n;
            }
        }
        for (v, n) in self.vertices.iter_mut().zip(acc) {
            v.normal = n.normalize_or(Vec3::Y).to_array();
        }
    }

    /// Flips triangles whose winding disagrees with their vertex normals.
    fn orient_to_normals(&mut self) {
        for t in self.indices.chunks_exact_mut(3) {
            let p = |i: u32| Vec3::from(self.vertices[i as usize].position);
            let n = |i: u32| Vec3::from(self.vertices[i as usize].normal);
            let face = (p(t[1]) - p(t[0])).cross(p(t[2]) - p(t[0]));
            if face.dot(n(t[0]) + n(t[1]) + n(t[2])) < 0.0 {
                t.swap(1, 2);
            }
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.indices.len() % 3 != 0 {
            return Err(format!("index count {} is not a multiple of 3", self.indices.len()));
        }
        if let Some(i) = self.indices.iter().find(|&&i| i as usize >= self.vertices.len()) {
            return Err(format!("index {i} out of bounds for {} vertices", self.vertices.len()));
        }
        if self.indices.is_empty() {
            return Err("mesh has no triangles".into());
        }
        Ok(())
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.vertices.iter().fold((Vec3::INFINITY, Vec3::NEG_INFINITY), |(lo, hi), v| {
            let p = Vec3::from(v.position);
            (lo.min(p), hi.max(p))
        })
    }

    /// Writes the mesh as Wavefront OBJ text.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s += &format!("v {} {} {}\n", v.position[0], v.position[1], v.position[2]);
        }
        for v in &self.vertices {
            s += &format!("vt {} {}\n", v.uv[0], 1.0 - v.uv[1]);
        }
        for v in &self.vertices {
            s += &format!("vn {} {} {}\n", v.normal[0], v.normal[1], v.normal[2]);
        }
        for t in self.indices.chunks_exact(3) {
            let [a, b, c] = [t[0] + 1, t[1] + 1, t[2] + 1];
            s += &format!("f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}\n");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outward_fraction(m: &MeshData) -> f32 {
        let mut ok = 0;
        let tris = m.indices.chunks_exact(3);
        let n = tris.len();
        for t in tris {
            let p = |i: u32| Vec3::from(m.vertices[i as usize].position);
            let face = (p(t[1]) - p(t[0])).cross(p(t[2]) - p(t[0]));
            let nrm = Vec3::from(m.vertices[t[0] as usize].normal);
            if face.dot(nrm) > 0.0 {
                ok += 1;
            }
        }
        ok as f32 / n as f32
    }

    #[test]
    fn primitives_wind_counter_clockwise_from_outside() {
        for p in Primitive::ALL {
            let m = p.build();
            m.validate().unwrap();
            assert_eq!(outward_fraction(&m), 1.0, "{p:?}");
        }
    }

    #[test]
    fn obj_text_round_trips() {
        let m = MeshData::torus(1.0, 0.35, 8, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.obj");
        std::fs::write(&path, m.to_obj()).unwrap();
        let back = MeshData::load_obj(&path).unwrap();
        assert_eq!(back.indices.len(), m.indices.len());
        let (lo, hi) = back.bounds();
        assert!((hi.x - 1.35).abs() < 1e-5 && (lo.y + 0.35).abs() < 1e-5);
    }
}
