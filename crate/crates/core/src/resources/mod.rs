//! Name-keyed registries for textures, cubemaps, shaders, materials and meshes.
//!
//! Each `build` creates the GPU objects for a name once. Building the same name
//! again returns the existing handle; a differing payload is ignored with a warning.

mod mesh;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ecsgfx_gpu as gpu;
use gpu::{
    BindGroup, BindGroupEntry, BindGroupLayout, BindGroupLayoutEntry, BindingResource, BindingType, Buffer,
    BufferUsages, Device, Extent3d, Sampler, SamplerDescriptor, ShaderModule, ShaderStages, Texture,
    TextureDescriptor, TextureFormat, TextureSampleType, TextureUsages, TextureView, TextureViewDescriptor,
    TextureViewDimension,
};
use glam::Vec3;

pub use mesh::{MeshData, Primitive, Vertex};

use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResourceKind {
    Texture,
    Cubemap,
    Shader,
    Material,
    Mesh,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 5] = [
        ResourceKind::Texture,
        ResourceKind::Cubemap,
        ResourceKind::Shader,
        ResourceKind::Material,
        ResourceKind::Mesh,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Texture => "texture",
            ResourceKind::Cubemap => "cubemap",
            ResourceKind::Shader => "shader",
            ResourceKind::Material => "material",
            ResourceKind::Mesh => "mesh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ResourceKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stable reference to a registered resource.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Handle {
    pub kind: ResourceKind,
    pub index: u32,
}

/// Pixel source for a texture.
#[derive(Clone, Debug, PartialEq)]
pub enum TextureData {
    /// A PNG or JPEG file. Relative paths resolve against the assets root.
    File(PathBuf),
    Raw {
        width: u32,
        height: u32,
        channels: u8,
        pixels: Vec<u8>,
    },
}

impl TextureData {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        TextureData::File(path.into())
    }

    pub fn rgba(image: &Image) -> Self {
        TextureData::Raw {
            width: image.width,
            height: image.height,
            channels: 4,
            pixels: image.pixels.clone(),
        }
    }

    fn decode(&self, root: &Path) -> Result<Image> {
        match self {
            TextureData::File(p) => Image::load(&resolve(root, p)),
            TextureData::Raw {
                width,
                height,
                channels,
                pixels,
            } => Image::from_channels(*width, *height, *channels, pixels),
        }
    }
}

/// WGSL source for a shader: one combined text or one text per stage.
#[derive(Clone, Debug, PartialEq)]
pub enum ShaderSource {
    Wgsl(String),
    /// A WGSL file. Relative paths resolve against the assets root.
    File(PathBuf),
    /// Stage sources, concatenated in order into one module.
    Stages(Vec<ShaderSource>),
}

impl ShaderSource {
    pub fn file(path: impl Into<PathBuf>) -> Self {
        ShaderSource::File(path.into())
    }

    fn text(&self, root: &Path) -> Result<String> {
        match self {
            ShaderSource::Wgsl(s) => Ok(s.clone()),
            ShaderSource::File(p) => {
                let path = resolve(root, p);
                if !path.is_file() {
                    return Err(Error::MissingFile(path));
                }
                Ok(std::fs::read_to_string(path)?)
            }
            ShaderSource::Stages(stages) => {
                let parts = stages.iter().map(|s| s.text(root)).collect::<Result<Vec<_>>>()?;
                Ok(parts.join("\n"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialData {
    pub shader: String,
    /// Texture names; the first is the albedo map.
    pub textures: Vec<String>,
    pub glossiness: f64,
    pub base_color: [f64; 4],
    pub ka: f64,
    pub kd: f64,
    pub ks: f64,
    /// Blend weight of the environment reflection, for shaders that use one.
    pub reflectivity: f64,
}

impl MaterialData {
    pub fn new(shader: impl Into<String>, textures: &[&str]) -> Self {
        MaterialData {
            shader: shader.into(),
            textures: textures.iter().map(|t| t.to_string()).collect(),
            glossiness: 1.0,
            base_color: [1.0; 4],
            ka: 0.1,
            kd: 0.7,
            ks: 0.2,
            reflectivity: 0.0,
        }
    }

    pub fn with_glossiness(mut self, glossiness: f64) -> Self {
        self.glossiness = glossiness;
        self
    }

    pub fn with_base_color(mut self, rgba: [f64; 4]) -> Self {
        self.base_color = rgba;
        self
    }

    pub fn with_reflectivity(mut self, r: f64) -> Self {
        self.reflectivity = r;
        self
    }

    /// Uniform block layout: base color, then (ka, kd, ks, glossiness), then (reflectivity, 0, 0, 0).
    pub fn uniform_bytes(&self) -> [u8; MATERIAL_UNIFORM_SIZE as usize] {
        let c = self.base_color.map(|x| x as f32);
        let words: [f32; 12] = [
            c[0],
            c[1],
            c[2],
            c[3],
            self.ka as f32,
            self.kd as f32,
            self.ks as f32,
            self.glossiness as f32,
            self.reflectivity as f32,
            0.0,
            0.0,
            0.0,
        ];
        let mut out = [0u8; MATERIAL_UNIFORM_SIZE as usize];
        out.copy_from_slice(bytemuck::cast_slice(&words));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Primitive(Primitive),
    /// A Wavefront OBJ file. Relative paths resolve against the assets root.
    Obj(PathBuf),
    /// In-memory geometry. Cannot be written to scene files.
    Data(MeshData),
}

impl MeshSource {
    fn load(&self, root: &Path) -> Result<MeshData> {
        match self {
            MeshSource::Primitive(p) => Ok(p.build()),
            MeshSource::Obj(p) => MeshData::load_obj(&resolve(root, p)),
            MeshSource::Data(d) => Ok(d.clone()),
        }
    }
}

/// How to rebuild a registered resource; what a scene file records.
#[derive(Clone, Debug, PartialEq)]
pub enum ResourceDescriptor {
    Texture(TextureData),
    Cubemap(Box<[TextureData; 6]>),
    Shader(ShaderSource),
    Material(MaterialData),
    Mesh(MeshSource),
}

impl ResourceDescriptor {
    pub fn kind(&self) -> ResourceKind {
        match self {
            ResourceDescriptor::Texture(_) => ResourceKind::Texture,
            ResourceDescriptor::Cubemap(_) => ResourceKind::Cubemap,
            ResourceDescriptor::Shader(_) => ResourceKind::Shader,
            ResourceDescriptor::Material(_) => ResourceKind::Material,
            ResourceDescriptor::Mesh(_) => ResourceKind::Mesh,
        }
    }
}

/// Read access to registered resources by name.
pub trait ResourceCatalog {
    fn describe(&self, kind: ResourceKind, name: &str) -> Option<ResourceDescriptor>;
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        root.join(p)
    }
}

pub const FRAME_UNIFORM_SIZE: u64 = 256;
pub const MATERIAL_UNIFORM_SIZE: u64 = 48;
/// Per-object uniform slot: model matrix and normal matrix, padded to the offset alignment.
pub const OBJECT_SLOT_SIZE: u64 = 256;

/// Bind group layouts shared by every mesh shader.
///
/// Group 0 holds per-frame data: uniforms, the shadow map with its comparison
/// sampler, and the environment cubemap with its sampler. Group 1 holds the
/// material uniform, albedo texture and sampler. Group 2 holds one object's matrices.
#[derive(Clone, Debug)]
pub struct StandardLayouts {
    pub frame: BindGroupLayout,
    pub material: BindGroupLayout,
    pub object: BindGroupLayout,
    /// Frame group used by the shadow depth pass: uniforms only.
    pub shadow_frame: BindGroupLayout,
}

impl StandardLayouts {
    fn new(device: &Device) -> Result<Self> {
        let vf = ShaderStages::VERTEX | ShaderStages::FRAGMENT;
        let entry = |binding, visibility, ty| BindGroupLayoutEntry {
            binding,
            visibility,
            ty,
        };
        let uniform = BindingType::UniformBuffer { min_binding_size: 0 };
        let frame = device.create_bind_group_layout(
            Some("frame"),
            &[
                entry(0, vf, uniform),
                entry(
                    1,
                    ShaderStages::FRAGMENT,
                    BindingType::Texture {
                        sample_type: TextureSampleType::Depth,
                        view_dimension: TextureViewDimension::D2,
                    },
                ),
                entry(2, ShaderStages::FRAGMENT, BindingType::Sampler { comparison: true }),
                entry(
                    3,
                    ShaderStages::FRAGMENT,
                    BindingType::Texture {
                        sample_type: TextureSampleType::Float,
                        view_dimension: TextureViewDimension::Cube,
                    },
                ),
                entry(4, ShaderStages::FRAGMENT, BindingType::Sampler { comparison: false }),
            ],
        )?;
        let material = device.create_bind_group_layout(
            Some("material"),
            &[
                entry(0, vf, uniform),
                entry(
                    1,
                    ShaderStages::FRAGMENT,
                    BindingType::Texture {
                        sample_type: TextureSampleType::Float,
                        view_dimension: TextureViewDimension::D2,
                    },
                ),
                entry(2, ShaderStages::FRAGMENT, BindingType::Sampler { comparison: false }),
            ],
        )?;
        let object = device.create_bind_group_layout(Some("object"), &[entry(0, vf, uniform)])?;
        let shadow_frame = device.create_bind_group_layout(Some("shadow frame"), &[entry(0, vf, uniform)])?;
        Ok(StandardLayouts {
            frame,
            material,
            object,
            shadow_frame,
        })
    }
}

#[derive(Debug)]
pub struct TextureEntry {
    pub name: String,
    pub data: TextureData,
    pub image: Image,
    pub texture: Texture,
    pub view: TextureView,
}

#[derive(Debug)]
pub struct CubemapEntry {
    pub name: String,
    pub faces: Box<[TextureData; 6]>,
    /// Decoded faces in +X, -X, +Y, -Y, +Z, -Z order.
    pub images: Vec<Image>,
    pub texture: Texture,
    pub view: TextureView,
}

pub struct ShaderEntry {
    pub name: String,
    pub source: ShaderSource,
    pub text: String,
    pub module: ShaderModule,
}

impl fmt::Debug for ShaderEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShaderEntry").field("name", &self.name).finish()
    }
}

#[derive(Debug)]
pub struct MaterialEntry {
    pub name: String,
    pub data: MaterialData,
    pub shader: Handle,
    pub uniform: Buffer,
    pub bind_group: BindGroup,
}

#[derive(Debug)]
pub struct MeshEntry {
    pub name: String,
    pub source: MeshSource,
    pub data: MeshData,
    pub vertex_buffer: Buffer,
    pub index_buffer: Buffer,
    pub index_count: u32,
    pub bounds: (Vec3, Vec3),
}

/// All resource registries for one device.
pub struct Resources {
    device: Device,
    root: PathBuf,
    layouts: StandardLayouts,
    white: TextureView,
    material_sampler: Sampler,
    names: HashMap<(ResourceKind, String), u32>,
    textures: Vec<TextureEntry>,
    cubemaps: Vec<CubemapEntry>,
    shaders: Vec<ShaderEntry>,
    materials: Vec<MaterialEntry>,
    meshes: Vec<MeshEntry>,
}

impl fmt::Debug for Resources {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Resources")
            .field("root", &self.root)
            .field("textures", &self.textures.len())
            .field("cubemaps", &self.cubemaps.len())
            .field("shaders", &self.shaders.len())
            .field("materials", &self.materials.len())
            .field("meshes", &self.meshes.len())
            .finish()
    }
}

fn upload_rgba(device: &Device, label: &str, images: &[&Image]) -> Result<Texture> {
    let (w, h) = (images[0].width, images[0].height);
    let texture = device.create_texture(&TextureDescriptor {
        label: Some(label),
        size: Extent3d {
            width: w,
            height: h,
            depth_or_array_layers: images.len() as u32,
        },
        format: TextureFormat::Rgba8Unorm,
        usage: TextureUsages::TEXTURE_BINDING | TextureUsages::COPY_DST,
    })?;
    for (layer, img) in images.iter().enumerate() {
        device.queue().write_texture(&texture, layer as u32, &img.pixels, w * 4)?;
    }
    Ok(texture)
}

impl Resources {
    pub fn new(device: &Device, assets_root: impl Into<PathBuf>) -> Result<Self> {
        let layouts = StandardLayouts::new(device)?;
        let white = upload_rgba(device, "white", &[&Image::filled(1, 1, [255; 4])])?
            .create_view(&TextureViewDescriptor::default())?;
        let material_sampler = device.create_sampler(&SamplerDescriptor::linear_repeat())?;
        Ok(Resources {
            device: device.clone(),
            root: assets_root.into(),
            layouts,
            white,
            material_sampler,
            names: HashMap::new(),
            textures: Vec::new(),
            cubemaps: Vec::new(),
            shaders: Vec::new(),
            materials: Vec::new(),
            meshes: Vec::new(),
        })
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn assets_root(&self) -> &Path {
        &self.root
    }

    pub fn layouts(&self) -> &StandardLayouts {
        &self.layouts
    }

    /// Drops every registered resource, keeping the device and layouts.
    pub fn clear(&mut self) {
        self.names.clear();
        self.textures.clear();
        self.cubemaps.clear();
        self.shaders.clear();
        self.materials.clear();
        self.meshes.clear();
    }

    /// Returns the handle registered under `name` for `kind`. Never builds.
    pub fn lookup(&self, kind: ResourceKind, name: &str) -> Option<Handle> {
        self.names
            .get(&(kind, name.to_owned()))
            .map(|&index| Handle { kind, index })
    }

    /// Number of names registered for `kind`.
    pub fn count(&self, kind: ResourceKind) -> usize {
        match kind {
            ResourceKind::Texture => self.textures.len(),
            ResourceKind::Cubemap => self.cubemaps.len(),
            ResourceKind::Shader => self.shaders.len(),
            ResourceKind::Material => self.materials.len(),
            ResourceKind::Mesh => self.meshes.len(),
        }
    }

    pub fn names(&self, kind: ResourceKind) -> Vec<&str> {
        match kind {
            ResourceKind::Texture => self.textures.iter().map(|e| e.name.as_str()).collect(),
            ResourceKind::Cubemap => self.cubemaps.iter().map(|e| e.name.as_str()).collect(),
            ResourceKind::Shader => self.shaders.iter().map(|e| e.name.as_str()).collect(),
            ResourceKind::Material => self.materials.iter().map(|e| e.name.as_str()).collect(),
            ResourceKind::Mesh => self.meshes.iter().map(|e| e.name.as_str()).collect(),
        }
    }

    fn existing(&self, kind: ResourceKind, name: &str, same: impl FnOnce(u32) -> bool) -> Option<Handle> {
        let h = self.lookup(kind, name)?;
        if !same(h.index) {
            log::warn!("{kind} `{name}` is already registered; ignoring the new definition");
        }
        Some(h)
    }

    fn register(&mut self, kind: ResourceKind, name: &str, index: usize) -> Handle {
        let index = index as u32;
        self.names.insert((kind, name.to_owned()), index);
        Handle { kind, index }
    }

    fn invalid(kind: ResourceKind, name: &str, reason: impl Into<String>) -> Error {
        Error::InvalidResource {
            kind,
            name: name.to_owned(),
            reason: reason.into(),
        }
    }

    pub fn build_texture(&mut self, name: &str, data: TextureData) -> Result<Handle> {
        let kind = ResourceKind::Texture;
        if let Some(h) = self.existing(kind, name, |i| self.textures[i as usize].data == data) {
            return Ok(h);
        }
        let image = data.decode(&self.root)?;
        if image.width == 0 || image.height == 0 {
            return Err(Self::invalid(kind, name, "texture has zero size"));
        }
        let texture = upload_rgba(&self.device, name, &[&image])?;
        let view = texture.create_view(&TextureViewDescriptor::default())?;
        self.textures.push(TextureEntry {
            name: name.to_owned(),
            data,
            image,
            texture,
            view,
        });
        Ok(self.register(kind, name, self.textures.len() - 1))
    }

    /// Builds a cube texture from faces ordered +X, -X, +Y, -Y, +Z, -Z.
    pub fn build_cubemap(&mut self, name: &str, faces: [TextureData; 6]) -> Result<Handle> {
        let kind = ResourceKind::Cubemap;
        if let Some(h) = self.existing(kind, name, |i| *self.cubemaps[i as usize].faces == faces) {
            return Ok(h);
        }
        let images = faces.iter().map(|f| f.decode(&self.root)).collect::<Result<Vec<_>>>()?;
        let (w, h) = (images[0].width, images[0].height);
        if w != h || w == 0 || images.iter().any(|i| (i.width, i.height) != (w, h)) {
            return Err(Self::invalid(kind, name, "cube faces must be equal nonzero squares"));
        }
        let refs: Vec<&Image> = images.iter().collect();
        let texture = upload_rgba(&self.device, name, &refs)?;
        let view = texture.create_view(&TextureViewDescriptor {
            label: Some(name),
            dimension: Some(TextureViewDimension::Cube),
        })?;
        self.cubemaps.push(CubemapEntry {
            name: name.to_owned(),
            faces: Box::new(faces),
            images,
            texture,
            view,
        });
        Ok(self.register(kind, name, self.cubemaps.len() - 1))
    }

    /// Compiles a WGSL shader. Compile errors carry the compiler diagnostics and
    /// leave the registry unchanged.
    pub fn build_shader(&mut self, name: &str, source: ShaderSource) -> Result<Handle> {
        let kind = ResourceKind::Shader;
        if let Some(h) = self.existing(kind, name, |i| self.shaders[i as usize].source == source) {
            return Ok(h);
        }
        let text = source.text(&self.root)?;
        let module = self
            .device
            .create_shader_module(name, &text)
            .map_err(|e| Error::ShaderCompile {
                name: name.to_owned(),
                diagnostics: e.to_string(),
            })?;
        self.shaders.push(ShaderEntry {
            name: name.to_owned(),
            source,
            text,
            module,
        });
        Ok(self.register(kind, name, self.shaders.len() - 1))
    }

    /// Registers a material. Its shader and textures must already be built.
    pub fn build_material(&mut self, name: &str, data: MaterialData) -> Result<Handle> {
        let kind = ResourceKind::Material;
        if let Some(h) = self.existing(kind, name, |i| self.materials[i as usize].data == data) {
            return Ok(h);
        }
        let dangling = |k: ResourceKind, n: &str| Error::DanglingResource {
            kind: k,
            name: n.to_owned(),
            referrer: format!("material `{name}`"),
        };
        let shader = self
            .lookup(ResourceKind::Shader, &data.shader)
            .ok_or_else(|| dangling(ResourceKind::Shader, &data.shader))?;
        let mut views = Vec::new();
        for t in &data.textures {
            let h = self
                .lookup(ResourceKind::Texture, t)
                .ok_or_else(|| dangling(ResourceKind::Texture, t))?;
            views.push(self.textures[h.index as usize].view.clone());
        }
        if !(data.glossiness >= 0.0 && data.glossiness.is_finite()) {
            return Err(Self::invalid(kind, name, "glossiness must be finite and non-negative"));
        }
        let albedo = views.first().cloned().unwrap_or_else(|| self.white.clone());
        let uniform = self.device.create_buffer_init(
            Some(name),
            &data.uniform_bytes(),
            BufferUsages::UNIFORM | BufferUsages::COPY_DST,
        )?;
        let bind_group = self.device.create_bind_group(
            &self.layouts.material,
            &[
                BindGroupEntry {
                    binding: 0,
                    resource: BindingResource::whole_buffer(&uniform),
                },
                BindGroupEntry {
                    binding: 1,
                    resource: BindingResource::TextureView(albedo),
                },
                BindGroupEntry {
                    binding: 2,
                    resource: BindingResource::Sampler(self.material_sampler.clone()),
                },
            ],
        )?;
        self.materials.push(MaterialEntry {
            name: name.to_owned(),
            data,
            shader,
            uniform,
            bind_group,
        });
        Ok(self.register(kind, name, self.materials.len() - 1))
    }

    pub fn build_mesh(&mut self, name: &str, source: MeshSource) -> Result<Handle> {
        let kind = ResourceKind::Mesh;
        if let Some(h) = self.existing(kind, name, |i| self.meshes[i as usize].source == source) {
            return Ok(h);
        }
        let data = source.load(&self.root)?;
        data.validate().map_err(|r| Self::invalid(kind, name, r))?;
        let vertex_buffer = self.device.create_buffer_init(
            Some(name),
            bytemuck::cast_slice(&data.vertices),
            BufferUsages::VERTEX,
        )?;
        let index_buffer = self.device.create_buffer_init(
            Some(name),
            bytemuck::cast_slice(&data.indices),
            BufferUsages::INDEX,
        )?;
        self.meshes.push(MeshEntry {
            name: name.to_owned(),
            source,
            index_count: data.indices.len() as u32,
            bounds: data.bounds(),
            data,
            vertex_buffer,
            index_buffer,
        });
        Ok(self.register(kind, name, self.meshes.len() - 1))
    }

    /// Builds a resource from its descriptor.
    pub fn build(&mut self, name: &str, desc: ResourceDescriptor) -> Result<Handle> {
        match desc {
            ResourceDescriptor::Texture(d) => self.build_texture(name, d),
            ResourceDescriptor::Cubemap(f) => self.build_cubemap(name, *f),
            ResourceDescriptor::Shader(s) => self.build_shader(name, s),
            ResourceDescriptor::Material(m) => self.build_material(name, m),
            ResourceDescriptor::Mesh(m) => self.build_mesh(name, m),
        }
    }

    fn entry<'a, T>(&self, list: &'a [T], kind: ResourceKind, name: &str) -> Option<&'a T> {
        self.lookup(kind, name).map(|h| &list[h.index as usize])
    }

    pub fn texture(&self, name: &str) -> Option<&TextureEntry> {
        self.entry(&self.textures, ResourceKind::Texture, name)
    }

    pub fn cubemap(&self, name: &str) -> Option<&CubemapEntry> {
        self.entry(&self.cubemaps, ResourceKind::Cubemap, name)
    }

    pub fn shader(&self, name: &str) -> Option<&ShaderEntry> {
        self.entry(&self.shaders, ResourceKind::Shader, name)
    }

    pub fn material(&self, name: &str) -> Option<&MaterialEntry> {
        self.entry(&self.materials, ResourceKind::Material, name)
    }

    pub fn mesh(&self, name: &str) -> Option<&MeshEntry> {
        self.entry(&self.meshes, ResourceKind::Mesh, name)
    }

    pub fn material_by_handle(&self, h: Handle) -> Option<&MaterialEntry> {
        (h.kind == ResourceKind::Material).then(|| self.materials.get(h.index as usize))?
    }

    pub fn mesh_by_handle(&self, h: Handle) -> Option<&MeshEntry> {
        (h.kind == ResourceKind::Mesh).then(|| self.meshes.get(h.index as usize))?
    }

    pub fn shader_by_handle(&self, h: Handle) -> Option<&ShaderEntry> {
        (h.kind == ResourceKind::Shader).then(|| self.shaders.get(h.index as usize))?
    }

    /// Rewrites a material's scalar parameters in place, keeping its handle.
    pub fn update_material_params(&mut self, name: &str, f: impl FnOnce(&mut MaterialData)) -> Result<()> {
        let h = self.lookup(ResourceKind::Material, name).ok_or_else(|| Error::DanglingResource {
            kind: ResourceKind::Material,
            name: name.to_owned(),
            referrer: "parameter update".into(),
        })?;
        let m = &mut self.materials[h.index as usize];
        let mut next = m.data.clone();
        f(&mut next);
        if next.shader != m.data.shader || next.textures != m.data.textures {
            return Err(Self::invalid(ResourceKind::Material, name, "only scalar parameters can be updated"));
        }
        self.device.queue().write_buffer(&m.uniform, 0, &next.uniform_bytes())?;
        m.data = next;
        Ok(())
    }
}

impl ResourceCatalog for Resources {
    fn describe(&self, kind: ResourceKind, name: &str) -> Option<ResourceDescriptor> {
        let h = self.lookup(kind, name)?;
        let i = h.index as usize;
        Some(match kind {
            ResourceKind::Texture => ResourceDescriptor::Texture(self.textures[i].data.clone()),
            ResourceKind::Cubemap => ResourceDescriptor::Cubemap(self.cubemaps[i].faces.clone()),
            ResourceKind::Shader => ResourceDescriptor::Shader(self.shaders[i].source.clone()),
            ResourceKind::Material => ResourceDescriptor::Material(self.materials[i].data.clone()),
            ResourceKind::Mesh => ResourceDescriptor::Mesh(self.meshes[i].source.clone()),
        })
    }
}
