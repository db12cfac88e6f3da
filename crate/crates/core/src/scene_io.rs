//! Text scene documents.
//!
//! A document starts with the version line, then a metadata block, a resource
//! manifest and one block per entity:
//!
//! ```text
//! pygandalf-scene v1
//! (
//!     name = "demo"
//!     entities = 1
//!     resources = 1
//! )
//!
//! def Resources
//! {
//!     mesh "cube"
//!     {
//!         source = primitive cube
//!     }
//! }
//!
//! def Entity "6f1c0a52-9d7e-4a53-a0f5-0c0a3c1f2b11"
//! {
//!     over Transform
//!     {
//!         translation = (0.0, 1.0, 0.0)
//!         rotation = (0.0, 0.0, 0.0)
//!         scale = (1.0, 1.0, 1.0)
//!     }
//! }
//! ```
//!
//! Field values use the text forms of [`Value`]. Loading either returns a
//! complete scene or an error; it never touches a resource registry.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use base64::Engine;

use crate::ecs::{Entity, Scene};
use crate::error::{Error, Result};
use crate::reflect::{parse_string, parse_value, ComponentRegistry, FieldKind, Value};
use crate::resources::{
    MaterialData, MeshSource, Primitive, ResourceCatalog, ResourceDescriptor, ResourceKind, Resources, ShaderSource,
    TextureData,
};
use crate::scenegraph::LinkComponent;

pub const HEADER: &str = "pygandalf-scene v1";
const HEADER_PREFIX: &str = "pygandalf-scene ";
pub const EXTENSION: &str = "pgscene";

const CUBE_FACES: [&str; 6] = ["px", "nx", "py", "ny", "pz", "nz"];

/// Named resource descriptors, ordered by kind and then name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    entries: BTreeMap<(ResourceKind, String), ResourceDescriptor>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, desc: ResourceDescriptor) {
        self.entries.insert((desc.kind(), name.into()), desc);
    }

    pub fn get(&self, kind: ResourceKind, name: &str) -> Option<&ResourceDescriptor> {
        self.entries.get(&(kind, name.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ResourceDescriptor)> {
        self.entries.iter().map(|((_, n), d)| (n.as_str(), d))
    }

    /// Registers every entry, dependencies first.
    pub fn build_into(&self, resources: &mut Resources) -> Result<()> {
        for (name, desc) in self.iter() {
            resources.build(name, desc.clone())?;
        }
        Ok(())
    }
}

impl ResourceCatalog for Manifest {
    fn describe(&self, kind: ResourceKind, name: &str) -> Option<ResourceDescriptor> {
        self.get(kind, name).cloned()
    }
}

/// A parsed document: the scene plus the resources it references.
#[derive(Debug)]
pub struct SceneDocument {
    pub scene: Scene,
    pub manifest: Manifest,
}

fn dependencies(desc: &ResourceDescriptor) -> Vec<(ResourceKind, &str)> {
    match desc {
        ResourceDescriptor::Material(m) => std::iter::once((ResourceKind::Shader, m.shader.as_str()))
            .chain(m.textures.iter().map(|t| (ResourceKind::Texture, t.as_str())))
            .collect(),
        _ => Vec::new(),
    }
}

/// Serializes `scene`. Entities holding a non-serializable component are
/// skipped. Every resource named by a component field, and everything those
/// resources depend on, must be known to `catalog`.
pub fn save_scene(scene: &Scene, registry: &ComponentRegistry, catalog: &dyn ResourceCatalog) -> Result<String> {
    let mut saved = Vec::new();
    for &e in scene.entities() {
        let mut comps = Vec::new();
        let mut skip = false;
        for ty in scene.component_types(e)? {
            let entry = registry
                .by_type(ty)
                .ok_or_else(|| Error::UnknownComponent(ty.name().to_owned()))?;
            if !entry.serializable {
                skip = true;
                break;
            }
            comps.push((entry.tag, entry.read(scene, e).expect("component present")));
        }
        if !skip {
            saved.push((e, comps));
        }
    }

    let kept: HashSet<Entity> = saved.iter().map(|(e, _)| *e).collect();
    let mut manifest = Manifest::new();
    let mut pending: Vec<(ResourceKind, String, String)> = Vec::new();
    for (e, comps) in &saved {
        for (tag, fields) in comps {
            let entry = registry.by_tag(tag).expect("registered");
            for (field, value) in fields {
                match (entry.field_kind(field), value) {
                    (Some(FieldKind::Resource(kind)), Value::Str(name)) => {
                        pending.push((kind, name.clone(), format!("entity {e} {tag}.{field}")));
                    }
                    (Some(FieldKind::Entity), Value::Entity(Some(target))) if !kept.contains(target) => {
                        return Err(Error::DanglingParent {
                            entity: *e,
                            parent: *target,
                        });
                    }
                    _ => {}
                }
            }
        }
    }
    while let Some((kind, name, referrer)) = pending.pop() {
        if manifest.get(kind, &name).is_some() {
            continue;
        }
        let desc = catalog.describe(kind, &name).ok_or_else(|| Error::DanglingResource {
            kind,
            name: name.clone(),
            referrer,
        })?;
        for (k, n) in dependencies(&desc) {
            pending.push((k, n.to_owned(), format!("{kind} `{name}`")));
        }
        manifest.insert(name, desc);
    }

    let mut out = String::new();
    out.push_str(HEADER);
    out.push_str("\n(\n");
    out.push_str(&format!("    name = {}\n", Value::Str(scene.name().to_owned())));
    out.push_str(&format!("    entities = {}\n", saved.len()));
    out.push_str(&format!("    resources = {}\n", manifest.len()));
    out.push_str(")\n\ndef Resources\n{\n");
    for (name, desc) in manifest.iter() {
        write_resource(&mut out, name, desc)?;
    }
    out.push_str("}\n");
    for (e, comps) in &saved {
        out.push_str(&format!("\ndef Entity \"{e}\"\n{{\n"));
        for (tag, fields) in comps {
            out.push_str(&format!("    over {tag}\n    {{\n"));
            for (field, value) in fields {
                out.push_str(&format!("        {field} = {value}\n"));
            }
            out.push_str("    }\n");
        }
        out.push_str("}\n");
    }
    Ok(out)
}

fn quoted(s: &str) -> String {
    Value::Str(s.to_owned()).to_string()
}

fn float(x: f64) -> String {
    Value::Float(x).to_string()
}

fn path_text(kind: ResourceKind, name: &str, p: &Path) -> Result<String> {
    p.to_str().map(quoted).ok_or_else(|| Error::InvalidResource {
        kind,
        name: name.to_owned(),
        reason: format!("path {} is not valid UTF-8", p.display()),
    })
}

fn texture_text(kind: ResourceKind, name: &str, data: &TextureData) -> Result<String> {
    Ok(match data {
        TextureData::File(p) => format!("file {}", path_text(kind, name, p)?),
        TextureData::Raw {
            width,
            height,
            channels,
            pixels,
        } => {
            let b64 = base64::engine::general_purpose::STANDARD.encode(pixels);
            format!("raw {width} {height} {channels} \"{b64}\"")
        }
    })
}

fn shader_text(name: &str, src: &ShaderSource) -> Result<String> {
    match src {
        ShaderSource::Wgsl(s) => Ok(format!("wgsl {}", quoted(s))),
        ShaderSource::File(p) => Ok(format!("file {}", path_text(ResourceKind::Shader, name, p)?)),
        ShaderSource::Stages(_) => Err(Error::InvalidResource {
            kind: ResourceKind::Shader,
            name: name.to_owned(),
            reason: "nested shader stages cannot be saved".into(),
        }),
    }
}

fn write_resource(out: &mut String, name: &str, desc: &ResourceDescriptor) -> Result<()> {
    let kind = desc.kind();
    let mut lines: Vec<(String, String)> = Vec::new();
    match desc {
        ResourceDescriptor::Texture(t) => lines.push(("data".into(), texture_text(kind, name, t)?)),
        ResourceDescriptor::Cubemap(faces) => {
            for (face, t) in CUBE_FACES.iter().zip(faces.iter()) {
                lines.push(((*face).into(), texture_text(kind, name, t)?));
            }
        }
        ResourceDescriptor::Shader(ShaderSource::Stages(stages)) => {
            for s in stages {
                lines.push(("stage".into(), shader_text(name, s)?));
            }
        }
        ResourceDescriptor::Shader(s) => lines.push(("source".into(), shader_text(name, s)?)),
        ResourceDescriptor::Material(m) => {
            lines.push(("shader".into(), quoted(&m.shader)));
            for t in &m.textures {
                lines.push(("texture".into(), quoted(t)));
            }
            lines.push(("glossiness".into(), float(m.glossiness)));
            lines.push(("base_color".into(), Value::Vec4(m.base_color).to_string()));
            lines.push(("ka".into(), float(m.ka)));
            lines.push(("kd".into(), float(m.kd)));
            lines.push(("ks".into(), float(m.ks)));
            lines.push(("reflectivity".into(), float(m.reflectivity)));
        }
        ResourceDescriptor::Mesh(MeshSource::Primitive(p)) => {
            lines.push(("source".into(), format!("primitive {}", p.name())));
        }
        ResourceDescriptor::Mesh(MeshSource::Obj(p)) => {
            lines.push(("source".into(), format!("file {}", path_text(kind, name, p)?)));
        }
        ResourceDescriptor::Mesh(MeshSource::Data(_)) => {
            return Err(Error::InvalidResource {
                kind,
                name: name.to_owned(),
                reason: "in-memory mesh data cannot be saved".into(),
            })
        }
    }
    out.push_str(&format!("    {kind} {}\n    {{\n", quoted(name)));
    for (k, v) in lines {
        out.push_str(&format!("        {k} = {v}\n"));
    }
    out.push_str("    }\n");
    Ok(())
}

/// Writes `save_scene` output to `path`.
pub fn save_scene_file(
    path: &Path,
    scene: &Scene,
    registry: &ComponentRegistry,
    catalog: &dyn ResourceCatalog,
) -> Result<()> {
    let text = save_scene(scene, registry, catalog)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_scene_file(path: &Path, registry: &ComponentRegistry) -> Result<SceneDocument> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    load_scene(&std::fs::read_to_string(path)?, registry)
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    at: usize,
    end_line: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Cursor {
            lines,
            at: 0,
            end_line: text.lines().count() + 1,
        }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.at).copied()
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let l = self
            .peek()
            .ok_or_else(|| parse_err(self.end_line, "unexpected end of document"))?;
        self.at += 1;
        Ok(l)
    }

    fn expect(&mut self, token: &str) -> Result<usize> {
        let (n, l) = self.next()?;
        if l == token {
            Ok(n)
        } else {
            Err(parse_err(n, format!("expected `{token}`, found `{l}`")))
        }
    }

    /// Reads `key = value` lines up to the closing brace of the current block.
    fn fields(&mut self, close: &str) -> Result<Vec<(usize, &'a str, &'a str)>> {
        let mut out = Vec::new();
        loop {
            let (n, l) = self.next()?;
            if l == close {
                return Ok(out);
            }
            let (k, v) = l
                .split_once(" = ")
                .ok_or_else(|| parse_err(n, format!("expected `key = value`, found `{l}`")))?;
            out.push((n, k.trim(), v.trim()));
        }
    }
}

fn field_value(line: usize, text: &str, kind: FieldKind) -> Result<Value> {
    parse_value(text, kind).map_err(|m| parse_err(line, m))
}

fn string_value(line: usize, text: &str) -> Result<String> {
    parse_string(text).map_err(|m| parse_err(line, m))
}

fn float_value(line: usize, text: &str) -> Result<f64> {
    match field_value(line, text, FieldKind::Float)? {
        Value::Float(x) => Ok(x),
        _ => unreachable!(),
    }
}

fn parse_texture(line: usize, text: &str) -> Result<TextureData> {
    let (form, rest) = text.split_once(' ').unwrap_or((text, ""));
    match form {
        "file" => Ok(TextureData::File(PathBuf::from(string_value(line, rest)?))),
        "raw" => {
            let parts: Vec<&str> = rest.splitn(4, ' ').collect();
            if parts.len() != 4 {
                return Err(parse_err(line, "raw texture needs width, height, channels and data"));
            }
            let num = |s: &str| s.parse::<u32>().map_err(|_| parse_err(line, format!("`{s}` is not a count")));
            let (width, height) = (num(parts[0])?, num(parts[1])?);
            let channels = u8::try_from(num(parts[2])?).map_err(|_| parse_err(line, "too many channels"))?;
            let b64 = string_value(line, parts[3])?;
            let pixels = base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| parse_err(line, format!("bad base64 pixel data: {e}")))?;
            if pixels.len() as u64 != width as u64 * height as u64 * channels as u64 {
                return Err(parse_err(line, "raw texture data length does not match its size"));
            }
            Ok(TextureData::Raw {
                width,
                height,
                channels,
                pixels,
            })
        }
        _ => Err(parse_err(line, format!("unknown texture source `{form}`"))),
    }
}

fn parse_shader(line: usize, text: &str) -> Result<ShaderSource> {
    let (form, rest) = text.split_once(' ').unwrap_or((text, ""));
    match form {
        "file" => Ok(ShaderSource::File(PathBuf::from(string_value(line, rest)?))),
        "wgsl" => Ok(ShaderSource::Wgsl(string_value(line, rest)?)),
        _ => Err(parse_err(line, format!("unknown shader source `{form}`"))),
    }
}

fn parse_mesh(line: usize, text: &str) -> Result<MeshSource> {
    let (form, rest) = text.split_once(' ').unwrap_or((text, ""));
    match form {
        "file" => Ok(MeshSource::Obj(PathBuf::from(string_value(line, rest)?))),
        "primitive" => Primitive::parse(rest)
            .map(MeshSource::Primitive)
            .ok_or_else(|| parse_err(line, format!("unknown primitive `{rest}`"))),
        _ => Err(parse_err(line, format!("unknown mesh source `{form}`"))),
    }
}

fn parse_resource(
    header_line: usize,
    kind: ResourceKind,
    name: &str,
    fields: &[(usize, &str, &str)],
) -> Result<ResourceDescriptor> {
    let unknown = |n: usize, k: &str| parse_err(n, format!("unknown {kind} field `{k}`"));
    let single = |key: &str| -> Result<(usize, &str)> {
        let hits: Vec<_> = fields.iter().filter(|(_, k, _)| *k == key).collect();
        match hits.as_slice() {
            [(n, _, v)] => Ok((*n, *v)),
            [] => Err(parse_err(header_line, format!("{kind} `{name}` is missing `{key}`"))),
            [_, (n, _, _), ..] => Err(parse_err(*n, format!("duplicate field `{key}`"))),
        }
    };
    Ok(match kind {
        ResourceKind::Texture => {
            if let Some((n, k, _)) = fields.iter().find(|(_, k, _)| *k != "data") {
                return Err(unknown(*n, k));
            }
            let (n, v) = single("data")?;
            ResourceDescriptor::Texture(parse_texture(n, v)?)
        }
        ResourceKind::Cubemap => {
            if let Some((n, k, _)) = fields.iter().find(|(_, k, _)| !CUBE_FACES.contains(k)) {
                return Err(unknown(*n, k));
            }
            let mut faces = Vec::with_capacity(6);
            for face in CUBE_FACES {
                let (n, v) = single(face)?;
                faces.push(parse_texture(n, v)?);
            }
            let faces: [TextureData; 6] = faces.try_into().expect("six faces");
            ResourceDescriptor::Cubemap(Box::new(faces))
        }
        ResourceKind::Shader => {
            if let Some((n, k, _)) = fields.iter().find(|(_, k, _)| *k != "source" && *k != "stage") {
                return Err(unknown(*n, k));
            }
            let stages: Vec<_> = fields.iter().filter(|(_, k, _)| *k == "stage").collect();
            if stages.is_empty() {
                let (n, v) = single("source")?;
                ResourceDescriptor::Shader(parse_shader(n, v)?)
            } else {
                if let Some((n, _, _)) = fields.iter().find(|(_, k, _)| *k == "source") {
                    return Err(parse_err(*n, "a shader has either one source or stages"));
                }
                let parts = stages
                    .iter()
                    .map(|(n, _, v)| parse_shader(*n, v))
                    .collect::<Result<Vec<_>>>()?;
                ResourceDescriptor::Shader(ShaderSource::Stages(parts))
            }
        }
        ResourceKind::Material => {
            const KEYS: [&str; 8] = ["shader", "texture", "glossiness", "base_color", "ka", "kd", "ks", "reflectivity"];
            if let Some((n, k, _)) = fields.iter().find(|(_, k, _)| !KEYS.contains(k)) {
                return Err(unknown(*n, k));
            }
            let (n, v) = single("shader")?;
            let mut m = MaterialData::new(string_value(n, v)?, &[]);
            for (n, _, v) in fields.iter().filter(|(_, k, _)| *k == "texture") {
                m.textures.push(string_value(*n, v)?);
            }
            let num = |key| single(key).and_then(|(n, v)| float_value(n, v));
            m.glossiness = num("glossiness")?;
            m.ka = num("ka")?;
            m.kd = num("kd")?;
            m.ks = num("ks")?;
            m.reflectivity = num("reflectivity")?;
            let (n, v) = single("base_color")?;
            match field_value(n, v, FieldKind::Vec4)? {
                Value::Vec4(c) => m.base_color = c,
                _ => unreachable!(),
            }
            ResourceDescriptor::Material(m)
        }
        ResourceKind::Mesh => {
            if let Some((n, k, _)) = fields.iter().find(|(_, k, _)| *k != "source") {
                return Err(unknown(*n, k));
            }
            let (n, v) = single("source")?;
            ResourceDescriptor::Mesh(parse_mesh(n, v)?)
        }
    })
}

fn parse_manifest(cur: &mut Cursor<'_>) -> Result<Manifest> {
    let mut manifest = Manifest::new();
    cur.expect("{")?;
    loop {
        let (n, l) = cur.next()?;
        if l == "}" {
            return Ok(manifest);
        }
        let (kind_text, name_text) = l
            .split_once(' ')
            .ok_or_else(|| parse_err(n, format!("expected `<kind> \"name\"`, found `{l}`")))?;
        let kind = ResourceKind::parse(kind_text)
            .ok_or_else(|| parse_err(n, format!("unknown resource kind `{kind_text}`")))?;
        let name = string_value(n, name_text)?;
        cur.expect("{")?;
        let fields = cur.fields("}")?;
        if manifest.get(kind, &name).is_some() {
            return Err(parse_err(n, format!("{kind} `{name}` is listed twice")));
        }
        let desc = parse_resource(n, kind, &name, &fields)?;
        manifest.insert(name, desc);
    }
}

/// Parses a document. Nothing outside the returned value is modified.
pub fn load_scene(text: &str, registry: &ComponentRegistry) -> Result<SceneDocument> {
    let mut cur = Cursor::new(text);
    match text.lines().next() {
        Some(HEADER) => {}
        Some(l) if l.starts_with(HEADER_PREFIX) => {
            return Err(Error::UnsupportedVersion(l[HEADER_PREFIX.len()..].to_owned()));
        }
        _ => return Err(parse_err(1, format!("expected `{HEADER}`"))),
    }
    cur.next()?;

    cur.expect("(")?;
    let mut name = None;
    let mut entity_count = None;
    let mut resource_count = None;
    for (n, k, v) in cur.fields(")")? {
        let count = || v.parse::<usize>().map_err(|_| parse_err(n, format!("`{v}` is not a count")));
        let slot_taken = match k {
            "name" => name.replace(string_value(n, v)?).is_some(),
            "entities" => entity_count.replace(count()?).is_some(),
            "resources" => resource_count.replace(count()?).is_some(),
            _ => return Err(parse_err(n, format!("unknown metadata field `{k}`"))),
        };
        if slot_taken {
            return Err(parse_err(n, format!("duplicate metadata field `{k}`")));
        }
    }
    let entity_count = entity_count.ok_or_else(|| parse_err(cur.end_line, "metadata lacks `entities`"))?;

    let mut manifest = Manifest::new();
    if cur.peek().is_some_and(|(_, l)| l == "def Resources") {
        cur.next()?;
        manifest = parse_manifest(&mut cur)?;
    }
    if let Some(expected) = resource_count {
        if manifest.len() != expected {
            return Err(parse_err(
                cur.end_line,
                format!("metadata lists {expected} resources, document has {}", manifest.len()),
            ));
        }
    }
    for (name, desc) in manifest.iter() {
        for (kind, dep) in dependencies(desc) {
            if manifest.get(kind, dep).is_none() {
                return Err(Error::DanglingResource {
                    kind,
                    name: dep.to_owned(),
                    referrer: format!("{} `{name}`", desc.kind()),
                });
            }
        }
    }

    let mut scene = Scene::new(name.unwrap_or_default());
    let mut entity_refs: Vec<(Entity, Entity)> = Vec::new();
    while let Some((n, l)) = cur.peek() {
        cur.next()?;
        let id_text = l
            .strip_prefix("def Entity ")
            .ok_or_else(|| parse_err(n, format!("expected `def Entity \"<id>\"`, found `{l}`")))?;
        let id = string_value(n, id_text)?;
        let entity: Entity = id
            .parse()
            .map_err(|_| parse_err(n, format!("`{id}` is not an entity id")))?;
        scene.enroll_with_id(entity)?;
        cur.expect("{")?;
        let mut tags_seen = HashSet::new();
        loop {
            let (n, l) = cur.next()?;
            if l == "}" {
                break;
            }
            let tag = l
                .strip_prefix("over ")
                .ok_or_else(|| parse_err(n, format!("expected `over <Component>`, found `{l}`")))?;
            let entry = registry
                .by_tag(tag)
                .filter(|e| e.serializable)
                .ok_or_else(|| Error::UnknownComponent(tag.to_owned()))?;
            if !tags_seen.insert(tag) {
                return Err(parse_err(n, format!("component `{tag}` appears twice")));
            }
            cur.expect("{")?;
            let mut values = Vec::new();
            let mut names_seen = HashSet::new();
            for (n, k, v) in cur.fields("}")? {
                let kind = entry.field_kind(k).ok_or_else(|| Error::UnknownField {
                    component: tag.to_owned(),
                    field: k.to_owned(),
                })?;
                if !names_seen.insert(k) {
                    return Err(parse_err(n, format!("field `{k}` appears twice")));
                }
                let value = field_value(n, v, kind)?;
                match (&value, kind) {
                    (Value::Entity(Some(target)), _) => entity_refs.push((entity, *target)),
                    (Value::Str(res), FieldKind::Resource(rk)) if manifest.get(rk, res).is_none() => {
                        return Err(Error::DanglingResource {
                            kind: rk,
                            name: res.clone(),
                            referrer: format!("entity {entity} {tag}.{k}"),
                        });
                    }
                    _ => {}
                }
                values.push((k.to_owned(), value));
            }
            entry.insert(&mut scene, entity, values)?;
        }
    }
    if scene.entities().len() != entity_count {
        return Err(parse_err(
            cur.end_line,
            format!("metadata lists {entity_count} entities, document has {}", scene.entities().len()),
        ));
    }
    for (entity, target) in entity_refs {
        if !scene.contains(target) {
            return Err(Error::DanglingParent { entity, parent: target });
        }
    }
    check_link_cycles(&scene)?;
    Ok(SceneDocument { scene, manifest })
}

fn check_link_cycles(scene: &Scene) -> Result<()> {
    let parent_of: HashMap<Entity, Entity> = scene
        .entities()
        .iter()
        .filter_map(|&e| scene.get::<LinkComponent>(e).and_then(|l| l.parent).map(|p| (e, p)))
        .collect();
    for &start in parent_of.keys() {
        let mut at = start;
        for _ in 0..=parent_of.len() {
            match parent_of.get(&at) {
                Some(&p) if p == start => {
                    return Err(Error::Cycle {
                        child: start,
                        parent: parent_of[&start],
                    })
                }
                Some(&p) => at = p,
                None => break,
            }
        }
    }
    Ok(())
}
