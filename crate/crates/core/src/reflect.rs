//! Field schemas for components, shared by scene files and field editing.

use std::collections::HashMap;
use std::fmt;

use glam::DVec3;

use crate::components::{GravityComponent, InfoComponent, RotateComponent};
use crate::ecs::{Component, ComponentType, Entity, Scene};
use crate::editing::{DockSide, PanelComponent, PanelKind};
use crate::error::{Error, Result};
use crate::renderer::{CameraComponent, LightComponent, MaterialComponent, MeshComponent, Projection, SkyboxComponent};
use crate::resources::ResourceKind;
use crate::scenegraph::{LinkComponent, TransformComponent};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Bool,
    Int,
    Float,
    Vec3,
    Vec4,
    Str,
    /// An optional reference to another entity.
    Entity,
    /// One of a fixed set of identifiers.
    Enum(&'static [&'static str]),
    /// The name of a registered resource.
    Resource(ResourceKind),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Vec3(DVec3),
    Vec4([f64; 4]),
    Str(String),
    Entity(Option<Entity>),
    Enum(String),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Vec3(_) => "vec3",
            Value::Vec4(_) => "vec4",
            Value::Str(_) => "string",
            Value::Entity(_) => "entity",
            Value::Enum(_) => "enum",
        }
    }

    /// Whether this value is acceptable for a field of `kind`.
    pub fn fits(&self, kind: FieldKind) -> bool {
        match (self, kind) {
            (Value::Bool(_), FieldKind::Bool)
            | (Value::Int(_), FieldKind::Int)
            | (Value::Float(_), FieldKind::Float)
            | (Value::Vec3(_), FieldKind::Vec3)
            | (Value::Vec4(_), FieldKind::Vec4)
            | (Value::Str(_), FieldKind::Str)
            | (Value::Str(_), FieldKind::Resource(_))
            | (Value::Entity(_), FieldKind::Entity) => true,
            (Value::Enum(v), FieldKind::Enum(options)) => options.contains(&v.as_str()),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Vec3(v) => write!(f, "({:?}, {:?}, {:?})", v.x, v.y, v.z),
            Value::Vec4(v) => write!(f, "({:?}, {:?}, {:?}, {:?})", v[0], v[1], v[2], v[3]),
            Value::Str(s) => write!(f, "\"{}\"", escape(s)),
            Value::Entity(Some(e)) => write!(f, "<{e}>"),
            Value::Entity(None) => f.write_str("none"),
            Value::Enum(s) => f.write_str(s),
        }
    }
}

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => out.push_str(&format!("\\u{{{:x}}}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

/// Parses the text form of a value of `kind`, the inverse of [`Value`]'s `Display`.
pub fn parse_value(text: &str, kind: FieldKind) -> std::result::Result<Value, String> {
    let text = text.trim();
    let float = |s: &str| -> std::result::Result<f64, String> {
        let s = s.trim();
        let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("`{s}` is not finite"))
        }
    };
    let tuple = |n: usize| -> std::result::Result<Vec<f64>, String> {
        let inner = text
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| format!("expected a parenthesized {n}-tuple, got `{text}`"))?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != n {
            return Err(format!("expected {n} components, got {}", parts.len()));
        }
        parts.into_iter().map(float).collect()
    };
    match kind {
        FieldKind::Bool => match text {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("expected true or false, got `{text}`")),
        },
        FieldKind::Int => text
            .parse()
            .map(Value::Int)
            .map_err(|_| format!("`{text}` is not an integer")),
        FieldKind::Float => float(text).map(Value::Float),
        FieldKind::Vec3 => tuple(3).map(|v| Value::Vec3(DVec3::new(v[0], v[1], v[2]))),
        FieldKind::Vec4 => tuple(4).map(|v| Value::Vec4([v[0], v[1], v[2], v[3]])),
        FieldKind::Str | FieldKind::Resource(_) => parse_string(text).map(Value::Str),
        FieldKind::Entity => {
            if text == "none" {
                return Ok(Value::Entity(None));
            }
            let id = text
                .strip_prefix('<')
                .and_then(|t| t.strip_suffix('>'))
                .ok_or_else(|| format!("expected <uuid> or none, got `{text}`"))?;
            id.parse()
                .map(|e| Value::Entity(Some(e)))
                .map_err(|_| format!("`{id}` is not a uuid"))
        }
        FieldKind::Enum(options) => {
            if options.contains(&text) {
                Ok(Value::Enum(text.to_owned()))
            } else {
                Err(format!("expected one of {options:?}, got `{text}`"))
            }
        }
    }
}

/// Parses a double-quoted, escaped string literal that spans all of `text`.
pub(crate) fn parse_string(text: &str) -> std::result::Result<String, String> {
    let inner = text
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .filter(|_| text.len() >= 2)
        .ok_or_else(|| format!("expected a quoted string, got `{text}`"))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => return Err("unescaped quote inside string".into()),
            '\\' => match chars.next() {
                Some('\\') => out.push('\\'),
                Some('"') => out.push('"'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some('t') => out.push('\t'),
                Some('u') => {
                    let rest: String = chars.by_ref().take_while(|c| *c != '}').collect();
                    let hex = rest.strip_prefix('{').ok_or("bad unicode escape")?;
                    let code = u32::from_str_radix(hex, 16).map_err(|_| "bad unicode escape")?;
                    out.push(char::from_u32(code).ok_or("bad unicode escape")?);
                }
                _ => return Err("bad escape sequence".into()),
            },
            c => out.push(c),
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldSchema {
    pub name: &'static str,
    pub kind: FieldKind,
}

const fn field(name: &'static str, kind: FieldKind) -> FieldSchema {
    FieldSchema { name, kind }
}

/// A component whose fields can be listed, read and written by name.
pub trait Reflect: Component + Default {
    /// Tag used in scene files.
    const TAG: &'static str;

    /// Fields in declaration order.
    fn schema() -> &'static [FieldSchema];

    fn get_field(&self, name: &str) -> Option<Value>;

    /// Writes one field. Values violating the component's invariants are
    /// rejected and leave the component unchanged.
    fn set_field(&mut self, name: &str, value: Value) -> Result<()>;
}

fn invalid(component: &str, field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidValue {
        component: component.into(),
        field: field.into(),
        reason: reason.into(),
    }
}

fn unknown(component: &str, field: &str) -> Error {
    Error::UnknownField {
        component: component.into(),
        field: field.into(),
    }
}

fn mismatch(component: &str, field: &str, expected: FieldKind, got: &Value) -> Error {
    invalid(component, field, format!("expected {expected:?}, got {}", got.kind_name()))
}

macro_rules! expect {
    ($tag:expr, $field:expr, $value:expr, $kind:expr, $pat:pat => $out:expr) => {
        match $value {
            $pat => $out,
            other => return Err(mismatch($tag, $field, $kind, &other)),
        }
    };
}

impl Reflect for TransformComponent {
    const TAG: &'static str = "Transform";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[
            field("translation", FieldKind::Vec3),
            field("rotation", FieldKind::Vec3),
            field("scale", FieldKind::Vec3),
        ];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        match name {
            "translation" => Some(Value::Vec3(self.translation)),
            "rotation" => Some(Value::Vec3(self.rotation)),
            "scale" => Some(Value::Vec3(self.scale)),
            _ => None,
        }
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        let v = expect!(Self::TAG, name, value, FieldKind::Vec3, Value::Vec3(v) => v);
        match name {
            "translation" => self.translation = v,
            "rotation" => self.rotation = v,
            "scale" => {
                if let Some(axis) = ['x', 'y', 'z'].into_iter().zip(v.to_array()).find(|(_, s)| *s == 0.0) {
                    return Err(invalid(
                        Self::TAG,
                        name,
                        format!("scale {} must be nonzero", axis.0),
                    ));
                }
                self.scale = v
            }
            _ => return Err(unknown(Self::TAG, name)),
        }
        Ok(())
    }
}

impl Reflect for LinkComponent {
    const TAG: &'static str = "Link";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[field("parent", FieldKind::Entity)];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        (name == "parent").then_some(Value::Entity(self.parent))
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        if name != "parent" {
            return Err(unknown(Self::TAG, name));
        }
        self.parent = expect!(Self::TAG, name, value, FieldKind::Entity, Value::Entity(e) => e);
        Ok(())
    }
}

impl Reflect for InfoComponent {
    const TAG: &'static str = "Info";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[field("name", FieldKind::Str)];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        (name == "name").then(|| Value::Str(self.name.clone()))
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        if name != "name" {
            return Err(unknown(Self::TAG, name));
        }
        self.name = expect!(Self::TAG, name, value, FieldKind::Str, Value::Str(s) => s);
        Ok(())
    }
}

fn finite_float(tag: &str, name: &str, value: Value) -> Result<f64> {
    let x = expect!(tag, name, value, FieldKind::Float, Value::Float(x) => x);
    if !x.is_finite() {
        return Err(invalid(tag, name, "must be finite"));
    }
    Ok(x)
}

impl Reflect for GravityComponent {
    const TAG: &'static str = "Gravity";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[field("force", FieldKind::Float)];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        (name == "force").then_some(Value::Float(self.force))
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        if name != "force" {
            return Err(unknown(Self::TAG, name));
        }
        self.force = finite_float(Self::TAG, name, value)?;
        Ok(())
    }
}

impl Reflect for RotateComponent {
    const TAG: &'static str = "Rotate";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[field("degrees_per_second", FieldKind::Float)];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        (name == "degrees_per_second").then_some(Value::Float(self.degrees_per_second))
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        if name != "degrees_per_second" {
            return Err(unknown(Self::TAG, name));
        }
        self.degrees_per_second = finite_float(Self::TAG, name, value)?;
        Ok(())
    }
}

impl Reflect for MeshComponent {
    const TAG: &'static str = "Mesh";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[field("mesh", FieldKind::Resource(ResourceKind::Mesh))];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        (name == "mesh").then(|| Value::Str(self.mesh.clone()))
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        if name != "mesh" {
            return Err(unknown(Self::TAG, name));
        }
        self.mesh = expect!(Self::TAG, name, value, FieldKind::Str, Value::Str(s) => s);
        Ok(())
    }
}

impl Reflect for MaterialComponent {
    const TAG: &'static str = "Material";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[field("material", FieldKind::Resource(ResourceKind::Material))];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        (name == "material").then(|| Value::Str(self.material.clone()))
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        if name != "material" {
            return Err(unknown(Self::TAG, name));
        }
        self.material = expect!(Self::TAG, name, value, FieldKind::Str, Value::Str(s) => s);
        Ok(())
    }
}

impl Reflect for SkyboxComponent {
    const TAG: &'static str = "Skybox";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[field("cubemap", FieldKind::Resource(ResourceKind::Cubemap))];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        (name == "cubemap").then(|| Value::Str(self.cubemap.clone()))
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        if name != "cubemap" {
            return Err(unknown(Self::TAG, name));
        }
        self.cubemap = expect!(Self::TAG, name, value, FieldKind::Str, Value::Str(s) => s);
        Ok(())
    }
}

const PROJECTIONS: &[&str] = &["perspective", "orthographic"];

impl Reflect for CameraComponent {
    const TAG: &'static str = "Camera";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[
            field("projection", FieldKind::Enum(PROJECTIONS)),
            field("fov_y", FieldKind::Float),
            field("ortho_height", FieldKind::Float),
            field("near", FieldKind::Float),
            field("far", FieldKind::Float),
            field("primary", FieldKind::Bool),
        ];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        Some(match name {
            "projection" => Value::Enum(
                match self.projection {
                    Projection::Perspective => "perspective",
                    Projection::Orthographic => "orthographic",
                }
                .into(),
            ),
            "fov_y" => Value::Float(self.fov_y),
            "ortho_height" => Value::Float(self.ortho_height),
            "near" => Value::Float(self.near),
            "far" => Value::Float(self.far),
            "primary" => Value::Bool(self.primary),
            _ => return None,
        })
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        let mut next = self.clone();
        match name {
            "projection" => {
                let kind = FieldKind::Enum(PROJECTIONS);
                next.projection = match value {
                    Value::Enum(ref s) if s == "perspective" => Projection::Perspective,
                    Value::Enum(ref s) if s == "orthographic" => Projection::Orthographic,
                    other => return Err(mismatch(Self::TAG, name, kind, &other)),
                }
            }
            "fov_y" => next.fov_y = finite_float(Self::TAG, name, value)?,
            "ortho_height" => next.ortho_height = finite_float(Self::TAG, name, value)?,
            "near" => next.near = finite_float(Self::TAG, name, value)?,
            "far" => next.far = finite_float(Self::TAG, name, value)?,
            "primary" => next.primary = expect!(Self::TAG, name, value, FieldKind::Bool, Value::Bool(b) => b),
            _ => return Err(unknown(Self::TAG, name)),
        }
        if !(next.near > 0.0 && next.near < next.far) {
            return Err(invalid(Self::TAG, name, "planes must satisfy 0 < near < far"));
        }
        if !(next.fov_y > 0.0 && next.fov_y < 180.0) {
            return Err(invalid(Self::TAG, name, "fov_y must lie in (0, 180) degrees"));
        }
        if next.ortho_height <= 0.0 {
            return Err(invalid(Self::TAG, name, "ortho_height must be positive"));
        }
        *self = next;
        Ok(())
    }
}

impl Reflect for LightComponent {
    const TAG: &'static str = "Light";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[
            field("direction", FieldKind::Vec3),
            field("color", FieldKind::Vec3),
            field("intensity", FieldKind::Float),
            field("casts_shadows", FieldKind::Bool),
        ];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        Some(match name {
            "direction" => Value::Vec3(self.direction),
            "color" => Value::Vec3(self.color),
            "intensity" => Value::Float(self.intensity),
            "casts_shadows" => Value::Bool(self.casts_shadows),
            _ => return None,
        })
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        match name {
            "direction" => {
                let d = expect!(Self::TAG, name, value, FieldKind::Vec3, Value::Vec3(v) => v);
                if d.length_squared() == 0.0 || !d.is_finite() {
                    return Err(invalid(Self::TAG, name, "direction must be nonzero"));
                }
                self.direction = d;
            }
            "color" => self.color = expect!(Self::TAG, name, value, FieldKind::Vec3, Value::Vec3(v) => v),
            "intensity" => self.intensity = finite_float(Self::TAG, name, value)?,
            "casts_shadows" => {
                self.casts_shadows = expect!(Self::TAG, name, value, FieldKind::Bool, Value::Bool(b) => b)
            }
            _ => return Err(unknown(Self::TAG, name)),
        }
        Ok(())
    }
}

const PANEL_KINDS: &[&str] = &["hierarchy", "inspector", "stats", "console"];
const DOCK_SIDES: &[&str] = &["left", "right", "bottom", "floating"];

impl Reflect for PanelComponent {
    const TAG: &'static str = "Panel";

    fn schema() -> &'static [FieldSchema] {
        const S: &[FieldSchema] = &[
            field("kind", FieldKind::Enum(PANEL_KINDS)),
            field("dock", FieldKind::Enum(DOCK_SIDES)),
            field("width", FieldKind::Float),
            field("height", FieldKind::Float),
            field("visible", FieldKind::Bool),
        ];
        S
    }

    fn get_field(&self, name: &str) -> Option<Value> {
        Some(match name {
            "kind" => Value::Enum(self.kind.as_str().into()),
            "dock" => Value::Enum(self.dock.as_str().into()),
            "width" => Value::Float(self.width),
            "height" => Value::Float(self.height),
            "visible" => Value::Bool(self.visible),
            _ => return None,
        })
    }

    fn set_field(&mut self, name: &str, value: Value) -> Result<()> {
        match name {
            "kind" => {
                let s = expect!(Self::TAG, name, value, FieldKind::Enum(PANEL_KINDS), Value::Enum(s) => s);
                self.kind = PanelKind::parse(&s).ok_or_else(|| invalid(Self::TAG, name, s))?;
            }
            "dock" => {
                let s = expect!(Self::TAG, name, value, FieldKind::Enum(DOCK_SIDES), Value::Enum(s) => s);
                self.dock = DockSide::parse(&s).ok_or_else(|| invalid(Self::TAG, name, s))?;
            }
            "width" => self.width = finite_float(Self::TAG, name, value)?,
            "height" => self.height = finite_float(Self::TAG, name, value)?,
            "visible" => self.visible = expect!(Self::TAG, name, value, FieldKind::Bool, Value::Bool(b) => b),
            _ => return Err(unknown(Self::TAG, name)),
        }
        Ok(())
    }
}

type ReadFn = fn(&Scene, Entity) -> Option<Vec<(&'static str, Value)>>;
type InsertFn = fn(&mut Scene, Entity, Vec<(String, Value)>) -> Result<()>;
type SetFn = fn(&mut Scene, Entity, &str, Value) -> Result<()>;

/// Type-erased access to one reflected component type.
#[derive(Clone, Copy)]
pub struct ComponentEntry {
    pub tag: &'static str,
    pub ty: ComponentType,
    /// Whether scene files include this component. Entities holding a
    /// non-serializable component are left out of saved scenes entirely.
    pub serializable: bool,
    pub schema: fn() -> &'static [FieldSchema],
    read: ReadFn,
    insert: InsertFn,
    set: SetFn,
}

impl fmt::Debug for ComponentEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComponentEntry")
            .field("tag", &self.tag)
            .field("serializable", &self.serializable)
            .finish()
    }
}

impl ComponentEntry {
    /// Field values of the entity's component, in schema order.
    pub fn read(&self, scene: &Scene, entity: Entity) -> Option<Vec<(&'static str, Value)>> {
        (self.read)(scene, entity)
    }

    /// Builds the component from defaults plus `fields` and attaches it.
    pub fn insert(&self, scene: &mut Scene, entity: Entity, fields: Vec<(String, Value)>) -> Result<()> {
        (self.insert)(scene, entity, fields)
    }

    pub fn set_field(&self, scene: &mut Scene, entity: Entity, field: &str, value: Value) -> Result<()> {
        (self.set)(scene, entity, field, value)
    }

    pub fn field_kind(&self, field: &str) -> Option<FieldKind> {
        (self.schema)().iter().find(|f| f.name == field).map(|f| f.kind)
    }
}

fn read_impl<T: Reflect>(scene: &Scene, entity: Entity) -> Option<Vec<(&'static str, Value)>> {
    let c = scene.get::<T>(entity)?;
    Some(
        T::schema()
            .iter()
            .map(|f| (f.name, c.get_field(f.name).expect("schema fields are readable")))
            .collect(),
    )
}

fn build<T: Reflect>(fields: Vec<(String, Value)>) -> Result<T> {
    let mut c = T::default();
    for (name, value) in fields {
        c.set_field(&name, value)?;
    }
    Ok(c)
}

fn insert_impl<T: Reflect>(scene: &mut Scene, entity: Entity, fields: Vec<(String, Value)>) -> Result<()> {
    let c = build::<T>(fields)?;
    scene.add_component(entity, c)
}

fn set_impl<T: Reflect>(scene: &mut Scene, entity: Entity, field: &str, value: Value) -> Result<()> {
    let c = scene.get_component_mut::<T>(entity)?.ok_or_else(|| Error::InvalidValue {
        component: T::TAG.into(),
        field: field.into(),
        reason: format!("entity {entity} has no {} component", T::TAG),
    })?;
    c.set_field(field, value)
}

/// Reflected component types keyed by tag.
#[derive(Clone, Debug, Default)]
pub struct ComponentRegistry {
    entries: Vec<ComponentEntry>,
    by_tag: HashMap<&'static str, usize>,
}

impl ComponentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every component type the library defines.
    pub fn standard() -> Self {
        let mut r = Self::new();
        r.register::<InfoComponent>(true);
        r.register::<TransformComponent>(true);
        r.register::<LinkComponent>(true);
        r.register::<GravityComponent>(true);
        r.register::<RotateComponent>(true);
        r.register::<MeshComponent>(true);
        r.register::<MaterialComponent>(true);
        r.register::<CameraComponent>(true);
        r.register::<LightComponent>(true);
        r.register::<SkyboxComponent>(true);
        r.register::<PanelComponent>(false);
        r
    }

    pub fn register<T: Reflect>(&mut self, serializable: bool) {
        let entry = ComponentEntry {
            tag: T::TAG,
            ty: ComponentType::of::<T>(),
            serializable,
            schema: T::schema,
            read: read_impl::<T>,
            insert: insert_impl::<T>,
            set: set_impl::<T>,
        };
        match self.by_tag.get(T::TAG) {
            Some(&i) => self.entries[i] = entry,
            None => {
                self.by_tag.insert(T::TAG, self.entries.len());
                self.entries.push(entry);
            }
        }
    }

    pub fn by_tag(&self, tag: &str) -> Option<&ComponentEntry> {
        self.by_tag.get(tag).map(|&i| &self.entries[i])
    }

    pub fn by_type(&self, ty: ComponentType) -> Option<&ComponentEntry> {
        self.entries.iter().find(|e| e.ty == ty)
    }

    pub fn entries(&self) -> &[ComponentEntry] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strings_survive_escaping() {
        for s in ["", "plain", "q\"uote", "back\\slash", "line\nbreak\ttab", "\u{1}ctl"] {
            let text = Value::Str(s.into()).to_string();
            assert_eq!(parse_value(&text, FieldKind::Str), Ok(Value::Str(s.into())), "{text}");
        }
    }

    #[test]
    fn floats_print_round_trippably() {
        for x in [0.1, -0.0, 1e-300, 123456789.125, f64::MAX] {
            let text = Value::Float(x).to_string();
            assert_eq!(parse_value(&text, FieldKind::Float), Ok(Value::Float(x)));
        }
    }

    #[test]
    fn zero_scale_is_rejected_without_change() {
        let mut t = TransformComponent::default();
        let err = t.set_field("scale", Value::Vec3(DVec3::new(0.0, 1.0, 1.0))).unwrap_err();
        assert!(err.to_string().contains("nonzero"), "{err}");
        assert_eq!(t.scale, DVec3::ONE);
    }
}
