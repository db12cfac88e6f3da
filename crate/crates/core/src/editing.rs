//! Hooks for an interactive scene editor: panel components and schema-driven field edits.
//!
//! Edits go through the same component surface as ordinary code. Entities that
//! hold a [`PanelComponent`] belong to the editor and are never written to scene files.

use crate::ecs::{Entity, Scene};
use crate::error::{Error, Result};
use crate::reflect::{parse_value, ComponentRegistry, FieldKind, Value};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PanelKind {
    #[default]
    Hierarchy,
    Inspector,
    Stats,
    Console,
}

impl PanelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PanelKind::Hierarchy => "hierarchy",
            PanelKind::Inspector => "inspector",
            PanelKind::Stats => "stats",
            PanelKind::Console => "console",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hierarchy" => PanelKind::Hierarchy,
            "inspector" => PanelKind::Inspector,
            "stats" => PanelKind::Stats,
            "console" => PanelKind::Console,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DockSide {
    #[default]
    Left,
    Right,
    Bottom,
    Floating,
}

impl DockSide {
    pub fn as_str(self) -> &'static str {
        match self {
            DockSide::Left => "left",
            DockSide::Right => "right",
            DockSide::Bottom => "bottom",
            DockSide::Floating => "floating",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "left" => DockSide::Left,
            "right" => DockSide::Right,
            "bottom" => DockSide::Bottom,
            "floating" => DockSide::Floating,
            _ => return None,
        })
    }
}

/// Marks an entity as an editor panel.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelComponent {
    pub kind: PanelKind,
    pub dock: DockSide,
    pub width: f64,
    pub height: f64,
    pub visible: bool,
}

impl Default for PanelComponent {
    fn default() -> Self {
        PanelComponent {
            kind: PanelKind::Hierarchy,
            dock: DockSide::Left,
            width: 280.0,
            height: 400.0,
            visible: true,
        }
    }
}

/// Whether `entity` belongs to the editor rather than the edited scene.
pub fn is_editor_entity(scene: &Scene, entity: Entity) -> bool {
    scene.has::<PanelComponent>(entity)
}

/// Sets one field of one component from its text form.
///
/// `field` is either a schema field name or, for vector fields, a single lane
/// such as `translation.y`. The component is left untouched on any error.
pub fn apply_edit(
    scene: &mut Scene,
    registry: &ComponentRegistry,
    entity: Entity,
    tag: &str,
    field: &str,
    text: &str,
) -> Result<()> {
    let entry = registry
        .by_tag(tag)
        .ok_or_else(|| Error::UnknownComponent(tag.to_owned()))?;
    let (name, lane) = match field.split_once('.') {
        Some((name, lane)) => (name, Some(lane)),
        None => (field, None),
    };
    let kind = entry.field_kind(name).ok_or_else(|| Error::UnknownField {
        component: tag.to_owned(),
        field: field.to_owned(),
    })?;
    let invalid = |reason: String| Error::InvalidValue {
        component: tag.to_owned(),
        field: field.to_owned(),
        reason,
    };
    let value = match lane {
        None => parse_value(text, kind).map_err(invalid)?,
        Some(lane) => {
            let Value::Float(x) = parse_value(text, FieldKind::Float).map_err(invalid)? else {
                unreachable!("float parse yields a float")
            };
            let current = entry
                .read(scene, entity)
                .and_then(|fields| fields.into_iter().find(|(n, _)| *n == name))
                .map(|(_, v)| v)
                .ok_or_else(|| invalid(format!("entity {entity} has no {tag} component")))?;
            match (current, lane) {
                (Value::Vec3(mut v), "x") => {
                    v.x = x;
                    Value::Vec3(v)
                }
                (Value::Vec3(mut v), "y") => {
                    v.y = x;
                    Value::Vec3(v)
                }
                (Value::Vec3(mut v), "z") => {
                    v.z = x;
                    Value::Vec3(v)
                }
                (Value::Vec4(mut v), l @ ("x" | "y" | "z" | "w")) => {
                    v["xyzw".find(l).expect("matched lane")] = x;
                    Value::Vec4(v)
                }
                _ => {
                    return Err(Error::UnknownField {
                        component: tag.to_owned(),
                        field: field.to_owned(),
                    })
                }
            }
        }
    };
    entry.set_field(scene, entity, name, value)
}
