//! General-purpose components and the systems that drive them.

use crate::ecs::{ComponentType, Entity, Scene, System};
use crate::error::Result;
use crate::scenegraph::TransformComponent;

/// A display name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InfoComponent {
    pub name: String,
}

impl InfoComponent {
    pub fn new(name: impl Into<String>) -> Self {
        InfoComponent { name: name.into() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GravityComponent {
    /// Downward speed in units per second.
    pub force: f64,
}

impl Default for GravityComponent {
    fn default() -> Self {
        GravityComponent { force: 5.0 }
    }
}

/// Moves each transform down by `force * ts` per tick.
#[derive(Debug, Default)]
pub struct GravitySystem;

impl System for GravitySystem {
    fn required(&self) -> Vec<ComponentType> {
        crate::component_set![GravityComponent, TransformComponent]
    }

    fn on_update_entity(&mut self, scene: &mut Scene, ts: f64, entity: Entity) -> Result<()> {
        let Some(force) = scene.get::<GravityComponent>(entity).map(|g| g.force) else {
            return Ok(());
        };
        if let Some(t) = scene.get_mut::<TransformComponent>(entity) {
            t.translation.y -= force * ts;
        }
        Ok(())
    }
}

/// Spin about the local Y axis.
#[derive(Clone, Debug, PartialEq)]
pub struct RotateComponent {
    pub degrees_per_second: f64,
}

impl Default for RotateComponent {
    fn default() -> Self {
        RotateComponent {
            degrees_per_second: 45.0,
        }
    }
}

#[derive(Debug, Default)]
pub struct RotationSystem;

impl System for RotationSystem {
    fn required(&self) -> Vec<ComponentType> {
        crate::component_set![RotateComponent, TransformComponent]
    }

    fn on_update_entity(&mut self, scene: &mut Scene, ts: f64, entity: Entity) -> Result<()> {
        let Some(speed) = scene.get::<RotateComponent>(entity).map(|r| r.degrees_per_second) else {
            return Ok(());
        };
        if let Some(t) = scene.get_mut::<TransformComponent>(entity) {
            t.rotation.y = (t.rotation.y + speed * ts).rem_euclid(360.0);
        }
        Ok(())
    }
}
