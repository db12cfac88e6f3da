//! Transforms, parent links and world-matrix propagation.
//!
//! Conventions: right-handed, column vectors, local matrix `T * Rz * Ry * Rx * S`
//! with Euler angles in degrees.

use std::collections::HashMap;

use glam::{DMat4, DVec3};

use crate::ecs::{ComponentType, Entity, Scene, System};
use crate::error::{Error, Result};

/// Position, orientation and scale. `local` and `world` are maintained by
/// [`TransformSystem`] for entities that also carry a [`LinkComponent`].
#[derive(Clone, Debug, PartialEq)]
pub struct TransformComponent {
    pub translation: DVec3,
    /// Euler angles in degrees, applied X then Y then Z.
    pub rotation: DVec3,
    pub scale: DVec3,
    pub local: DMat4,
    pub world: DMat4,
}

impl Default for TransformComponent {
    fn default() -> Self {
        TransformComponent {
            translation: DVec3::ZERO,
            rotation: DVec3::ZERO,
            scale: DVec3::ONE,
            local: DMat4::IDENTITY,
            world: DMat4::IDENTITY,
        }
    }
}

impl TransformComponent {
    pub fn new(translation: DVec3, rotation: DVec3, scale: DVec3) -> Self {
        TransformComponent {
            translation,
            rotation,
            scale,
            ..Default::default()
        }
    }

    pub fn from_translation(translation: DVec3) -> Self {
        TransformComponent {
            translation,
            ..Default::default()
        }
    }

    pub fn with_rotation(mut self, degrees: DVec3) -> Self {
        self.rotation = degrees;
        self
    }

    pub fn with_scale(mut self, scale: DVec3) -> Self {
        self.scale = scale;
        self
    }

    /// Recomputes the cached local matrix from the TRS fields.
    pub fn local_matrix(&self) -> Result<DMat4> {
        compose_trs(self.translation, self.rotation, self.scale)
    }

    pub fn world_position(&self) -> DVec3 {
        self.world.w_axis.truncate()
    }
}

/// Builds `T * Rz * Ry * Rx * S`. Rotation is given in degrees.
pub fn compose_trs(translation: DVec3, rotation: DVec3, scale: DVec3) -> Result<DMat4> {
    for (axis, s) in [('x', scale.x), ('y', scale.y), ('z', scale.z)] {
        if s == 0.0 {
            return Err(Error::ZeroScale { axis });
        }
    }
    let r = DMat4::from_rotation_z(rotation.z.to_radians())
        * DMat4::from_rotation_y(rotation.y.to_radians())
        * DMat4::from_rotation_x(rotation.x.to_radians());
    Ok(DMat4::from_translation(translation) * r * DMat4::from_scale(scale))
}

/// Euler angles (degrees) that turn the default view direction `-Z` towards `dir`.
pub fn looking_at(dir: DVec3) -> DVec3 {
    let d = dir.normalize();
    let pitch = d.y.clamp(-1.0, 1.0).asin();
    let yaw = f64::atan2(-d.x, -d.z);
    DVec3::new(pitch.to_degrees(), yaw.to_degrees(), 0.0)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinkComponent {
    pub parent: Option<Entity>,
}

impl LinkComponent {
    pub fn new(parent: Option<Entity>) -> Self {
        LinkComponent { parent }
    }
}

/// Links `entity` under `parent`, or detaches it with `None`.
pub fn set_parent(scene: &mut Scene, entity: Entity, parent: Option<Entity>) -> Result<()> {
    if !scene.contains(entity) {
        return Err(Error::UnknownEntity(entity));
    }
    if let Some(p) = parent {
        if !scene.contains(p) {
            return Err(Error::UnknownEntity(p));
        }
        let mut cursor = Some(p);
        let mut steps = 0usize;
        while let Some(c) = cursor {
            if c == entity || steps > scene.entities().len() {
                return Err(Error::Cycle { child: entity, parent: p });
            }
            cursor = scene.get::<LinkComponent>(c).and_then(|l| l.parent);
            steps += 1;
        }
    }
    match scene.get_mut::<LinkComponent>(entity) {
        Some(link) => link.parent = parent,
        None => scene.add_component(entity, LinkComponent::new(parent))?,
    }
    Ok(())
}

/// Recomputes local and world matrices for every entity with a transform and a
/// link, parents before children.
#[derive(Debug, Default)]
pub struct TransformSystem;

impl System for TransformSystem {
    fn required(&self) -> Vec<ComponentType> {
        crate::component_set![TransformComponent, LinkComponent]
    }

    fn on_update(&mut self, scene: &mut Scene, _ts: f64, entities: &[Entity]) -> Result<()> {
        propagate_entities(scene, entities)
    }
}

/// Runs propagation over every linked transform in the scene, without a registered system.
pub fn propagate(scene: &mut Scene) -> Result<()> {
    let entities = scene.entities_with(&crate::component_set![TransformComponent, LinkComponent]);
    propagate_entities(scene, &entities)
}

fn propagate_entities(scene: &mut Scene, entities: &[Entity]) -> Result<()> {
    let mut world: HashMap<Entity, DMat4> = HashMap::with_capacity(entities.len());
    for &root in entities {
        if world.contains_key(&root) {
            continue;
        }
        // Walk up until a resolved ancestor or a root, then resolve downwards.
        let mut chain = vec![root];
        loop {
            let top = *chain.last().expect("chain starts non-empty");
            let parent = scene.get::<LinkComponent>(top).and_then(|l| l.parent);
            match parent {
                Some(p) if world.contains_key(&p) => break,
                Some(p) => {
                    if !scene.has::<TransformComponent>(p) {
                        return Err(Error::DanglingParent { entity: top, parent: p });
                    }
                    if chain.contains(&p) {
                        return Err(Error::Cycle { child: top, parent: p });
                    }
                    chain.push(p);
                }
                None => break,
            }
        }
        for &e in chain.iter().rev() {
            let parent_world = scene
                .get::<LinkComponent>(e)
                .and_then(|l| l.parent)
                .map(|p| world[&p]);
            let t = scene
                .get_mut::<TransformComponent>(e)
                .expect("chain members hold transforms");
            t.local = t.local_matrix()?;
            t.world = match parent_world {
                Some(pw) => pw * t.local,
                None => t.local,
            };
            world.insert(e, t.world);
        }
    }
    Ok(())
}
