//! Entities, typed component stores, systems with cached filtering, and scenes.
//!
//! Each component type lives in its own dense store. Every entity keeps a small
//! map from component type to the index of its component in that store. Systems
//! declare the component types they need and keep a cache of matching entities
//! in enrollment order, updated whenever an entity's component set changes.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::fmt;

use uuid::Uuid;

use crate::error::{Error, Result};

/// An opaque identifier. Carries no data of its own.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Entity(Uuid);

impl Entity {
    pub(crate) fn random() -> Entity {
        Entity(Uuid::new_v4())
    }

    pub fn from_uuid(id: Uuid) -> Entity {
        Entity(id)
    }

    pub fn uuid(&self) -> Uuid {
        self.0
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.hyphenated().fmt(f)
    }
}

impl fmt::Debug for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Entity({})", self.0.hyphenated())
    }
}

impl std::str::FromStr for Entity {
    type Err = uuid::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Uuid::parse_str(s).map(Entity)
    }
}

/// Plain data attached to entities.
pub trait Component: Any + Clone + fmt::Debug {}

impl<T: Any + Clone + fmt::Debug> Component for T {}

/// Runtime identity of a component type.
#[derive(Clone, Copy)]
pub struct ComponentType {
    id: TypeId,
    name: &'static str,
}

impl ComponentType {
    pub fn of<T: Component>() -> ComponentType {
        ComponentType {
            id: TypeId::of::<T>(),
            name: std::any::type_name::<T>(),
        }
    }

    pub fn type_id(&self) -> TypeId {
        self.id
    }

    /// Unqualified type name.
    pub fn name(&self) -> &'static str {
        self.name.rsplit("::").next().unwrap_or(self.name)
    }
}

impl PartialEq for ComponentType {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for ComponentType {}

impl std::hash::Hash for ComponentType {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl fmt::Debug for ComponentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Builds a `Vec<ComponentType>` from a list of types.
#[macro_export]
macro_rules! component_set {
    ($($t:ty),* $(,)?) => {
        vec![$($crate::ecs::ComponentType::of::<$t>()),*]
    };
}

trait AnyStore: Any {
    fn len(&self) -> usize;
    /// Removes `index` by moving the last element into its place. Returns the
    /// owner of the moved element, if one moved.
    fn swap_remove(&mut self, index: usize) -> Option<Entity>;
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

struct Store<T> {
    items: Vec<T>,
    owners: Vec<Entity>,
}

impl<T: Component> AnyStore for Store<T> {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn swap_remove(&mut self, index: usize) -> Option<Entity> {
        self.items.swap_remove(index);
        self.owners.swap_remove(index);
        self.owners.get(index).copied()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// Behaviour over every entity that has all of [`System::required`].
pub trait System: Any {
    fn name(&self) -> &str {
        let full = std::any::type_name::<Self>();
        full.rsplit("::").next().unwrap_or(full)
    }

    /// Component types an entity must have to be processed. An empty set matches every entity.
    fn required(&self) -> Vec<ComponentType>;

    /// Runs each time an entity enters the cache.
    fn on_create_entity(&mut self, _scene: &mut Scene, _entity: Entity) -> Result<()> {
        Ok(())
    }

    fn on_update_entity(&mut self, _scene: &mut Scene, _ts: f64, _entity: Entity) -> Result<()> {
        Ok(())
    }

    /// Runs once per tick with the cached entities in enrollment order. The
    /// default visits each entity with [`System::on_update_entity`].
    fn on_update(&mut self, scene: &mut Scene, ts: f64, entities: &[Entity]) -> Result<()> {
        for &e in entities {
            self.on_update_entity(scene, ts, e)?;
        }
        Ok(())
    }
}

struct SystemSlot {
    /// `None` while the system's own hook is running.
    system: Option<Box<dyn System>>,
    name: String,
    required: Vec<ComponentType>,
    cache: Vec<Entity>,
}

struct EntityRecord {
    seq: u64,
    /// Component type to index in that type's store, in insertion order.
    refs: Vec<(ComponentType, usize)>,
}

#[derive(Default)]
pub struct Scene {
    name: String,
    entities: Vec<Entity>,
    records: HashMap<Entity, EntityRecord>,
    next_seq: u64,
    stores: HashMap<TypeId, Box<dyn AnyStore>>,
    systems: Vec<SystemSlot>,
    /// Create-hook calls deferred because the target system was busy.
    pending_creates: Vec<(usize, Entity)>,
}

impl fmt::Debug for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scene")
            .field("name", &self.name)
            .field("entities", &self.entities.len())
            .field("systems", &self.systems.iter().map(|s| &s.name).collect::<Vec<_>>())
            .finish()
    }
}

impl Scene {
    pub fn new(name: impl Into<String>) -> Scene {
        Scene {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn enroll_entity(&mut self) -> Entity {
        let e = Entity::random();
        self.enroll_with_id(e).expect("fresh uuid is unique");
        e
    }

    /// Enrolls an entity under a caller-chosen id, e.g. when loading a saved scene.
    pub fn enroll_with_id(&mut self, entity: Entity) -> Result<()> {
        if self.records.contains_key(&entity) {
            return Err(Error::DuplicateEntity(entity));
        }
        self.records.insert(
            entity,
            EntityRecord {
                seq: self.next_seq,
                refs: Vec::new(),
            },
        );
        self.next_seq += 1;
        self.entities.push(entity);
        // Systems with an empty requirement match the new entity immediately.
        self.refresh_caches(entity)
    }

    /// Entities in enrollment order.
    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn contains(&self, entity: Entity) -> bool {
        self.records.contains_key(&entity)
    }

    fn record(&self, entity: Entity) -> Result<&EntityRecord> {
        self.records.get(&entity).ok_or(Error::UnknownEntity(entity))
    }

    /// Component types held by `entity`, in the order they were added.
    pub fn component_types(&self, entity: Entity) -> Result<Vec<ComponentType>> {
        Ok(self.record(entity)?.refs.iter().map(|(t, _)| *t).collect())
    }

    pub fn has_component(&self, entity: Entity, ty: ComponentType) -> bool {
        self.records
            .get(&entity)
            .is_some_and(|r| r.refs.iter().any(|(t, _)| *t == ty))
    }

    pub fn has<T: Component>(&self, entity: Entity) -> bool {
        self.has_component(entity, ComponentType::of::<T>())
    }

    /// Total number of stored components across all types.
    pub fn component_count(&self) -> usize {
        self.stores.values().map(|s| s.len()).sum()
    }

    /// Number of stored components of type `T`.
    pub fn store_len<T: Component>(&self) -> usize {
        self.stores.get(&TypeId::of::<T>()).map_or(0, |s| s.len())
    }

    fn store<T: Component>(&self) -> Option<&Store<T>> {
        self.stores
            .get(&TypeId::of::<T>())
            .map(|s| s.as_any().downcast_ref::<Store<T>>().expect("store type matches key"))
    }

    fn store_mut<T: Component>(&mut self) -> &mut Store<T> {
        self.stores
            .entry(TypeId::of::<T>())
            .or_insert_with(|| {
                Box::new(Store::<T> {
                    items: Vec::new(),
                    owners: Vec::new(),
                })
            })
            .as_any_mut()
            .downcast_mut::<Store<T>>()
            .expect("store type matches key")
    }

    fn index_of(&self, entity: Entity, ty: ComponentType) -> Option<usize> {
        self.records
            .get(&entity)?
            .refs
            .iter()
            .find(|(t, _)| *t == ty)
            .map(|(_, i)| *i)
    }

    /// Attaches `component` to `entity`. A component of the same type already on
    /// the entity is replaced in place.
    pub fn add_component<T: Component>(&mut self, entity: Entity, component: T) -> Result<()> {
        self.record(entity)?;
        let ty = ComponentType::of::<T>();
        if let Some(i) = self.index_of(entity, ty) {
            self.store_mut::<T>().items[i] = component;
            return Ok(());
        }
        let store = self.store_mut::<T>();
        store.items.push(component);
        store.owners.push(entity);
        let index = store.items.len() - 1;
        self.records
            .get_mut(&entity)
            .expect("checked above")
            .refs
            .push((ty, index));
        self.refresh_caches(entity)
    }

    /// Returns the component or `None`; errors only for unknown entities.
    pub fn get_component<T: Component>(&self, entity: Entity) -> Result<Option<&T>> {
        self.record(entity)?;
        Ok(self.get(entity))
    }

    pub fn get_component_mut<T: Component>(&mut self, entity: Entity) -> Result<Option<&mut T>> {
        self.record(entity)?;
        Ok(self.get_mut(entity))
    }

    /// Shorthand for [`Scene::get_component`] that folds unknown entities into `None`.
    pub fn get<T: Component>(&self, entity: Entity) -> Option<&T> {
        let i = self.index_of(entity, ComponentType::of::<T>())?;
        self.store::<T>().map(|s| &s.items[i])
    }

    pub fn get_mut<T: Component>(&mut self, entity: Entity) -> Option<&mut T> {
        let i = self.index_of(entity, ComponentType::of::<T>())?;
        Some(&mut self.store_mut::<T>().items[i])
    }

    /// Removes the component of type `T`. Returns whether one was present.
    pub fn remove_component<T: Component>(&mut self, entity: Entity) -> Result<bool> {
        self.remove_component_dyn(entity, ComponentType::of::<T>())
    }

    /// Type-erased [`Scene::remove_component`].
    pub fn remove_component_dyn(&mut self, entity: Entity, ty: ComponentType) -> Result<bool> {
        let record = self.records.get_mut(&entity).ok_or(Error::UnknownEntity(entity))?;
        let Some(pos) = record.refs.iter().position(|(t, _)| *t == ty) else {
            return Ok(false);
        };
        let (_, index) = record.refs.remove(pos);
        let store = self.stores.get_mut(&ty.type_id()).expect("referenced store exists");
        if let Some(moved) = store.swap_remove(index) {
            let old_index = store.len();
            let moved_record = self.records.get_mut(&moved).expect("store owner is enrolled");
            for (t, i) in &mut moved_record.refs {
                if *t == ty && *i == old_index {
                    *i = index;
                }
            }
        }
        self.refresh_caches(entity)?;
        Ok(true)
    }

    /// Removes an entity and all its components.
    pub fn destroy_entity(&mut self, entity: Entity) -> Result<()> {
        for ty in self.component_types(entity)? {
            self.remove_component_dyn(entity, ty)?;
        }
        for slot in &mut self.systems {
            slot.cache.retain(|e| *e != entity);
        }
        self.pending_creates.retain(|(_, e)| *e != entity);
        self.records.remove(&entity);
        self.entities.retain(|e| *e != entity);
        Ok(())
    }

    fn matches(&self, entity: Entity, required: &[ComponentType]) -> bool {
        required.iter().all(|t| self.has_component(entity, *t))
    }

    fn refresh_caches(&mut self, entity: Entity) -> Result<()> {
        let seq = self.records[&entity].seq;
        let mut entered = Vec::new();
        for i in 0..self.systems.len() {
            let matches = self.matches(entity, &self.systems[i].required);
            let records = &self.records;
            let slot = &mut self.systems[i];
            let pos = slot.cache.binary_search_by_key(&seq, |e| records[e].seq);
            match (matches, pos) {
                (true, Err(at)) => {
                    slot.cache.insert(at, entity);
                    entered.push(i);
                }
                (false, Ok(at)) => {
                    slot.cache.remove(at);
                }
                _ => {}
            }
        }
        for i in entered {
            self.fire_create(i, entity)?;
        }
        Ok(())
    }

    fn fire_create(&mut self, slot: usize, entity: Entity) -> Result<()> {
        let Some(mut system) = self.systems[slot].system.take() else {
            self.pending_creates.push((slot, entity));
            return Ok(());
        };
        let result = system.on_create_entity(self, entity);
        self.systems[slot].system = Some(system);
        result?;
        self.drain_pending(slot)
    }

    fn drain_pending(&mut self, slot: usize) -> Result<()> {
        while let Some(at) = self.pending_creates.iter().position(|(s, _)| *s == slot) {
            let (_, entity) = self.pending_creates.remove(at);
            // Skip entities that left the cache again before the hook could run.
            if self.systems[slot].cache.contains(&entity) {
                self.fire_create(slot, entity)?;
            }
        }
        Ok(())
    }

    /// Appends a system, filters existing entities into its cache and fires its
    /// create hook for each of them. Returns the system's index.
    pub fn register_system<S: System>(&mut self, system: S) -> Result<usize> {
        let required = system.required();
        let cache: Vec<Entity> = self
            .entities
            .iter()
            .copied()
            .filter(|e| self.matches(*e, &required))
            .collect();
        self.systems.push(SystemSlot {
            name: system.name().to_owned(),
            system: Some(Box::new(system)),
            required,
            cache: cache.clone(),
        });
        let slot = self.systems.len() - 1;
        for e in cache {
            if self.systems[slot].cache.contains(&e) {
                self.fire_create(slot, e)?;
            }
        }
        Ok(slot)
    }

    pub fn system_count(&self) -> usize {
        self.systems.len()
    }

    pub fn system_name(&self, index: usize) -> Option<&str> {
        self.systems.get(index).map(|s| s.name.as_str())
    }

    /// Cached entities of the system at `index`, in enrollment order.
    pub fn system_cache(&self, index: usize) -> Option<&[Entity]> {
        self.systems.get(index).map(|s| s.cache.as_slice())
    }

    pub fn system_required(&self, index: usize) -> Option<&[ComponentType]> {
        self.systems.get(index).map(|s| s.required.as_slice())
    }

    /// The first registered system of type `S`.
    pub fn system<S: System>(&self) -> Option<&S> {
        self.systems.iter().find_map(|s| {
            let sys: &dyn Any = s.system.as_deref()?;
            sys.downcast_ref::<S>()
        })
    }

    pub fn system_mut<S: System>(&mut self) -> Option<&mut S> {
        self.systems.iter_mut().find_map(|s| {
            let sys: &mut dyn Any = s.system.as_deref_mut()?;
            sys.downcast_mut::<S>()
        })
    }

    /// Index of the first system of type `S`.
    pub fn system_index<S: System>(&self) -> Option<usize> {
        self.systems.iter().position(|s| {
            s.system
                .as_deref()
                .is_some_and(|sys| (sys as &dyn Any).is::<S>())
        })
    }

    /// Runs every system in registration order over its cached entities.
    pub fn tick(&mut self, ts: f64) -> Result<()> {
        for slot in 0..self.systems.len() {
            let Some(mut system) = self.systems[slot].system.take() else {
                continue;
            };
            let entities = self.systems[slot].cache.clone();
            let result = system.on_update(self, ts, &entities);
            self.systems[slot].system = Some(system);
            result?;
            self.drain_pending(slot)?;
        }
        Ok(())
    }

    /// Entities holding every type in `types`, in enrollment order.
    pub fn entities_with(&self, types: &[ComponentType]) -> Vec<Entity> {
        self.entities
            .iter()
            .copied()
            .filter(|e| self.matches(*e, types))
            .collect()
    }

    /// Checks the store/reference bijection. Used by tests and debug assertions.
    pub fn check_integrity(&self) -> std::result::Result<(), String> {
        let refs: usize = self.records.values().map(|r| r.refs.len()).sum();
        if refs != self.component_count() {
            return Err(format!("{refs} references but {} components", self.component_count()));
        }
        for (e, r) in &self.records {
            for (t, i) in &r.refs {
                let store = self
                    .stores
                    .get(&t.type_id())
                    .ok_or_else(|| format!("{e}: no store for {t:?}"))?;
                if *i >= store.len() {
                    return Err(format!("{e}: {t:?} index {i} out of bounds"));
                }
            }
            let mut seen: Vec<_> = r.refs.iter().map(|(t, _)| t.type_id()).collect();
            seen.sort();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(format!("{e}: duplicate component type"));
            }
        }
        Ok(())
    }
}

/// Named scenes with one active at a time.
#[derive(Default, Debug)]
pub struct SceneManager {
    scenes: Vec<Scene>,
    active: Option<usize>,
}

impl SceneManager {
    pub fn new() -> SceneManager {
        SceneManager::default()
    }

    /// Adds a scene under its name, replacing any scene with the same name. The
    /// first scene added becomes active.
    pub fn add_scene(&mut self, scene: Scene) {
        match self.scenes.iter().position(|s| s.name == scene.name) {
            Some(i) => self.scenes[i] = scene,
            None => self.scenes.push(scene),
        }
        if self.active.is_none() {
            self.active = Some(0);
        }
    }

    pub fn scene_names(&self) -> Vec<&str> {
        self.scenes.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn change_scene(&mut self, name: &str) -> Result<()> {
        let i = self
            .scenes
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownScene(name.to_owned()))?;
        self.active = Some(i);
        Ok(())
    }

    pub fn active_name(&self) -> Option<&str> {
        self.active.map(|i| self.scenes[i].name.as_str())
    }

    pub fn active(&self) -> Option<&Scene> {
        self.active.map(|i| &self.scenes[i])
    }

    pub fn active_mut(&mut self) -> Option<&mut Scene> {
        self.active.map(|i| &mut self.scenes[i])
    }

    pub fn scene(&self, name: &str) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.name == name)
    }

    pub fn scene_mut(&mut self, name: &str) -> Option<&mut Scene> {
        self.scenes.iter_mut().find(|s| s.name == name)
    }

    /// Ticks only the active scene.
    pub fn tick(&mut self, ts: f64) -> Result<()> {
        match self.active_mut() {
            Some(scene) => scene.tick(ts),
            None => Ok(()),
        }
    }
}
