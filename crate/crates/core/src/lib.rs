//! A data-oriented entity-component-system rendering framework.
//!
//! Scenes hold entities and typed component stores; systems declare the
//! component sets they need and receive cached entity lists. On top of that
//! sit a transform hierarchy, named GPU resource registries, a forward
//! renderer with per-object and instanced draw strategies, a text scene
//! format and a benchmark harness. The device is [`gpu`], a software
//! implementation of a WebGPU-class API.

pub mod bench;
pub mod components;
pub mod ecs;
pub mod editing;
pub mod error;
pub mod gallery;
pub mod imaging;
pub mod reflect;
pub mod renderer;
pub mod resources;
pub mod scene_io;
pub mod scenegraph;

pub use ecsgfx_gpu as gpu;
pub use glam;

pub use components::{GravityComponent, GravitySystem, InfoComponent, RotateComponent, RotationSystem};
pub use ecs::{ComponentType, Entity, Scene, SceneManager, System};
pub use editing::{apply_edit, is_editor_entity, DockSide, PanelComponent, PanelKind};
pub use error::{Error, Result};
pub use imaging::Image;
pub use reflect::{ComponentRegistry, FieldKind, Reflect, Value};
pub use renderer::{
    CameraComponent, FrameStats, LightComponent, MaterialComponent, MeshComponent, OffscreenTarget, Projection,
    Renderer, SkyboxComponent, Strategy,
};
pub use resources::{
    Handle, MaterialData, MeshData, MeshSource, Primitive, ResourceCatalog, ResourceDescriptor, ResourceKind,
    Resources, ShaderSource, TextureData,
};
pub use scenegraph::{set_parent, LinkComponent, TransformComponent, TransformSystem};
