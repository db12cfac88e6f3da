use std::path::PathBuf;

use crate::ecs::Entity;
use crate::resources::ResourceKind;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("entity {0} is not enrolled in this scene")]
    UnknownEntity(Entity),
    #[error("entity {0} is already enrolled in this scene")]
    DuplicateEntity(Entity),
    #[error("no scene named `{0}`")]
    UnknownScene(String),
    #[error("scale component {axis} is zero; scale must be nonzero on every axis")]
    ZeroScale { axis: char },
    #[error("making {parent} the parent of {child} would create a cycle")]
    Cycle { child: Entity, parent: Entity },
    #[error("entity {entity} links to parent {parent}, which has no transform in this scene")]
    DanglingParent { entity: Entity, parent: Entity },

    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("cannot decode {path}: {reason}")]
    Decode { path: String, reason: String },
    #[error("invalid {kind} `{name}`: {reason}")]
    InvalidResource {
        kind: ResourceKind,
        name: String,
        reason: String,
    },
    #[error("{referrer} references {kind} `{name}`, which is not registered")]
    DanglingResource {
        kind: ResourceKind,
        name: String,
        referrer: String,
    },
    #[error("shader `{name}` failed to compile:\n{diagnostics}")]
    ShaderCompile { name: String, diagnostics: String },

    #[error("render target size {width}x{height} is empty")]
    EmptyTarget { width: u32, height: u32 },
    #[error("scene has no primary camera")]
    NoCamera,
    #[error("image filter input must be RGBA8 ({0} channels given)")]
    UnsupportedFormat(usize),

    #[error("unsupported scene document version `{0}`")]
    UnsupportedVersion(String),
    #[error("unknown component type `{0}`")]
    UnknownComponent(String),
    #[error("component `{component}` has no field `{field}`")]
    UnknownField { component: String, field: String },
    #[error("invalid value for {component}.{field}: {reason}")]
    InvalidValue {
        component: String,
        field: String,
        reason: String,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("benchmark scene index must be 1 to 5, got {0}")]
    BenchSceneIndex(usize),
    #[error("{0}")]
    Bench(String),
    #[error("no example named `{0}`")]
    UnknownExample(String),

    #[error(transparent)]
    Gpu(#[from] ecsgfx_gpu::GpuError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
