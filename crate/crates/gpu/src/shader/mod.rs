//! WGSL compilation, reflection and execution.

pub(crate) mod interp;
mod math;
pub(crate) mod texture;
pub(crate) mod value;

use std::collections::BTreeMap;
use std::sync::Arc;

use naga::valid::{Capabilities, ModuleInfo, ValidationFlags, Validator};
use naga::{
    AddressSpace, ArraySize, Binding, BuiltIn, Expression, Handle, ImageClass, ImageDimension,
    Interpolation, Module, ScalarKind, ShaderStage as NagaStage, StorageFormat, TypeInner,
};

use crate::binding::{BindingType, StorageTextureAccess, TextureSampleType};
use crate::error::{GpuError, Result};
use crate::types::{ShaderStages, TextureFormat, TextureViewDimension};
use value::{TypeTable, Val};

/// A compiled WGSL module.
#[derive(Clone)]
pub struct ShaderModule {
    pub(crate) inner: Arc<CompiledModule>,
}

impl std::fmt::Debug for ShaderModule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShaderModule")
            .field("label", &self.inner.label)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShaderStage {
    Vertex,
    Fragment,
    Compute,
}

impl ShaderStage {
    pub fn as_stages(self) -> ShaderStages {
        match self {
            ShaderStage::Vertex => ShaderStages::VERTEX,
            ShaderStage::Fragment => ShaderStages::FRAGMENT,
            ShaderStage::Compute => ShaderStages::COMPUTE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryPointInfo {
    pub name: String,
    pub stage: ShaderStage,
    pub workgroup_size: [u32; 3],
}

/// A resource binding statically used by an entry point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReflectedBinding {
    pub group: u32,
    pub binding: u32,
    pub name: Option<String>,
    pub ty: BindingType,
}

pub(crate) struct FunctionPlan {
    /// Expressions not covered by any `Emit`, evaluated on function entry.
    pub pre_emit: Vec<Handle<Expression>>,
}

pub(crate) struct CompiledModule {
    pub label: String,
    pub module: Module,
    pub info: ModuleInfo,
    pub types: TypeTable,
    pub constants: Vec<Val>,
    pub overrides: Vec<Option<Val>>,
    pub functions: Vec<FunctionPlan>,
    pub entries: Vec<FunctionPlan>,
    /// Memory cell of each private global, indexed by global handle.
    pub private_cells: Vec<Option<usize>>,
    /// Initial values of private globals, in cell order.
    pub private_inits: Vec<Val>,
}

impl ShaderModule {
    pub(crate) fn compile(label: &str, source: &str) -> Result<ShaderModule> {
        let module = naga::front::wgsl::parse_str(source).map_err(|e| GpuError::ShaderCompilation {
            label: label.to_owned(),
            diagnostics: e.emit_to_string(source),
        })?;
        let info = Validator::new(ValidationFlags::all(), Capabilities::default())
            .validate(&module)
            .map_err(|e| GpuError::ShaderCompilation {
                label: label.to_owned(),
                diagnostics: e.emit_to_string(source),
            })?;
        let types = TypeTable::new(&module.types);

        let mut constants = Vec::with_capacity(module.constants.len());
        for (_, c) in module.constants.iter() {
            constants.push(Val::uniform(const_words(&module, c.init)?));
        }
        let overrides = module
            .overrides
            .iter()
            .map(|(_, o)| o.init.map(|e| const_words(&module, e).map(Val::uniform)).transpose())
            .collect::<Result<Vec<_>>>()?;

        let mut private_cells = vec![None; module.global_variables.len()];
        let mut private_inits = Vec::new();
        for (h, g) in module.global_variables.iter() {
            if g.space == AddressSpace::Private {
                private_cells[h.index()] = Some(private_inits.len());
                let init = match g.init {
                    Some(e) => Val::uniform(const_words(&module, e)?),
                    None => Val::zeroed(types.slots(g.ty), 1),
                };
                private_inits.push(init);
            }
        }

        let functions = module.functions.iter().map(|(_, f)| plan(f)).collect();
        let entries = module.entry_points.iter().map(|e| plan(&e.function)).collect();
        Ok(ShaderModule {
            inner: Arc::new(CompiledModule {
                label: label.to_owned(),
                module,
                info,
                types,
                constants,
                overrides,
                functions,
                entries,
                private_cells,
                private_inits,
            }),
        })
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn entry_points(&self) -> Vec<EntryPointInfo> {
        self.inner
            .module
            .entry_points
            .iter()
            .filter_map(|e| {
                Some(EntryPointInfo {
                    name: e.name.clone(),
                    stage: map_stage(e.stage)?,
                    workgroup_size: e.workgroup_size,
                })
            })
            .collect()
    }

    /// Resource bindings used by `entry_point`, sorted by group then binding.
    pub fn bindings(&self, entry_point: &str) -> Result<Vec<ReflectedBinding>> {
        let index = self.inner.entry_index(entry_point, None)?;
        self.inner.used_bindings(index)
    }
}

fn map_stage(stage: NagaStage) -> Option<ShaderStage> {
    match stage {
        NagaStage::Vertex => Some(ShaderStage::Vertex),
        NagaStage::Fragment => Some(ShaderStage::Fragment),
        NagaStage::Compute => Some(ShaderStage::Compute),
        _ => None,
    }
}

/// Marks `h` and the expressions it is built from. Covers the forms that can
/// appear in constant expressions.
fn mark_const_deps(fun: &naga::Function, h: Handle<Expression>, out: &mut [bool]) {
    if out[h.index()] {
        return;
    }
    out[h.index()] = true;
    let mut visit = |d: Handle<Expression>| mark_const_deps(fun, d, out);
    match fun.expressions[h] {
        Expression::Compose { ref components, .. } => components.iter().for_each(|&c| visit(c)),
        Expression::Splat { value, .. } => visit(value),
        Expression::Unary { expr, .. } | Expression::As { expr, .. } => visit(expr),
        Expression::Binary { left, right, .. } => {
            visit(left);
            visit(right);
        }
        Expression::Access { base, index } => {
            visit(base);
            visit(index);
        }
        Expression::AccessIndex { base, .. } => visit(base),
        Expression::Swizzle { vector, .. } => visit(vector),
        Expression::Select {
            condition,
            accept,
            reject,
        } => {
            visit(condition);
            visit(accept);
            visit(reject);
        }
        Expression::Math {
            arg, arg1, arg2, arg3, ..
        } => {
            visit(arg);
            for a in [arg1, arg2, arg3].into_iter().flatten() {
                visit(a);
            }
        }
        _ => {}
    }
}

fn plan(fun: &naga::Function) -> FunctionPlan {
    let mut emitted = vec![false; fun.expressions.len()];
    mark_emitted(&fun.body, &mut emitted);
    // Local initializers are constant and must be ready before the body runs.
    let mut init = vec![false; fun.expressions.len()];
    for (_, local) in fun.local_variables.iter() {
        if let Some(e) = local.init {
            mark_const_deps(fun, e, &mut init);
        }
    }
    let pre_emit = fun
        .expressions
        .iter()
        .filter(|(h, e)| {
            (!emitted[h.index()] || init[h.index()])
                && !matches!(
                    e,
                    Expression::CallResult(_)
                        | Expression::AtomicResult { .. }
                        | Expression::WorkGroupUniformLoadResult { .. }
                        | Expression::RayQueryProceedResult
                        | Expression::SubgroupBallotResult
                        | Expression::SubgroupOperationResult { .. }
                )
        })
        .map(|(h, _)| h)
        .collect();
    FunctionPlan { pre_emit }
}

fn mark_emitted(block: &naga::Block, emitted: &mut [bool]) {
    use naga::Statement as S;
    for stmt in block.iter() {
        match stmt {
            S::Emit(range) => {
                for h in range.clone() {
                    emitted[h.index()] = true;
                }
            }
            S::Block(b) => mark_emitted(b, emitted),
            S::If { accept, reject, .. } => {
                mark_emitted(accept, emitted);
                mark_emitted(reject, emitted);
            }
            S::Switch { cases, .. } => {
                for c in cases {
                    mark_emitted(&c.body, emitted);
                }
            }
            S::Loop {
                body, continuing, ..
            } => {
                mark_emitted(body, emitted);
                mark_emitted(continuing, emitted);
            }
            _ => {}
        }
    }
}

/// Evaluates a constant expression from the module's global expression arena.
fn const_words(module: &Module, h: Handle<Expression>) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    const_into(module, h, &mut out)?;
    Ok(out)
}

fn const_into(module: &Module, h: Handle<Expression>, out: &mut Vec<u32>) -> Result<()> {
    match module.global_expressions[h] {
        Expression::Literal(lit) => out.push(literal_word(lit)?),
        Expression::Constant(c) => const_into(module, module.constants[c].init, out)?,
        Expression::ZeroValue(ty) => {
            out.extend(std::iter::repeat_n(
                0,
                value::slot_count(&module.types, &module.types[ty].inner),
            ));
        }
        Expression::Compose { ref components, .. } => {
            for &c in components {
                const_into(module, c, out)?;
            }
        }
        Expression::Splat { size, value } => {
            let mut one = Vec::new();
            const_into(module, value, &mut one)?;
            for _ in 0..size as usize {
                out.extend_from_slice(&one);
            }
        }
        ref other => {
            return Err(GpuError::Unsupported(format!(
                "constant expression {other:?}"
            )))
        }
    }
    Ok(())
}

pub(crate) fn literal_word(lit: naga::Literal) -> Result<u32> {
    use naga::Literal as L;
    Ok(match lit {
        L::F32(v) => v.to_bits(),
        L::I32(v) => v as u32,
        L::U32(v) => v,
        L::Bool(b) => b as u32,
        L::AbstractInt(v) => v as i32 as u32,
        L::AbstractFloat(v) => (v as f32).to_bits(),
        other => return Err(GpuError::Unsupported(format!("literal {other:?}"))),
    })
}

/// How one stage input or output maps onto a flattened value.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct IoSlot {
    pub binding: IoBinding,
    /// Argument index for inputs; unused for outputs.
    pub arg: usize,
    /// Slot offset within the argument or result value.
    pub slot: usize,
    pub slots: usize,
    pub kind: ScalarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum IoBinding {
    Location { location: u32, flat: bool },
    Position,
    VertexIndex,
    InstanceIndex,
    FrontFacing,
    FragDepth,
    GlobalInvocationId,
    LocalInvocationId,
    LocalInvocationIndex,
    WorkGroupId,
    NumWorkGroups,
}

impl CompiledModule {
    pub(crate) fn entry_index(&self, name: &str, stage: Option<ShaderStage>) -> Result<usize> {
        self.module
            .entry_points
            .iter()
            .position(|e| e.name == name && stage.is_none_or(|s| map_stage(e.stage) == Some(s)))
            .ok_or_else(|| {
                GpuError::validation(
                    "entry point",
                    format!(
                        "module `{}` has no {}entry point `{name}`",
                        self.label,
                        stage.map(|s| format!("{s:?} ").to_lowercase()).unwrap_or_default()
                    ),
                )
            })
    }

    pub(crate) fn used_bindings(&self, entry: usize) -> Result<Vec<ReflectedBinding>> {
        let info = self.info.get_entry_point(entry);
        let mut out = BTreeMap::new();
        for (h, g) in self.module.global_variables.iter() {
            if info[h].is_empty() {
                continue;
            }
            let Some(rb) = &g.binding else { continue };
            let ty = self.binding_type(g)?;
            out.insert(
                (rb.group, rb.binding),
                ReflectedBinding {
                    group: rb.group,
                    binding: rb.binding,
                    name: g.name.clone(),
                    ty,
                },
            );
        }
        Ok(out.into_values().collect())
    }

    fn binding_type(&self, g: &naga::GlobalVariable) -> Result<BindingType> {
        let inner = &self.module.types[g.ty].inner;
        let min_size = || match *inner {
            TypeInner::Array {
                size: ArraySize::Dynamic,
                ..
            } => 0,
            _ => inner.size(self.module.to_ctx()) as u64,
        };
        Ok(match g.space {
            AddressSpace::Uniform => BindingType::UniformBuffer {
                min_binding_size: min_size(),
            },
            AddressSpace::Storage { access } => BindingType::StorageBuffer {
                read_only: !access.contains(naga::StorageAccess::STORE),
                min_binding_size: min_size(),
            },
            AddressSpace::Handle => match *inner {
                TypeInner::Sampler { comparison } => BindingType::Sampler { comparison },
                TypeInner::Image {
                    dim,
                    arrayed,
                    class,
                } => {
                    let view_dimension = match (dim, arrayed) {
                        (ImageDimension::D2, false) => TextureViewDimension::D2,
                        (ImageDimension::D2, true) => TextureViewDimension::D2Array,
                        (ImageDimension::Cube, false) => TextureViewDimension::Cube,
                        _ => {
                            return Err(GpuError::Unsupported(format!(
                                "texture dimension {dim:?} (arrayed: {arrayed})"
                            )))
                        }
                    };
                    match class {
                        ImageClass::Sampled {
                            kind: ScalarKind::Float,
                            multi: false,
                        } => BindingType::Texture {
                            sample_type: TextureSampleType::Float,
                            view_dimension,
                        },
                        ImageClass::Depth { multi: false } => BindingType::Texture {
                            sample_type: TextureSampleType::Depth,
                            view_dimension,
                        },
                        ImageClass::Storage { format, access } => BindingType::StorageTexture {
                            format: map_storage_format(format)?,
                            access: if access.contains(naga::StorageAccess::LOAD) {
                                if access.contains(naga::StorageAccess::STORE) {
                                    StorageTextureAccess::ReadWrite
                                } else {
                                    StorageTextureAccess::ReadOnly
                                }
                            } else {
                                StorageTextureAccess::WriteOnly
                            },
                            view_dimension,
                        },
                        other => {
                            return Err(GpuError::Unsupported(format!("texture class {other:?}")))
                        }
                    }
                }
                _ => return Err(GpuError::Unsupported("handle type".into())),
            },
            other => return Err(GpuError::Unsupported(format!("address space {other:?}"))),
        })
    }

    /// Rejects features the interpreter cannot execute, for everything reachable from `entry`.
    pub(crate) fn check_supported(&self, entry: usize) -> Result<()> {
        let ep = &self.module.entry_points[entry];
        if map_stage(ep.stage).is_none() {
            return Err(GpuError::Unsupported(format!("{:?} stage", ep.stage)));
        }
        let info = self.info.get_entry_point(entry);
        for (h, g) in self.module.global_variables.iter() {
            if info[h].is_empty() {
                continue;
            }
            match g.space {
                AddressSpace::WorkGroup => {
                    return Err(GpuError::Unsupported("workgroup memory".into()))
                }
                AddressSpace::Immediate => {
                    return Err(GpuError::Unsupported("immediate data".into()))
                }
                _ => {}
            }
            if let AddressSpace::Uniform | AddressSpace::Storage { .. } | AddressSpace::Handle =
                g.space
            {
                self.binding_type(g)?;
            }
        }
        let mut seen = vec![false; self.module.functions.len()];
        self.check_function(&ep.function, &mut seen)
    }

    fn check_function(&self, fun: &naga::Function, seen: &mut [bool]) -> Result<()> {
        for (_, e) in fun.expressions.iter() {
            let bad = match e {
                Expression::Derivative { .. } => Some("derivatives"),
                Expression::ArrayLength(_) => Some("runtime-sized arrays"),
                Expression::AtomicResult { .. } => Some("atomics"),
                Expression::WorkGroupUniformLoadResult { .. } => Some("workgroupUniformLoad"),
                Expression::RayQueryVertexPositions { .. }
                | Expression::RayQueryProceedResult
                | Expression::RayQueryGetIntersection { .. } => Some("ray queries"),
                Expression::SubgroupBallotResult | Expression::SubgroupOperationResult { .. } => {
                    Some("subgroup operations")
                }
                Expression::CooperativeLoad { .. } | Expression::CooperativeMultiplyAdd { .. } => {
                    Some("cooperative matrices")
                }
                Expression::ImageSample {
                    gather: Some(_), ..
                } => Some("texture gathers"),
                Expression::Math { fun, .. } if !math::is_supported(*fun) => {
                    return Err(GpuError::Unsupported(format!("math function {fun:?}")))
                }
                Expression::Literal(lit) => {
                    literal_word(*lit)?;
                    None
                }
                _ => None,
            };
            if let Some(what) = bad {
                return Err(GpuError::Unsupported(what.into()));
            }
        }
        self.check_block(&fun.body, seen)
    }

    fn check_block(&self, block: &naga::Block, seen: &mut [bool]) -> Result<()> {
        use naga::Statement as S;
        for stmt in block.iter() {
            match stmt {
                S::Block(b) => self.check_block(b, seen)?,
                S::If { accept, reject, .. } => {
                    self.check_block(accept, seen)?;
                    self.check_block(reject, seen)?;
                }
                S::Switch { cases, .. } => {
                    for c in cases {
                        self.check_block(&c.body, seen)?;
                    }
                }
                S::Loop {
                    body, continuing, ..
                } => {
                    self.check_block(body, seen)?;
                    self.check_block(continuing, seen)?;
                }
                S::Call { function, .. } => {
                    if !seen[function.index()] {
                        seen[function.index()] = true;
                        self.check_function(&self.module.functions[*function], seen)?;
                    }
                }
                S::ControlBarrier(_) | S::MemoryBarrier(_) => {
                    return Err(GpuError::Unsupported("barriers".into()))
                }
                S::Atomic { .. } | S::ImageAtomic { .. } => {
                    return Err(GpuError::Unsupported("atomics".into()))
                }
                S::Emit(_)
                | S::Break
                | S::Continue
                | S::Return { .. }
                | S::Kill
                | S::Store { .. }
                | S::ImageStore { .. } => {}
                other => return Err(GpuError::Unsupported(format!("statement {other:?}"))),
            }
        }
        Ok(())
    }

    pub(crate) fn has_kill(&self, entry: usize) -> bool {
        fn block_kills(m: &CompiledModule, b: &naga::Block) -> bool {
            use naga::Statement as S;
            b.iter().any(|s| match s {
                S::Kill => true,
                S::Block(b) => block_kills(m, b),
                S::If { accept, reject, .. } => block_kills(m, accept) || block_kills(m, reject),
                S::Switch { cases, .. } => cases.iter().any(|c| block_kills(m, &c.body)),
                S::Loop {
                    body, continuing, ..
                } => block_kills(m, body) || block_kills(m, continuing),
                S::Call { function, .. } => block_kills(m, &m.module.functions[*function].body),
                _ => false,
            })
        }
        block_kills(self, &self.module.entry_points[entry].function.body)
    }

    /// Flattened layout of the entry point's bound inputs.
    pub(crate) fn inputs(&self, entry: usize) -> Result<Vec<IoSlot>> {
        let fun = &self.module.entry_points[entry].function;
        let mut out = Vec::new();
        for (i, arg) in fun.arguments.iter().enumerate() {
            self.collect_io(arg.ty, arg.binding.as_ref(), i, 0, &mut out)?;
        }
        Ok(out)
    }

    /// Flattened layout of the entry point's bound outputs.
    pub(crate) fn outputs(&self, entry: usize) -> Result<Vec<IoSlot>> {
        let fun = &self.module.entry_points[entry].function;
        let mut out = Vec::new();
        if let Some(res) = &fun.result {
            self.collect_io(res.ty, res.binding.as_ref(), 0, 0, &mut out)?;
        }
        Ok(out)
    }

    fn collect_io(
        &self,
        ty: Handle<naga::Type>,
        binding: Option<&Binding>,
        arg: usize,
        slot: usize,
        out: &mut Vec<IoSlot>,
    ) -> Result<()> {
        let inner = &self.module.types[ty].inner;
        match binding {
            Some(b) => {
                let binding = match *b {
                    Binding::Location {
                        location,
                        interpolation,
                        ..
                    } => IoBinding::Location {
                        location,
                        flat: interpolation == Some(Interpolation::Flat)
                            || value::kind_of(inner) != ScalarKind::Float,
                    },
                    Binding::BuiltIn(bi) => match bi {
                        BuiltIn::Position { .. } => IoBinding::Position,
                        BuiltIn::VertexIndex => IoBinding::VertexIndex,
                        BuiltIn::InstanceIndex => IoBinding::InstanceIndex,
                        BuiltIn::FrontFacing => IoBinding::FrontFacing,
                        BuiltIn::FragDepth => IoBinding::FragDepth,
                        BuiltIn::GlobalInvocationId => IoBinding::GlobalInvocationId,
                        BuiltIn::LocalInvocationId => IoBinding::LocalInvocationId,
                        BuiltIn::LocalInvocationIndex => IoBinding::LocalInvocationIndex,
                        BuiltIn::WorkGroupId => IoBinding::WorkGroupId,
                        BuiltIn::NumWorkGroups => IoBinding::NumWorkGroups,
                        other => {
                            return Err(GpuError::Unsupported(format!("builtin {other:?}")))
                        }
                    },
                };
                out.push(IoSlot {
                    binding,
                    arg,
                    slot,
                    slots: self.types.slots(ty),
                    kind: value::kind_of(inner),
                });
            }
            None => {
                if let TypeInner::Struct { members, .. } = inner {
                    for (i, m) in members.iter().enumerate() {
                        let at = slot + self.types.member_offset(ty, i);
                        self.collect_io(m.ty, m.binding.as_ref(), arg, at, out)?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn map_storage_format(format: StorageFormat) -> Result<TextureFormat> {
    match format {
        StorageFormat::Rgba8Unorm => Ok(TextureFormat::Rgba8Unorm),
        StorageFormat::R32Float => Ok(TextureFormat::R32Float),
        StorageFormat::Rgba32Float => Ok(TextureFormat::Rgba32Float),
        other => Err(GpuError::Unsupported(format!("storage format {other:?}"))),
    }
}
