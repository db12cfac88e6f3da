//! Lane-parallel interpreter over naga IR.
//!
//! A [`Machine`] runs one entry point for a batch of invocations at once. Each
//! expression is evaluated for every lane; control flow narrows an active-lane
//! mask, which gates side effects (stores, returns, discards).

use std::sync::Arc;

use naga::valid::FunctionInfo;
use naga::{
    AddressSpace, ArraySize, BinaryOperator as B, Expression as E, Handle,
    RelationalFunction, SampleLevel, ScalarKind, Statement as S, SwitchValue, Type, TypeInner,
    UnaryOperator,
};

use super::math;
use super::texture;
use super::value::{decode, encode, kind_of, slot_count, Val};
use super::{literal_word, CompiledModule, FunctionPlan};
use crate::error::{GpuError, Result};
use crate::resource::TexelStore;
use crate::types::{SamplerDescriptor, TextureViewDimension};

/// Loop iterations allowed per batch before execution is aborted.
const LOOP_BUDGET: u64 = 1 << 22;

/// A resource bound to a global variable for one execution.
#[derive(Clone, Debug)]
pub(crate) enum Bound {
    Buffer {
        data: Arc<Vec<u8>>,
        offset: usize,
        size: usize,
    },
    /// Writable buffer; `slot` indexes [`Env::rw_buffers`].
    RwBuffer {
        slot: usize,
        offset: usize,
        size: usize,
    },
    Texture {
        store: Arc<TexelStore>,
        dim: TextureViewDimension,
    },
    /// Writable texture; `slot` indexes [`Env::rw_textures`].
    StorageTexture {
        slot: usize,
        dim: TextureViewDimension,
    },
    Sampler(SamplerDescriptor),
}

/// Resources visible to a shader execution, indexed by global variable.
#[derive(Default)]
pub(crate) struct Env {
    pub globals: Vec<Option<Bound>>,
    pub rw_buffers: Vec<Vec<u8>>,
    pub rw_textures: Vec<TexelStore>,
}

impl Env {
    fn bound(&self, g: usize) -> Result<&Bound> {
        self.globals
            .get(g)
            .and_then(|b| b.as_ref())
            .ok_or_else(|| GpuError::Execution(format!("global #{g} has no bound resource")))
    }

    fn buffer_bytes(&self, g: usize) -> Result<&[u8]> {
        Ok(match self.bound(g)? {
            Bound::Buffer { data, offset, size } => slice_window(data, *offset, *size),
            Bound::RwBuffer { slot, offset, size } => {
                slice_window(&self.rw_buffers[*slot], *offset, *size)
            }
            _ => return Err(GpuError::Execution(format!("global #{g} is not a buffer"))),
        })
    }

    fn texture(&self, g: usize) -> Result<(&TexelStore, TextureViewDimension)> {
        Ok(match self.bound(g)? {
            Bound::Texture { store, dim } => (store.as_ref(), *dim),
            Bound::StorageTexture { slot, dim } => (&self.rw_textures[*slot], *dim),
            _ => return Err(GpuError::Execution(format!("global #{g} is not a texture"))),
        })
    }
}

fn slice_window(data: &[u8], offset: usize, size: usize) -> &[u8] {
    let start = offset.min(data.len());
    let end = offset.saturating_add(size).min(data.len());
    &data[start..end]
}

#[derive(Clone, Debug)]
enum Off {
    Uniform(usize),
    Lanes(Vec<usize>),
}

impl Off {
    #[inline]
    fn at(&self, lane: usize) -> usize {
        match self {
            Off::Uniform(o) => *o,
            Off::Lanes(v) => v[lane],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Root {
    /// Index into the machine's memory cells. Offsets count slots.
    Mem(usize),
    /// Buffer bound to a global. Offsets count bytes.
    Buffer(usize),
}

#[derive(Clone, Debug)]
struct Ptr {
    root: Root,
    off: Off,
}

#[derive(Clone, Debug, Default)]
enum Reg {
    #[default]
    Empty,
    Val(Val),
    Ptr(Ptr),
    Global(Handle<naga::GlobalVariable>),
}

enum Flow {
    Loop { broken: Vec<bool>, continued: Vec<bool> },
    Switch { broken: Vec<bool> },
}

struct Frame<'m> {
    fun: &'m naga::Function,
    info: &'m FunctionInfo,
    regs: Vec<Reg>,
    args: Vec<Reg>,
    local_base: usize,
    active: Vec<bool>,
    ret: Option<Val>,
    flow: Vec<Flow>,
}

impl Frame<'_> {
    fn val(&self, h: Handle<E>) -> Result<&Val> {
        match &self.regs[h.index()] {
            Reg::Val(v) => Ok(v),
            other => Err(GpuError::Execution(format!(
                "expression {h:?} is not a value ({other:?})"
            ))),
        }
    }

    fn ptr(&self, h: Handle<E>) -> Result<&Ptr> {
        match &self.regs[h.index()] {
            Reg::Ptr(p) => Ok(p),
            other => Err(GpuError::Execution(format!(
                "expression {h:?} is not a pointer ({other:?})"
            ))),
        }
    }

    fn global(&self, h: Handle<E>) -> Result<Handle<naga::GlobalVariable>> {
        match &self.regs[h.index()] {
            Reg::Global(g) => Ok(*g),
            other => Err(GpuError::Execution(format!(
                "expression {h:?} is not a resource ({other:?})"
            ))),
        }
    }
}

#[inline]
fn any(mask: &[bool]) -> bool {
    mask.iter().any(|&m| m)
}

pub(crate) struct Machine<'m, 'e> {
    m: &'m CompiledModule,
    env: &'e mut Env,
    n: usize,
    mem: Vec<Val>,
    /// Lanes that executed a discard.
    pub killed: Vec<bool>,
    budget: u64,
}

impl<'m, 'e> Machine<'m, 'e> {
    pub fn new(m: &'m CompiledModule, env: &'e mut Env, lanes: usize) -> Self {
        let mem = m.private_inits.iter().map(|v| v.widen(lanes)).collect();
        Machine {
            m,
            env,
            n: lanes,
            mem,
            killed: vec![false; lanes],
            budget: LOOP_BUDGET,
        }
    }

    /// Runs entry point `entry` with one value per argument.
    pub fn run_entry(&mut self, entry: usize, args: Vec<Val>) -> Result<Option<Val>> {
        let m = self.m;
        let ep = &m.module.entry_points[entry];
        let info = m.info.get_entry_point(entry);
        let args = args.into_iter().map(Reg::Val).collect();
        self.call(&ep.function, info, &m.entries[entry], args, vec![true; self.n])
    }

    fn types(&self) -> &'m naga::UniqueArena<Type> {
        &self.m.module.types
    }

    fn call(
        &mut self,
        fun: &'m naga::Function,
        info: &'m FunctionInfo,
        plan: &'m FunctionPlan,
        args: Vec<Reg>,
        active: Vec<bool>,
    ) -> Result<Option<Val>> {
        let local_base = self.mem.len();
        let mut f = Frame {
            fun,
            info,
            regs: vec![Reg::Empty; fun.expressions.len()],
            args,
            local_base,
            active,
            ret: None,
            flow: Vec::new(),
        };
        for &h in &plan.pre_emit {
            self.eval(&mut f, h)?;
        }
        for (_, local) in fun.local_variables.iter() {
            let v = match local.init {
                Some(e) => f.val(e)?.widen(self.n),
                None => Val::zeroed(self.m.types.slots(local.ty), self.n),
            };
            self.mem.push(v);
        }
        let result = self.block(&mut f, &fun.body);
        self.mem.truncate(local_base);
        result?;
        Ok(f.ret)
    }

    fn block(&mut self, f: &mut Frame<'m>, block: &'m naga::Block) -> Result<()> {
        for stmt in block.iter() {
            if !any(&f.active) {
                break;
            }
            self.stmt(f, stmt)?;
        }
        Ok(())
    }

    fn stmt(&mut self, f: &mut Frame<'m>, stmt: &'m S) -> Result<()> {
        let n = self.n;
        match stmt {
            S::Emit(range) => {
                for h in range.clone() {
                    self.eval(f, h)?;
                }
            }
            S::Block(b) => self.block(f, b)?,
            S::If {
                condition,
                accept,
                reject,
            } => {
                let c = f.val(*condition)?.clone();
                if c.lanes == 1 {
                    if c.data[0] != 0 {
                        self.block(f, accept)?;
                    } else {
                        self.block(f, reject)?;
                    }
                } else {
                    let saved = std::mem::take(&mut f.active);
                    let take: Vec<bool> = (0..n).map(|l| saved[l] && c.data[l] != 0).collect();
                    let other: Vec<bool> = (0..n).map(|l| saved[l] && c.data[l] == 0).collect();
                    f.active = take;
                    if any(&f.active) {
                        self.block(f, accept)?;
                    }
                    let after_accept = std::mem::replace(&mut f.active, other);
                    if any(&f.active) {
                        self.block(f, reject)?;
                    }
                    for (a, b) in f.active.iter_mut().zip(after_accept) {
                        *a |= b;
                    }
                }
            }
            S::Switch { selector, cases } => {
                let sel = f.val(*selector)?.clone();
                let explicit: Vec<u32> = cases
                    .iter()
                    .filter_map(|c| match c.value {
                        SwitchValue::I32(v) => Some(v as u32),
                        SwitchValue::U32(v) => Some(v),
                        SwitchValue::Default => None,
                    })
                    .collect();
                let saved = f.active.clone();
                f.flow.push(Flow::Switch {
                    broken: vec![false; n],
                });
                let mut exit = vec![false; n];
                let mut fall = vec![false; n];
                for case in cases {
                    let mask: Vec<bool> = (0..n)
                        .map(|l| {
                            let s = sel.get(0, l);
                            let hit = match case.value {
                                SwitchValue::I32(v) => s == v as u32,
                                SwitchValue::U32(v) => s == v,
                                SwitchValue::Default => !explicit.contains(&s),
                            };
                            fall[l] || (saved[l] && hit)
                        })
                        .collect();
                    f.active = mask;
                    if any(&f.active) {
                        self.block(f, &case.body)?;
                    }
                    if case.fall_through {
                        fall = f.active.clone();
                    } else {
                        for (e, a) in exit.iter_mut().zip(&f.active) {
                            *e |= *a;
                        }
                        fall.fill(false);
                    }
                }
                let Some(Flow::Switch { broken }) = f.flow.pop() else {
                    return Err(GpuError::Execution("unbalanced switch".into()));
                };
                f.active = (0..n).map(|l| exit[l] || broken[l]).collect();
            }
            S::Loop {
                body,
                continuing,
                break_if,
            } => {
                f.flow.push(Flow::Loop {
                    broken: vec![false; n],
                    continued: vec![false; n],
                });
                loop {
                    if self.budget == 0 {
                        return Err(GpuError::Execution(
                            "loop iteration budget exhausted".into(),
                        ));
                    }
                    self.budget -= 1;
                    self.block(f, body)?;
                    if let Some(Flow::Loop { continued, .. }) = f.flow.last_mut() {
                        for (a, c) in f.active.iter_mut().zip(continued.iter_mut()) {
                            *a |= *c;
                            *c = false;
                        }
                    }
                    if any(&f.active) {
                        self.block(f, continuing)?;
                    }
                    if let Some(cond) = break_if {
                        let c = f.val(*cond)?.clone();
                        if let Some(Flow::Loop { broken, .. }) = f.flow.last_mut() {
                            for l in 0..n {
                                if f.active[l] && c.get(0, l) != 0 {
                                    broken[l] = true;
                                    f.active[l] = false;
                                }
                            }
                        }
                    }
                    if !any(&f.active) {
                        break;
                    }
                }
                let Some(Flow::Loop { broken, .. }) = f.flow.pop() else {
                    return Err(GpuError::Execution("unbalanced loop".into()));
                };
                f.active = broken;
            }
            S::Break => {
                let active = std::mem::replace(&mut f.active, vec![false; n]);
                match f.flow.last_mut() {
                    Some(Flow::Loop { broken, .. }) | Some(Flow::Switch { broken }) => {
                        for (b, a) in broken.iter_mut().zip(active) {
                            *b |= a;
                        }
                    }
                    None => return Err(GpuError::Execution("break outside loop".into())),
                }
            }
            S::Continue => {
                let active = std::mem::replace(&mut f.active, vec![false; n]);
                let target = f.flow.iter_mut().rev().find_map(|fl| match fl {
                    Flow::Loop { continued, .. } => Some(continued),
                    _ => None,
                });
                match target {
                    Some(continued) => {
                        for (c, a) in continued.iter_mut().zip(active) {
                            *c |= a;
                        }
                    }
                    None => return Err(GpuError::Execution("continue outside loop".into())),
                }
            }
            S::Return { value } => {
                if let Some(h) = value {
                    let v = f.val(*h)?.clone();
                    let ret = f.ret.get_or_insert_with(|| Val::zeroed(v.slots, n));
                    for s in 0..v.slots {
                        for l in 0..n {
                            if f.active[l] {
                                ret.data[s * n + l] = v.get(s, l);
                            }
                        }
                    }
                }
                f.active.fill(false);
            }
            S::Kill => {
                for (k, a) in self.killed.iter_mut().zip(&f.active) {
                    *k |= *a;
                }
                f.active.fill(false);
            }
            S::Store { pointer, value } => {
                let ptr = f.ptr(*pointer)?.clone();
                let ty = f.info[*value].ty.inner_with(self.types());
                let v = f.val(*value)?.clone();
                self.store(&ptr, ty, &v, &f.active)?;
            }
            S::ImageStore {
                image,
                coordinate,
                array_index,
                value,
            } => {
                let g = f.global(*image)?;
                let slot = match self.env.bound(g.index())? {
                    Bound::StorageTexture { slot, .. } => *slot,
                    _ => return Err(GpuError::Execution("store to a non-storage texture".into())),
                };
                let coord = f.val(*coordinate)?;
                let layer = array_index.map(|a| f.val(a)).transpose()?;
                let v = f.val(*value)?;
                let store = &mut self.env.rw_textures[slot];
                for l in 0..n {
                    if !f.active[l] {
                        continue;
                    }
                    let (x, y) = (coord.i(0, l), coord.i(1, l));
                    let z = layer.map(|a| a.i(0, l)).unwrap_or(0);
                    if x < 0
                        || y < 0
                        || z < 0
                        || x as u32 >= store.width
                        || y as u32 >= store.height
                        || z as u32 >= store.layers
                    {
                        continue;
                    }
                    let texel = [v.f(0, l), v.f(1, l), v.f(2, l), v.f(3, l)];
                    store.write(x as u32, y as u32, z as u32, texel);
                }
            }
            S::Call {
                function,
                arguments,
                result,
            } => {
                let args = arguments
                    .iter()
                    .map(|a| f.regs[a.index()].clone())
                    .collect();
                let m = self.m;
                let ret = self.call(
                    &m.module.functions[*function],
                    &m.info[*function],
                    &m.functions[function.index()],
                    args,
                    f.active.clone(),
                )?;
                if let Some(r) = result {
                    let v = ret.ok_or_else(|| {
                        GpuError::Execution("function returned without a value".into())
                    })?;
                    f.regs[r.index()] = Reg::Val(v);
                }
            }
            other => {
                return Err(GpuError::Unsupported(format!("statement {other:?}")));
            }
        }
        Ok(())
    }

    fn load(&self, ptr: &Ptr, ty: &TypeInner) -> Result<Val> {
        let n = self.n;
        let slots = slot_count(self.types(), ty);
        match ptr.root {
            Root::Mem(cell) => {
                let src = &self.mem[cell];
                match &ptr.off {
                    Off::Uniform(o) => Ok(Val {
                        lanes: n,
                        slots,
                        data: src.data[o * n..(o + slots) * n].to_vec(),
                    }),
                    Off::Lanes(offs) => {
                        let mut out = Val::zeroed(slots, n);
                        for s in 0..slots {
                            for (l, &o) in offs.iter().enumerate() {
                                out.data[s * n + l] = src.data[(o + s) * n + l];
                            }
                        }
                        Ok(out)
                    }
                }
            }
            Root::Buffer(g) => {
                let bytes = self.env.buffer_bytes(g)?;
                match &ptr.off {
                    Off::Uniform(o) => {
                        let mut words = Vec::with_capacity(slots);
                        decode(self.types(), ty, bytes, *o, &mut |w| words.push(w));
                        Ok(Val::uniform(words))
                    }
                    Off::Lanes(offs) => {
                        let mut out = Val::zeroed(slots, n);
                        for (l, &o) in offs.iter().enumerate() {
                            let mut s = 0;
                            decode(self.types(), ty, bytes, o, &mut |w| {
                                out.data[s * n + l] = w;
                                s += 1;
                            });
                        }
                        Ok(out)
                    }
                }
            }
        }
    }

    fn store(&mut self, ptr: &Ptr, ty: &TypeInner, v: &Val, active: &[bool]) -> Result<()> {
        let n = self.n;
        match ptr.root {
            Root::Mem(cell) => {
                let dst = &mut self.mem[cell];
                let all = active.iter().all(|&a| a);
                for s in 0..v.slots {
                    for l in 0..n {
                        if all || active[l] {
                            let o = ptr.off.at(l);
                            dst.data[(o + s) * n + l] = v.get(s, l);
                        }
                    }
                }
                Ok(())
            }
            Root::Buffer(g) => {
                let (slot, offset, size) = match self.env.bound(g)? {
                    Bound::RwBuffer { slot, offset, size } => (*slot, *offset, *size),
                    _ => {
                        return Err(GpuError::Execution(
                            "store to a read-only buffer".into(),
                        ))
                    }
                };
                let types = self.types();
                let data = &mut self.env.rw_buffers[slot];
                let end = offset.saturating_add(size).min(data.len());
                let window = &mut data[offset.min(end)..end];
                for l in 0..n {
                    if !active[l] {
                        continue;
                    }
                    let mut s = 0;
                    encode(types, ty, window, ptr.off.at(l), &mut || {
                        let w = v.get(s, l);
                        s += 1;
                        w
                    });
                }
                Ok(())
            }
        }
    }

    fn eval(&mut self, f: &mut Frame<'m>, h: Handle<E>) -> Result<()> {
        let r = self.compute(f, h)?;
        f.regs[h.index()] = r;
        Ok(())
    }

    fn ty_of(&self, f: &Frame<'m>, h: Handle<E>) -> &'m TypeInner {
        f.info[h].ty.inner_with(&self.m.module.types)
    }

    fn compute(&mut self, f: &Frame<'m>, h: Handle<E>) -> Result<Reg> {
        let m = self.m;
        let types = &m.module.types;
        let _ = self.n;
        let expr = &f.fun.expressions[h];
        Ok(match *expr {
            E::Literal(lit) => Reg::Val(Val::uniform(vec![literal_word(lit)?])),
            E::Constant(c) => Reg::Val(m.constants[c.index()].clone()),
            E::Override(o) => Reg::Val(m.overrides[o.index()].clone().ok_or_else(|| {
                GpuError::Unsupported("pipeline-overridable constant without a default".into())
            })?),
            E::ZeroValue(ty) => Reg::Val(Val::zeroed(m.types.slots(ty), 1)),
            E::Compose { ref components, .. } => {
                let vals = components
                    .iter()
                    .map(|&c| f.val(c))
                    .collect::<Result<Vec<_>>>()?;
                Reg::Val(compose(&vals))
            }
            E::Splat { size, value } => {
                let v = f.val(value)?;
                let mut data = Vec::with_capacity(v.lanes * size as usize);
                for _ in 0..size as usize {
                    data.extend_from_slice(v.slot(0));
                }
                Reg::Val(Val {
                    lanes: v.lanes,
                    slots: size as usize,
                    data,
                })
            }
            E::Swizzle {
                size,
                vector,
                pattern,
            } => {
                let v = f.val(vector)?;
                let mut data = Vec::with_capacity(v.lanes * size as usize);
                for p in pattern.iter().take(size as usize) {
                    data.extend_from_slice(v.slot(*p as usize));
                }
                Reg::Val(Val {
                    lanes: v.lanes,
                    slots: size as usize,
                    data,
                })
            }
            E::FunctionArgument(i) => f.args[i as usize].clone(),
            E::GlobalVariable(g) => match m.module.global_variables[g].space {
                AddressSpace::Uniform | AddressSpace::Storage { .. } => Reg::Ptr(Ptr {
                    root: Root::Buffer(g.index()),
                    off: Off::Uniform(0),
                }),
                AddressSpace::Private => Reg::Ptr(Ptr {
                    root: Root::Mem(m.private_cells[g.index()].expect("private cell")),
                    off: Off::Uniform(0),
                }),
                AddressSpace::Handle => Reg::Global(g),
                other => return Err(GpuError::Unsupported(format!("address space {other:?}"))),
            },
            E::LocalVariable(l) => Reg::Ptr(Ptr {
                root: Root::Mem(f.local_base + l.index()),
                off: Off::Uniform(0),
            }),
            E::Load { pointer } => {
                let ty = self.ty_of(f, h);
                Reg::Val(self.load(f.ptr(pointer)?, ty)?)
            }
            E::Access { base, index } => {
                let idx = f.val(index)?;
                let signed = kind_of(self.ty_of(f, index)) == ScalarKind::Sint;
                let read = |l: usize| -> i64 {
                    let w = idx.get(0, l);
                    if signed {
                        w as i32 as i64
                    } else {
                        w as i64
                    }
                };
                self.access(f, h, base, Index::Dynamic(&read, idx.lanes))?
            }
            E::AccessIndex { base, index } => {
                self.access(f, h, base, Index::Const(index as usize))?
            }
            E::Unary { op, expr } => {
                let v = f.val(expr)?;
                let kind = kind_of(self.ty_of(f, expr));
                let data = match (op, kind) {
                    (UnaryOperator::Negate, ScalarKind::Float) => {
                        v.data.iter().map(|w| w ^ 0x8000_0000).collect()
                    }
                    (UnaryOperator::Negate, _) => {
                        v.data.iter().map(|w| (*w as i32).wrapping_neg() as u32).collect()
                    }
                    (UnaryOperator::LogicalNot, _) => v.data.iter().map(|w| (*w == 0) as u32).collect(),
                    (UnaryOperator::BitwiseNot, _) => v.data.iter().map(|w| !w).collect(),
                };
                Reg::Val(Val {
                    lanes: v.lanes,
                    slots: v.slots,
                    data,
                })
            }
            E::Binary { op, left, right } => {
                let lt = self.ty_of(f, left);
                let rt = self.ty_of(f, right);
                Reg::Val(binary(op, lt, rt, f.val(left)?, f.val(right)?)?)
            }
            E::Select {
                condition,
                accept,
                reject,
            } => {
                let c = f.val(condition)?;
                let a = f.val(accept)?;
                let r = f.val(reject)?;
                Reg::Val(select(c, a, r))
            }
            E::Relational { fun, argument } => {
                let v = f.val(argument)?;
                Reg::Val(match fun {
                    RelationalFunction::All | RelationalFunction::Any => {
                        let all = fun == RelationalFunction::All;
                        let data = (0..v.lanes)
                            .map(|l| {
                                let mut it = (0..v.slots).map(|s| v.get(s, l) != 0);
                                (if all { it.all(|b| b) } else { it.any(|b| b) }) as u32
                            })
                            .collect();
                        Val {
                            lanes: v.lanes,
                            slots: 1,
                            data,
                        }
                    }
                    RelationalFunction::IsNan => Val {
                        lanes: v.lanes,
                        slots: v.slots,
                        data: v.data.iter().map(|w| f32::from_bits(*w).is_nan() as u32).collect(),
                    },
                    RelationalFunction::IsInf => Val {
                        lanes: v.lanes,
                        slots: v.slots,
                        data: v
                            .data
                            .iter()
                            .map(|w| f32::from_bits(*w).is_infinite() as u32)
                            .collect(),
                    },
                })
            }
            E::Math {
                fun,
                arg,
                arg1,
                arg2,
                arg3,
            } => {
                let mut args = vec![f.val(arg)?];
                for a in [arg1, arg2, arg3].into_iter().flatten() {
                    args.push(f.val(a)?);
                }
                Reg::Val(math::eval(fun, self.ty_of(f, arg), &args)?)
            }
            E::As {
                expr,
                kind,
                convert,
            } => {
                let v = f.val(expr)?;
                let from = kind_of(self.ty_of(f, expr));
                if convert.is_none() || from == kind {
                    Reg::Val(v.clone())
                } else {
                    let conv: fn(u32) -> u32 = match (from, kind) {
                        (ScalarKind::Float, ScalarKind::Sint) => |w| f32::from_bits(w) as i32 as u32,
                        (ScalarKind::Float, ScalarKind::Uint) => |w| f32::from_bits(w) as u32,
                        (ScalarKind::Float, ScalarKind::Bool) => |w| (f32::from_bits(w) != 0.0) as u32,
                        (ScalarKind::Sint, ScalarKind::Float) => |w| (w as i32 as f32).to_bits(),
                        (ScalarKind::Uint, ScalarKind::Float) => |w| (w as f32).to_bits(),
                        (ScalarKind::Bool, ScalarKind::Float) => {
                            |w| if w != 0 { 1f32.to_bits() } else { 0 }
                        }
                        (_, ScalarKind::Bool) => |w| (w != 0) as u32,
                        (ScalarKind::Bool, _) => |w| (w != 0) as u32,
                        _ => |w| w,
                    };
                    Reg::Val(Val {
                        lanes: v.lanes,
                        slots: v.slots,
                        data: v.data.iter().map(|&w| conv(w)).collect(),
                    })
                }
            }
            E::ImageSample {
                image,
                sampler,
                coordinate,
                array_index,
                offset,
                level,
                depth_ref,
                ..
            } => {
                if let SampleLevel::Exact(e) | SampleLevel::Bias(e) = level {
                    f.val(e)?;
                }
                let out_slots = slot_count(types, self.ty_of(f, h));
                let (store, dim) = self.env.texture(f.global(image)?.index())?;
                let samp = match self.env.bound(f.global(sampler)?.index())? {
                    Bound::Sampler(s) => *s,
                    _ => return Err(GpuError::Execution("sampler binding mismatch".into())),
                };
                let coord = f.val(coordinate)?;
                let layer = array_index.map(|a| f.val(a)).transpose()?;
                let off = offset.map(|o| f.val(o)).transpose()?;
                let dref = depth_ref.map(|d| f.val(d)).transpose()?;
                let lanes = [Some(coord), layer, dref]
                    .into_iter()
                    .flatten()
                    .map(|v| v.lanes)
                    .max()
                    .unwrap_or(1);
                let mut out = Val::zeroed(out_slots, lanes);
                for l in 0..lanes {
                    let texel = if dim == TextureViewDimension::Cube {
                        let dir = [coord.f(0, l), coord.f(1, l), coord.f(2, l)];
                        match dref {
                            Some(d) => {
                                let (face, u, v) = texture::cube_face(dir);
                                let c = texture::sample_compare(store, face, u, v, d.f(0, l), &samp);
                                [c, 0.0, 0.0, 0.0]
                            }
                            None => texture::sample_cube(store, dir, &samp),
                        }
                    } else {
                        let mut u = coord.f(0, l);
                        let mut v = coord.f(1, l);
                        if let Some(o) = off {
                            u += o.i(0, l) as f32 / store.width as f32;
                            v += o.i(1, l) as f32 / store.height as f32;
                        }
                        let z = layer
                            .map(|a| a.i(0, l).clamp(0, store.layers as i32 - 1) as u32)
                            .unwrap_or(0);
                        match dref {
                            Some(d) => {
                                [texture::sample_compare(store, z, u, v, d.f(0, l), &samp), 0.0, 0.0, 0.0]
                            }
                            None => texture::sample_2d(
                                store,
                                z,
                                u,
                                v,
                                &samp,
                                samp.address_mode_u,
                                samp.address_mode_v,
                            ),
                        }
                    };
                    for (s, t) in texel.iter().enumerate().take(out_slots) {
                        out.data[s * lanes + l] = t.to_bits();
                    }
                }
                Reg::Val(out)
            }
            E::ImageLoad {
                image,
                coordinate,
                array_index,
                ..
            } => {
                let out_slots = slot_count(types, self.ty_of(f, h));
                let (store, _) = self.env.texture(f.global(image)?.index())?;
                let coord = f.val(coordinate)?;
                let layer = array_index.map(|a| f.val(a)).transpose()?;
                let lanes = coord.lanes.max(layer.map(|a| a.lanes).unwrap_or(1));
                let mut out = Val::zeroed(out_slots, lanes);
                for l in 0..lanes {
                    let (x, y) = (coord.i(0, l), coord.i(1, l));
                    let z = layer.map(|a| a.i(0, l)).unwrap_or(0);
                    if x < 0
                        || y < 0
                        || z < 0
                        || x as u32 >= store.width
                        || y as u32 >= store.height
                        || z as u32 >= store.layers
                    {
                        continue;
                    }
                    let texel = store.read(x as u32, y as u32, z as u32);
                    for (s, t) in texel.iter().enumerate().take(out_slots) {
                        out.data[s * lanes + l] = t.to_bits();
                    }
                }
                Reg::Val(out)
            }
            E::ImageQuery { image, query } => {
                let g = f.global(image)?;
                let (store, dim) = self.env.texture(g.index())?;
                let words = match query {
                    naga::ImageQuery::Size { .. } => vec![store.width, store.height],
                    naga::ImageQuery::NumLevels | naga::ImageQuery::NumSamples => vec![1],
                    naga::ImageQuery::NumLayers => vec![if dim == TextureViewDimension::Cube {
                        1
                    } else {
                        store.layers
                    }],
                };
                Reg::Val(Val::uniform(words))
            }
            E::CallResult(_) => f.regs[h.index()].clone(),
            ref other => return Err(GpuError::Unsupported(format!("expression {other:?}"))),
        })
    }

    fn access(&self, f: &Frame<'m>, _h: Handle<E>, base: Handle<E>, index: Index<'_>) -> Result<Reg> {
        let m = self.m;
        let types = &m.module.types;
        let n = self.n;
        match &f.regs[base.index()] {
            Reg::Ptr(ptr) => {
                let (pointee_handle, pointee) = match *self.ty_of(f, base) {
                    TypeInner::Pointer { base, .. } => (Some(base), &types[base].inner),
                    ref vp @ TypeInner::ValuePointer { .. } => (None, vp),
                    _ => return Err(GpuError::Execution("access through a non-pointer".into())),
                };
                let mem = matches!(ptr.root, Root::Mem(_));
                let (stride, count) = match *pointee {
                    TypeInner::Struct { ref members, .. } => {
                        let Index::Const(i) = index else {
                            return Err(GpuError::Execution("dynamic struct index".into()));
                        };
                        let add = if mem {
                            m.types.member_offset(pointee_handle.expect("struct handle"), i)
                        } else {
                            members[i].offset as usize
                        };
                        return Ok(Reg::Ptr(offset_ptr(ptr, add)));
                    }
                    TypeInner::Array { base, size, stride } => {
                        let count = match size {
                            ArraySize::Constant(c) => c.get() as usize,
                            _ => usize::MAX,
                        };
                        let s = if mem {
                            m.types.slots(base)
                        } else {
                            stride as usize
                        };
                        (s, count)
                    }
                    TypeInner::Vector { size, .. }
                    | TypeInner::ValuePointer {
                        size: Some(size), ..
                    } => (if mem { 1 } else { 4 }, size as usize),
                    TypeInner::Matrix { columns, rows, .. } => (
                        if mem {
                            rows as usize
                        } else {
                            super::value::matrix_column_stride(rows)
                        },
                        columns as usize,
                    ),
                    ref other => {
                        return Err(GpuError::Execution(format!("cannot index into {other:?}")))
                    }
                };
                let clamp = |i: i64| -> usize { i.clamp(0, count.saturating_sub(1).min(i64::MAX as usize) as i64) as usize };
                Ok(Reg::Ptr(match index {
                    Index::Const(i) => offset_ptr(ptr, i.min(count.saturating_sub(1)) * stride),
                    Index::Dynamic(read, 1) => offset_ptr(ptr, clamp(read(0)) * stride),
                    Index::Dynamic(read, _) => Ptr {
                        root: ptr.root,
                        off: Off::Lanes(
                            (0..n)
                                .map(|l| ptr.off.at(l) + clamp(read(l)) * stride)
                                .collect(),
                        ),
                    },
                }))
            }
            Reg::Val(v) => {
                let base_ty = self.ty_of(f, base);
                if let TypeInner::Struct { ref members, .. } = *base_ty {
                    let Index::Const(i) = index else {
                        return Err(GpuError::Execution("dynamic struct index".into()));
                    };
                    let offs = super::value::member_slot_offsets(types, base_ty);
                    let slots = slot_count(types, &types[members[i].ty].inner);
                    return Ok(Reg::Val(v.sub(offs[i], slots)));
                }
                let (elem, count) = match *base_ty {
                    TypeInner::Vector { size, .. } => (1, size as usize),
                    TypeInner::Matrix { columns, rows, .. } => (rows as usize, columns as usize),
                    TypeInner::Array {
                        base,
                        size: ArraySize::Constant(c),
                        ..
                    } => (m.types.slots(base), c.get() as usize),
                    ref other => {
                        return Err(GpuError::Execution(format!("cannot index into {other:?}")))
                    }
                };
                let clamp = |i: i64| -> usize { i.clamp(0, count as i64 - 1) as usize };
                Ok(Reg::Val(match index {
                    Index::Const(i) => v.sub(i.min(count - 1) * elem, elem),
                    Index::Dynamic(read, 1) => v.sub(clamp(read(0)) * elem, elem),
                    Index::Dynamic(read, lanes) => {
                        let mut out = Val::zeroed(elem, lanes);
                        for l in 0..lanes {
                            let at = clamp(read(l)) * elem;
                            for s in 0..elem {
                                out.data[s * lanes + l] = v.get(at + s, l);
                            }
                        }
                        out
                    }
                }))
            }
            other => Err(GpuError::Execution(format!("cannot index {other:?}"))),
        }
    }
}

enum Index<'a> {
    Const(usize),
    /// Per-lane index reader and the index value's lane count.
    Dynamic(&'a dyn Fn(usize) -> i64, usize),
}

fn offset_ptr(ptr: &Ptr, add: usize) -> Ptr {
    Ptr {
        root: ptr.root,
        off: match &ptr.off {
            Off::Uniform(o) => Off::Uniform(o + add),
            Off::Lanes(v) => Off::Lanes(v.iter().map(|o| o + add).collect()),
        },
    }
}

fn compose(vals: &[&Val]) -> Val {
    let lanes = vals.iter().map(|v| v.lanes).max().unwrap_or(1);
    let slots = vals.iter().map(|v| v.slots).sum();
    let mut data = Vec::with_capacity(slots * lanes);
    for v in vals {
        if v.lanes == lanes {
            data.extend_from_slice(&v.data);
        } else {
            for s in 0..v.slots {
                data.extend(std::iter::repeat_n(v.data[s], lanes));
            }
        }
    }
    Val { lanes, slots, data }
}

fn select(c: &Val, a: &Val, r: &Val) -> Val {
    let lanes = c.lanes.max(a.lanes).max(r.lanes);
    let slots = a.slots.max(r.slots);
    let mut data = Vec::with_capacity(lanes * slots);
    for s in 0..slots {
        let sc = s.min(c.slots - 1);
        for l in 0..lanes {
            data.push(if c.get(sc, l) != 0 {
                a.get(s.min(a.slots - 1), l)
            } else {
                r.get(s.min(r.slots - 1), l)
            });
        }
    }
    Val { lanes, slots, data }
}

/// Accumulates `a[sa] * b[sb]` into `acc` lane by lane.
#[inline]
fn fma_slot(acc: &mut [f32], a: &Val, sa: usize, b: &Val, sb: usize) {
    match (a.lanes == 1, b.lanes == 1) {
        (true, true) => acc[0] += f32::from_bits(a.data[sa]) * f32::from_bits(b.data[sb]),
        (true, false) => {
            let x = f32::from_bits(a.data[sa]);
            for (o, w) in acc.iter_mut().zip(b.slot(sb)) {
                *o += x * f32::from_bits(*w);
            }
        }
        (false, true) => {
            let y = f32::from_bits(b.data[sb]);
            for (o, w) in acc.iter_mut().zip(a.slot(sa)) {
                *o += f32::from_bits(*w) * y;
            }
        }
        (false, false) => {
            for ((o, x), y) in acc.iter_mut().zip(a.slot(sa)).zip(b.slot(sb)) {
                *o += f32::from_bits(*x) * f32::from_bits(*y);
            }
        }
    }
}

/// Matrix products. Returns `None` when neither operand is a matrix product case.
fn matrix_product(lt: &TypeInner, rt: &TypeInner, a: &Val, b: &Val) -> Option<Val> {
    let lanes = a.lanes.max(b.lanes);
    // (out_slots, terms, a_slot(i, k), b_slot(i, k))
    let (out_slots, terms, ai, bi): (usize, usize, Box<dyn Fn(usize, usize) -> usize>, Box<dyn Fn(usize, usize) -> usize>) =
        match (lt, rt) {
            (
                &TypeInner::Matrix { columns, rows, .. },
                &TypeInner::Vector { .. },
            ) => {
                let r = rows as usize;
                (r, columns as usize, Box::new(move |j, k| k * r + j), Box::new(|_, k| k))
            }
            (
                &TypeInner::Vector { .. },
                &TypeInner::Matrix { columns, rows, .. },
            ) => {
                let r = rows as usize;
                (columns as usize, r, Box::new(|_, k| k), Box::new(move |i, k| i * r + k))
            }
            (
                &TypeInner::Matrix {
                    columns: k_dim,
                    rows,
                    ..
                },
                &TypeInner::Matrix { columns, .. },
            ) => {
                let r = rows as usize;
                let kd = k_dim as usize;
                (
                    columns as usize * r,
                    kd,
                    Box::new(move |o, k| k * r + o % r),
                    Box::new(move |o, k| (o / r) * kd + k),
                )
            }
            _ => return None,
        };
    let mut out = Val::zeroed(out_slots, lanes);
    let mut acc = vec![0f32; lanes];
    for o in 0..out_slots {
        acc.fill(0.0);
        for k in 0..terms {
            fma_slot(&mut acc, a, ai(o, k), b, bi(o, k));
        }
        for (d, v) in out.slot_mut(o).iter_mut().zip(&acc) {
            *d = v.to_bits();
        }
    }
    Some(out)
}

fn map2(a: &Val, b: &Val, f: impl Fn(u32, u32) -> u32) -> Val {
    if a.lanes == b.lanes && a.slots == b.slots {
        return Val {
            lanes: a.lanes,
            slots: a.slots,
            data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        };
    }
    let lanes = a.lanes.max(b.lanes);
    let slots = a.slots.max(b.slots);
    let mut data = Vec::with_capacity(lanes * slots);
    for s in 0..slots {
        let (sa, sb) = (s.min(a.slots - 1), s.min(b.slots - 1));
        match (a.lanes == 1, b.lanes == 1) {
            (true, false) => {
                let x = a.data[sa];
                data.extend(b.slot(sb).iter().map(|&y| f(x, y)));
            }
            (false, true) => {
                let y = b.data[sb];
                data.extend(a.slot(sa).iter().map(|&x| f(x, y)));
            }
            _ => {
                for l in 0..lanes {
                    data.push(f(a.get(sa, l), b.get(sb, l)));
                }
            }
        }
    }
    Val { lanes, slots, data }
}

#[inline(always)]
fn fl(w: u32) -> f32 {
    f32::from_bits(w)
}

fn binary(op: B, lt: &TypeInner, rt: &TypeInner, a: &Val, b: &Val) -> Result<Val> {
    if op == B::Multiply {
        if let Some(v) = matrix_product(lt, rt, a, b) {
            return Ok(v);
        }
    }
    let kind = kind_of(lt);
    let v = match kind {
        ScalarKind::Float | ScalarKind::AbstractFloat => match op {
            B::Add => map2(a, b, |x, y| (fl(x) + fl(y)).to_bits()),
            B::Subtract => map2(a, b, |x, y| (fl(x) - fl(y)).to_bits()),
            B::Multiply => map2(a, b, |x, y| (fl(x) * fl(y)).to_bits()),
            B::Divide => map2(a, b, |x, y| (fl(x) / fl(y)).to_bits()),
            B::Modulo => map2(a, b, |x, y| {
                let (x, y) = (fl(x), fl(y));
                (x - y * (x / y).trunc()).to_bits()
            }),
            B::Equal => map2(a, b, |x, y| (fl(x) == fl(y)) as u32),
            B::NotEqual => map2(a, b, |x, y| (fl(x) != fl(y)) as u32),
            B::Less => map2(a, b, |x, y| (fl(x) < fl(y)) as u32),
            B::LessEqual => map2(a, b, |x, y| (fl(x) <= fl(y)) as u32),
            B::Greater => map2(a, b, |x, y| (fl(x) > fl(y)) as u32),
            B::GreaterEqual => map2(a, b, |x, y| (fl(x) >= fl(y)) as u32),
            other => return Err(GpuError::Execution(format!("float operator {other:?}"))),
        },
        ScalarKind::Sint | ScalarKind::AbstractInt => match op {
            B::Add => map2(a, b, |x, y| x.wrapping_add(y)),
            B::Subtract => map2(a, b, |x, y| x.wrapping_sub(y)),
            B::Multiply => map2(a, b, |x, y| (x as i32).wrapping_mul(y as i32) as u32),
            B::Divide => map2(a, b, |x, y| {
                let (x, y) = (x as i32, y as i32);
                if y == 0 {
                    x as u32
                } else {
                    x.wrapping_div(y) as u32
                }
            }),
            B::Modulo => map2(a, b, |x, y| {
                let (x, y) = (x as i32, y as i32);
                if y == 0 {
                    0
                } else {
                    x.wrapping_rem(y) as u32
                }
            }),
            B::Equal => map2(a, b, |x, y| (x == y) as u32),
            B::NotEqual => map2(a, b, |x, y| (x != y) as u32),
            B::Less => map2(a, b, |x, y| ((x as i32) < (y as i32)) as u32),
            B::LessEqual => map2(a, b, |x, y| ((x as i32) <= (y as i32)) as u32),
            B::Greater => map2(a, b, |x, y| ((x as i32) > (y as i32)) as u32),
            B::GreaterEqual => map2(a, b, |x, y| ((x as i32) >= (y as i32)) as u32),
            B::And => map2(a, b, |x, y| x & y),
            B::InclusiveOr => map2(a, b, |x, y| x | y),
            B::ExclusiveOr => map2(a, b, |x, y| x ^ y),
            B::ShiftLeft => map2(a, b, |x, y| x << (y & 31)),
            B::ShiftRight => map2(a, b, |x, y| ((x as i32) >> (y & 31)) as u32),
            other => return Err(GpuError::Execution(format!("integer operator {other:?}"))),
        },
        ScalarKind::Uint => match op {
            B::Add => map2(a, b, |x, y| x.wrapping_add(y)),
            B::Subtract => map2(a, b, |x, y| x.wrapping_sub(y)),
            B::Multiply => map2(a, b, |x, y| x.wrapping_mul(y)),
            B::Divide => map2(a, b, |x, y| if y == 0 { x } else { x / y }),
            B::Modulo => map2(a, b, |x, y| if y == 0 { 0 } else { x % y }),
            B::Equal => map2(a, b, |x, y| (x == y) as u32),
            B::NotEqual => map2(a, b, |x, y| (x != y) as u32),
            B::Less => map2(a, b, |x, y| (x < y) as u32),
            B::LessEqual => map2(a, b, |x, y| (x <= y) as u32),
            B::Greater => map2(a, b, |x, y| (x > y) as u32),
            B::GreaterEqual => map2(a, b, |x, y| (x >= y) as u32),
            B::And => map2(a, b, |x, y| x & y),
            B::InclusiveOr => map2(a, b, |x, y| x | y),
            B::ExclusiveOr => map2(a, b, |x, y| x ^ y),
            B::ShiftLeft => map2(a, b, |x, y| x << (y & 31)),
            B::ShiftRight => map2(a, b, |x, y| x >> (y & 31)),
            other => return Err(GpuError::Execution(format!("integer operator {other:?}"))),
        },
        ScalarKind::Bool => match op {
            B::Equal => map2(a, b, |x, y| (x == y) as u32),
            B::NotEqual | B::ExclusiveOr => map2(a, b, |x, y| (x != y) as u32),
            B::LogicalAnd | B::And => map2(a, b, |x, y| x & y),
            B::LogicalOr | B::InclusiveOr => map2(a, b, |x, y| x | y),
            other => return Err(GpuError::Execution(format!("boolean operator {other:?}"))),
        },
    };
    let _ = rt;
    Ok(v)
}
