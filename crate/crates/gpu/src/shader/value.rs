//! Lane-parallel shader values.
//!
//! Every WGSL value type (scalar, vector, matrix, array, struct) flattens to a
//! sequence of 32-bit *slots*. A [`Val`] holds those slots for a batch of
//! invocations ("lanes"), slot-major, so per-component work walks contiguous
//! memory. A value with `lanes == 1` is uniform across the batch and broadcasts
//! on read.

use naga::{ArraySize, Handle, Scalar, ScalarKind, Type, TypeInner, UniqueArena, VectorSize};

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Val {
    pub lanes: usize,
    pub slots: usize,
    pub data: Vec<u32>,
}

impl Val {
    pub fn uniform(words: Vec<u32>) -> Val {
        Val {
            lanes: 1,
            slots: words.len(),
            data: words,
        }
    }

    pub fn zeroed(slots: usize, lanes: usize) -> Val {
        Val {
            lanes,
            slots,
            data: vec![0; slots * lanes],
        }
    }

    #[inline(always)]
    pub fn get(&self, slot: usize, lane: usize) -> u32 {
        if self.lanes == 1 {
            self.data[slot]
        } else {
            self.data[slot * self.lanes + lane]
        }
    }

    #[inline(always)]
    pub fn f(&self, slot: usize, lane: usize) -> f32 {
        f32::from_bits(self.get(slot, lane))
    }

    #[inline(always)]
    pub fn i(&self, slot: usize, lane: usize) -> i32 {
        self.get(slot, lane) as i32
    }

    /// Contiguous lane data of one slot. Length is `lanes`.
    #[inline(always)]
    pub fn slot(&self, slot: usize) -> &[u32] {
        &self.data[slot * self.lanes..(slot + 1) * self.lanes]
    }

    #[inline(always)]
    pub fn slot_mut(&mut self, slot: usize) -> &mut [u32] {
        let lanes = self.lanes;
        &mut self.data[slot * lanes..(slot + 1) * lanes]
    }

    /// Widens a uniform value to `lanes` lanes; already-wide values are returned as is.
    pub fn widen(&self, lanes: usize) -> Val {
        if self.lanes == lanes {
            return self.clone();
        }
        debug_assert_eq!(self.lanes, 1);
        let mut data = Vec::with_capacity(self.slots * lanes);
        for s in 0..self.slots {
            data.extend(std::iter::repeat_n(self.data[s], lanes));
        }
        Val {
            lanes,
            slots: self.slots,
            data,
        }
    }

    /// Copies slots `[from, from + count)` into a new value.
    pub fn sub(&self, from: usize, count: usize) -> Val {
        Val {
            lanes: self.lanes,
            slots: count,
            data: self.data[from * self.lanes..(from + count) * self.lanes].to_vec(),
        }
    }
}

/// Number of slots a type flattens to. Opaque types (images, samplers, pointers) have none.
pub(crate) fn slot_count(types: &UniqueArena<Type>, inner: &TypeInner) -> usize {
    match *inner {
        TypeInner::Scalar(_) | TypeInner::Atomic(_) => 1,
        TypeInner::Vector { size, .. } => size as usize,
        TypeInner::Matrix { columns, rows, .. } => columns as usize * rows as usize,
        TypeInner::Array { base, size, .. } => match size {
            ArraySize::Constant(n) => n.get() as usize * slot_count(types, &types[base].inner),
            _ => 0,
        },
        TypeInner::Struct { ref members, .. } => members
            .iter()
            .map(|m| slot_count(types, &types[m.ty].inner))
            .sum(),
        _ => 0,
    }
}

/// Slot offset of each struct member.
pub(crate) fn member_slot_offsets(types: &UniqueArena<Type>, inner: &TypeInner) -> Vec<usize> {
    match inner {
        TypeInner::Struct { members, .. } => {
            let mut acc = 0;
            members
                .iter()
                .map(|m| {
                    let off = acc;
                    acc += slot_count(types, &types[m.ty].inner);
                    off
                })
                .collect()
        }
        _ => Vec::new(),
    }
}

pub(crate) fn scalar_of(inner: &TypeInner) -> Option<Scalar> {
    match *inner {
        TypeInner::Scalar(s) | TypeInner::Atomic(s) => Some(s),
        TypeInner::Vector { scalar, .. } | TypeInner::Matrix { scalar, .. } => Some(scalar),
        TypeInner::ValuePointer { scalar, .. } => Some(scalar),
        _ => None,
    }
}

pub(crate) fn kind_of(inner: &TypeInner) -> ScalarKind {
    scalar_of(inner).map(|s| s.kind).unwrap_or(ScalarKind::Float)
}

/// Byte stride between matrix columns in host-shareable memory.
pub(crate) fn matrix_column_stride(rows: VectorSize) -> usize {
    match rows {
        VectorSize::Bi => 8,
        _ => 16,
    }
}

/// Decodes a value of type `inner` stored at `offset` in host-shareable memory,
/// emitting its slots in order.
pub(crate) fn decode(
    types: &UniqueArena<Type>,
    inner: &TypeInner,
    bytes: &[u8],
    offset: usize,
    out: &mut impl FnMut(u32),
) {
    let word = |at: usize| -> u32 {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .unwrap_or(0)
    };
    match *inner {
        TypeInner::Scalar(_) | TypeInner::Atomic(_) => out(word(offset)),
        TypeInner::Vector { size, .. } => {
            for c in 0..size as usize {
                out(word(offset + 4 * c));
            }
        }
        TypeInner::Matrix { columns, rows, .. } => {
            let stride = matrix_column_stride(rows);
            for c in 0..columns as usize {
                for r in 0..rows as usize {
                    out(word(offset + c * stride + 4 * r));
                }
            }
        }
        TypeInner::Array { base, size, stride } => {
            if let ArraySize::Constant(n) = size {
                let elem = &types[base].inner;
                for i in 0..n.get() as usize {
                    decode(types, elem, bytes, offset + i * stride as usize, out);
                }
            }
        }
        TypeInner::Struct { ref members, .. } => {
            for m in members {
                decode(types, &types[m.ty].inner, bytes, offset + m.offset as usize, out);
            }
        }
        _ => {}
    }
}

/// Inverse of [`decode`]: writes slots pulled from `next` into host-shareable memory.
pub(crate) fn encode(
    types: &UniqueArena<Type>,
    inner: &TypeInner,
    bytes: &mut [u8],
    offset: usize,
    next: &mut impl FnMut() -> u32,
) {
    let put = |bytes: &mut [u8], at: usize, w: u32| {
        if let Some(b) = bytes.get_mut(at..at + 4) {
            b.copy_from_slice(&w.to_le_bytes());
        }
    };
    match *inner {
        TypeInner::Scalar(_) | TypeInner::Atomic(_) => put(bytes, offset, next()),
        TypeInner::Vector { size, .. } => {
            for c in 0..size as usize {
                put(bytes, offset + 4 * c, next());
            }
        }
        TypeInner::Matrix { columns, rows, .. } => {
            let stride = matrix_column_stride(rows);
            for c in 0..columns as usize {
                for r in 0..rows as usize {
                    put(bytes, offset + c * stride + 4 * r, next());
                }
            }
        }
        TypeInner::Array { base, size, stride } => {
            if let ArraySize::Constant(n) = size {
                let elem = &types[base].inner;
                for i in 0..n.get() as usize {
                    encode(types, elem, bytes, offset + i * stride as usize, next);
                }
            }
        }
        TypeInner::Struct { ref members, .. } => {
            for m in members {
                encode(types, &types[m.ty].inner, bytes, offset + m.offset as usize, next);
            }
        }
        _ => {}
    }
}

/// Per-type flattening facts cached for a module.
pub(crate) struct TypeTable {
    pub slots: Vec<usize>,
    pub member_offsets: Vec<Vec<usize>>,
}

impl TypeTable {
    pub fn new(types: &UniqueArena<Type>) -> Self {
        let mut slots = Vec::with_capacity(types.len());
        let mut member_offsets = Vec::with_capacity(types.len());
        for (_, ty) in types.iter() {
            slots.push(slot_count(types, &ty.inner));
            member_offsets.push(member_slot_offsets(types, &ty.inner));
        }
        TypeTable {
            slots,
            member_offsets,
        }
    }

    pub fn slots(&self, ty: Handle<Type>) -> usize {
        self.slots[ty.index()]
    }

    pub fn member_offset(&self, ty: Handle<Type>, member: usize) -> usize {
        self.member_offsets[ty.index()][member]
    }
}
