//! Built-in math functions over lane-parallel values.

use naga::{MathFunction as M, ScalarKind, TypeInner};

use super::value::Val;
use crate::error::{GpuError, Result};

pub(crate) fn is_supported(fun: M) -> bool {
    matches!(
        fun,
        M::Abs
            | M::Min
            | M::Max
            | M::Clamp
            | M::Saturate
            | M::Cos
            | M::Cosh
            | M::Sin
            | M::Sinh
            | M::Tan
            | M::Tanh
            | M::Acos
            | M::Asin
            | M::Atan
            | M::Atan2
            | M::Asinh
            | M::Acosh
            | M::Atanh
            | M::Radians
            | M::Degrees
            | M::Ceil
            | M::Floor
            | M::Round
            | M::Fract
            | M::Trunc
            | M::Ldexp
            | M::Exp
            | M::Exp2
            | M::Log
            | M::Log2
            | M::Pow
            | M::Dot
            | M::Cross
            | M::Distance
            | M::Length
            | M::Normalize
            | M::FaceForward
            | M::Reflect
            | M::Refract
            | M::Sign
            | M::Fma
            | M::Mix
            | M::Step
            | M::SmoothStep
            | M::Sqrt
            | M::InverseSqrt
            | M::Transpose
            | M::Determinant
            | M::CountTrailingZeros
            | M::CountLeadingZeros
            | M::CountOneBits
            | M::ReverseBits
            | M::Pack4x8unorm
            | M::Unpack4x8unorm
    )
}

#[inline(always)]
fn fb(w: u32) -> f32 {
    f32::from_bits(w)
}

fn map1(a: &Val, f: impl Fn(u32) -> u32) -> Val {
    Val {
        lanes: a.lanes,
        slots: a.slots,
        data: a.data.iter().map(|&w| f(w)).collect(),
    }
}

fn map1f(a: &Val, f: impl Fn(f32) -> f32) -> Val {
    map1(a, |w| f(fb(w)).to_bits())
}

/// Component-wise binary map. A one-slot operand broadcasts across the other's slots.
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
        for l in 0..lanes {
            data.push(f(a.get(sa, l), b.get(sb, l)));
        }
    }
    Val { lanes, slots, data }
}

fn map2f(a: &Val, b: &Val, f: impl Fn(f32, f32) -> f32) -> Val {
    map2(a, b, |x, y| f(fb(x), fb(y)).to_bits())
}

fn map3(a: &Val, b: &Val, c: &Val, f: impl Fn(u32, u32, u32) -> u32) -> Val {
    let lanes = a.lanes.max(b.lanes).max(c.lanes);
    let slots = a.slots.max(b.slots).max(c.slots);
    let mut data = Vec::with_capacity(lanes * slots);
    for s in 0..slots {
        let (sa, sb, sc) = (
            s.min(a.slots - 1),
            s.min(b.slots - 1),
            s.min(c.slots - 1),
        );
        if a.lanes == lanes && b.lanes == lanes && c.lanes == lanes {
            let (xa, xb, xc) = (a.slot(sa), b.slot(sb), c.slot(sc));
            for l in 0..lanes {
                data.push(f(xa[l], xb[l], xc[l]));
            }
        } else {
            for l in 0..lanes {
                data.push(f(a.get(sa, l), b.get(sb, l), c.get(sc, l)));
            }
        }
    }
    Val { lanes, slots, data }
}

fn map3f(a: &Val, b: &Val, c: &Val, f: impl Fn(f32, f32, f32) -> f32) -> Val {
    map3(a, b, c, |x, y, z| f(fb(x), fb(y), fb(z)).to_bits())
}

/// Per-lane reduction of vector operands to a scalar.
fn reduce(args: &[&Val], f: impl Fn(&dyn Fn(usize, usize) -> f32) -> f32) -> Val {
    let lanes = args.iter().map(|v| v.lanes).max().unwrap_or(1);
    let mut data = Vec::with_capacity(lanes);
    for l in 0..lanes {
        let get = |arg: usize, slot: usize| args[arg].f(slot, l);
        data.push(f(&get).to_bits());
    }
    Val {
        lanes,
        slots: 1,
        data,
    }
}

/// Per-lane vector-valued function writing `slots` outputs.
fn per_lane(args: &[&Val], slots: usize, f: impl Fn(&dyn Fn(usize, usize) -> f32, &mut [f32])) -> Val {
    let lanes = args.iter().map(|v| v.lanes).max().unwrap_or(1);
    let mut out = Val::zeroed(slots, lanes);
    let mut tmp = vec![0f32; slots];
    for l in 0..lanes {
        let get = |arg: usize, slot: usize| args[arg].f(slot, l);
        f(&get, &mut tmp);
        for (s, v) in tmp.iter().enumerate() {
            out.data[s * lanes + l] = v.to_bits();
        }
    }
    out
}

fn sign_f(x: f32) -> f32 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn det(m: &[f32], n: usize) -> f32 {
    let at = |c: usize, r: usize| m[c * n + r] as f64;
    let d = match n {
        2 => at(0, 0) * at(1, 1) - at(1, 0) * at(0, 1),
        3 => {
            at(0, 0) * (at(1, 1) * at(2, 2) - at(2, 1) * at(1, 2))
                - at(1, 0) * (at(0, 1) * at(2, 2) - at(2, 1) * at(0, 2))
                + at(2, 0) * (at(0, 1) * at(1, 2) - at(1, 1) * at(0, 2))
        }
        _ => {
            let mut acc = 0.0;
            for c in 0..4 {
                let mut minor = Vec::with_capacity(9);
                for cc in (0..4).filter(|&cc| cc != c) {
                    for r in 1..4 {
                        minor.push(m[cc * 4 + r]);
                    }
                }
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * at(c, 0) * det(&minor, 3) as f64;
            }
            acc
        }
    };
    d as f32
}

/// Evaluates `fun`. `arg_ty` is the type of the first argument.
pub(crate) fn eval(fun: M, arg_ty: &TypeInner, args: &[&Val]) -> Result<Val> {
    let kind = super::value::kind_of(arg_ty);
    let a = args[0];
    let n = a.slots;
    let v = match (fun, kind) {
        (M::Abs, ScalarKind::Float) => map1f(a, f32::abs),
        (M::Abs, ScalarKind::Sint) => map1(a, |x| (x as i32).wrapping_abs() as u32),
        (M::Abs, _) => a.clone(),
        (M::Min, ScalarKind::Float) => map2f(a, args[1], f32::min),
        (M::Min, ScalarKind::Sint) => map2(a, args[1], |x, y| (x as i32).min(y as i32) as u32),
        (M::Min, _) => map2(a, args[1], u32::min),
        (M::Max, ScalarKind::Float) => map2f(a, args[1], f32::max),
        (M::Max, ScalarKind::Sint) => map2(a, args[1], |x, y| (x as i32).max(y as i32) as u32),
        (M::Max, _) => map2(a, args[1], u32::max),
        (M::Clamp, ScalarKind::Float) => map3f(a, args[1], args[2], |x, lo, hi| x.max(lo).min(hi)),
        (M::Clamp, ScalarKind::Sint) => map3(a, args[1], args[2], |x, lo, hi| {
            (x as i32).max(lo as i32).min(hi as i32) as u32
        }),
        (M::Clamp, _) => map3(a, args[1], args[2], |x, lo, hi| x.max(lo).min(hi)),
        (M::Saturate, _) => map1f(a, |x| x.clamp(0.0, 1.0)),
        (M::Cos, _) => map1f(a, f32::cos),
        (M::Cosh, _) => map1f(a, f32::cosh),
        (M::Sin, _) => map1f(a, f32::sin),
        (M::Sinh, _) => map1f(a, f32::sinh),
        (M::Tan, _) => map1f(a, f32::tan),
        (M::Tanh, _) => map1f(a, f32::tanh),
        (M::Acos, _) => map1f(a, f32::acos),
        (M::Asin, _) => map1f(a, f32::asin),
        (M::Atan, _) => map1f(a, f32::atan),
        (M::Atan2, _) => map2f(a, args[1], f32::atan2),
        (M::Asinh, _) => map1f(a, f32::asinh),
        (M::Acosh, _) => map1f(a, f32::acosh),
        (M::Atanh, _) => map1f(a, f32::atanh),
        (M::Radians, _) => map1f(a, f32::to_radians),
        (M::Degrees, _) => map1f(a, f32::to_degrees),
        (M::Ceil, _) => map1f(a, f32::ceil),
        (M::Floor, _) => map1f(a, f32::floor),
        (M::Round, _) => map1f(a, f32::round_ties_even),
        (M::Fract, _) => map1f(a, |x| x - x.floor()),
        (M::Trunc, _) => map1f(a, f32::trunc),
        (M::Ldexp, _) => map2(a, args[1], |x, e| (fb(x) * 2f32.powi(e as i32)).to_bits()),
        (M::Exp, _) => map1f(a, f32::exp),
        (M::Exp2, _) => map1f(a, f32::exp2),
        (M::Log, _) => map1f(a, f32::ln),
        (M::Log2, _) => map1f(a, f32::log2),
        (M::Pow, _) => map2f(a, args[1], f32::powf),
        (M::Sqrt, _) => map1f(a, f32::sqrt),
        (M::InverseSqrt, _) => map1f(a, |x| 1.0 / x.sqrt()),
        (M::Sign, ScalarKind::Float) => map1f(a, sign_f),
        (M::Sign, _) => map1(a, |x| (x as i32).signum() as u32),
        (M::Fma, _) => map3f(a, args[1], args[2], |x, y, z| x.mul_add(y, z)),
        (M::Mix, _) => map3f(a, args[1], args[2], |x, y, t| x * (1.0 - t) + y * t),
        (M::Step, _) => map2f(a, args[1], |edge, x| if x >= edge { 1.0 } else { 0.0 }),
        (M::SmoothStep, _) => map3f(a, args[1], args[2], |lo, hi, x| {
            let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            t * t * (3.0 - 2.0 * t)
        }),
        (M::Dot, ScalarKind::Float) => reduce(args, |g| (0..n).map(|s| g(0, s) * g(1, s)).sum()),
        (M::Dot, _) => {
            let lanes = a.lanes.max(args[1].lanes);
            let data = (0..lanes)
                .map(|l| {
                    (0..n).fold(0u32, |acc, s| {
                        acc.wrapping_add(a.get(s, l).wrapping_mul(args[1].get(s, l)))
                    })
                })
                .collect();
            Val {
                lanes,
                slots: 1,
                data,
            }
        }
        (M::Length, _) => reduce(args, |g| (0..n).map(|s| g(0, s) * g(0, s)).sum::<f32>().sqrt()),
        (M::Distance, _) => reduce(args, |g| {
            (0..n)
                .map(|s| {
                    let d = g(0, s) - g(1, s);
                    d * d
                })
                .sum::<f32>()
                .sqrt()
        }),
        (M::Normalize, _) => per_lane(args, n, |g, out| {
            let len = (0..n).map(|s| g(0, s) * g(0, s)).sum::<f32>().sqrt();
            for (s, o) in out.iter_mut().enumerate() {
                *o = g(0, s) / len;
            }
        }),
        (M::Cross, _) => per_lane(args, 3, |g, out| {
            out[0] = g(0, 1) * g(1, 2) - g(0, 2) * g(1, 1);
            out[1] = g(0, 2) * g(1, 0) - g(0, 0) * g(1, 2);
            out[2] = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
        }),
        (M::Reflect, _) => per_lane(args, n, |g, out| {
            let d: f32 = (0..n).map(|s| g(0, s) * g(1, s)).sum();
            for (s, o) in out.iter_mut().enumerate() {
                *o = g(0, s) - 2.0 * d * g(1, s);
            }
        }),
        (M::Refract, _) => per_lane(args, n, |g, out| {
            let d: f32 = (0..n).map(|s| g(0, s) * g(1, s)).sum();
            let eta = g(2, 0);
            let k = 1.0 - eta * eta * (1.0 - d * d);
            for (s, o) in out.iter_mut().enumerate() {
                *o = if k < 0.0 {
                    0.0
                } else {
                    eta * g(0, s) - (eta * d + k.sqrt()) * g(1, s)
                };
            }
        }),
        (M::FaceForward, _) => per_lane(args, n, |g, out| {
            let d: f32 = (0..n).map(|s| g(2, s) * g(1, s)).sum();
            for (s, o) in out.iter_mut().enumerate() {
                *o = if d < 0.0 { g(0, s) } else { -g(0, s) };
            }
        }),
        (M::Transpose, _) => {
            let TypeInner::Matrix { columns, rows, .. } = *arg_ty else {
                return Err(GpuError::Execution("transpose of a non-matrix".into()));
            };
            let (c, r) = (columns as usize, rows as usize);
            let mut out = Val::zeroed(n, a.lanes);
            for i in 0..c {
                for j in 0..r {
                    out.slot_mut(j * c + i).copy_from_slice(a.slot(i * r + j));
                }
            }
            out
        }
        (M::Determinant, _) => {
            let TypeInner::Matrix { columns, .. } = *arg_ty else {
                return Err(GpuError::Execution("determinant of a non-matrix".into()));
            };
            let dim = columns as usize;
            let mut m = vec![0f32; n];
            let data = (0..a.lanes)
                .map(|l| {
                    for (s, x) in m.iter_mut().enumerate() {
                        *x = a.f(s, l);
                    }
                    det(&m, dim).to_bits()
                })
                .collect();
            Val {
                lanes: a.lanes,
                slots: 1,
                data,
            }
        }
        (M::CountTrailingZeros, _) => map1(a, u32::trailing_zeros),
        (M::CountLeadingZeros, _) => map1(a, u32::leading_zeros),
        (M::CountOneBits, _) => map1(a, u32::count_ones),
        (M::ReverseBits, _) => map1(a, u32::reverse_bits),
        (M::Pack4x8unorm, _) => {
            let data = (0..a.lanes)
                .map(|l| {
                    (0..4).fold(0u32, |acc, s| {
                        acc | (crate::resource::unorm8(a.f(s, l)) as u32) << (8 * s)
                    })
                })
                .collect();
            Val {
                lanes: a.lanes,
                slots: 1,
                data,
            }
        }
        (M::Unpack4x8unorm, _) => {
            let mut out = Val::zeroed(4, a.lanes);
            for s in 0..4 {
                for l in 0..a.lanes {
                    let byte = (a.get(0, l) >> (8 * s)) & 0xff;
                    out.data[s * a.lanes + l] = (byte as f32 / 255.0).to_bits();
                }
            }
            out
        }
        (other, _) => return Err(GpuError::Unsupported(format!("math function {other:?}"))),
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use naga::{Scalar, VectorSize};

    fn vec_ty(n: VectorSize) -> TypeInner {
        TypeInner::Vector {
            size: n,
            scalar: Scalar::F32,
        }
    }

    fn fv(vals: &[f32]) -> Val {
        Val::uniform(vals.iter().map(|v| v.to_bits()).collect())
    }

    fn floats(v: &Val) -> Vec<f32> {
        v.data.iter().map(|&w| f32::from_bits(w)).collect()
    }

    #[test]
    fn geometric_functions() {
        let t3 = vec_ty(VectorSize::Tri);
        let x = fv(&[1.0, 0.0, 0.0]);
        let y = fv(&[0.0, 1.0, 0.0]);
        assert_eq!(floats(&eval(M::Cross, &t3, &[&x, &y]).unwrap()), vec![0.0, 0.0, 1.0]);
        let i = fv(&[1.0, -1.0, 0.0]);
        assert_eq!(floats(&eval(M::Reflect, &t3, &[&i, &y]).unwrap()), vec![1.0, 1.0, 0.0]);
        let l = eval(M::Length, &t3, &[&fv(&[3.0, 4.0, 0.0])]).unwrap();
        assert_eq!(floats(&l), vec![5.0]);
    }

    #[test]
    fn sign_and_round_follow_wgsl() {
        let s = TypeInner::Scalar(Scalar::F32);
        assert_eq!(floats(&eval(M::Sign, &s, &[&fv(&[0.0])]).unwrap()), vec![0.0]);
        assert_eq!(floats(&eval(M::Round, &s, &[&fv(&[2.5])]).unwrap()), vec![2.0]);
        assert_eq!(floats(&eval(M::Round, &s, &[&fv(&[3.5])]).unwrap()), vec![4.0]);
    }

    #[test]
    fn mix_broadcasts_scalar_weight() {
        let t3 = vec_ty(VectorSize::Tri);
        let a = fv(&[0.0, 0.0, 0.0]);
        let b = fv(&[2.0, 4.0, 8.0]);
        let t = fv(&[0.25]);
        assert_eq!(floats(&eval(M::Mix, &t3, &[&a, &b, &t]).unwrap()), vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn determinant_of_scaled_identity() {
        let m = TypeInner::Matrix {
            columns: VectorSize::Quad,
            rows: VectorSize::Quad,
            scalar: Scalar::F32,
        };
        let mut vals = [0f32; 16];
        for (k, d) in [2.0, 3.0, 4.0, 5.0].into_iter().enumerate() {
            vals[k * 5] = d;
        }
        assert_eq!(floats(&eval(M::Determinant, &m, &[&fv(&vals)]).unwrap()), vec![120.0]);
    }
}
