// SPDX-License-Identifier: Apache-2.0

//! Three-valued term evaluation over partial assignments.
//!
//! `Unknown` propagates from unassigned variables and unassigned UF
//! application values; Boolean connectives short-circuit around it so that a
//! definitely-false assertion prunes even a partial assignment. Abstraction
//! UFs are uninterpreted here: their values come from the congruence table
//! built during search, never from the bit-vector functions.

use std::collections::HashMap;

use intblast::term::{Op, Term, TermKind, UfOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V {
    B(bool),
    I(i128),
    Bv { value: u64, width: u32 },
    Unknown,
}

impl V {
    pub fn known(&self) -> bool {
        !matches!(self, V::Unknown)
    }
}

/// Congruence key for an uninterpreted application: operator, width, and the
/// evaluated argument values.
pub type AppKey = (UfOp, u32, i128, i128);

#[derive(Debug, Default)]
pub struct Ctx {
    pub vars: HashMap<String, V>,
    pub apps: HashMap<AppKey, i128>,
}

fn bits(width: u32) -> u64 {
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn signed(v: u64, w: u32) -> i128 {
    let x = v as i128;
    if x >= 1i128 << (w - 1) {
        x - (1i128 << w)
    } else {
        x
    }
}

fn unsign(v: i128, w: u32) -> u64 {
    v.rem_euclid(1i128 << w) as u64
}

pub fn eval(t: &Term, ctx: &Ctx) -> V {
    use Op::*;
    let (op, args) = match t.kind() {
        TermKind::BoolLit(b) => return V::B(*b),
        TermKind::IntLit(v) => return V::I(*v),
        TermKind::BvLit(lit) => {
            return V::Bv {
                value: lit.value(),
                width: lit.width(),
            }
        }
        TermKind::Var(name) => return ctx.vars.get(name).copied().unwrap_or(V::Unknown),
        TermKind::FunApp(_, _) => return V::Unknown,
        TermKind::App(op, args) => (*op, args),
    };

    match op {
        // short-circuiting connectives: a single decisive child settles it
        And => {
            let mut unknown = false;
            for a in args {
                match eval(a, ctx) {
                    V::B(false) => return V::B(false),
                    V::B(true) => {}
                    _ => unknown = true,
                }
            }
            if unknown {
                V::Unknown
            } else {
                V::B(true)
            }
        }
        Or => {
            let mut unknown = false;
            for a in args {
                match eval(a, ctx) {
                    V::B(true) => return V::B(true),
                    V::B(false) => {}
                    _ => unknown = true,
                }
            }
            if unknown {
                V::Unknown
            } else {
                V::B(false)
            }
        }
        Implies => match (eval(&args[0], ctx), eval(&args[1], ctx)) {
            (V::B(false), _) | (_, V::B(true)) => V::B(true),
            (V::B(true), V::B(b)) => V::B(b),
            _ => V::Unknown,
        },
        Not => match eval(&args[0], ctx) {
            V::B(b) => V::B(!b),
            _ => V::Unknown,
        },
        Ite => match eval(&args[0], ctx) {
            V::B(true) => eval(&args[1], ctx),
            V::B(false) => eval(&args[2], ctx),
            _ => V::Unknown,
        },
        Uf(uf, w) => {
            let (a, b) = (eval(&args[0], ctx), eval(&args[1], ctx));
            match (a, b) {
                (V::I(a), V::I(b)) => ctx
                    .apps
                    .get(&(uf, w, a, b))
                    .map(|v| V::I(*v))
                    .unwrap_or(V::Unknown),
                _ => V::Unknown,
            }
        }
        _ => {
            let vals: Vec<V> = args.iter().map(|a| eval(a, ctx)).collect();
            if vals.iter().any(|v| !v.known()) {
                // distinct/eq can still be decided only when all args known;
                // keep the simple rule: any unknown child means unknown
                return V::Unknown;
            }
            apply(op, &vals)
        }
    }
}

fn apply(op: Op, vals: &[V]) -> V {
    use Op::*;
    let bv = |i: usize| -> (u64, u32) {
        match vals[i] {
            V::Bv { value, width } => (value, width),
            _ => panic!("expected bit-vector"),
        }
    };
    let int = |i: usize| -> i128 {
        match vals[i] {
            V::I(v) => v,
            _ => panic!("expected integer"),
        }
    };
    let b = |i: usize| -> bool {
        match vals[i] {
            V::B(v) => v,
            _ => panic!("expected boolean"),
        }
    };

    match op {
        BvAdd => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: unsign(x as i128 + y as i128, w), width: w }
        }
        BvSub => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: unsign(x as i128 - y as i128, w), width: w }
        }
        BvNeg => {
            let (x, w) = bv(0);
            V::Bv { value: unsign(-(x as i128), w), width: w }
        }
        BvMul => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: unsign(x as i128 * y as i128, w), width: w }
        }
        BvUdiv => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: if y == 0 { bits(w) } else { x / y }, width: w }
        }
        BvUrem => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: if y == 0 { x } else { x % y }, width: w }
        }
        BvSdiv => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            let (sx, sy) = (signed(x, w), signed(y, w));
            let value = if sy == 0 {
                if sx < 0 { 1 } else { bits(w) }
            } else {
                unsign(sx / sy, w)
            };
            V::Bv { value, width: w }
        }
        BvSrem => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            let (sx, sy) = (signed(x, w), signed(y, w));
            V::Bv { value: if sy == 0 { x } else { unsign(sx % sy, w) }, width: w }
        }
        BvSmod => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            let (sx, sy) = (signed(x, w), signed(y, w));
            let value = if sy == 0 {
                x
            } else {
                let mut r = sx % sy;
                if r != 0 && (r < 0) != (sy < 0) {
                    r += sy;
                }
                unsign(r, w)
            };
            V::Bv { value, width: w }
        }
        BvNot => {
            let (x, w) = bv(0);
            V::Bv { value: !x & bits(w), width: w }
        }
        BvAnd => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: x & y, width: w }
        }
        BvOr => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: x | y, width: w }
        }
        BvXor => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: x ^ y, width: w }
        }
        BvNand => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: !(x & y) & bits(w), width: w }
        }
        BvNor => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: !(x | y) & bits(w), width: w }
        }
        BvXnor => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::Bv { value: !(x ^ y) & bits(w), width: w }
        }
        BvComp => {
            let ((x, _), (y, _)) = (bv(0), bv(1));
            V::Bv { value: (x == y) as u64, width: 1 }
        }
        BvShl => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            let value = if y >= w as u64 { 0 } else { (x << y) & bits(w) };
            V::Bv { value, width: w }
        }
        BvLshr => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            let value = if y >= w as u64 { 0 } else { x >> y };
            V::Bv { value, width: w }
        }
        BvAshr => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            let sx = signed(x, w);
            let value = if y >= w as u64 {
                if sx < 0 { bits(w) } else { 0 }
            } else {
                unsign(sx >> y, w)
            };
            V::Bv { value, width: w }
        }
        Concat => {
            let ((x, m), (y, n)) = (bv(0), bv(1));
            V::Bv { value: (x << n) | y, width: m + n }
        }
        Extract { high, low } => {
            let (x, _) = bv(0);
            let w = high - low + 1;
            V::Bv { value: (x >> low) & bits(w), width: w }
        }
        ZeroExtend(n) => {
            let (x, w) = bv(0);
            V::Bv { value: x, width: w + n }
        }
        SignExtend(n) => {
            let (x, w) = bv(0);
            let value = if n > 0 && (x >> (w - 1)) & 1 == 1 {
                x | (bits(n) << w)
            } else {
                x
            };
            V::Bv { value, width: w + n }
        }
        RotateLeft(n) => {
            let (x, w) = bv(0);
            let r = n % w;
            let value = if r == 0 { x } else { ((x << r) | (x >> (w - r))) & bits(w) };
            V::Bv { value, width: w }
        }
        RotateRight(n) => {
            let (x, w) = bv(0);
            let r = n % w;
            let value = if r == 0 { x } else { ((x >> r) | (x << (w - r))) & bits(w) };
            V::Bv { value, width: w }
        }
        Repeat(n) => {
            let (x, w) = bv(0);
            let mut value = 0u64;
            for _ in 0..n {
                value = (value << w) | x;
            }
            V::Bv { value, width: w * n }
        }
        BvUlt => V::B(bv(0).0 < bv(1).0),
        BvUle => V::B(bv(0).0 <= bv(1).0),
        BvUgt => V::B(bv(0).0 > bv(1).0),
        BvUge => V::B(bv(0).0 >= bv(1).0),
        BvSlt => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::B(signed(x, w) < signed(y, w))
        }
        BvSle => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::B(signed(x, w) <= signed(y, w))
        }
        BvSgt => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::B(signed(x, w) > signed(y, w))
        }
        BvSge => {
            let ((x, w), (y, _)) = (bv(0), bv(1));
            V::B(signed(x, w) >= signed(y, w))
        }
        Eq => V::B(vals[0] == vals[1]),
        Distinct => {
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    if vals[i] == vals[j] {
                        return V::B(false);
                    }
                }
            }
            V::B(true)
        }
        Xor => V::B(b(0) ^ b(1)),
        IntAdd => match int(0).checked_add(int(1)) {
            Some(v) => V::I(v),
            None => V::Unknown,
        },
        IntSub => match int(0).checked_sub(int(1)) {
            Some(v) => V::I(v),
            None => V::Unknown,
        },
        IntNeg => V::I(-int(0)),
        IntMul => match int(0).checked_mul(int(1)) {
            Some(v) => V::I(v),
            None => V::Unknown,
        },
        IntDiv => {
            let (x, y) = (int(0), int(1));
            if y == 0 {
                V::Unknown
            } else {
                V::I(x.div_euclid(y))
            }
        }
        IntMod => {
            let (x, y) = (int(0), int(1));
            if y == 0 {
                V::Unknown
            } else {
                V::I(x.rem_euclid(y))
            }
        }
        IntLt => V::B(int(0) < int(1)),
        IntLe => V::B(int(0) <= int(1)),
        IntGt => V::B(int(0) > int(1)),
        IntGe => V::B(int(0) >= int(1)),
        And | Or | Not | Implies | Ite | Uf(_, _) => unreachable!("handled earlier"),
    }
}
