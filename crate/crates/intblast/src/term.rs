// SPDX-License-Identifier: Apache-2.0

//! Sorted terms shared by every stage of the pipeline.
//!
//! One term language covers the bit-vector input fragment, the Boolean
//! skeleton, and the integer fragment produced by the translation. Terms are
//! immutable, reference-counted, and compare structurally; the sort of every
//! node is computed once at construction time and cached.

use std::fmt;
use std::sync::Arc;

use crate::error::SortError;

/// Maximum supported bit-vector width. Literal values are stored in a `u64`
/// and integer constants up to `2^64` fit in an `i128`, so 64 is the hard cap.
pub const MAX_WIDTH: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    BitVec(u32),
    Int,
}

impl Sort {
    pub fn is_bv(&self) -> bool {
        matches!(self, Sort::BitVec(_))
    }

    /// Width of a bit-vector sort; panics on Bool/Int.
    pub fn width(&self) -> u32 {
        match self {
            Sort::BitVec(w) => *w,
            other => panic!("width() on non-bitvector sort {other:?}"),
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "Bool"),
            Sort::BitVec(w) => write!(f, "(_ BitVec {w})"),
            Sort::Int => write!(f, "Int"),
        }
    }
}

/// A bit-vector literal: unsigned value plus width, value < 2^width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BvLit {
    value: u64,
    width: u32,
}

impl BvLit {
    pub fn new(value: u64, width: u32) -> Self {
        assert!(
            width >= 1 && width <= MAX_WIDTH,
            "bit-vector width {width} out of range"
        );
        assert!(
            value <= mask(width),
            "literal value {value} does not fit in {width} bits"
        );
        BvLit { value, width }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn width(&self) -> u32 {
        self.width
    }
}

/// All-ones value for a width, `2^w - 1`.
pub fn mask(width: u32) -> u64 {
    debug_assert!((1..=MAX_WIDTH).contains(&width));
    if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// `2^w` as an integer constant (needs i128 for w = 64).
pub fn pow2(width: u32) -> i128 {
    1i128 << width
}

/// Operator of the UF abstraction: bit-wise and, left shift, logical right shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UfOp {
    And,
    Shl,
    Lshr,
}

impl UfOp {
    /// Canonical symbol for the width-indexed uninterpreted function.
    pub fn symbol(&self, width: u32) -> String {
        match self {
            UfOp::And => format!("bvand_{width}"),
            UfOp::Shl => format!("bvshl_{width}"),
            UfOp::Lshr => format!("bvlshr_{width}"),
        }
    }

    /// The true bit-vector function the UF abstracts, on unsigned values.
    pub fn apply(&self, a: u64, b: u64, width: u32) -> u64 {
        match self {
            UfOp::And => a & b,
            UfOp::Shl => {
                if b >= width as u64 {
                    0
                } else {
                    (a << b) & mask(width)
                }
            }
            UfOp::Lshr => {
                if b >= width as u64 {
                    0
                } else {
                    a >> b
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    // bit-vector arithmetic
    BvAdd,
    BvSub,
    BvNeg,
    BvMul,
    BvUdiv,
    BvUrem,
    BvSdiv,
    BvSrem,
    BvSmod,
    // bit-wise
    BvNot,
    BvAnd,
    BvOr,
    BvXor,
    BvNand,
    BvNor,
    BvXnor,
    BvComp,
    // shifts
    BvShl,
    BvLshr,
    BvAshr,
    // structural
    Concat,
    Extract { high: u32, low: u32 },
    ZeroExtend(u32),
    SignExtend(u32),
    RotateLeft(u32),
    RotateRight(u32),
    Repeat(u32),
    // bit-vector predicates
    BvUlt,
    BvUle,
    BvUgt,
    BvUge,
    BvSlt,
    BvSle,
    BvSgt,
    BvSge,
    // polymorphic
    Eq,
    Distinct,
    Ite,
    // boolean
    And,
    Or,
    Not,
    Xor,
    Implies,
    // integer arithmetic (translation target)
    IntAdd,
    IntSub,
    IntNeg,
    IntMul,
    IntDiv,
    IntMod,
    IntLt,
    IntLe,
    IntGt,
    IntGe,
    // width-indexed uninterpreted functions
    Uf(UfOp, u32),
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum TermKind {
    BoolLit(bool),
    IntLit(i128),
    BvLit(BvLit),
    Var(String),
    /// Application of a `define-fun` macro, removed by `expand_defines`.
    FunApp(String, Vec<Term>),
    App(Op, Vec<Term>),
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct TermData {
    kind: TermKind,
    sort: Sort,
}

/// An immutable, sorted term. Cloning is cheap; equality is structural.
#[derive(Clone, Eq)]
pub struct Term(Arc<TermData>);

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0 == other.0
    }
}

impl std::hash::Hash for Term {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state);
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::printer::term_to_string(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::printer::term_to_string(self))
    }
}

impl Term {
    fn new(kind: TermKind, sort: Sort) -> Self {
        Term(Arc::new(TermData { kind, sort }))
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    /// Allocation identity, usable as a memoization key within a scope that
    /// keeps the term alive.
    pub fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn sort(&self) -> Sort {
        self.0.sort
    }

    /// Width of a bit-vector sorted term; panics otherwise.
    pub fn width(&self) -> u32 {
        self.sort().width()
    }

    // ---- leaf constructors ----

    pub fn bool_lit(b: bool) -> Self {
        Term::new(TermKind::BoolLit(b), Sort::Bool)
    }

    pub fn tru() -> Self {
        Term::bool_lit(true)
    }

    pub fn fls() -> Self {
        Term::bool_lit(false)
    }

    pub fn int_lit(v: i128) -> Self {
        Term::new(TermKind::IntLit(v), Sort::Int)
    }

    pub fn bv_lit(value: u64, width: u32) -> Self {
        let lit = BvLit::new(value, width);
        Term::new(TermKind::BvLit(lit), Sort::BitVec(width))
    }

    pub fn var(name: impl Into<String>, sort: Sort) -> Self {
        Term::new(TermKind::Var(name.into()), sort)
    }

    /// Application of a defined function; the sort is the declared return sort.
    pub fn fun_app(name: impl Into<String>, args: Vec<Term>, ret: Sort) -> Self {
        Term::new(TermKind::FunApp(name.into(), args), ret)
    }

    // ---- checked application ----

    /// Builds an operator application, computing and checking the sort.
    pub fn app(op: Op, args: Vec<Term>) -> Result<Self, SortError> {
        let sort = infer_sort(op, &args)?;
        Ok(Term::new(TermKind::App(op, args), sort))
    }

    /// Unchecked-by-caller application for internal construction where the
    /// typing invariant holds by construction. Panics on a sort error.
    pub fn apply(op: Op, args: Vec<Term>) -> Self {
        Term::app(op, args).expect("internal term construction is sort-correct")
    }

    // ---- common builders ----

    pub fn eq(a: Term, b: Term) -> Self {
        Term::apply(Op::Eq, vec![a, b])
    }

    pub fn not(a: Term) -> Self {
        Term::apply(Op::Not, vec![a])
    }

    pub fn ite(c: Term, t: Term, e: Term) -> Self {
        Term::apply(Op::Ite, vec![c, t, e])
    }

    pub fn implies(a: Term, b: Term) -> Self {
        Term::apply(Op::Implies, vec![a, b])
    }

    /// Conjunction helper: empty -> true, singleton -> the term itself.
    pub fn and_all(mut ts: Vec<Term>) -> Self {
        match ts.len() {
            0 => Term::tru(),
            1 => ts.pop().unwrap(),
            _ => Term::apply(Op::And, ts),
        }
    }

    /// Disjunction helper: empty -> false, singleton -> the term itself.
    pub fn or_all(mut ts: Vec<Term>) -> Self {
        match ts.len() {
            0 => Term::fls(),
            1 => ts.pop().unwrap(),
            _ => Term::apply(Op::Or, ts),
        }
    }

    pub fn int_add(a: Term, b: Term) -> Self {
        Term::apply(Op::IntAdd, vec![a, b])
    }

    pub fn int_sub(a: Term, b: Term) -> Self {
        Term::apply(Op::IntSub, vec![a, b])
    }

    pub fn int_mul(a: Term, b: Term) -> Self {
        Term::apply(Op::IntMul, vec![a, b])
    }

    pub fn int_div(a: Term, b: Term) -> Self {
        Term::apply(Op::IntDiv, vec![a, b])
    }

    pub fn int_mod(a: Term, b: Term) -> Self {
        Term::apply(Op::IntMod, vec![a, b])
    }

    pub fn int_lt(a: Term, b: Term) -> Self {
        Term::apply(Op::IntLt, vec![a, b])
    }

    pub fn int_le(a: Term, b: Term) -> Self {
        Term::apply(Op::IntLe, vec![a, b])
    }

    pub fn int_ge(a: Term, b: Term) -> Self {
        Term::apply(Op::IntGe, vec![a, b])
    }

    // ---- traversal ----

    pub fn children(&self) -> &[Term] {
        match self.kind() {
            TermKind::App(_, args) | TermKind::FunApp(_, args) => args,
            _ => &[],
        }
    }

    /// All free variable names with their sorts, in first-occurrence order
    /// (left-to-right depth-first).
    pub fn free_vars(&self) -> Vec<(String, Sort)> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        self.visit(&mut |t| {
            if let TermKind::Var(name) = t.kind() {
                if seen.insert(name.clone()) {
                    out.push((name.clone(), t.sort()));
                }
            }
        });
        out
    }

    /// Left-to-right pre-order visit; shared subterms are visited once.
    pub fn visit(&self, f: &mut impl FnMut(&Term)) {
        fn go(
            t: &Term,
            seen: &mut std::collections::HashSet<*const TermData>,
            f: &mut impl FnMut(&Term),
        ) {
            if !seen.insert(Arc::as_ptr(&t.0)) {
                return;
            }
            f(t);
            for c in t.children() {
                go(c, seen, f);
            }
        }
        go(self, &mut std::collections::HashSet::new(), f);
    }

    /// Number of nodes in the term viewed as a tree (shared nodes re-counted).
    pub fn tree_size(&self) -> usize {
        let mut memo: std::collections::HashMap<*const TermData, usize> =
            std::collections::HashMap::new();
        fn go(
            t: &Term,
            memo: &mut std::collections::HashMap<*const TermData, usize>,
        ) -> usize {
            let key = Arc::as_ptr(&t.0);
            if let Some(&n) = memo.get(&key) {
                return n;
            }
            let n = 1 + t.children().iter().map(|c| go(c, memo)).sum::<usize>();
            memo.insert(key, n);
            n
        }
        go(self, &mut memo)
    }
}

/// Sort inference / checking for one application. The single source of truth
/// for the typing rules; the parser and all internal constructors route here.
pub fn infer_sort(op: Op, args: &[Term]) -> Result<Sort, SortError> {
    use Op::*;

    let arity = |n: usize| -> Result<(), SortError> {
        if args.len() == n {
            Ok(())
        } else {
            Err(SortError::Arity {
                op: op_name(op),
                expected: n,
                got: args.len(),
            })
        }
    };
    let bv_arg = |i: usize| -> Result<u32, SortError> {
        match args[i].sort() {
            Sort::BitVec(w) => Ok(w),
            s => Err(SortError::Expected {
                op: op_name(op),
                expected: "a bit-vector",
                got: s,
            }),
        }
    };
    let same_bv2 = || -> Result<u32, SortError> {
        arity(2)?;
        let (w1, w2) = (bv_arg(0)?, bv_arg(1)?);
        if w1 != w2 {
            return Err(SortError::Mismatch {
                op: op_name(op),
                left: args[0].sort(),
                right: args[1].sort(),
            });
        }
        Ok(w1)
    };
    let bool_args = |n: usize| -> Result<(), SortError> {
        arity(n)?;
        for a in args {
            if a.sort() != Sort::Bool {
                return Err(SortError::Expected {
                    op: op_name(op),
                    expected: "Bool",
                    got: a.sort(),
                });
            }
        }
        Ok(())
    };
    let int_args = |n: usize| -> Result<(), SortError> {
        arity(n)?;
        for a in args {
            if a.sort() != Sort::Int {
                return Err(SortError::Expected {
                    op: op_name(op),
                    expected: "Int",
                    got: a.sort(),
                });
            }
        }
        Ok(())
    };
    let check_width = |w: u32| -> Result<u32, SortError> {
        if (1..=MAX_WIDTH).contains(&w) {
            Ok(w)
        } else {
            Err(SortError::WidthOutOfRange { width: w })
        }
    };

    match op {
        BvAdd | BvSub | BvMul | BvUdiv | BvUrem | BvSdiv | BvSrem | BvSmod | BvAnd | BvOr
        | BvXor | BvNand | BvNor | BvXnor | BvShl | BvLshr | BvAshr => {
            Ok(Sort::BitVec(same_bv2()?))
        }
        BvNeg | BvNot => {
            arity(1)?;
            Ok(Sort::BitVec(bv_arg(0)?))
        }
        BvComp => {
            same_bv2()?;
            Ok(Sort::BitVec(1))
        }
        Concat => {
            arity(2)?;
            let (m, n) = (bv_arg(0)?, bv_arg(1)?);
            Ok(Sort::BitVec(check_width(m + n)?))
        }
        Extract { high, low } => {
            arity(1)?;
            let w = bv_arg(0)?;
            if !(high < w && low <= high) {
                return Err(SortError::BadExtract { high, low, width: w });
            }
            Ok(Sort::BitVec(high - low + 1))
        }
        ZeroExtend(n) | SignExtend(n) => {
            arity(1)?;
            let w = bv_arg(0)?;
            Ok(Sort::BitVec(check_width(w + n)?))
        }
        RotateLeft(_) | RotateRight(_) => {
            arity(1)?;
            Ok(Sort::BitVec(bv_arg(0)?))
        }
        Repeat(n) => {
            arity(1)?;
            let w = bv_arg(0)?;
            if n < 1 {
                return Err(SortError::BadRepeat);
            }
            Ok(Sort::BitVec(check_width(
                w.checked_mul(n).ok_or(SortError::WidthOutOfRange { width: u32::MAX })?,
            )?))
        }
        BvUlt | BvUle | BvUgt | BvUge | BvSlt | BvSle | BvSgt | BvSge => {
            same_bv2()?;
            Ok(Sort::Bool)
        }
        Eq => {
            arity(2)?;
            if args[0].sort() != args[1].sort() {
                return Err(SortError::Mismatch {
                    op: op_name(op),
                    left: args[0].sort(),
                    right: args[1].sort(),
                });
            }
            Ok(Sort::Bool)
        }
        Distinct => {
            if args.len() < 2 {
                return Err(SortError::Arity {
                    op: op_name(op),
                    expected: 2,
                    got: args.len(),
                });
            }
            let s0 = args[0].sort();
            for a in &args[1..] {
                if a.sort() != s0 {
                    return Err(SortError::Mismatch {
                        op: op_name(op),
                        left: s0,
                        right: a.sort(),
                    });
                }
            }
            Ok(Sort::Bool)
        }
        Ite => {
            arity(3)?;
            if args[0].sort() != Sort::Bool {
                return Err(SortError::Expected {
                    op: op_name(op),
                    expected: "Bool",
                    got: args[0].sort(),
                });
            }
            if args[1].sort() != args[2].sort() {
                return Err(SortError::Mismatch {
                    op: op_name(op),
                    left: args[1].sort(),
                    right: args[2].sort(),
                });
            }
            Ok(args[1].sort())
        }
        And | Or => {
            if args.len() < 2 {
                return Err(SortError::Arity {
                    op: op_name(op),
                    expected: 2,
                    got: args.len(),
                });
            }
            for a in args {
                if a.sort() != Sort::Bool {
                    return Err(SortError::Expected {
                        op: op_name(op),
                        expected: "Bool",
                        got: a.sort(),
                    });
                }
            }
            Ok(Sort::Bool)
        }
        Not => {
            bool_args(1)?;
            Ok(Sort::Bool)
        }
        Xor | Implies => {
            bool_args(2)?;
            Ok(Sort::Bool)
        }
        IntAdd | IntSub | IntMul | IntDiv | IntMod => {
            int_args(2)?;
            Ok(Sort::Int)
        }
        IntNeg => {
            int_args(1)?;
            Ok(Sort::Int)
        }
        IntLt | IntLe | IntGt | IntGe => {
            int_args(2)?;
            Ok(Sort::Bool)
        }
        Uf(_, w) => {
            int_args(2)?;
            check_width(w)?;
            Ok(Sort::Int)
        }
    }
}

/// SMT-LIB concrete-syntax name of an operator (head symbol only).
pub fn op_name(op: Op) -> &'static str {
    use Op::*;
    match op {
        BvAdd => "bvadd",
        BvSub => "bvsub",
        BvNeg => "bvneg",
        BvMul => "bvmul",
        BvUdiv => "bvudiv",
        BvUrem => "bvurem",
        BvSdiv => "bvsdiv",
        BvSrem => "bvsrem",
        BvSmod => "bvsmod",
        BvNot => "bvnot",
        BvAnd => "bvand",
        BvOr => "bvor",
        BvXor => "bvxor",
        BvNand => "bvnand",
        BvNor => "bvnor",
        BvXnor => "bvxnor",
        BvComp => "bvcomp",
        BvShl => "bvshl",
        BvLshr => "bvlshr",
        BvAshr => "bvashr",
        Concat => "concat",
        Extract { .. } => "extract",
        ZeroExtend(_) => "zero_extend",
        SignExtend(_) => "sign_extend",
        RotateLeft(_) => "rotate_left",
        RotateRight(_) => "rotate_right",
        Repeat(_) => "repeat",
        BvUlt => "bvult",
        BvUle => "bvule",
        BvUgt => "bvugt",
        BvUge => "bvuge",
        BvSlt => "bvslt",
        BvSle => "bvsle",
        BvSgt => "bvsgt",
        BvSge => "bvsge",
        Eq => "=",
        Distinct => "distinct",
        Ite => "ite",
        And => "and",
        Or => "or",
        Not => "not",
        Xor => "xor",
        Implies => "=>",
        IntAdd => "+",
        IntSub => "-",
        IntNeg => "-",
        IntMul => "*",
        IntDiv => "div",
        IntMod => "mod",
        IntLt => "<",
        IntLe => "<=",
        IntGt => ">",
        IntGe => ">=",
        Uf(UfOp::And, _) => "bvand_k",
        Uf(UfOp::Shl, _) => "bvshl_k",
        Uf(UfOp::Lshr, _) => "bvlshr_k",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structural_equality() {
        let x = Term::var("x", Sort::BitVec(4));
        let y = Term::var("x", Sort::BitVec(4));
        let t1 = Term::apply(Op::BvAdd, vec![x.clone(), Term::bv_lit(3, 4)]);
        let t2 = Term::apply(Op::BvAdd, vec![y, Term::bv_lit(3, 4)]);
        assert_eq!(t1, t2);
        assert_ne!(t1, x);
    }

    #[test]
    fn sort_inference_rejects_mixed_widths() {
        let a = Term::var("a", Sort::BitVec(4));
        let b = Term::var("b", Sort::BitVec(3));
        assert!(Term::app(Op::BvAdd, vec![a, b]).is_err());
    }

    #[test]
    fn extract_bounds() {
        let a = Term::var("a", Sort::BitVec(4));
        let t = Term::app(Op::Extract { high: 2, low: 1 }, vec![a.clone()]).unwrap();
        assert_eq!(t.sort(), Sort::BitVec(2));
        assert!(Term::app(Op::Extract { high: 4, low: 0 }, vec![a.clone()]).is_err());
        assert!(Term::app(Op::Extract { high: 1, low: 2 }, vec![a]).is_err());
    }

    #[test]
    fn width_cap_enforced() {
        let a = Term::var("a", Sort::BitVec(40));
        let b = Term::var("b", Sort::BitVec(30));
        assert!(Term::app(Op::Concat, vec![a, b]).is_err());
    }

    #[test]
    fn uf_apply_semantics() {
        assert_eq!(UfOp::And.apply(12, 10, 4), 8);
        assert_eq!(UfOp::Shl.apply(3, 2, 4), 12);
        assert_eq!(UfOp::Shl.apply(3, 4, 4), 0);
        assert_eq!(UfOp::Lshr.apply(9, 4, 4), 0);
        assert_eq!(UfOp::Lshr.apply(9, 1, 4), 4);
    }

    #[test]
    fn free_vars_in_order() {
        let x = Term::var("x", Sort::BitVec(2));
        let y = Term::var("y", Sort::BitVec(2));
        let t = Term::apply(Op::BvUlt, vec![Term::apply(Op::BvAdd, vec![x, y.clone()]), y]);
        let vars: Vec<String> = t.free_vars().into_iter().map(|(n, _)| n).collect();
        assert_eq!(vars, vec!["x", "y"]);
    }
}
