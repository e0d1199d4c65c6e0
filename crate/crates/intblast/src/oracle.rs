// SPDX-License-Identifier: Apache-2.0

//! Ground-truth evaluation and brute-force satisfiability.
//!
//! This module is the independent oracle: it implements SMT-LIB QF_BV
//! semantics directly on unsigned values (including the division-by-zero
//! conventions and the signed operators), plus the integer fragment with the
//! abstraction UFs interpreted as the true bit-vector functions. Everything
//! else in the crate is checked against it, so it stays deliberately simple.

use std::collections::{BTreeMap, HashMap};

use crate::term::{mask, pow2, Op, Sort, Term, TermKind};

/// Enumeration budget: refuse once the product of domain sizes exceeds this.
pub const ENUM_BUDGET: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Value {
    Bool(bool),
    Bv { value: u64, width: u32 },
    Int(i128),
}

impl Value {
    pub fn as_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            other => panic!("expected Bool value, got {other:?}"),
        }
    }

    pub fn as_bv(&self) -> (u64, u32) {
        match self {
            Value::Bv { value, width } => (*value, *width),
            other => panic!("expected bit-vector value, got {other:?}"),
        }
    }

    pub fn as_int(&self) -> i128 {
        match self {
            Value::Int(v) => *v,
            other => panic!("expected Int value, got {other:?}"),
        }
    }
}

/// A total assignment of values to variables, ordered by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    map: BTreeMap<String, Value>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) {
        self.map.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.map.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.map.iter()
    }
}

/// Signed reinterpretation of an unsigned width-k value.
pub fn to_signed(value: u64, width: u32) -> i128 {
    let v = value as i128;
    if v >= pow2(width - 1) {
        v - pow2(width)
    } else {
        v
    }
}

fn wrap(v: i128, width: u32) -> u64 {
    v.rem_euclid(pow2(width)) as u64
}

/// Evaluates a term under a total assignment. SMT-LIB semantics throughout:
/// total division conventions, Euclidean `div`/`mod`, abstraction UFs as the
/// true bit-vector functions. Panics on unassigned variables or unexpanded
/// definitions; those are caller contract violations, not input errors.
pub fn eval(t: &Term, assignment: &Assignment) -> Value {
    let mut memo = HashMap::new();
    eval_memo(t, assignment, &mut memo)
}

/// `eval` specialized to Bool-sorted terms.
pub fn eval_bool(t: &Term, assignment: &Assignment) -> bool {
    eval(t, assignment).as_bool()
}

type Memo = HashMap<usize, Value>;

fn eval_memo(t: &Term, sigma: &Assignment, memo: &mut Memo) -> Value {
    // keyed by allocation identity: shared subterms evaluate once
    let key = t.ptr_id();
    if let Some(v) = memo.get(&key) {
        return *v;
    }
    let value = compute(t, sigma, memo);
    memo.insert(key, value);
    value
}

fn compute(t: &Term, sigma: &Assignment, memo: &mut Memo) -> Value {
    use Op::*;
    let (op, args) = match t.kind() {
        TermKind::BoolLit(b) => return Value::Bool(*b),
        TermKind::IntLit(v) => return Value::Int(*v),
        TermKind::BvLit(lit) => {
            return Value::Bv {
                value: lit.value(),
                width: lit.width(),
            }
        }
        TermKind::Var(name) => {
            return sigma
                .get(name)
                .unwrap_or_else(|| panic!("unassigned variable `{name}`"))
        }
        TermKind::FunApp(name, _) => panic!("unexpanded definition `{name}` in evaluation"),
        TermKind::App(op, args) => (*op, args),
    };

    // ite is lazy so that guarded divisions never evaluate the dead branch
    if op == Ite {
        let c = eval_memo(&args[0], sigma, memo).as_bool();
        let branch = if c { &args[1] } else { &args[2] };
        return eval_memo(branch, sigma, memo);
    }

    let vals: Vec<Value> = args.iter().map(|a| eval_memo(a, sigma, memo)).collect();

    let bv1 = || vals[0].as_bv();
    let bv2 = || (vals[0].as_bv(), vals[1].as_bv());
    let int2 = || (vals[0].as_int(), vals[1].as_int());

    match op {
        BvAdd => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: wrap(a as i128 + b as i128, w),
                width: w,
            }
        }
        BvSub => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: wrap(a as i128 - b as i128, w),
                width: w,
            }
        }
        BvNeg => {
            let (a, w) = bv1();
            Value::Bv {
                value: wrap(-(a as i128), w),
                width: w,
            }
        }
        BvMul => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: wrap(a as i128 * b as i128, w),
                width: w,
            }
        }
        BvUdiv => {
            let ((a, w), (b, _)) = bv2();
            let value = if b == 0 { mask(w) } else { a / b };
            Value::Bv { value, width: w }
        }
        BvUrem => {
            let ((a, w), (b, _)) = bv2();
            let value = if b == 0 { a } else { a % b };
            Value::Bv { value, width: w }
        }
        BvSdiv => {
            let ((a, w), (b, _)) = bv2();
            let (sa, sb) = (to_signed(a, w), to_signed(b, w));
            let value = if sb == 0 {
                if sa < 0 {
                    1
                } else {
                    mask(w)
                }
            } else {
                wrap(sa / sb, w)
            };
            Value::Bv { value, width: w }
        }
        BvSrem => {
            let ((a, w), (b, _)) = bv2();
            let (sa, sb) = (to_signed(a, w), to_signed(b, w));
            let value = if sb == 0 { a } else { wrap(sa % sb, w) };
            Value::Bv { value, width: w }
        }
        BvSmod => {
            let ((a, w), (b, _)) = bv2();
            let (sa, sb) = (to_signed(a, w), to_signed(b, w));
            let value = if sb == 0 {
                a
            } else {
                let mut r = sa % sb;
                if r != 0 && (r < 0) != (sb < 0) {
                    r += sb;
                }
                wrap(r, w)
            };
            Value::Bv { value, width: w }
        }
        BvNot => {
            let (a, w) = bv1();
            Value::Bv {
                value: !a & mask(w),
                width: w,
            }
        }
        BvAnd => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: a & b,
                width: w,
            }
        }
        BvOr => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: a | b,
                width: w,
            }
        }
        BvXor => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: a ^ b,
                width: w,
            }
        }
        BvNand => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: !(a & b) & mask(w),
                width: w,
            }
        }
        BvNor => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: !(a | b) & mask(w),
                width: w,
            }
        }
        BvXnor => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: !(a ^ b) & mask(w),
                width: w,
            }
        }
        BvComp => {
            let ((a, _), (b, _)) = bv2();
            Value::Bv {
                value: (a == b) as u64,
                width: 1,
            }
        }
        BvShl => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: crate::term::UfOp::Shl.apply(a, b, w),
                width: w,
            }
        }
        BvLshr => {
            let ((a, w), (b, _)) = bv2();
            Value::Bv {
                value: crate::term::UfOp::Lshr.apply(a, b, w),
                width: w,
            }
        }
        BvAshr => {
            let ((a, w), (b, _)) = bv2();
            let sa = to_signed(a, w);
            let value = if b >= w as u64 {
                if sa < 0 {
                    mask(w)
                } else {
                    0
                }
            } else {
                wrap(sa >> b, w)
            };
            Value::Bv { value, width: w }
        }
        Concat => {
            let ((a, m), (b, n)) = bv2();
            Value::Bv {
                value: (a << n) | b,
                width: m + n,
            }
        }
        Extract { high, low } => {
            let (a, _) = bv1();
            let w = high - low + 1;
            Value::Bv {
                value: (a >> low) & mask(w),
                width: w,
            }
        }
        ZeroExtend(n) => {
            let (a, w) = bv1();
            Value::Bv {
                value: a,
                width: w + n,
            }
        }
        SignExtend(n) => {
            let (a, w) = bv1();
            let value = if n > 0 && (a >> (w - 1)) & 1 == 1 {
                a | (mask(n) << w)
            } else {
                a
            };
            Value::Bv {
                value,
                width: w + n,
            }
        }
        RotateLeft(n) => {
            let (a, w) = bv1();
            let r = n % w;
            let value = if r == 0 {
                a
            } else {
                ((a << r) | (a >> (w - r))) & mask(w)
            };
            Value::Bv { value, width: w }
        }
        RotateRight(n) => {
            let (a, w) = bv1();
            let r = n % w;
            let value = if r == 0 {
                a
            } else {
                ((a >> r) | (a << (w - r))) & mask(w)
            };
            Value::Bv { value, width: w }
        }
        Repeat(n) => {
            let (a, w) = bv1();
            let mut value = 0u64;
            for _ in 0..n {
                value = (value << w) | a;
            }
            Value::Bv {
                value,
                width: w * n,
            }
        }
        BvUlt => {
            let ((a, _), (b, _)) = bv2();
            Value::Bool(a < b)
        }
        BvUle => {
            let ((a, _), (b, _)) = bv2();
            Value::Bool(a <= b)
        }
        BvUgt => {
            let ((a, _), (b, _)) = bv2();
            Value::Bool(a > b)
        }
        BvUge => {
            let ((a, _), (b, _)) = bv2();
            Value::Bool(a >= b)
        }
        BvSlt => {
            let ((a, w), (b, _)) = bv2();
            Value::Bool(to_signed(a, w) < to_signed(b, w))
        }
        BvSle => {
            let ((a, w), (b, _)) = bv2();
            Value::Bool(to_signed(a, w) <= to_signed(b, w))
        }
        BvSgt => {
            let ((a, w), (b, _)) = bv2();
            Value::Bool(to_signed(a, w) > to_signed(b, w))
        }
        BvSge => {
            let ((a, w), (b, _)) = bv2();
            Value::Bool(to_signed(a, w) >= to_signed(b, w))
        }
        Eq => Value::Bool(vals[0] == vals[1]),
        Distinct => {
            for i in 0..vals.len() {
                for j in i + 1..vals.len() {
                    if vals[i] == vals[j] {
                        return Value::Bool(false);
                    }
                }
            }
            Value::Bool(true)
        }
        Ite => unreachable!("handled above"),
        And => Value::Bool(vals.iter().all(|v| v.as_bool())),
        Or => Value::Bool(vals.iter().any(|v| v.as_bool())),
        Not => Value::Bool(!vals[0].as_bool()),
        Xor => Value::Bool(vals[0].as_bool() ^ vals[1].as_bool()),
        Implies => Value::Bool(!vals[0].as_bool() || vals[1].as_bool()),
        IntAdd => {
            let (a, b) = int2();
            Value::Int(a.checked_add(b).expect("integer overflow"))
        }
        IntSub => {
            let (a, b) = int2();
            Value::Int(a.checked_sub(b).expect("integer overflow"))
        }
        IntNeg => Value::Int(-vals[0].as_int()),
        IntMul => {
            let (a, b) = int2();
            Value::Int(a.checked_mul(b).expect("integer overflow"))
        }
        IntDiv => {
            let (a, b) = int2();
            assert!(b != 0, "division by zero in integer term");
            Value::Int(a.div_euclid(b))
        }
        IntMod => {
            let (a, b) = int2();
            assert!(b != 0, "modulo by zero in integer term");
            Value::Int(a.rem_euclid(b))
        }
        IntLt => {
            let (a, b) = int2();
            Value::Bool(a < b)
        }
        IntLe => {
            let (a, b) = int2();
            Value::Bool(a <= b)
        }
        IntGt => {
            let (a, b) = int2();
            Value::Bool(a > b)
        }
        IntGe => {
            let (a, b) = int2();
            Value::Bool(a >= b)
        }
        Uf(uf, w) => {
            let (a, b) = int2();
            let m = mask(w) as i128;
            assert!(
                (0..=m).contains(&a) && (0..=m).contains(&b),
                "UF argument out of range for width {w}"
            );
            Value::Int(uf.apply(a as u64, b as u64, w) as i128)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    Sat(Assignment),
    Unsat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivOutcome {
    Equivalent,
    Counterexample(Assignment),
}

/// The enumeration would exceed [`ENUM_BUDGET`] assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("enumeration budget of 2^24 assignments exceeded")]
pub struct BudgetExceeded;

/// Domain of a variable, in ascending enumeration order.
fn domain(sort: Sort) -> Vec<Value> {
    match sort {
        Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
        Sort::BitVec(w) => (0..=mask(w))
            .map(|value| Value::Bv { value, width: w })
            .collect(),
        Sort::Int => panic!("oracle cannot enumerate integer variables"),
    }
}

fn domain_size(sort: Sort) -> u128 {
    match sort {
        Sort::Bool => 2,
        Sort::BitVec(w) => 1u128 << w,
        Sort::Int => panic!("oracle cannot enumerate integer variables"),
    }
}

/// Enumerates assignments over `vars` (already sorted) in lexicographic
/// order, calling `f` until it returns `Some`.
fn enumerate<T>(
    vars: &[(String, Sort)],
    f: &mut impl FnMut(&Assignment) -> Option<T>,
) -> Result<Option<T>, BudgetExceeded> {
    let mut total: u128 = 1;
    for (_, sort) in vars {
        total = total.saturating_mul(domain_size(*sort));
        if total > ENUM_BUDGET {
            return Err(BudgetExceeded);
        }
    }
    let domains: Vec<Vec<Value>> = vars.iter().map(|(_, s)| domain(*s)).collect();
    let mut indices = vec![0usize; vars.len()];
    let mut sigma = Assignment::new();
    loop {
        for (i, (name, _)) in vars.iter().enumerate() {
            sigma.set(name.clone(), domains[i][indices[i]]);
        }
        if let Some(out) = f(&sigma) {
            return Ok(Some(out));
        }
        // odometer increment, last variable fastest
        let mut i = vars.len();
        loop {
            if i == 0 {
                return Ok(None);
            }
            i -= 1;
            indices[i] += 1;
            if indices[i] < domains[i].len() {
                break;
            }
            indices[i] = 0;
        }
    }
}

/// Sorted free variables of a set of terms.
fn sorted_vars(terms: &[&Term]) -> Vec<(String, Sort)> {
    let mut vars: Vec<(String, Sort)> = Vec::new();
    for t in terms {
        for (name, sort) in t.free_vars() {
            if !vars.iter().any(|(n, _)| *n == name) {
                vars.push((name, sort));
            }
        }
    }
    vars.sort();
    vars
}

/// Decides a Bool-sorted formula by exhaustive enumeration, returning the
/// lexicographically first satisfying assignment (variables sorted by name,
/// values ascending).
pub fn brute_force_sat(formula: &Term) -> Result<SatOutcome, BudgetExceeded> {
    assert_eq!(formula.sort(), Sort::Bool, "formula must be Bool-sorted");
    let vars = sorted_vars(&[formula]);
    let hit = enumerate(&vars, &mut |sigma| {
        if eval_bool(formula, sigma) {
            Some(sigma.clone())
        } else {
            None
        }
    })?;
    Ok(match hit {
        Some(sigma) => SatOutcome::Sat(sigma),
        None => SatOutcome::Unsat,
    })
}

/// Exhaustively compares two same-sorted terms, returning the first
/// distinguishing assignment if any.
pub fn check_equiv(lhs: &Term, rhs: &Term) -> Result<EquivOutcome, BudgetExceeded> {
    assert_eq!(lhs.sort(), rhs.sort(), "terms must share a sort");
    let vars = sorted_vars(&[lhs, rhs]);
    let hit = enumerate(&vars, &mut |sigma| {
        if eval(lhs, sigma) != eval(rhs, sigma) {
            Some(sigma.clone())
        } else {
            None
        }
    })?;
    Ok(match hit {
        Some(sigma) => EquivOutcome::Counterexample(sigma),
        None => EquivOutcome::Equivalent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Op;

    fn bv(v: u64, w: u32) -> Term {
        Term::bv_lit(v, w)
    }

    fn ebv(t: &Term) -> u64 {
        eval(t, &Assignment::new()).as_bv().0
    }

    #[test]
    fn bitwise_and_example() {
        assert_eq!(ebv(&Term::apply(Op::BvAnd, vec![bv(12, 4), bv(10, 4)])), 8);
    }

    #[test]
    fn division_by_zero_conventions() {
        assert_eq!(ebv(&Term::apply(Op::BvUdiv, vec![bv(7, 4), bv(0, 4)])), 15);
        assert_eq!(ebv(&Term::apply(Op::BvUrem, vec![bv(7, 4), bv(0, 4)])), 7);
        // signed: negative dividend by zero gives 1, non-negative all-ones
        assert_eq!(ebv(&Term::apply(Op::BvSdiv, vec![bv(13, 4), bv(0, 4)])), 1);
        assert_eq!(ebv(&Term::apply(Op::BvSdiv, vec![bv(3, 4), bv(0, 4)])), 15);
        assert_eq!(ebv(&Term::apply(Op::BvSrem, vec![bv(13, 4), bv(0, 4)])), 13);
        assert_eq!(ebv(&Term::apply(Op::BvSmod, vec![bv(13, 4), bv(0, 4)])), 13);
    }

    #[test]
    fn smod_follows_divisor_sign() {
        // 13@4 is -3; -3 smod 5 = 2
        assert_eq!(ebv(&Term::apply(Op::BvSmod, vec![bv(13, 4), bv(5, 4)])), 2);
        // 3 smod -5 (11@4): result takes the divisor's sign: 3 % -5 -> -2 -> 14
        assert_eq!(ebv(&Term::apply(Op::BvSmod, vec![bv(3, 4), bv(11, 4)])), 14);
    }

    #[test]
    fn arithmetic_shift() {
        assert_eq!(ebv(&Term::apply(Op::BvAshr, vec![bv(8, 4), bv(1, 4)])), 12);
        assert_eq!(ebv(&Term::apply(Op::BvAshr, vec![bv(8, 4), bv(9, 4)])), 15);
        assert_eq!(ebv(&Term::apply(Op::BvAshr, vec![bv(7, 4), bv(9, 4)])), 0);
    }

    #[test]
    fn rotates_and_repeat() {
        let t = Term::apply(Op::RotateLeft(1), vec![bv(1, 3)]);
        assert_eq!(ebv(&t), 2);
        let t = Term::apply(Op::RotateRight(1), vec![bv(1, 3)]);
        assert_eq!(ebv(&t), 4);
        let t = Term::apply(Op::Repeat(2), vec![bv(2, 2)]);
        assert_eq!(ebv(&t), 10); // 10 10
    }

    #[test]
    fn brute_force_finds_first_witness() {
        let x = Term::var("x", Sort::BitVec(2));
        let f = Term::apply(Op::BvUlt, vec![x, bv(1, 2)]);
        match brute_force_sat(&f).unwrap() {
            SatOutcome::Sat(sigma) => {
                assert_eq!(sigma.get("x"), Some(Value::Bv { value: 0, width: 2 }))
            }
            SatOutcome::Unsat => panic!("expected sat"),
        }
    }

    #[test]
    fn contradiction_is_unsat() {
        let x = Term::var("x", Sort::BitVec(2));
        let f = Term::apply(Op::Distinct, vec![x.clone(), x]);
        assert_eq!(brute_force_sat(&f).unwrap(), SatOutcome::Unsat);
    }

    #[test]
    fn budget_is_enforced() {
        // 25 width-1 variables exceed the 2^24 assignment budget
        let vars: Vec<Term> = (0..25)
            .map(|i| Term::var(format!("v{i:02}"), Sort::BitVec(1)))
            .collect();
        let eqs: Vec<Term> = vars.iter().map(|v| Term::eq(v.clone(), v.clone())).collect();
        let f = Term::and_all(eqs);
        assert_eq!(brute_force_sat(&f), Err(BudgetExceeded));
    }

    #[test]
    fn equiv_finds_counterexamples() {
        let a = Term::var("a", Sort::BitVec(2));
        let b = Term::var("b", Sort::BitVec(2));
        let xor = Term::apply(Op::BvXor, vec![a.clone(), b.clone()]);
        let add = Term::apply(Op::BvAdd, vec![a.clone(), b.clone()]);
        match check_equiv(&xor, &add).unwrap() {
            EquivOutcome::Counterexample(sigma) => {
                // first difference in lexicographic order: a=1, b=1
                assert_eq!(sigma.get("a"), Some(Value::Bv { value: 1, width: 2 }));
                assert_eq!(sigma.get("b"), Some(Value::Bv { value: 1, width: 2 }));
            }
            EquivOutcome::Equivalent => panic!("xor is not add"),
        }
        assert_eq!(check_equiv(&xor, &xor).unwrap(), EquivOutcome::Equivalent);
    }

    #[test]
    fn lazy_ite_guards_division() {
        // ite guards division by zero: must not panic
        let zero = Term::int_lit(0);
        let t = Term::ite(
            Term::eq(zero.clone(), zero.clone()),
            Term::int_lit(7),
            Term::int_div(Term::int_lit(1), zero.clone()),
        );
        assert_eq!(eval(&t, &Assignment::new()).as_int(), 7);
    }

    #[test]
    fn euclidean_div_mod() {
        // (a - b) mod 16 with a - b negative stays non-negative
        let t = Term::int_mod(
            Term::int_sub(Term::int_lit(3), Term::int_lit(8)),
            Term::int_lit(16),
        );
        assert_eq!(eval(&t, &Assignment::new()).as_int(), 11);
    }

    #[test]
    fn uf_true_interpretation() {
        let t = Term::apply(
            Op::Uf(crate::term::UfOp::And, 4),
            vec![Term::int_lit(12), Term::int_lit(10)],
        );
        assert_eq!(eval(&t, &Assignment::new()).as_int(), 8);
    }
}
