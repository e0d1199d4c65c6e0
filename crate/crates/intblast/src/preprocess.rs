// SPDX-License-Identifier: Apache-2.0

//! Derived-operator elimination.
//!
//! Rewrites a full QF_BV term into the core operator set the translator
//! understands. Everything is routed through `bvand`/`bvnot` (the abstracted
//! core plus the operator with a direct arithmetic reading); the rewrite is
//! bottom-up and applied once — rule right-hand sides only introduce core
//! operators or forms that are re-eliminated inline. No constant folding or
//! other simplification happens here.

use std::collections::{BTreeMap, HashMap};

use crate::term::{Op, Term, TermKind};

/// Operators allowed in preprocessor output.
pub fn is_core_op(op: Op) -> bool {
    use Op::*;
    matches!(
        op,
        BvAdd
            | BvSub
            | BvNeg
            | BvMul
            | BvUdiv
            | BvUrem
            | BvNot
            | BvAnd
            | BvShl
            | BvLshr
            | Concat
            | Extract { .. }
            | ZeroExtend(_)
            | SignExtend(_)
            | BvUlt
            | BvUle
            | BvSlt
            | BvSle
            | Eq
            | Ite
            | And
            | Or
            | Not
            | Xor
            | Implies
    )
}

/// First non-core operator in a term, if any.
pub fn find_non_core(t: &Term) -> Option<Op> {
    let mut found = None;
    t.visit(&mut |s| {
        if let TermKind::App(op, _) = s.kind() {
            if found.is_none() && !is_core_op(*op) {
                found = Some(*op);
            }
        }
    });
    found
}

/// Rewrites every derived operator into the core set. Total on sort-checked,
/// definition-free input; output is bit-for-bit equivalent to the input.
pub fn eliminate_derived_ops(t: &Term) -> Term {
    let mut memo = HashMap::new();
    rewrite(t, &mut memo)
}

fn rewrite(t: &Term, memo: &mut HashMap<usize, Term>) -> Term {
    if let Some(done) = memo.get(&t.ptr_id()) {
        return done.clone();
    }
    let out = rewrite_node(t, memo);
    memo.insert(t.ptr_id(), out.clone());
    out
}

fn rewrite_node(t: &Term, memo: &mut HashMap<usize, Term>) -> Term {
    use Op::*;
    if let TermKind::FunApp(name, _) = t.kind() {
        panic!("unexpanded definition `{name}` reached the preprocessor");
    }
    let TermKind::App(op, args) = t.kind() else {
        return t.clone();
    };
    let args: Vec<Term> = args.iter().map(|a| rewrite(a, memo)).collect();

    match *op {
        BvOr => or_form(args[0].clone(), args[1].clone()),
        BvXor => xor_form(args[0].clone(), args[1].clone()),
        BvNand => bvnot(Term::apply(BvAnd, args)),
        BvNor => bvnot(or_form(args[0].clone(), args[1].clone())),
        BvXnor => bvnot(xor_form(args[0].clone(), args[1].clone())),
        BvComp => Term::ite(
            Term::eq(args[0].clone(), args[1].clone()),
            Term::bv_lit(1, 1),
            Term::bv_lit(0, 1),
        ),
        BvAshr => {
            let (a, b) = (args[0].clone(), args[1].clone());
            Term::ite(
                is_nonneg(&a),
                Term::apply(BvLshr, vec![a.clone(), b.clone()]),
                bvnot(Term::apply(BvLshr, vec![bvnot(a), b])),
            )
        }
        BvSdiv => {
            let (s, t) = (args[0].clone(), args[1].clone());
            let (s_neg, t_neg) = (is_neg(&s), is_neg(&t));
            sign_cases(
                &s_neg,
                &t_neg,
                Term::apply(BvUdiv, vec![s.clone(), t.clone()]),
                bvneg(Term::apply(BvUdiv, vec![bvneg(s.clone()), t.clone()])),
                bvneg(Term::apply(BvUdiv, vec![s.clone(), bvneg(t.clone())])),
                Term::apply(BvUdiv, vec![bvneg(s), bvneg(t)]),
            )
        }
        BvSrem => {
            let (s, t) = (args[0].clone(), args[1].clone());
            let (s_neg, t_neg) = (is_neg(&s), is_neg(&t));
            sign_cases(
                &s_neg,
                &t_neg,
                Term::apply(BvUrem, vec![s.clone(), t.clone()]),
                bvneg(Term::apply(BvUrem, vec![bvneg(s.clone()), t.clone()])),
                Term::apply(BvUrem, vec![s.clone(), bvneg(t.clone())]),
                bvneg(Term::apply(BvUrem, vec![bvneg(s), bvneg(t)])),
            )
        }
        BvSmod => {
            let (s, t) = (args[0].clone(), args[1].clone());
            let w = s.width();
            let (s_neg, t_neg) = (is_neg(&s), is_neg(&t));
            let abs_s = Term::ite(s_neg.clone(), bvneg(s.clone()), s.clone());
            let abs_t = Term::ite(t_neg.clone(), bvneg(t.clone()), t.clone());
            let u = Term::apply(BvUrem, vec![abs_s, abs_t]);
            Term::ite(
                Term::eq(u.clone(), Term::bv_lit(0, w)),
                u.clone(),
                sign_cases(
                    &s_neg,
                    &t_neg,
                    u.clone(),
                    Term::apply(BvAdd, vec![bvneg(u.clone()), t.clone()]),
                    Term::apply(BvAdd, vec![u.clone(), t]),
                    bvneg(u),
                ),
            )
        }
        RotateLeft(n) => {
            let a = args[0].clone();
            let w = a.width();
            let r = n % w;
            if r == 0 {
                a
            } else {
                Term::apply(
                    Concat,
                    vec![
                        Term::apply(Extract { high: w - r - 1, low: 0 }, vec![a.clone()]),
                        Term::apply(Extract { high: w - 1, low: w - r }, vec![a]),
                    ],
                )
            }
        }
        RotateRight(n) => {
            let a = args[0].clone();
            let w = a.width();
            let r = n % w;
            if r == 0 {
                a
            } else {
                Term::apply(
                    Concat,
                    vec![
                        Term::apply(Extract { high: r - 1, low: 0 }, vec![a.clone()]),
                        Term::apply(Extract { high: w - 1, low: r }, vec![a]),
                    ],
                )
            }
        }
        Repeat(n) => {
            let a = args[0].clone();
            let mut acc = a.clone();
            for _ in 1..n {
                acc = Term::apply(Concat, vec![acc, a.clone()]);
            }
            acc
        }
        BvUgt => Term::apply(BvUlt, vec![args[1].clone(), args[0].clone()]),
        BvUge => Term::apply(BvUle, vec![args[1].clone(), args[0].clone()]),
        BvSgt => Term::apply(BvSlt, vec![args[1].clone(), args[0].clone()]),
        BvSge => Term::apply(BvSle, vec![args[1].clone(), args[0].clone()]),
        Distinct => {
            let mut clauses = Vec::new();
            for i in 0..args.len() {
                for j in i + 1..args.len() {
                    clauses.push(Term::not(Term::eq(args[i].clone(), args[j].clone())));
                }
            }
            Term::and_all(clauses)
        }
        other => Term::apply(other, args),
    }
}

/// `bvor` elimination: `bvnot (bvand (bvnot a) (bvnot b))`.
fn or_form(a: Term, b: Term) -> Term {
    bvnot(Term::apply(Op::BvAnd, vec![bvnot(a), bvnot(b)]))
}

/// `bvxor` elimination: `bvsub (bvor a b) (bvand a b)` with the `bvor`
/// eliminated; borrow-free because the and-bits are a subset of the or-bits.
fn xor_form(a: Term, b: Term) -> Term {
    Term::apply(
        Op::BvSub,
        vec![
            or_form(a.clone(), b.clone()),
            Term::apply(Op::BvAnd, vec![a, b]),
        ],
    )
}

fn bvnot(a: Term) -> Term {
    Term::apply(Op::BvNot, vec![a])
}

fn bvneg(a: Term) -> Term {
    Term::apply(Op::BvNeg, vec![a])
}

/// Sign-bit test `extract[k-1:k-1](a) = #b1`.
fn is_neg(a: &Term) -> Term {
    let w = a.width();
    Term::eq(
        Term::apply(Op::Extract { high: w - 1, low: w - 1 }, vec![a.clone()]),
        Term::bv_lit(1, 1),
    )
}

/// Sign-bit test `extract[k-1:k-1](a) = #b0`.
fn is_nonneg(a: &Term) -> Term {
    let w = a.width();
    Term::eq(
        Term::apply(Op::Extract { high: w - 1, low: w - 1 }, vec![a.clone()]),
        Term::bv_lit(0, 1),
    )
}

/// Four-way case split on the operand sign bits: (pos,pos), (neg,pos),
/// (pos,neg), (neg,neg).
fn sign_cases(s_neg: &Term, t_neg: &Term, pp: Term, np: Term, pn: Term, nn: Term) -> Term {
    let both_pos = Term::and_all(vec![Term::not(s_neg.clone()), Term::not(t_neg.clone())]);
    let neg_pos = Term::and_all(vec![s_neg.clone(), Term::not(t_neg.clone())]);
    let pos_neg = Term::and_all(vec![Term::not(s_neg.clone()), t_neg.clone()]);
    Term::ite(both_pos, pp, Term::ite(neg_pos, np, Term::ite(pos_neg, pn, nn)))
}

/// Exact operator census by head symbol; leaves contribute nothing.
pub fn count_core_ops(t: &Term) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    let mut memo: HashMap<usize, ()> = HashMap::new();
    fn go(t: &Term, counts: &mut BTreeMap<String, u64>, memo: &mut HashMap<usize, ()>) {
        if memo.insert(t.ptr_id(), ()).is_some() {
            return;
        }
        if let TermKind::App(op, _) = t.kind() {
            *counts.entry(crate::term::op_name(*op).to_string()).or_insert(0) += 1;
        }
        for c in t.children() {
            go(c, counts, memo);
        }
    }
    go(t, &mut counts, &mut memo);
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, EquivOutcome};
    use crate::term::Sort;

    fn bv(v: u64, w: u32) -> Term {
        Term::bv_lit(v, w)
    }

    fn assert_equiv(lhs: &Term, rhs: &Term) {
        match oracle::check_equiv(lhs, rhs).unwrap() {
            EquivOutcome::Equivalent => {}
            EquivOutcome::Counterexample(sigma) => {
                panic!("{lhs} != {rhs} at {sigma:?}")
            }
        }
    }

    #[test]
    fn or_with_zero_is_identity() {
        let x = Term::var("x", Sort::BitVec(4));
        let t = Term::apply(Op::BvOr, vec![x.clone(), bv(0, 4)]);
        let r = eliminate_derived_ops(&t);
        assert!(find_non_core(&r).is_none());
        assert_equiv(&r, &x);
        assert_equiv(&r, &t);
    }

    #[test]
    fn xor_self_is_zero() {
        for w in 1..=4 {
            let a = Term::var("a", Sort::BitVec(w));
            let t = Term::apply(Op::BvXor, vec![a.clone(), a]);
            let r = eliminate_derived_ops(&t);
            assert_equiv(&r, &bv(0, w));
        }
    }

    #[test]
    fn ashr_example() {
        let t = Term::apply(Op::BvAshr, vec![bv(8, 4), bv(1, 4)]);
        let r = eliminate_derived_ops(&t);
        assert_eq!(oracle::eval(&r, &Default::default()).as_bv(), (12, 4));
    }

    #[test]
    fn rewrite_is_idempotent() {
        let a = Term::var("a", Sort::BitVec(3));
        let b = Term::var("b", Sort::BitVec(3));
        let t = Term::apply(
            Op::BvSmod,
            vec![Term::apply(Op::BvXnor, vec![a.clone(), b.clone()]), b],
        );
        let once = eliminate_derived_ops(&t);
        let twice = eliminate_derived_ops(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn output_is_core_only() {
        let a = Term::var("a", Sort::BitVec(3));
        let b = Term::var("b", Sort::BitVec(3));
        for op in [
            Op::BvOr,
            Op::BvXor,
            Op::BvNand,
            Op::BvNor,
            Op::BvXnor,
            Op::BvSdiv,
            Op::BvSrem,
            Op::BvSmod,
            Op::BvAshr,
        ] {
            let t = Term::apply(op, vec![a.clone(), b.clone()]);
            let r = eliminate_derived_ops(&t);
            assert_eq!(find_non_core(&r), None, "{op:?} left non-core ops");
            assert_equiv(&t, &r);
        }
    }

    #[test]
    fn rotates_mod_width() {
        let a = Term::var("a", Sort::BitVec(3));
        for n in [0u32, 1, 2, 3, 4, 7] {
            for op in [Op::RotateLeft(n), Op::RotateRight(n)] {
                let t = Term::apply(op, vec![a.clone()]);
                let r = eliminate_derived_ops(&t);
                assert_eq!(find_non_core(&r), None);
                assert_equiv(&t, &r);
            }
        }
    }

    #[test]
    fn distinct_becomes_pairwise() {
        let a = Term::var("a", Sort::BitVec(2));
        let b = Term::var("b", Sort::BitVec(2));
        let c = Term::var("c", Sort::BitVec(2));
        let t = Term::apply(Op::Distinct, vec![a, b, c]);
        let r = eliminate_derived_ops(&t);
        assert_eq!(find_non_core(&r), None);
        assert_equiv(&t, &r);
        // three pairwise disequalities
        if let TermKind::App(Op::And, clauses) = r.kind() {
            assert_eq!(clauses.len(), 3);
        } else {
            panic!("expected conjunction, got {r}");
        }
    }

    #[test]
    fn census_counts_operators() {
        let x = Term::var("x", Sort::BitVec(2));
        let y = Term::var("y", Sort::BitVec(2));
        let t = Term::apply(Op::BvNot, vec![Term::apply(Op::BvAnd, vec![x, y])]);
        let counts = count_core_ops(&t);
        assert_eq!(counts.get("bvnot"), Some(&1));
        assert_eq!(counts.get("bvand"), Some(&1));
        assert!(count_core_ops(&bv(5, 3)).is_empty());
        let p = Term::var("p", Sort::Bool);
        let x2 = Term::var("x", Sort::BitVec(2));
        let ite = Term::ite(p, x2.clone(), x2);
        assert_eq!(count_core_ops(&ite).get("ite"), Some(&1));
        assert_eq!(count_core_ops(&ite).len(), 1);
    }
}
