// SPDX-License-Identifier: Apache-2.0

//! Refinement lemma schemes, from cheap algebraic facts to full expansions.
//!
//! Every lemma is valid under the true bit-vector interpretation of the
//! abstraction UFs; the exhaustive validity suite vets each scheme at widths
//! 1..=4 before it may be used. Lemmas are instantiated at an application's
//! concrete argument terms, never as quantified axioms.

use crate::error::EmptyCoreError;
use crate::term::{mask, pow2, Op, Term, UfOp};
use crate::translate::{AbstractedApp, TranslationMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LemmaTier {
    Base = 1,
    Instance = 2,
    FullExpansion = 3,
    UnderApproxCore = 4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LemmaSource {
    /// The UF application term the lemma refines.
    App(Term),
    Global,
}

#[derive(Debug, Clone)]
pub struct Lemma {
    pub formula: Term,
    pub tier: LemmaTier,
    pub source: LemmaSource,
}

impl Lemma {
    fn for_app(app: &AbstractedApp, tier: LemmaTier, formula: Term) -> Self {
        Lemma {
            formula,
            tier,
            source: LemmaSource::App(app.app_term.clone()),
        }
    }
}

/// Basic algebraic properties of an abstracted operation, instantiated at the
/// application's argument terms. Nine lemmas for `and_k`, three each for the
/// shifts.
pub fn base_lemmas(app: &AbstractedApp) -> Vec<Lemma> {
    let a = app.arg_terms[0].clone();
    let b = app.arg_terms[1].clone();
    let f = app.app_term.clone();
    let k = app.width;
    let zero = Term::int_lit(0);
    let max = Term::int_lit(mask(k) as i128);
    let width = Term::int_lit(k as i128);

    let formulas = match app.op {
        UfOp::And => vec![
            // commutativity
            Term::eq(
                f.clone(),
                Term::apply(Op::Uf(UfOp::And, k), vec![b.clone(), a.clone()]),
            ),
            // bounded by both arguments
            Term::int_le(f.clone(), a.clone()),
            Term::int_le(f.clone(), b.clone()),
            // annihilator
            Term::implies(Term::eq(a.clone(), zero.clone()), Term::eq(f.clone(), zero.clone())),
            Term::implies(Term::eq(b.clone(), zero.clone()), Term::eq(f.clone(), zero.clone())),
            // identity
            Term::implies(Term::eq(a.clone(), max.clone()), Term::eq(f.clone(), b.clone())),
            Term::implies(Term::eq(b.clone(), max.clone()), Term::eq(f.clone(), a.clone())),
            // idempotence
            Term::implies(Term::eq(a.clone(), b.clone()), Term::eq(f.clone(), a.clone())),
            // a + b - (a & b) is the bit-wise or, itself at most 2^k - 1
            Term::int_le(
                Term::int_sub(Term::int_add(a.clone(), b.clone()), f.clone()),
                max,
            ),
        ],
        UfOp::Shl => vec![
            Term::implies(Term::eq(b.clone(), zero.clone()), Term::eq(f.clone(), a.clone())),
            Term::implies(Term::int_ge(b.clone(), width), Term::eq(f.clone(), zero.clone())),
            Term::implies(Term::eq(a.clone(), zero.clone()), Term::eq(f.clone(), zero)),
        ],
        UfOp::Lshr => vec![
            Term::implies(Term::eq(b.clone(), zero.clone()), Term::eq(f.clone(), a.clone())),
            Term::implies(Term::int_ge(b.clone(), width), Term::eq(f.clone(), zero)),
            Term::int_le(f.clone(), a.clone()),
        ],
    };
    formulas
        .into_iter()
        .map(|formula| Lemma::for_app(app, LemmaTier::Base, formula))
        .collect()
}

/// The ground fact `(a = alpha and b = beta) => f_k(a, b) = gamma` where
/// `gamma` is the true bit-vector result at those argument values.
pub fn instance_lemma(app: &AbstractedApp, alpha: u64, beta: u64) -> Lemma {
    let k = app.width;
    debug_assert!(alpha <= mask(k) && beta <= mask(k), "instance values out of range");
    let gamma = app.op.apply(alpha, beta, k);
    let formula = Term::implies(
        Term::and_all(vec![
            Term::eq(app.arg_terms[0].clone(), Term::int_lit(alpha as i128)),
            Term::eq(app.arg_terms[1].clone(), Term::int_lit(beta as i128)),
        ]),
        Term::eq(app.app_term.clone(), Term::int_lit(gamma as i128)),
    );
    Lemma::for_app(app, LemmaTier::Instance, formula)
}

/// The complete definition of an abstracted operation: a bit-sum for `and_k`,
/// an ite ladder over concrete shift amounts for the shifts. Once asserted,
/// the application's value is fully determined by its arguments.
pub fn full_expansion(app: &AbstractedApp) -> Lemma {
    let a = app.arg_terms[0].clone();
    let b = app.arg_terms[1].clone();
    let k = app.width;

    let rhs = match app.op {
        UfOp::And => {
            // sum of 2^i * ite(bit i set in both, 1, 0)
            let mut sum: Option<Term> = None;
            for i in 0..k {
                let cond = Term::and_all(vec![
                    bit_is_set(&a, i),
                    bit_is_set(&b, i),
                ]);
                let summand = Term::int_mul(
                    Term::int_lit(pow2(i)),
                    Term::ite(cond, Term::int_lit(1), Term::int_lit(0)),
                );
                sum = Some(match sum {
                    None => summand,
                    Some(acc) => Term::int_add(acc, summand),
                });
            }
            sum.expect("width is at least 1")
        }
        UfOp::Shl => {
            let mut ladder = Term::int_lit(0);
            for j in (1..k).rev() {
                ladder = Term::ite(
                    Term::eq(b.clone(), Term::int_lit(j as i128)),
                    Term::int_mod(
                        Term::int_mul(a.clone(), Term::int_lit(pow2(j))),
                        Term::int_lit(pow2(k)),
                    ),
                    ladder,
                );
            }
            Term::ite(Term::eq(b.clone(), Term::int_lit(0)), a.clone(), ladder)
        }
        UfOp::Lshr => {
            let mut ladder = Term::int_lit(0);
            for j in (1..k).rev() {
                ladder = Term::ite(
                    Term::eq(b.clone(), Term::int_lit(j as i128)),
                    Term::int_div(a.clone(), Term::int_lit(pow2(j))),
                    ladder,
                );
            }
            Term::ite(Term::eq(b.clone(), Term::int_lit(0)), a.clone(), ladder)
        }
    };
    Lemma::for_app(
        app,
        LemmaTier::FullExpansion,
        Term::eq(app.app_term.clone(), rhs),
    )
}

/// `(x div 2^i) mod 2 = 1`.
fn bit_is_set(x: &Term, i: u32) -> Term {
    Term::eq(
        Term::int_mod(
            Term::int_div(x.clone(), Term::int_lit(pow2(i))),
            Term::int_lit(2),
        ),
        Term::int_lit(1),
    )
}

/// The refinement clause learned from an under-approximation unsat core:
/// the disjunction of negated assumptions, `or (x' != v)` over the core.
pub fn core_lemma(
    core: &[(String, u64, u32)],
    tm: &TranslationMap,
) -> Result<Lemma, EmptyCoreError> {
    if core.is_empty() {
        return Err(EmptyCoreError);
    }
    let mut disjuncts = Vec::new();
    for (original, value, width) in core {
        debug_assert!(*value <= mask(*width));
        let (translated, _) = tm
            .int_var(original)
            .unwrap_or_else(|| panic!("core variable `{original}` has no translation"));
        disjuncts.push(Term::not(Term::eq(
            Term::var(translated, crate::term::Sort::Int),
            Term::int_lit(*value as i128),
        )));
    }
    Ok(Lemma {
        formula: Term::or_all(disjuncts),
        tier: LemmaTier::UnderApproxCore,
        source: LemmaSource::Global,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, Assignment, Value};
    use crate::term::Sort;

    /// A synthetic application over fresh integer variables `a`, `b`.
    pub(crate) fn synthetic_app(op: UfOp, width: u32) -> AbstractedApp {
        let a = Term::var("a", Sort::Int);
        let b = Term::var("b", Sort::Int);
        let app_term = Term::apply(Op::Uf(op, width), vec![a.clone(), b.clone()]);
        AbstractedApp {
            op,
            width,
            arg_terms: [a, b],
            app_term,
            origin: Term::var("origin", Sort::BitVec(width)),
        }
    }

    fn holds_for_all(formula: &Term, width: u32) -> bool {
        for alpha in 0..=mask(width) {
            for beta in 0..=mask(width) {
                let mut sigma = Assignment::new();
                sigma.set("a", Value::Int(alpha as i128));
                sigma.set("b", Value::Int(beta as i128));
                if !oracle::eval_bool(formula, &sigma) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn and_base_count_and_validity() {
        let app = synthetic_app(UfOp::And, 2);
        let lemmas = base_lemmas(&app);
        assert_eq!(lemmas.len(), 9);
        for lemma in &lemmas {
            assert_eq!(lemma.tier, LemmaTier::Base);
            assert!(holds_for_all(&lemma.formula, 2), "invalid: {}", lemma.formula);
        }
    }

    #[test]
    fn idempotence_is_in_the_batch() {
        let app = synthetic_app(UfOp::And, 4);
        let a = app.arg_terms[0].clone();
        let b = app.arg_terms[1].clone();
        let expected = Term::implies(
            Term::eq(a.clone(), b),
            Term::eq(app.app_term.clone(), a),
        );
        assert!(base_lemmas(&app).iter().any(|l| l.formula == expected));
    }

    #[test]
    fn shift_base_lemmas_validate_exhaustively() {
        for op in [UfOp::Shl, UfOp::Lshr] {
            for width in 1..=3 {
                let app = synthetic_app(op, width);
                for lemma in base_lemmas(&app) {
                    assert!(
                        holds_for_all(&lemma.formula, width),
                        "invalid {op:?} lemma at width {width}: {}",
                        lemma.formula
                    );
                }
            }
        }
    }

    #[test]
    fn instance_values() {
        let and4 = synthetic_app(UfOp::And, 4);
        let l = instance_lemma(&and4, 12, 10);
        // the consequent forces value 8
        let mut sigma = Assignment::new();
        sigma.set("a", Value::Int(12));
        sigma.set("b", Value::Int(10));
        assert!(oracle::eval_bool(&l.formula, &sigma));
        assert!(holds_for_all(&l.formula, 4));

        let shl4 = synthetic_app(UfOp::Shl, 4);
        assert!(holds_for_all(&instance_lemma(&shl4, 3, 2).formula, 4));
        let lshr4 = synthetic_app(UfOp::Lshr, 4);
        assert!(holds_for_all(&instance_lemma(&lshr4, 9, 4).formula, 4));
    }

    #[test]
    fn expansion_and2_at_3_2() {
        let app = synthetic_app(UfOp::And, 2);
        let lemma = full_expansion(&app);
        // 11 & 10 = 10
        let mut sigma = Assignment::new();
        sigma.set("a", Value::Int(3));
        sigma.set("b", Value::Int(2));
        assert!(oracle::eval_bool(&lemma.formula, &sigma));
        assert!(holds_for_all(&lemma.formula, 2));
    }

    #[test]
    fn expansion_rhs_determines_the_value() {
        // the right-hand side of the expansion equation equals the true
        // function pointwise, so any model satisfying it is forced
        for op in [UfOp::And, UfOp::Shl, UfOp::Lshr] {
            for width in 1..=3u32 {
                let app = synthetic_app(op, width);
                let lemma = full_expansion(&app);
                let crate::term::TermKind::App(Op::Eq, sides) = lemma.formula.kind() else {
                    panic!("expansion is an equation");
                };
                let rhs = &sides[1];
                for alpha in 0..=mask(width) {
                    for beta in 0..=mask(width) {
                        let mut sigma = Assignment::new();
                        sigma.set("a", Value::Int(alpha as i128));
                        sigma.set("b", Value::Int(beta as i128));
                        let got = oracle::eval(rhs, &sigma).as_int();
                        assert_eq!(
                            got,
                            op.apply(alpha, beta, width) as i128,
                            "{op:?} width {width} at ({alpha},{beta})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn shl_ladder_arm() {
        let app = synthetic_app(UfOp::Shl, 2);
        let lemma = full_expansion(&app);
        let mut sigma = Assignment::new();
        sigma.set("a", Value::Int(1));
        sigma.set("b", Value::Int(1));
        assert!(oracle::eval_bool(&lemma.formula, &sigma));
    }

    #[test]
    fn core_lemma_shapes() {
        let decls = vec![
            ("x".to_string(), Sort::BitVec(4)),
            ("y".to_string(), Sort::BitVec(4)),
        ];
        let x = Term::var("x", Sort::BitVec(4));
        let f = Term::eq(x.clone(), x);
        let (_, tm) = crate::translate::translate_formula(&f, &decls);

        let single = core_lemma(&[("x".to_string(), 3, 4)], &tm).unwrap();
        let xi = Term::var("x!0", Sort::Int);
        assert_eq!(single.formula, Term::not(Term::eq(xi.clone(), Term::int_lit(3))));
        assert_eq!(single.tier, LemmaTier::UnderApproxCore);

        let pair = core_lemma(
            &[("x".to_string(), 3, 4), ("y".to_string(), 0, 4)],
            &tm,
        )
        .unwrap();
        let yi = Term::var("y!1", Sort::Int);
        assert_eq!(
            pair.formula,
            Term::or_all(vec![
                Term::not(Term::eq(xi, Term::int_lit(3))),
                Term::not(Term::eq(yi, Term::int_lit(0))),
            ])
        );

        assert!(matches!(core_lemma(&[], &tm), Err(EmptyCoreError)));
    }
}
