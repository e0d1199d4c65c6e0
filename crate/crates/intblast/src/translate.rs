// SPDX-License-Identifier: Apache-2.0

//! Translation from core-operator QF_BV into QF_UFNIA.
//!
//! Arithmetic operators become modular integer arithmetic, bit-wise negation
//! gets its arithmetic reading `2^k - 1 - x`, and `bvand`/`bvshl`/`bvlshr`
//! are replaced by width-indexed uninterpreted functions. Range axioms
//! `0 <= x' <= 2^k - 1` are generated eagerly for every translated variable
//! and every abstracted application, so backend models always convert back
//! through `to_bv`.

use std::collections::HashMap;

use crate::error::RangeError;
use crate::term::{mask, pow2, Op, Sort, Term, TermKind, UfOp};

/// One occurrence class of an abstracted `bvand`/`bvshl`/`bvlshr`.
/// Structurally equal applications share a single entry.
#[derive(Debug, Clone)]
pub struct AbstractedApp {
    pub op: UfOp,
    pub width: u32,
    /// Translated argument terms (Int-sorted).
    pub arg_terms: [Term; 2],
    /// The UF application `f_k(arg0, arg1)`.
    pub app_term: Term,
    /// The original bit-vector term this application abstracts.
    pub origin: Term,
}

/// Translated variable bookkeeping: original name, integer name, width.
#[derive(Debug, Clone)]
pub struct VarEntry {
    pub original: String,
    pub translated: String,
    pub width: u32,
}

/// Bidirectional association between the original formula and its integer
/// translation, plus the per-width UF registry and the eager range axioms.
#[derive(Debug, Clone, Default)]
pub struct TranslationMap {
    var_entries: Vec<VarEntry>,
    bool_entries: Vec<(String, String)>,
    uf_registry: Vec<(UfOp, u32)>,
    app_index: Vec<AbstractedApp>,
    range_constraints: Vec<Term>,
}

impl TranslationMap {
    pub fn var_entries(&self) -> &[VarEntry] {
        &self.var_entries
    }

    pub fn bool_entries(&self) -> &[(String, String)] {
        &self.bool_entries
    }

    /// `(op, width)` pairs in first-use order; symbols via `UfOp::symbol`.
    pub fn uf_registry(&self) -> &[(UfOp, u32)] {
        &self.uf_registry
    }

    pub fn apps(&self) -> &[AbstractedApp] {
        &self.app_index
    }

    pub fn range_constraints(&self) -> &[Term] {
        &self.range_constraints
    }

    /// Integer variable name and width for an original BV variable.
    pub fn int_var(&self, original: &str) -> Option<(&str, u32)> {
        self.var_entries
            .iter()
            .find(|e| e.original == original)
            .map(|e| (e.translated.as_str(), e.width))
    }

    pub fn bool_var(&self, original: &str) -> Option<&str> {
        self.bool_entries
            .iter()
            .find(|(o, _)| o == original)
            .map(|(_, t)| t.as_str())
    }
}

/// Converts a backend model value into the width-k bit-vector literal with
/// that unsigned value.
pub fn to_bv(value: i128, width: u32) -> Result<Term, RangeError> {
    if value < 0 || value > mask(width) as i128 {
        return Err(RangeError { value, width });
    }
    Ok(Term::bv_lit(value as u64, width))
}

/// Stateful translator; use [`translate_formula`] unless you need to
/// translate several terms against one map.
pub struct Translator {
    tm: TranslationMap,
    var_lookup: HashMap<String, Term>,
    app_lookup: HashMap<Term, usize>,
    /// Keyed by allocation identity; the entry keeps the input term alive so
    /// the address cannot be reused while the memo holds it.
    memo: HashMap<usize, (Term, Term)>,
}

impl Translator {
    /// Registers every declaration up front: each variable gets its integer
    /// (or Boolean) counterpart and, for BV variables, an eager range axiom.
    pub fn new(declarations: &[(String, Sort)]) -> Self {
        let mut tm = TranslationMap::default();
        let mut var_lookup = HashMap::new();
        for (idx, (name, sort)) in declarations.iter().enumerate() {
            let translated = format!("{name}!{idx}");
            match sort {
                Sort::BitVec(w) => {
                    let var = Term::var(&translated, Sort::Int);
                    tm.range_constraints.push(range_axiom(&var, *w));
                    tm.var_entries.push(VarEntry {
                        original: name.clone(),
                        translated: translated.clone(),
                        width: *w,
                    });
                    var_lookup.insert(name.clone(), var);
                }
                Sort::Bool => {
                    tm.bool_entries.push((name.clone(), translated.clone()));
                    var_lookup.insert(name.clone(), Term::var(&translated, Sort::Bool));
                }
                Sort::Int => panic!("integer variable `{name}` in bit-vector input"),
            }
        }
        Translator {
            tm,
            var_lookup,
            app_lookup: HashMap::new(),
            memo: HashMap::new(),
        }
    }

    pub fn into_map(self) -> TranslationMap {
        self.tm
    }

    /// Translates one core-operator term.
    pub fn translate(&mut self, t: &Term) -> Term {
        if let Some((_, done)) = self.memo.get(&t.ptr_id()) {
            return done.clone();
        }
        let out = self.translate_node(t);
        self.memo.insert(t.ptr_id(), (t.clone(), out.clone()));
        out
    }

    fn translate_node(&mut self, t: &Term) -> Term {
        use Op::*;
        let (op, args) = match t.kind() {
            TermKind::BoolLit(_) => return t.clone(),
            TermKind::IntLit(_) => panic!("integer literal in bit-vector input"),
            TermKind::BvLit(lit) => return Term::int_lit(lit.value() as i128),
            TermKind::Var(name) => {
                return self
                    .var_lookup
                    .get(name)
                    .unwrap_or_else(|| panic!("undeclared variable `{name}`"))
                    .clone()
            }
            TermKind::FunApp(name, _) => panic!("unexpanded definition `{name}`"),
            TermKind::App(op, args) => (*op, args),
        };
        let width = || args[0].width();

        match op {
            BvAdd | BvSub | BvMul => {
                let k = width();
                let a = self.translate(&args[0]);
                let b = self.translate(&args[1]);
                let int_op = match op {
                    BvAdd => IntAdd,
                    BvSub => IntSub,
                    _ => IntMul,
                };
                modpow2(Term::apply(int_op, vec![a, b]), k)
            }
            BvNeg => {
                let k = width();
                let a = self.translate(&args[0]);
                modpow2(Term::int_sub(Term::int_lit(pow2(k)), a), k)
            }
            BvUdiv => {
                let k = width();
                let a = self.translate(&args[0]);
                let b = self.translate(&args[1]);
                Term::ite(
                    Term::eq(b.clone(), Term::int_lit(0)),
                    Term::int_lit(mask(k) as i128),
                    Term::int_div(a, b),
                )
            }
            BvUrem => {
                let a = self.translate(&args[0]);
                let b = self.translate(&args[1]);
                Term::ite(
                    Term::eq(b.clone(), Term::int_lit(0)),
                    a.clone(),
                    Term::int_mod(a, b),
                )
            }
            BvNot => {
                let k = width();
                let a = self.translate(&args[0]);
                Term::int_sub(Term::int_lit(mask(k) as i128), a)
            }
            BvAnd => self.abstract_app(UfOp::And, t, &args.to_vec()),
            BvShl => self.abstract_app(UfOp::Shl, t, &args.to_vec()),
            BvLshr => self.abstract_app(UfOp::Lshr, t, &args.to_vec()),
            Concat => {
                let n = args[1].width();
                let a = self.translate(&args[0]);
                let b = self.translate(&args[1]);
                Term::int_add(Term::int_mul(a, Term::int_lit(pow2(n))), b)
            }
            Extract { high, low } => {
                let a = self.translate(&args[0]);
                Term::apply(
                    IntMod,
                    vec![
                        Term::int_div(a, Term::int_lit(pow2(low))),
                        Term::int_lit(pow2(high - low + 1)),
                    ],
                )
            }
            ZeroExtend(_) => self.translate(&args[0]),
            SignExtend(n) => {
                let k = width();
                let a = self.translate(&args[0]);
                if n == 0 {
                    return a;
                }
                Term::ite(
                    Term::int_ge(a.clone(), Term::int_lit(pow2(k - 1))),
                    Term::int_add(a.clone(), Term::int_lit(pow2(k) * (pow2(n) - 1))),
                    a,
                )
            }
            BvUlt | BvUle => {
                let a = self.translate(&args[0]);
                let b = self.translate(&args[1]);
                let int_op = if op == BvUlt { IntLt } else { IntLe };
                Term::apply(int_op, vec![a, b])
            }
            BvSlt | BvSle => {
                let k = width();
                let a = unsigned_to_signed(self.translate(&args[0]), k);
                let b = unsigned_to_signed(self.translate(&args[1]), k);
                let int_op = if op == BvSlt { IntLt } else { IntLe };
                Term::apply(int_op, vec![a, b])
            }
            Eq | Ite | And | Or | Not | Xor | Implies => {
                let new_args: Vec<Term> = args.iter().map(|a| self.translate(a)).collect();
                Term::apply(op, new_args)
            }
            other => panic!("non-core operator {other:?} reached the translator"),
        }
    }

    /// Replaces an abstracted operation by its UF application, registering
    /// the application and its range axiom on first sight.
    fn abstract_app(&mut self, uf: UfOp, origin: &Term, args: &[Term]) -> Term {
        let k = args[0].width();
        let a = self.translate(&args[0]);
        let b = self.translate(&args[1]);
        let app_term = Term::apply(Op::Uf(uf, k), vec![a.clone(), b.clone()]);
        if let Some(&idx) = self.app_lookup.get(&app_term) {
            return self.tm.app_index[idx].app_term.clone();
        }
        if !self.tm.uf_registry.contains(&(uf, k)) {
            self.tm.uf_registry.push((uf, k));
        }
        self.tm.range_constraints.push(range_axiom(&app_term, k));
        self.app_lookup.insert(app_term.clone(), self.tm.app_index.len());
        self.tm.app_index.push(AbstractedApp {
            op: uf,
            width: k,
            arg_terms: [a, b],
            app_term: app_term.clone(),
            origin: origin.clone(),
        });
        app_term
    }
}

/// `(t) mod 2^k`.
fn modpow2(t: Term, width: u32) -> Term {
    Term::int_mod(t, Term::int_lit(pow2(width)))
}

/// Inlined signed reinterpretation: `ite(x >= 2^(k-1), x - 2^k, x)`.
fn unsigned_to_signed(x: Term, width: u32) -> Term {
    Term::ite(
        Term::int_ge(x.clone(), Term::int_lit(pow2(width - 1))),
        Term::int_sub(x.clone(), Term::int_lit(pow2(width))),
        x,
    )
}

/// `0 <= t and t <= 2^k - 1` as one conjunction.
fn range_axiom(t: &Term, width: u32) -> Term {
    Term::and_all(vec![
        Term::int_le(Term::int_lit(0), t.clone()),
        Term::int_le(t.clone(), Term::int_lit(mask(width) as i128)),
    ])
}

/// Translates a Bool-sorted core formula, producing the integer formula and
/// the translation map with eager range axioms. Equisatisfiable with the
/// input once the UF axioms are (lazily) added; a pure function of its input.
pub fn translate_formula(formula: &Term, declarations: &[(String, Sort)]) -> (Term, TranslationMap) {
    assert_eq!(formula.sort(), Sort::Bool, "formula must be Bool-sorted");
    let mut tr = Translator::new(declarations);
    let translated = tr.translate(formula);
    (translated, tr.into_map())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{self, Assignment};

    fn bv(v: u64, w: u32) -> Term {
        Term::bv_lit(v, w)
    }

    fn decls(names: &[(&str, u32)]) -> Vec<(String, Sort)> {
        names
            .iter()
            .map(|(n, w)| (n.to_string(), Sort::BitVec(*w)))
            .collect()
    }

    fn eval_closed(t: &Term) -> crate::oracle::Value {
        oracle::eval(t, &Assignment::new())
    }

    #[test]
    fn comparison_maps_to_integer_order() {
        let d = decls(&[("x", 4), ("y", 4)]);
        let x = Term::var("x", Sort::BitVec(4));
        let y = Term::var("y", Sort::BitVec(4));
        let f = Term::apply(Op::BvUlt, vec![x, y]);
        let (ft, tm) = translate_formula(&f, &d);
        let xi = Term::var("x!0", Sort::Int);
        let yi = Term::var("y!1", Sort::Int);
        assert_eq!(ft, Term::int_lt(xi, yi));
        assert_eq!(tm.range_constraints().len(), 2);
        assert!(tm.apps().is_empty());
    }

    #[test]
    fn bvand_becomes_uf() {
        let d = decls(&[("x", 2), ("y", 2)]);
        let x = Term::var("x", Sort::BitVec(2));
        let y = Term::var("y", Sort::BitVec(2));
        let f = Term::eq(Term::apply(Op::BvAnd, vec![x.clone(), y]), x);
        let (ft, tm) = translate_formula(&f, &d);
        let xi = Term::var("x!0", Sort::Int);
        let yi = Term::var("y!1", Sort::Int);
        let app = Term::apply(Op::Uf(UfOp::And, 2), vec![xi.clone(), yi]);
        assert_eq!(ft, Term::eq(app.clone(), xi));
        assert_eq!(tm.apps().len(), 1);
        assert_eq!(tm.apps()[0].app_term, app);
        // 2 variable ranges + 1 application range
        assert_eq!(tm.range_constraints().len(), 3);
        assert_eq!(tm.uf_registry(), &[(UfOp::And, 2)]);
    }

    #[test]
    fn modular_addition_example() {
        // (bvadd x 9) = 2 at width 4 is satisfied exactly by x = 9
        let d = decls(&[("x", 4)]);
        let x = Term::var("x", Sort::BitVec(4));
        let f = Term::eq(Term::apply(Op::BvAdd, vec![x, bv(9, 4)]), bv(2, 4));
        let (ft, _) = translate_formula(&f, &d);
        for v in 0..16i128 {
            let mut sigma = Assignment::new();
            sigma.set("x!0", crate::oracle::Value::Int(v));
            assert_eq!(oracle::eval_bool(&ft, &sigma), v == 9, "x'={v}");
        }
    }

    #[test]
    fn rule_table_values() {
        let d = decls(&[]);
        let mut tr = Translator::new(&d);
        // bvnot(5@4) -> 16 - 1 - 5 = 10
        let t = tr.translate(&Term::apply(Op::BvNot, vec![bv(5, 4)]));
        assert_eq!(eval_closed(&t).as_int(), 10);
        // extract[2:1](6@3) -> (6 div 2) mod 4 = 3
        let t = tr.translate(&Term::apply(Op::Extract { high: 2, low: 1 }, vec![bv(6, 3)]));
        assert_eq!(eval_closed(&t).as_int(), 3);
        // bvslt(8@4, 7@4): signed -8 < 7
        let t = tr.translate(&Term::apply(Op::BvSlt, vec![bv(8, 4), bv(7, 4)]));
        assert!(eval_closed(&t).as_bool());
        // sign_extend keeps value or adds high bits
        let t = tr.translate(&Term::apply(Op::SignExtend(2), vec![bv(3, 2)]));
        assert_eq!(eval_closed(&t).as_int(), 15);
        let t = tr.translate(&Term::apply(Op::SignExtend(2), vec![bv(1, 2)]));
        assert_eq!(eval_closed(&t).as_int(), 1);
    }

    #[test]
    fn division_by_zero_is_total() {
        let d = decls(&[("x", 4)]);
        let x = Term::var("x", Sort::BitVec(4));
        let f = Term::eq(
            Term::apply(Op::BvUdiv, vec![x, bv(0, 4)]),
            bv(15, 4),
        );
        let (ft, _) = translate_formula(&f, &d);
        for v in 0..16i128 {
            let mut sigma = Assignment::new();
            sigma.set("x!0", crate::oracle::Value::Int(v));
            assert!(oracle::eval_bool(&ft, &sigma), "bvudiv(x,0) must be 15");
        }
    }

    #[test]
    fn to_bv_conversions() {
        assert_eq!(to_bv(5, 4).unwrap(), bv(5, 4));
        assert_eq!(to_bv(0, 1).unwrap(), bv(0, 1));
        assert!(to_bv(16, 4).is_err());
        assert!(to_bv(-1, 4).is_err());
    }

    #[test]
    fn structurally_equal_apps_share_one_entry() {
        let d = decls(&[("x", 3), ("y", 3)]);
        let x = Term::var("x", Sort::BitVec(3));
        let y = Term::var("y", Sort::BitVec(3));
        // two separately-built occurrences of (bvand x y)
        let a1 = Term::apply(Op::BvAnd, vec![x.clone(), y.clone()]);
        let a2 = Term::apply(Op::BvAnd, vec![x.clone(), y.clone()]);
        let f = Term::and_all(vec![
            Term::eq(a1, bv(1, 3)),
            Term::eq(a2, bv(1, 3)),
        ]);
        let (_, tm) = translate_formula(&f, &d);
        assert_eq!(tm.apps().len(), 1);
    }

    #[test]
    fn translation_is_deterministic() {
        let d = decls(&[("x", 4), ("y", 4)]);
        let x = Term::var("x", Sort::BitVec(4));
        let y = Term::var("y", Sort::BitVec(4));
        let f = Term::eq(
            Term::apply(Op::BvAnd, vec![x.clone(), y.clone()]),
            Term::apply(Op::BvShl, vec![y, x]),
        );
        let (f1, tm1) = translate_formula(&f, &d);
        let (f2, tm2) = translate_formula(&f, &d);
        assert_eq!(f1, f2);
        assert_eq!(tm1.range_constraints(), tm2.range_constraints());
        assert_eq!(tm1.uf_registry(), tm2.uf_registry());
    }
}
