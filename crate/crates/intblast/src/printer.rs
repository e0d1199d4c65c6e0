// SPDX-License-Identifier: Apache-2.0

//! Canonical SMT-LIB 2 printing.
//!
//! One fixed concrete form per term: binary bit-vector literals, decimal
//! numerals, single spaces, fully parenthesized applications. Dumps and the
//! solver wire format both go through here, so emitted text is byte-stable.

use crate::term::{Op, Sort, Term, TermKind, UfOp};

/// True when a symbol can be printed bare (SMT-LIB simple symbol).
fn is_simple_symbol(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        None => return false,
        Some(c) if c.is_ascii_digit() => return false,
        Some(c) if !(c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c)) => {
            return false
        }
        _ => {}
    }
    name.chars()
        .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c))
}

/// Prints a symbol, quoting with `|...|` when required.
pub fn symbol_to_string(name: &str) -> String {
    if is_simple_symbol(name) {
        name.to_string()
    } else {
        assert!(
            !name.contains('|') && !name.contains('\\'),
            "symbol `{name}` cannot be represented in SMT-LIB"
        );
        format!("|{name}|")
    }
}

fn push_symbol(out: &mut String, name: &str) {
    out.push_str(&symbol_to_string(name));
}

fn push_op_head(out: &mut String, op: Op) {
    match op {
        Op::Extract { high, low } => {
            out.push_str(&format!("(_ extract {high} {low})"));
        }
        Op::ZeroExtend(n) => out.push_str(&format!("(_ zero_extend {n})")),
        Op::SignExtend(n) => out.push_str(&format!("(_ sign_extend {n})")),
        Op::RotateLeft(n) => out.push_str(&format!("(_ rotate_left {n})")),
        Op::RotateRight(n) => out.push_str(&format!("(_ rotate_right {n})")),
        Op::Repeat(n) => out.push_str(&format!("(_ repeat {n})")),
        Op::Uf(uf, w) => out.push_str(&uf.symbol(w)),
        other => out.push_str(crate::term::op_name(other)),
    }
}

fn push_term(out: &mut String, t: &Term) {
    match t.kind() {
        TermKind::BoolLit(b) => out.push_str(if *b { "true" } else { "false" }),
        TermKind::IntLit(v) => {
            if *v < 0 {
                out.push_str(&format!("(- {})", v.unsigned_abs()));
            } else {
                out.push_str(&v.to_string());
            }
        }
        TermKind::BvLit(lit) => {
            out.push_str("#b");
            for i in (0..lit.width()).rev() {
                out.push(if (lit.value() >> i) & 1 == 1 { '1' } else { '0' });
            }
        }
        TermKind::Var(name) => push_symbol(out, name),
        TermKind::FunApp(name, args) => {
            if args.is_empty() {
                push_symbol(out, name);
            } else {
                out.push('(');
                push_symbol(out, name);
                for a in args {
                    out.push(' ');
                    push_term(out, a);
                }
                out.push(')');
            }
        }
        TermKind::App(op, args) => {
            out.push('(');
            push_op_head(out, *op);
            for a in args {
                out.push(' ');
                push_term(out, a);
            }
            out.push(')');
        }
    }
}

pub fn term_to_string(t: &Term) -> String {
    let mut out = String::new();
    push_term(&mut out, t);
    out
}

pub fn sort_to_string(sort: Sort) -> String {
    sort.to_string()
}

/// `(declare-fun name () sort)` line for a constant.
pub fn declare_const(name: &str, sort: Sort) -> String {
    format!("(declare-fun {} () {})", symbol_to_string(name), sort)
}

/// `(declare-fun name (Int Int) Int)` line for an abstraction UF.
pub fn declare_uf(op: UfOp, width: u32) -> String {
    format!("(declare-fun {} (Int Int) Int)", op.symbol(width))
}

pub fn assert_line(t: &Term) -> String {
    let mut out = String::from("(assert ");
    push_term(&mut out, t);
    out.push(')');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Op, Sort, Term};

    #[test]
    fn canonical_forms() {
        let x = Term::var("x", Sort::BitVec(4));
        let t = Term::apply(Op::BvUlt, vec![x, Term::bv_lit(3, 4)]);
        assert_eq!(term_to_string(&t), "(bvult x #b0011)");
    }

    #[test]
    fn indexed_operators() {
        let a = Term::var("a", Sort::BitVec(3));
        let t = Term::apply(Op::Extract { high: 2, low: 1 }, vec![a]);
        assert_eq!(term_to_string(&t), "((_ extract 2 1) a)");
    }

    #[test]
    fn negative_integer_literals() {
        assert_eq!(term_to_string(&Term::int_lit(-5)), "(- 5)");
        assert_eq!(term_to_string(&Term::int_lit(7)), "7");
    }

    #[test]
    fn uf_symbols() {
        let a = Term::var("a", Sort::Int);
        let b = Term::var("b", Sort::Int);
        let t = Term::apply(Op::Uf(UfOp::And, 4), vec![a, b]);
        assert_eq!(term_to_string(&t), "(bvand_4 a b)");
        assert_eq!(declare_uf(UfOp::Lshr, 8), "(declare-fun bvlshr_8 (Int Int) Int)");
    }

    #[test]
    fn quoted_symbols_round() {
        assert_eq!(symbol_to_string("a b"), "|a b|");
        assert_eq!(symbol_to_string("x!0"), "x!0");
    }
}
