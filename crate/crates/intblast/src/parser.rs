// SPDX-License-Identifier: Apache-2.0

//! SMT-LIB 2 script and term parsing with sort checking.
//!
//! Accepts QF_BV input scripts (the solving pipeline's input contract) and
//! the QF_UFNIA fragment this tool itself emits, so every dump re-parses.
//! `let` bindings are inlined during parsing; `define-fun` macros are kept in
//! the script and beta-expanded by [`expand_defines`].

use std::collections::HashMap;

use crate::error::{FrontendError, SortError};
use crate::sexp::{self, Atom, Pos, Sexp, SexpKind};
use crate::term::{Op, Sort, Term, TermKind, UfOp, MAX_WIDTH};

/// A `define-fun` macro.
#[derive(Debug, Clone)]
pub struct Definition {
    pub name: String,
    pub params: Vec<(String, Sort)>,
    pub ret: Sort,
    pub body: Term,
}

/// A parsed, sort-checked script: declarations in order, assertions conjoined
/// by the consumer, exactly one honored `check-sat`.
#[derive(Debug, Clone, Default)]
pub struct Script {
    pub logic: Option<String>,
    /// 0-ary constants in declaration order.
    pub declarations: Vec<(String, Sort)>,
    /// Width-indexed abstraction UFs (`bvand_k` etc.), present in re-parsed
    /// translation dumps only.
    pub uf_declarations: Vec<(UfOp, u32)>,
    pub definitions: Vec<Definition>,
    pub assertions: Vec<Term>,
    pub options: Vec<(String, String)>,
    pub has_check_sat: bool,
    /// Script contained `(get-model)` after `check-sat`.
    pub wants_model: bool,
}

impl Script {
    /// All assertions as one conjunction.
    pub fn conjoined(&self) -> Term {
        Term::and_all(self.assertions.clone())
    }
}

fn perr<T>(pos: Pos, msg: impl Into<String>) -> Result<T, FrontendError> {
    Err(FrontendError::Parse {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    })
}

fn unsupported<T>(pos: Pos, symbol: impl Into<String>, detail: &str) -> Result<T, FrontendError> {
    Err(FrontendError::Unsupported {
        line: pos.line,
        col: pos.col,
        symbol: symbol.into(),
        detail: detail.to_string(),
    })
}

fn serr<T>(pos: Pos, source: SortError) -> Result<T, FrontendError> {
    Err(FrontendError::Sort {
        line: pos.line,
        col: pos.col,
        source,
    })
}

/// Symbol table used while parsing terms.
#[derive(Debug, Default, Clone)]
pub struct SymbolTable {
    consts: HashMap<String, Sort>,
    defs: HashMap<String, Definition>,
    ufs: HashMap<String, (UfOp, u32)>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_const(&mut self, name: &str, sort: Sort) -> Result<(), String> {
        if self.contains(name) {
            return Err(format!("symbol `{name}` already declared"));
        }
        self.consts.insert(name.to_string(), sort);
        Ok(())
    }

    pub fn declare_uf(&mut self, op: UfOp, width: u32) -> Result<(), String> {
        let name = op.symbol(width);
        if self.contains(&name) {
            return Err(format!("symbol `{name}` already declared"));
        }
        self.ufs.insert(name, (op, width));
        Ok(())
    }

    pub fn define(&mut self, def: Definition) -> Result<(), String> {
        if self.contains(&def.name) {
            return Err(format!("symbol `{}` already declared", def.name));
        }
        self.defs.insert(def.name.clone(), def);
        Ok(())
    }

    pub fn const_sort(&self, name: &str) -> Option<Sort> {
        self.consts.get(name).copied()
    }

    fn contains(&self, name: &str) -> bool {
        self.consts.contains_key(name)
            || self.defs.contains_key(name)
            || self.ufs.contains_key(name)
    }
}

/// Fixed-arity and chainable operators by head symbol.
/// `None` means the symbol is not a predefined operator.
fn simple_op(head: &str) -> Option<Op> {
    Some(match head {
        "bvadd" => Op::BvAdd,
        "bvsub" => Op::BvSub,
        "bvneg" => Op::BvNeg,
        "bvmul" => Op::BvMul,
        "bvudiv" => Op::BvUdiv,
        "bvurem" => Op::BvUrem,
        "bvsdiv" => Op::BvSdiv,
        "bvsrem" => Op::BvSrem,
        "bvsmod" => Op::BvSmod,
        "bvnot" => Op::BvNot,
        "bvand" => Op::BvAnd,
        "bvor" => Op::BvOr,
        "bvxor" => Op::BvXor,
        "bvnand" => Op::BvNand,
        "bvnor" => Op::BvNor,
        "bvxnor" => Op::BvXnor,
        "bvcomp" => Op::BvComp,
        "bvshl" => Op::BvShl,
        "bvlshr" => Op::BvLshr,
        "bvashr" => Op::BvAshr,
        "concat" => Op::Concat,
        "bvult" => Op::BvUlt,
        "bvule" => Op::BvUle,
        "bvugt" => Op::BvUgt,
        "bvuge" => Op::BvUge,
        "bvslt" => Op::BvSlt,
        "bvsle" => Op::BvSle,
        "bvsgt" => Op::BvSgt,
        "bvsge" => Op::BvSge,
        "distinct" => Op::Distinct,
        "ite" => Op::Ite,
        "not" => Op::Not,
        "xor" => Op::Xor,
        "=>" => Op::Implies,
        "div" => Op::IntDiv,
        "mod" => Op::IntMod,
        "<" => Op::IntLt,
        "<=" => Op::IntLe,
        ">" => Op::IntGt,
        ">=" => Op::IntGe,
        _ => return None,
    })
}

/// Operators the parser folds over chains: `(op a b c)` parses as nested
/// binary applications, left-associative.
fn left_assoc_op(head: &str) -> Option<Op> {
    Some(match head {
        "bvadd" => Op::BvAdd,
        "bvmul" => Op::BvMul,
        "bvand" => Op::BvAnd,
        "bvor" => Op::BvOr,
        "bvxor" => Op::BvXor,
        "concat" => Op::Concat,
        "xor" => Op::Xor,
        "+" => Op::IntAdd,
        "*" => Op::IntMul,
        _ => return None,
    })
}

/// Every head symbol the parser knows, used to reject shadowing declarations.
fn is_reserved(head: &str) -> bool {
    simple_op(head).is_some()
        || left_assoc_op(head).is_some()
        || matches!(
            head,
            "=" | "and" | "or" | "let" | "!" | "_" | "true" | "false" | "-" | "ite"
        )
}

struct TermParser<'a> {
    table: &'a SymbolTable,
    lets: Vec<HashMap<String, Term>>,
}

impl<'a> TermParser<'a> {
    fn new(table: &'a SymbolTable) -> Self {
        TermParser {
            table,
            lets: Vec::new(),
        }
    }

    fn lookup_let(&self, name: &str) -> Option<&Term> {
        self.lets.iter().rev().find_map(|frame| frame.get(name))
    }

    fn app(&self, pos: Pos, op: Op, args: Vec<Term>) -> Result<Term, FrontendError> {
        match Term::app(op, args) {
            Ok(t) => Ok(t),
            Err(e) => serr(pos, e),
        }
    }

    fn parse(&mut self, sexp: &Sexp) -> Result<Term, FrontendError> {
        let pos = sexp.pos;
        match &sexp.kind {
            SexpKind::Atom(atom) => self.parse_atom(pos, atom),
            SexpKind::List(items) => {
                if items.is_empty() {
                    return perr(pos, "empty application");
                }
                match &items[0].kind {
                    SexpKind::Atom(Atom::Sym(head)) => {
                        self.parse_application(pos, head, &items[1..])
                    }
                    SexpKind::List(_) => {
                        // indexed operator head: ((_ extract 2 1) t)
                        let op = parse_indexed_op(&items[0])?;
                        let args = self.parse_args(&items[1..])?;
                        self.app(pos, op, args)
                    }
                    _ => perr(pos, "expected operator symbol"),
                }
            }
        }
    }

    fn parse_atom(&mut self, pos: Pos, atom: &Atom) -> Result<Term, FrontendError> {
        match atom {
            Atom::Bin(bits) => {
                let width = bits.len() as u32;
                if width > MAX_WIDTH {
                    return unsupported(pos, format!("#b{bits}"), "widths above 64");
                }
                let value = u64::from_str_radix(bits, 2)
                    .map_err(|_| never_here(pos, "binary literal"))?;
                Ok(Term::bv_lit(value, width))
            }
            Atom::Hex(digits) => {
                let width = (digits.len() as u32) * 4;
                if width > MAX_WIDTH {
                    return unsupported(pos, format!("#x{digits}"), "widths above 64");
                }
                let value = u64::from_str_radix(digits, 16)
                    .map_err(|_| never_here(pos, "hexadecimal literal"))?;
                Ok(Term::bv_lit(value, width))
            }
            Atom::Num(digits) => {
                let value: i128 = digits
                    .parse()
                    .map_err(|_| parse_err(pos, format!("numeral `{digits}` too large")))?;
                Ok(Term::int_lit(value))
            }
            Atom::Sym(name) => self.parse_symbol(pos, name),
            Atom::Str(_) => perr(pos, "string literal in term position"),
            Atom::Kw(kw) => perr(pos, format!("keyword `:{kw}` in term position")),
        }
    }

    fn parse_symbol(&mut self, pos: Pos, name: &str) -> Result<Term, FrontendError> {
        match name {
            "true" => return Ok(Term::tru()),
            "false" => return Ok(Term::fls()),
            _ => {}
        }
        if let Some(bound) = self.lookup_let(name) {
            return Ok(bound.clone());
        }
        if let Some(sort) = self.table.const_sort(name) {
            return Ok(Term::var(name, sort));
        }
        if let Some(def) = self.table.defs.get(name) {
            if !def.params.is_empty() {
                return serr(
                    pos,
                    SortError::Arity {
                        op: "defined function",
                        expected: def.params.len(),
                        got: 0,
                    },
                );
            }
            return Ok(Term::fun_app(name, Vec::new(), def.ret));
        }
        perr(pos, format!("unknown symbol `{name}`"))
    }

    fn parse_args(&mut self, items: &[Sexp]) -> Result<Vec<Term>, FrontendError> {
        items.iter().map(|i| self.parse(i)).collect()
    }

    fn parse_application(
        &mut self,
        pos: Pos,
        head: &str,
        rest: &[Sexp],
    ) -> Result<Term, FrontendError> {
        match head {
            "let" => return self.parse_let(pos, rest),
            "!" => return self.parse_annotation(pos, rest),
            "_" => {
                // leaf indexed form like (_ bv5 4)
                let whole = Sexp {
                    kind: SexpKind::List(
                        std::iter::once(Sexp {
                            kind: SexpKind::Atom(Atom::Sym("_".into())),
                            pos,
                        })
                        .chain(rest.iter().cloned())
                        .collect(),
                    ),
                    pos,
                };
                return parse_indexed_leaf(&whole);
            }
            "and" | "or" => {
                let args = self.parse_args(rest)?;
                let op = if head == "and" { Op::And } else { Op::Or };
                return match args.len() {
                    0 => perr(pos, format!("`{head}` needs at least one argument")),
                    1 => Ok(args.into_iter().next().unwrap()),
                    _ => self.app(pos, op, args),
                };
            }
            "=" => {
                let args = self.parse_args(rest)?;
                if args.len() < 2 {
                    return serr(
                        pos,
                        SortError::Arity {
                            op: "=",
                            expected: 2,
                            got: args.len(),
                        },
                    );
                }
                // chainable: (= a b c) is a conjunction of adjacent equalities
                let mut eqs = Vec::new();
                for pair in args.windows(2) {
                    eqs.push(self.app(pos, Op::Eq, vec![pair[0].clone(), pair[1].clone()])?);
                }
                return Ok(Term::and_all(eqs));
            }
            "=>" => {
                let args = self.parse_args(rest)?;
                if args.len() < 2 {
                    return serr(
                        pos,
                        SortError::Arity {
                            op: "=>",
                            expected: 2,
                            got: args.len(),
                        },
                    );
                }
                // right-associative
                let mut it = args.into_iter().rev();
                let mut acc = it.next().unwrap();
                for lhs in it {
                    acc = self.app(pos, Op::Implies, vec![lhs, acc])?;
                }
                return Ok(acc);
            }
            "-" => {
                let args = self.parse_args(rest)?;
                return match args.len() {
                    1 => self.app(pos, Op::IntNeg, args),
                    2 => self.app(pos, Op::IntSub, args),
                    n => serr(
                        pos,
                        SortError::Arity {
                            op: "-",
                            expected: 2,
                            got: n,
                        },
                    ),
                };
            }
            _ => {}
        }

        if let Some(op) = left_assoc_op(head) {
            let args = self.parse_args(rest)?;
            if args.len() < 2 {
                return serr(
                    pos,
                    SortError::Arity {
                        op: crate::term::op_name(op),
                        expected: 2,
                        got: args.len(),
                    },
                );
            }
            let mut it = args.into_iter();
            let mut acc = it.next().unwrap();
            for rhs in it {
                acc = self.app(pos, op, vec![acc, rhs])?;
            }
            return Ok(acc);
        }

        if let Some(op) = simple_op(head) {
            let args = self.parse_args(rest)?;
            return self.app(pos, op, args);
        }

        if let Some(&(uf, width)) = self.table.ufs.get(head) {
            let args = self.parse_args(rest)?;
            return self.app(pos, Op::Uf(uf, width), args);
        }

        if let Some(def) = self.table.defs.get(head) {
            let args = self.parse_args(rest)?;
            if args.len() != def.params.len() {
                return serr(
                    pos,
                    SortError::Arity {
                        op: "defined function",
                        expected: def.params.len(),
                        got: args.len(),
                    },
                );
            }
            for (arg, (pname, psort)) in args.iter().zip(&def.params) {
                if arg.sort() != *psort {
                    return perr(
                        pos,
                        format!(
                            "argument for parameter `{pname}` has sort {}, expected {psort}",
                            arg.sort()
                        ),
                    );
                }
            }
            return Ok(Term::fun_app(head, args, def.ret));
        }

        if rest.is_empty() {
            return self.parse_symbol(pos, head);
        }
        if self.table.const_sort(head).is_some() {
            return perr(pos, format!("`{head}` is a constant, not a function"));
        }
        unsupported(pos, head, "unknown operator or function")
    }

    fn parse_let(&mut self, pos: Pos, rest: &[Sexp]) -> Result<Term, FrontendError> {
        if rest.len() != 2 {
            return perr(pos, "`let` expects a binding list and a body");
        }
        let Some(bindings) = rest[0].as_list() else {
            return perr(rest[0].pos, "`let` bindings must be a list");
        };
        // parallel let: right-hand sides are parsed in the outer scope
        let mut frame = HashMap::new();
        for b in bindings {
            let Some(pair) = b.as_list() else {
                return perr(b.pos, "binding must be `(name term)`");
            };
            if pair.len() != 2 {
                return perr(b.pos, "binding must be `(name term)`");
            }
            let Some(name) = pair[0].as_sym() else {
                return perr(pair[0].pos, "binding name must be a symbol");
            };
            let bound = self.parse(&pair[1])?;
            if frame.insert(name.to_string(), bound).is_some() {
                return perr(pair[0].pos, format!("duplicate let binding `{name}`"));
            }
        }
        self.lets.push(frame);
        let body = self.parse(&rest[1]);
        self.lets.pop();
        body
    }

    fn parse_annotation(&mut self, pos: Pos, rest: &[Sexp]) -> Result<Term, FrontendError> {
        // (! term :attr value ...) — attributes (including :named) are
        // stripped; they never change the term's meaning.
        if rest.is_empty() {
            return perr(pos, "`!` expects a term and attributes");
        }
        self.parse(&rest[0])
    }
}

fn parse_err(pos: Pos, msg: String) -> FrontendError {
    FrontendError::Parse {
        line: pos.line,
        col: pos.col,
        msg,
    }
}

fn never_here(pos: Pos, what: &str) -> FrontendError {
    parse_err(pos, format!("internal: lexer produced invalid {what}"))
}

/// Parses `(_ bvN w)` leaves.
fn parse_indexed_leaf(sexp: &Sexp) -> Result<Term, FrontendError> {
    let pos = sexp.pos;
    let items = sexp.as_list().unwrap();
    if items.len() == 3 {
        if let (Some(sym), SexpKind::Atom(Atom::Num(w))) = (items[1].as_sym(), &items[2].kind) {
            if let Some(digits) = sym.strip_prefix("bv") {
                if digits.chars().all(|c| c.is_ascii_digit()) && !digits.is_empty() {
                    let width: u32 = w
                        .parse()
                        .map_err(|_| parse_err(pos, format!("bad width `{w}`")))?;
                    if width == 0 {
                        return perr(pos, "bit-vector width must be at least 1");
                    }
                    if width > MAX_WIDTH {
                        return unsupported(pos, format!("(_ bv{digits} {width})"), "widths above 64");
                    }
                    let value: u64 = digits.parse().map_err(|_| {
                        parse_err(pos, format!("literal value `{digits}` too large"))
                    })?;
                    if width < 64 && value >= (1u64 << width) {
                        return perr(
                            pos,
                            format!("literal value {value} does not fit in {width} bits"),
                        );
                    }
                    return Ok(Term::bv_lit(value, width));
                }
            }
        }
    }
    perr(pos, "malformed indexed term")
}

/// Parses indexed operator heads like `(_ extract 2 1)`.
fn parse_indexed_op(sexp: &Sexp) -> Result<Op, FrontendError> {
    let pos = sexp.pos;
    let Some(items) = sexp.as_list() else {
        return perr(pos, "expected indexed operator");
    };
    if items.len() < 2 || items[0].as_sym() != Some("_") {
        return perr(pos, "expected indexed operator");
    }
    let Some(name) = items[1].as_sym() else {
        return perr(items[1].pos, "expected operator name");
    };
    let num = |i: usize| -> Result<u32, FrontendError> {
        match &items[i].kind {
            SexpKind::Atom(Atom::Num(d)) => d
                .parse()
                .map_err(|_| parse_err(items[i].pos, format!("bad index `{d}`"))),
            _ => Err(parse_err(items[i].pos, "expected numeral index".into())),
        }
    };
    match (name, items.len()) {
        ("extract", 4) => Ok(Op::Extract {
            high: num(2)?,
            low: num(3)?,
        }),
        ("zero_extend", 3) => Ok(Op::ZeroExtend(num(2)?)),
        ("sign_extend", 3) => Ok(Op::SignExtend(num(2)?)),
        ("rotate_left", 3) => Ok(Op::RotateLeft(num(2)?)),
        ("rotate_right", 3) => Ok(Op::RotateRight(num(2)?)),
        ("repeat", 3) => Ok(Op::Repeat(num(2)?)),
        _ => unsupported(pos, format!("(_ {name} ...)"), "unknown indexed operator"),
    }
}

/// Parses a sort s-expression: `Bool`, `Int`, `(_ BitVec k)`.
pub fn parse_sort(sexp: &Sexp) -> Result<Sort, FrontendError> {
    let pos = sexp.pos;
    if let Some(name) = sexp.as_sym() {
        return match name {
            "Bool" => Ok(Sort::Bool),
            "Int" => Ok(Sort::Int),
            other => unsupported(pos, other, "unknown sort"),
        };
    }
    if let Some(items) = sexp.as_list() {
        if items.len() == 3
            && items[0].as_sym() == Some("_")
            && items[1].as_sym() == Some("BitVec")
        {
            if let SexpKind::Atom(Atom::Num(d)) = &items[2].kind {
                let width: u32 = d
                    .parse()
                    .map_err(|_| parse_err(items[2].pos, format!("bad width `{d}`")))?;
                if width == 0 {
                    return perr(pos, "bit-vector width must be at least 1");
                }
                if width > MAX_WIDTH {
                    return unsupported(pos, format!("(_ BitVec {width})"), "widths above 64");
                }
                return Ok(Sort::BitVec(width));
            }
        }
    }
    perr(pos, "malformed sort")
}

/// Parses one term against a symbol table. Used for `get-value` payloads and
/// by the reference backend.
pub fn parse_term(sexp: &Sexp, table: &SymbolTable) -> Result<Term, FrontendError> {
    TermParser::new(table).parse(sexp)
}

/// Convenience wrapper: read and parse a single term from text.
pub fn parse_term_str(input: &str, table: &SymbolTable) -> Result<Term, FrontendError> {
    let sexp = sexp::read_one(input).map_err(|e| FrontendError::Parse {
        line: e.pos.line,
        col: e.pos.col,
        msg: e.msg,
    })?;
    parse_term(&sexp, table)
}

const KNOWN_LOGICS: &[&str] = &["QF_BV", "QF_UFNIA", "QF_NIA", "QF_UFNIA+BV", "ALL"];

/// Parses and sort-checks a full script.
pub fn parse_script(input: &str) -> Result<Script, FrontendError> {
    let forms = sexp::read_all(input).map_err(|e| FrontendError::Parse {
        line: e.pos.line,
        col: e.pos.col,
        msg: e.msg,
    })?;
    let mut script = Script::default();
    let mut table = SymbolTable::new();
    let mut after_check_sat = false;

    for form in &forms {
        let pos = form.pos;
        let Some(items) = form.as_list() else {
            return perr(pos, "expected a command");
        };
        let Some(head) = form.head() else {
            return perr(pos, "expected a command");
        };

        if after_check_sat && !matches!(head, "get-model" | "exit") {
            return unsupported(pos, head, "commands after check-sat");
        }

        match head {
            "set-logic" => {
                if items.len() != 2 {
                    return perr(pos, "set-logic expects one argument");
                }
                let Some(logic) = items[1].as_sym() else {
                    return perr(items[1].pos, "expected logic name");
                };
                if script.logic.is_some() {
                    return perr(pos, "set-logic given twice");
                }
                if !KNOWN_LOGICS.contains(&logic) {
                    return unsupported(items[1].pos, logic, "unsupported logic");
                }
                script.logic = Some(logic.to_string());
            }
            "set-option" | "set-info" => {
                if items.len() < 2 {
                    return perr(pos, format!("{head} expects a keyword"));
                }
                let SexpKind::Atom(Atom::Kw(kw)) = &items[1].kind else {
                    return perr(items[1].pos, "expected a keyword");
                };
                if head == "set-option" {
                    let value = items
                        .get(2)
                        .map(|v| raw_atom_text(v))
                        .unwrap_or_default();
                    script.options.push((kw.clone(), value));
                }
            }
            "declare-const" => {
                if items.len() != 3 {
                    return perr(pos, "declare-const expects a name and a sort");
                }
                let name = symbol_of(&items[1])?;
                let sort = parse_sort(&items[2])?;
                check_declared_sort(&script, &items[2].pos, sort)?;
                declare(&mut table, &mut script, pos, name, sort)?;
            }
            "declare-fun" => {
                if items.len() != 4 {
                    return perr(pos, "declare-fun expects a name, argument sorts, and a sort");
                }
                let name = symbol_of(&items[1])?;
                let Some(arg_sorts) = items[2].as_list() else {
                    return perr(items[2].pos, "expected argument sort list");
                };
                let ret = parse_sort(&items[3])?;
                if arg_sorts.is_empty() {
                    check_declared_sort(&script, &items[3].pos, ret)?;
                    declare(&mut table, &mut script, pos, name, ret)?;
                } else {
                    // n-ary declarations are accepted only for this tool's own
                    // abstraction UFs, as they appear in translation dumps
                    let args: Vec<Sort> = arg_sorts
                        .iter()
                        .map(parse_sort)
                        .collect::<Result<_, _>>()?;
                    let Some((uf, width)) = uf_pattern(&name) else {
                        return unsupported(pos, &name, "uninterpreted functions with arguments");
                    };
                    if args != [Sort::Int, Sort::Int] || ret != Sort::Int {
                        return unsupported(pos, &name, "abstraction UF with unexpected signature");
                    }
                    table
                        .declare_uf(uf, width)
                        .map_err(|m| parse_err(pos, m))?;
                    script.uf_declarations.push((uf, width));
                }
            }
            "define-fun" => {
                if items.len() != 5 {
                    return perr(pos, "define-fun expects name, params, sort, body");
                }
                let name = symbol_of(&items[1])?;
                let Some(param_list) = items[2].as_list() else {
                    return perr(items[2].pos, "expected parameter list");
                };
                let mut params = Vec::new();
                for p in param_list {
                    let Some(pair) = p.as_list() else {
                        return perr(p.pos, "parameter must be `(name sort)`");
                    };
                    if pair.len() != 2 {
                        return perr(p.pos, "parameter must be `(name sort)`");
                    }
                    let pname = symbol_of(&pair[0])?;
                    let psort = parse_sort(&pair[1])?;
                    params.push((pname, psort));
                }
                let ret = parse_sort(&items[3])?;
                if is_reserved(&name) {
                    return perr(pos, format!("cannot redefine `{name}`"));
                }
                // parse the body with parameters visible as constants and the
                // function's own signature visible, so that self-recursive
                // definitions parse and are then rejected by expand_defines
                let mut body_table = table.clone();
                body_table
                    .define(Definition {
                        name: name.clone(),
                        params: params.clone(),
                        ret,
                        body: Term::tru(),
                    })
                    .map_err(|m| parse_err(pos, m))?;
                for (pname, psort) in &params {
                    body_table
                        .declare_const(pname, *psort)
                        .map_err(|m| parse_err(pos, m))?;
                }
                let body = parse_term(&items[4], &body_table)?;
                if body.sort() != ret {
                    return serr(
                        items[4].pos,
                        SortError::Mismatch {
                            op: "define-fun",
                            left: ret,
                            right: body.sort(),
                        },
                    );
                }
                let def = Definition {
                    name: name.clone(),
                    params,
                    ret,
                    body,
                };
                table.define(def.clone()).map_err(|m| parse_err(pos, m))?;
                script.definitions.push(def);
            }
            "assert" => {
                if items.len() != 2 {
                    return perr(pos, "assert expects one term");
                }
                let t = parse_term(&items[1], &table)?;
                if t.sort() != Sort::Bool {
                    return serr(
                        items[1].pos,
                        SortError::Expected {
                            op: "assert",
                            expected: "Bool",
                            got: t.sort(),
                        },
                    );
                }
                check_logic_fragment(&script, items[1].pos, &t)?;
                script.assertions.push(t);
            }
            "check-sat" => {
                if script.has_check_sat {
                    return unsupported(pos, "check-sat", "more than one check-sat");
                }
                script.has_check_sat = true;
                after_check_sat = true;
            }
            "get-model" => {
                // reachable only after check-sat, enforced above
                script.wants_model = true;
            }
            "exit" => break,
            "push" | "pop" | "get-unsat-core" | "get-assertions" | "get-value"
            | "check-sat-assuming" | "reset" | "reset-assertions" | "get-unsat-assumptions" => {
                return unsupported(pos, head, "single-query solver");
            }
            other => return unsupported(pos, other, "unknown command"),
        }
    }
    Ok(script)
}

fn declare(
    table: &mut SymbolTable,
    script: &mut Script,
    pos: Pos,
    name: String,
    sort: Sort,
) -> Result<(), FrontendError> {
    if is_reserved(&name) {
        return perr(pos, format!("cannot declare reserved symbol `{name}`"));
    }
    table
        .declare_const(&name, sort)
        .map_err(|m| parse_err(pos, m))?;
    script.declarations.push((name, sort));
    Ok(())
}

fn symbol_of(sexp: &Sexp) -> Result<String, FrontendError> {
    sexp.as_sym()
        .map(str::to_string)
        .ok_or_else(|| parse_err(sexp.pos, "expected a symbol".into()))
}

fn raw_atom_text(sexp: &Sexp) -> String {
    match &sexp.kind {
        SexpKind::Atom(Atom::Sym(s)) => s.clone(),
        SexpKind::Atom(Atom::Num(s)) => s.clone(),
        SexpKind::Atom(Atom::Str(s)) => s.clone(),
        SexpKind::Atom(Atom::Bin(s)) => format!("#b{s}"),
        SexpKind::Atom(Atom::Hex(s)) => format!("#x{s}"),
        SexpKind::Atom(Atom::Kw(s)) => format!(":{s}"),
        SexpKind::List(_) => String::new(),
    }
}

/// Recognizes the canonical abstraction-UF names `bvand_k`/`bvshl_k`/`bvlshr_k`.
fn uf_pattern(name: &str) -> Option<(UfOp, u32)> {
    for (prefix, op) in [
        ("bvand_", UfOp::And),
        ("bvshl_", UfOp::Shl),
        ("bvlshr_", UfOp::Lshr),
    ] {
        if let Some(digits) = name.strip_prefix(prefix) {
            if let Ok(width) = digits.parse::<u32>() {
                if (1..=MAX_WIDTH).contains(&width) {
                    return Some((op, width));
                }
            }
        }
    }
    None
}

/// QF_BV scripts must not declare Int constants; QF_UFNIA dumps must not
/// declare bit-vector constants.
fn check_declared_sort(script: &Script, pos: &Pos, sort: Sort) -> Result<(), FrontendError> {
    match (script.logic.as_deref(), sort) {
        (Some("QF_BV"), Sort::Int) => unsupported(*pos, "Int", "Int constants in QF_BV"),
        (Some("QF_UFNIA" | "QF_NIA"), Sort::BitVec(_)) => {
            unsupported(*pos, "BitVec", "bit-vector constants in an integer logic")
        }
        _ => Ok(()),
    }
}

/// Integer-logic assertions must not contain bit-vector subterms.
fn check_logic_fragment(script: &Script, pos: Pos, t: &Term) -> Result<(), FrontendError> {
    if matches!(script.logic.as_deref(), Some("QF_UFNIA" | "QF_NIA")) {
        let mut bad = false;
        t.visit(&mut |s| {
            if s.sort().is_bv() {
                bad = true;
            }
        });
        if bad {
            return unsupported(pos, "bit-vector term", "bit-vector terms in an integer logic");
        }
    }
    Ok(())
}

/// Beta-expands every `define-fun` application; the result has no definitions
/// and no `FunApp` nodes.
pub fn expand_defines(script: &Script) -> Result<Script, FrontendError> {
    if script.definitions.is_empty() {
        return Ok(script.clone());
    }
    let defs: HashMap<&str, &Definition> = script
        .definitions
        .iter()
        .map(|d| (d.name.as_str(), d))
        .collect();

    fn subst(t: &Term, map: &HashMap<&str, Term>) -> Term {
        match t.kind() {
            TermKind::Var(name) => map.get(name.as_str()).cloned().unwrap_or_else(|| t.clone()),
            TermKind::App(op, args) => {
                let new_args: Vec<Term> = args.iter().map(|a| subst(a, map)).collect();
                if new_args == *args {
                    t.clone()
                } else {
                    Term::apply(*op, new_args)
                }
            }
            TermKind::FunApp(name, args) => {
                let new_args: Vec<Term> = args.iter().map(|a| subst(a, map)).collect();
                Term::fun_app(name.clone(), new_args, t.sort())
            }
            _ => t.clone(),
        }
    }

    fn expand(
        t: &Term,
        defs: &HashMap<&str, &Definition>,
        active: &mut Vec<String>,
    ) -> Result<Term, FrontendError> {
        match t.kind() {
            TermKind::FunApp(name, args) => {
                if active.iter().any(|a| a == name) {
                    return Err(FrontendError::Recursion { name: name.clone() });
                }
                let def = defs
                    .get(name.as_str())
                    .unwrap_or_else(|| panic!("definition `{name}` vanished"));
                let expanded_args: Vec<Term> = args
                    .iter()
                    .map(|a| expand(a, defs, active))
                    .collect::<Result<_, _>>()?;
                let map: HashMap<&str, Term> = def
                    .params
                    .iter()
                    .map(|(p, _)| p.as_str())
                    .zip(expanded_args)
                    .collect();
                let body = subst(&def.body, &map);
                active.push(name.clone());
                let out = expand(&body, defs, active);
                active.pop();
                out
            }
            TermKind::App(op, args) => {
                let new_args: Vec<Term> = args
                    .iter()
                    .map(|a| expand(a, defs, active))
                    .collect::<Result<_, _>>()?;
                if new_args == *args {
                    Ok(t.clone())
                } else {
                    Ok(Term::apply(*op, new_args))
                }
            }
            _ => Ok(t.clone()),
        }
    }

    let mut out = script.clone();
    out.definitions.clear();
    out.assertions = script
        .assertions
        .iter()
        .map(|a| expand(a, &defs, &mut Vec::new()))
        .collect::<Result<_, _>>()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(v: u64, w: u32) -> Term {
        Term::bv_lit(v, w)
    }

    #[test]
    fn parses_basic_script() {
        let s = parse_script(
            "(set-logic QF_BV)(declare-const x (_ BitVec 4))(assert (bvult x #x3))(check-sat)",
        )
        .unwrap();
        assert_eq!(s.logic.as_deref(), Some("QF_BV"));
        assert_eq!(s.declarations, vec![("x".to_string(), Sort::BitVec(4))]);
        let expected = Term::apply(
            Op::BvUlt,
            vec![Term::var("x", Sort::BitVec(4)), bv(3, 4)],
        );
        assert_eq!(s.assertions, vec![expected]);
        assert!(s.has_check_sat);
    }

    #[test]
    fn literal_forms_normalize() {
        let s = parse_script("(assert (= #b101 #b101))(check-sat)").unwrap();
        assert_eq!(s.assertions[0], Term::eq(bv(5, 3), bv(5, 3)));
        let forms = ["#b0101", "#x5", "(_ bv5 4)"];
        let mut parsed = Vec::new();
        for f in forms {
            parsed.push(parse_term_str(f, &SymbolTable::new()).unwrap());
        }
        assert_eq!(parsed[0], parsed[2]);
        assert_eq!(parsed[0], bv(5, 4));
        // #x5 is width 4 as well
        assert_eq!(parsed[1], bv(5, 4));
    }

    #[test]
    fn non_bool_assertion_is_a_sort_error() {
        let err = parse_script(
            "(declare-const x (_ BitVec 4))(declare-const y (_ BitVec 4))(assert (bvadd x y))(check-sat)",
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::Sort { .. }), "{err}");
    }

    #[test]
    fn unsupported_commands_are_reported() {
        let err = parse_script("(push 1)").unwrap_err();
        assert!(matches!(err, FrontendError::Unsupported { .. }), "{err}");
        let err = parse_script("(declare-fun f ((_ BitVec 2)) (_ BitVec 2))").unwrap_err();
        assert!(matches!(err, FrontendError::Unsupported { .. }), "{err}");
    }

    #[test]
    fn commands_after_check_sat_rejected() {
        let err =
            parse_script("(declare-const p Bool)(assert p)(check-sat)(assert p)").unwrap_err();
        assert!(matches!(err, FrontendError::Unsupported { .. }), "{err}");
        // get-model and exit are fine
        let s = parse_script("(declare-const p Bool)(assert p)(check-sat)(get-model)(exit)")
            .unwrap();
        assert!(s.wants_model);
    }

    #[test]
    fn let_bindings_inline() {
        let s = parse_script(
            "(declare-const x (_ BitVec 2))(assert (let ((y (bvadd x x))) (= y x)))(check-sat)",
        )
        .unwrap();
        let x = Term::var("x", Sort::BitVec(2));
        let sum = Term::apply(Op::BvAdd, vec![x.clone(), x.clone()]);
        assert_eq!(s.assertions[0], Term::eq(sum, x));
    }

    #[test]
    fn named_annotations_are_stripped() {
        let s = parse_script(
            "(declare-const p Bool)(assert (! p :named foo))(check-sat)",
        )
        .unwrap();
        assert_eq!(s.assertions[0], Term::var("p", Sort::Bool));
    }

    #[test]
    fn define_fun_expansion() {
        let s = parse_script(
            "(declare-const x (_ BitVec 4))(declare-const y (_ BitVec 4))\
             (define-fun f ((a (_ BitVec 4))) (_ BitVec 4) (bvnot a))\
             (assert (= (f x) y))(check-sat)",
        )
        .unwrap();
        let e = expand_defines(&s).unwrap();
        let x = Term::var("x", Sort::BitVec(4));
        let y = Term::var("y", Sort::BitVec(4));
        assert_eq!(
            e.assertions[0],
            Term::eq(Term::apply(Op::BvNot, vec![x]), y)
        );
        assert!(e.definitions.is_empty());
    }

    #[test]
    fn nullary_define_fun() {
        let s = parse_script(
            "(declare-const x (_ BitVec 4))\
             (define-fun g () (_ BitVec 4) #x0)\
             (assert (bvult x (g)))(check-sat)",
        )
        .unwrap();
        let e = expand_defines(&s).unwrap();
        let x = Term::var("x", Sort::BitVec(4));
        assert_eq!(
            e.assertions[0],
            Term::apply(Op::BvUlt, vec![x, bv(0, 4)])
        );
        // bare symbol reference works too
        let s2 = parse_script(
            "(declare-const x (_ BitVec 4))\
             (define-fun g () (_ BitVec 4) #x0)\
             (assert (bvult x g))(check-sat)",
        )
        .unwrap();
        assert_eq!(expand_defines(&s2).unwrap().assertions, e.assertions);
    }

    #[test]
    fn recursive_define_fun_is_an_error() {
        let s = parse_script(
            "(declare-const x (_ BitVec 2))\
             (define-fun f ((a (_ BitVec 2))) (_ BitVec 2) (f a))\
             (assert (= (f x) x))(check-sat)",
        )
        .unwrap();
        let err = expand_defines(&s).unwrap_err();
        assert!(matches!(err, FrontendError::Recursion { .. }), "{err}");
    }

    #[test]
    fn mutual_recursion_impossible_to_declare() {
        // forward references fail at parse time, so mutual recursion cannot
        // be expressed; self-recursion is the only case expand must catch
        let err = parse_script(
            "(define-fun f ((a Bool)) Bool (g a))(define-fun g ((a Bool)) Bool (f a))",
        )
        .unwrap_err();
        assert!(matches!(
            err,
            FrontendError::Parse { .. } | FrontendError::Unsupported { .. }
        ));
    }

    #[test]
    fn width_cap() {
        let err = parse_script("(declare-const x (_ BitVec 65))").unwrap_err();
        assert!(matches!(err, FrontendError::Unsupported { .. }), "{err}");
    }

    #[test]
    fn oversized_bv_literal_rejected() {
        let err = parse_term_str("(_ bv16 4)", &SymbolTable::new()).unwrap_err();
        assert!(matches!(err, FrontendError::Parse { .. }), "{err}");
    }

    #[test]
    fn second_check_sat_rejected() {
        let err = parse_script("(check-sat)(check-sat)").unwrap_err();
        assert!(matches!(err, FrontendError::Unsupported { .. }), "{err}");
    }

    #[test]
    fn chained_equality_expands() {
        let t = parse_term_str("(= 1 2 3)", &SymbolTable::new()).unwrap();
        let one = Term::int_lit(1);
        let two = Term::int_lit(2);
        let three = Term::int_lit(3);
        assert_eq!(
            t,
            Term::apply(
                Op::And,
                vec![Term::eq(one, two.clone()), Term::eq(two, three)]
            )
        );
    }

    #[test]
    fn left_assoc_folding() {
        let mut table = SymbolTable::new();
        table.declare_const("a", Sort::BitVec(2)).unwrap();
        table.declare_const("b", Sort::BitVec(2)).unwrap();
        table.declare_const("c", Sort::BitVec(2)).unwrap();
        let t = parse_term_str("(bvadd a b c)", &table).unwrap();
        let a = Term::var("a", Sort::BitVec(2));
        let b = Term::var("b", Sort::BitVec(2));
        let c = Term::var("c", Sort::BitVec(2));
        assert_eq!(
            t,
            Term::apply(Op::BvAdd, vec![Term::apply(Op::BvAdd, vec![a, b]), c])
        );
    }

    #[test]
    fn ufnia_dump_fragment_parses() {
        let s = parse_script(
            "(set-logic QF_UFNIA)\
             (declare-fun x!0 () Int)\
             (declare-fun bvand_4 (Int Int) Int)\
             (assert (and (<= 0 x!0) (<= x!0 15)))\
             (assert (= (bvand_4 x!0 9) 8))\
             (check-sat)",
        )
        .unwrap();
        assert_eq!(s.uf_declarations, vec![(UfOp::And, 4)]);
        let x = Term::var("x!0", Sort::Int);
        assert_eq!(
            s.assertions[1],
            Term::eq(
                Term::apply(Op::Uf(UfOp::And, 4), vec![x, Term::int_lit(9)]),
                Term::int_lit(8)
            )
        );
    }

    #[test]
    fn bv_terms_rejected_in_integer_logic() {
        let err = parse_script("(set-logic QF_UFNIA)(assert (= #b1 #b1))(check-sat)").unwrap_err();
        assert!(matches!(err, FrontendError::Unsupported { .. }), "{err}");
    }
}
