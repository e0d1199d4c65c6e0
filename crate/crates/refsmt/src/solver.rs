// SPDX-License-Identifier: Apache-2.0

//! Engine state and the bounded-enumeration search.
//!
//! The solver decides formulas whose variables have finite discoverable
//! domains: Booleans, bit-vectors, and integers bounded by asserted range
//! constraints `lo <= x`, `x <= hi`. Uninterpreted applications are
//! enumerated per congruence class (operator, width, argument values) over
//! their asserted ranges. Anything unbounded, or any search that exceeds the
//! step budget, answers `unknown` — never a wrong verdict.

use std::collections::HashMap;

use intblast::parser::{self, SymbolTable};
use intblast::printer;
use intblast::sexp::{Atom, Sexp, SexpKind};
use intblast::term::{mask, Op, Sort, Term, TermKind, UfOp};

use crate::eval::{eval, AppKey, Ctx, V};

/// Hard cap on enumerated variable-domain product.
const DOMAIN_BUDGET: u128 = 1 << 24;
/// Hard cap on search steps (value-assignment attempts).
const STEP_BUDGET: u64 = 20_000_000;

pub enum Reply {
    Success,
    Verdict(&'static str),
    Form(String),
    Error(String),
    Exit,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub vars: HashMap<String, V>,
    pub apps: HashMap<AppKey, i128>,
}

enum Outcome {
    Sat(Model),
    Unsat,
    Unknown(String),
}

#[derive(Default)]
pub struct Engine {
    pub print_success: bool,
    table: SymbolTable,
    consts: Vec<(String, Sort)>,
    assertions: Vec<Term>,
    model: Option<Model>,
    last_core: Option<Vec<String>>,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn execute(&mut self, form: &Sexp) -> Reply {
        match self.dispatch(form) {
            Ok(reply) => reply,
            Err(msg) => Reply::Error(msg),
        }
    }

    fn dispatch(&mut self, form: &Sexp) -> Result<Reply, String> {
        let Some(items) = form.as_list() else {
            return Err("expected a command".into());
        };
        let Some(head) = form.head() else {
            return Err("expected a command".into());
        };
        match head {
            "set-option" => {
                let kw = match items.get(1).map(|i| &i.kind) {
                    Some(SexpKind::Atom(Atom::Kw(kw))) => kw.clone(),
                    _ => return Err("set-option expects a keyword".into()),
                };
                let value = items.get(2).and_then(|v| v.as_sym()).unwrap_or("");
                match kw.as_str() {
                    "print-success" => {
                        self.print_success = value == "true";
                        Ok(Reply::Success)
                    }
                    "produce-models" | "produce-unsat-assumptions" | "produce-unsat-cores" => {
                        Ok(Reply::Success)
                    }
                    _ => Ok(Reply::Form("unsupported".into())),
                }
            }
            "set-logic" | "set-info" => Ok(Reply::Success),
            "declare-const" => {
                if items.len() != 3 {
                    return Err("declare-const expects a name and a sort".into());
                }
                let name = items[1].as_sym().ok_or("expected a symbol")?.to_string();
                let sort = parser::parse_sort(&items[2]).map_err(|e| e.to_string())?;
                self.declare(&name, sort)?;
                Ok(Reply::Success)
            }
            "declare-fun" => {
                if items.len() != 4 {
                    return Err("declare-fun expects name, argument sorts, sort".into());
                }
                let name = items[1].as_sym().ok_or("expected a symbol")?.to_string();
                let args = items[2].as_list().ok_or("expected argument sorts")?;
                let ret = parser::parse_sort(&items[3]).map_err(|e| e.to_string())?;
                if args.is_empty() {
                    self.declare(&name, ret)?;
                } else {
                    let (op, width) = uf_signature(&name).ok_or_else(|| {
                        format!("only the bvand_k/bvshl_k/bvlshr_k functions are supported, got `{name}`")
                    })?;
                    if args.len() != 2 || ret != Sort::Int {
                        return Err(format!("`{name}` must have signature (Int Int) Int"));
                    }
                    self.table.declare_uf(op, width).map_err(|e| e.to_string())?;
                }
                Ok(Reply::Success)
            }
            "assert" => {
                if items.len() != 2 {
                    return Err("assert expects one term".into());
                }
                let t = parser::parse_term(&items[1], &self.table).map_err(|e| e.to_string())?;
                if t.sort() != Sort::Bool {
                    return Err("asserted term is not Boolean".into());
                }
                self.assertions.push(t);
                Ok(Reply::Success)
            }
            "check-sat" => {
                self.last_core = None;
                match self.search(&[]) {
                    Outcome::Sat(model) => {
                        self.model = Some(model);
                        Ok(Reply::Verdict("sat"))
                    }
                    Outcome::Unsat => {
                        self.model = None;
                        Ok(Reply::Verdict("unsat"))
                    }
                    Outcome::Unknown(reason) => {
                        eprintln!("refsmt: unknown: {reason}");
                        self.model = None;
                        Ok(Reply::Verdict("unknown"))
                    }
                }
            }
            "check-sat-assuming" => {
                let assumed = items
                    .get(1)
                    .and_then(|l| l.as_list())
                    .ok_or("check-sat-assuming expects a literal list")?;
                let mut names = Vec::new();
                for a in assumed {
                    let name = a.as_sym().ok_or("assumption must be a plain symbol")?;
                    if self.table.const_sort(name) != Some(Sort::Bool) {
                        return Err(format!("assumption `{name}` is not a Boolean constant"));
                    }
                    names.push(name.to_string());
                }
                self.last_core = None;
                match self.search(&names) {
                    Outcome::Sat(model) => {
                        self.model = Some(model);
                        Ok(Reply::Verdict("sat"))
                    }
                    Outcome::Unsat => {
                        self.model = None;
                        self.last_core = Some(self.minimize_core(names));
                        Ok(Reply::Verdict("unsat"))
                    }
                    Outcome::Unknown(reason) => {
                        eprintln!("refsmt: unknown: {reason}");
                        self.model = None;
                        Ok(Reply::Verdict("unknown"))
                    }
                }
            }
            "get-unsat-assumptions" => match &self.last_core {
                Some(core) => {
                    let rendered: Vec<String> =
                        core.iter().map(|n| printer::symbol_to_string(n)).collect();
                    Ok(Reply::Form(format!("({})", rendered.join(" "))))
                }
                None => Err("no unsat-assumptions available".into()),
            },
            "get-value" => {
                let Some(model) = self.model.clone() else {
                    return Err("no model available".into());
                };
                let wanted = items
                    .get(1)
                    .and_then(|l| l.as_list())
                    .ok_or("get-value expects a term list")?;
                let ctx = Ctx {
                    vars: model.vars,
                    apps: model.apps,
                };
                let mut parts = Vec::new();
                for w in wanted {
                    let t = parser::parse_term(w, &self.table).map_err(|e| e.to_string())?;
                    let v = eval(&t, &ctx);
                    let rendered = render_value(&v)
                        .ok_or_else(|| format!("value of `{t}` is not determined"))?;
                    parts.push(format!("({} {})", printer::term_to_string(&t), rendered));
                }
                Ok(Reply::Form(format!("({})", parts.join(" "))))
            }
            "get-model" => {
                let Some(model) = &self.model else {
                    return Err("no model available".into());
                };
                let mut lines = vec!["(model".to_string()];
                for (name, sort) in &self.consts {
                    let v = model.vars.get(name).copied().unwrap_or(V::Unknown);
                    if let Some(rendered) = render_value(&v) {
                        lines.push(format!(
                            "  (define-fun {} () {} {})",
                            printer::symbol_to_string(name),
                            sort,
                            rendered
                        ));
                    }
                }
                lines.push(")".to_string());
                Ok(Reply::Form(lines.join("\n")))
            }
            "exit" => Ok(Reply::Exit),
            "push" | "pop" | "reset" | "reset-assertions" | "define-fun" | "get-unsat-core" => {
                Err(format!("`{head}` is not supported"))
            }
            other => Err(format!("unknown command `{other}`")),
        }
    }

    fn declare(&mut self, name: &str, sort: Sort) -> Result<(), String> {
        self.table.declare_const(name, sort)?;
        self.consts.push((name.to_string(), sort));
        Ok(())
    }

    /// Deletion-based minimization of an unsat assumption set.
    fn minimize_core(&self, names: Vec<String>) -> Vec<String> {
        let mut core = names;
        let mut i = 0;
        while i < core.len() {
            let mut trial = core.clone();
            trial.remove(i);
            match self.search(&trial) {
                Outcome::Unsat => core = trial,
                _ => i += 1,
            }
        }
        core
    }

    fn search(&self, forced_true: &[String]) -> Outcome {
        Search::new(&self.consts, &self.assertions, forced_true).run()
    }
}

fn uf_signature(name: &str) -> Option<(UfOp, u32)> {
    for (prefix, op) in [
        ("bvand_", UfOp::And),
        ("bvshl_", UfOp::Shl),
        ("bvlshr_", UfOp::Lshr),
    ] {
        if let Some(d) = name.strip_prefix(prefix) {
            if let Ok(w) = d.parse::<u32>() {
                if (1..=64).contains(&w) {
                    return Some((op, w));
                }
            }
        }
    }
    None
}

fn render_value(v: &V) -> Option<String> {
    match v {
        V::B(b) => Some(if *b { "true" } else { "false" }.to_string()),
        V::I(i) => Some(if *i < 0 {
            format!("(- {})", i.unsigned_abs())
        } else {
            i.to_string()
        }),
        V::Bv { value, width } => {
            let mut s = String::from("#b");
            for i in (0..*width).rev() {
                s.push(if (value >> i) & 1 == 1 { '1' } else { '0' });
            }
            Some(s)
        }
        V::Unknown => None,
    }
}

/// Boolean occurrence polarity, for the pure-literal rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Polarity {
    pos: bool,
    neg: bool,
}

/// One enumerable slot: a constant or a UF application occurrence.
enum Slot {
    Var {
        name: String,
        domain: Vec<V>,
    },
    App {
        op: UfOp,
        width: u32,
        args: [Term; 2],
        lo: i128,
        hi: i128,
    },
}

struct Search {
    slots: Vec<Slot>,
    conjuncts: Vec<Term>,
    fixed: Vec<(String, V)>,
    unknown_reason: Option<String>,
    steps: u64,
    /// A fully assigned branch evaluated to unknown (e.g. unguarded division
    /// by zero); exhaustion then cannot prove unsat.
    saw_residual_unknown: bool,
}

impl Search {
    fn new(consts: &[(String, Sort)], assertions: &[Term], forced_true: &[String]) -> Self {
        let mut conjuncts = Vec::new();
        for a in assertions {
            split_conjuncts(a, &mut conjuncts);
        }

        // bounds for integer variables and application terms
        let mut var_bounds: HashMap<String, (Option<i128>, Option<i128>)> = HashMap::new();
        let mut app_bounds: HashMap<Term, (Option<i128>, Option<i128>)> = HashMap::new();
        for c in &conjuncts {
            scan_bound(c, &mut var_bounds, &mut app_bounds);
        }

        // pure-literal analysis for Booleans
        let mut polarity: HashMap<String, Polarity> = HashMap::new();
        let mut polarity_seen: HashMap<(usize, bool), ()> = HashMap::new();
        for c in &conjuncts {
            scan_polarity(c, true, &mut polarity, &mut polarity_seen);
        }
        for name in forced_true {
            polarity.entry(name.clone()).or_default().pos = true;
            polarity.entry(name.clone()).or_default().neg = true;
        }

        let mut slots = Vec::new();
        let mut fixed: Vec<(String, V)> = forced_true
            .iter()
            .map(|n| (n.clone(), V::B(true)))
            .collect();
        let mut unknown_reason = None;

        for (name, sort) in consts {
            if forced_true.iter().any(|f| f == name) {
                continue;
            }
            match sort {
                Sort::Bool => {
                    let p = polarity.get(name).copied().unwrap_or_default();
                    match (p.pos, p.neg) {
                        // pure or absent literals take their safe value
                        (true, true) => slots.push(Slot::Var {
                            name: name.clone(),
                            domain: vec![V::B(false), V::B(true)],
                        }),
                        (true, false) => fixed.push((name.clone(), V::B(true))),
                        _ => fixed.push((name.clone(), V::B(false))),
                    }
                }
                Sort::BitVec(w) => {
                    if *w > 24 {
                        unknown_reason.get_or_insert(format!(
                            "bit-vector variable `{name}` too wide to enumerate"
                        ));
                        continue;
                    }
                    slots.push(Slot::Var {
                        name: name.clone(),
                        domain: (0..=mask(*w))
                            .map(|value| V::Bv { value, width: *w })
                            .collect(),
                    });
                }
                Sort::Int => match var_bounds.get(name) {
                    Some((Some(lo), Some(hi))) if lo <= hi => {
                        slots.push(Slot::Var {
                            name: name.clone(),
                            domain: (*lo..=*hi).map(V::I).collect(),
                        });
                    }
                    Some((Some(_), Some(_))) => {
                        // contradictory bounds: empty domain, branch is unsat
                        slots.push(Slot::Var {
                            name: name.clone(),
                            domain: Vec::new(),
                        });
                    }
                    _ => {
                        unknown_reason.get_or_insert(format!(
                            "integer variable `{name}` has no asserted range"
                        ));
                    }
                },
            }
        }

        // unique UF application occurrences, inner before outer
        let mut app_terms: Vec<Term> = Vec::new();
        let mut seen: HashMap<Term, ()> = HashMap::new();
        for a in assertions {
            a.visit(&mut |s| {
                if let TermKind::App(Op::Uf(_, _), _) = s.kind() {
                    if seen.insert(s.clone(), ()).is_none() {
                        app_terms.push(s.clone());
                    }
                }
            });
        }
        app_terms.sort_by_key(|t| t.tree_size());
        for term in app_terms {
            let TermKind::App(Op::Uf(op, width), args) = term.kind() else {
                unreachable!()
            };
            match app_bounds.get(&term) {
                Some((Some(lo), Some(hi))) => slots.push(Slot::App {
                    op: *op,
                    width: *width,
                    args: [args[0].clone(), args[1].clone()],
                    lo: *lo,
                    hi: *hi,
                }),
                _ => {
                    unknown_reason.get_or_insert(format!(
                        "application `{term}` has no asserted range"
                    ));
                }
            }
        }

        // enumeration budget over variable domains
        let mut product: u128 = 1;
        for slot in &slots {
            if let Slot::Var { domain, .. } = slot {
                product = product.saturating_mul(domain.len().max(1) as u128);
            }
        }
        if product > DOMAIN_BUDGET && unknown_reason.is_none() {
            unknown_reason = Some("variable domain product exceeds the budget".into());
        }

        Search {
            slots,
            conjuncts,
            fixed,
            unknown_reason,
            steps: 0,
            saw_residual_unknown: false,
        }
    }

    fn run(mut self) -> Outcome {
        if let Some(reason) = self.unknown_reason.take() {
            return Outcome::Unknown(reason);
        }
        let mut ctx = Ctx::default();
        for (name, v) in &self.fixed {
            ctx.vars.insert(name.clone(), *v);
        }
        match self.dfs(0, &mut ctx) {
            Err(()) => Outcome::Unknown("step budget exceeded".into()),
            Ok(true) => Outcome::Sat(Model {
                vars: ctx.vars,
                apps: ctx.apps,
            }),
            Ok(false) => {
                if self.saw_residual_unknown {
                    Outcome::Unknown("residual unknown on a full assignment".into())
                } else {
                    Outcome::Unsat
                }
            }
        }
    }

    /// Evaluates every conjunct; `false` on a definite violation. At full
    /// assignments (`total`), unknown residue is tracked for soundness.
    fn consistent(&mut self, ctx: &Ctx, total: bool) -> bool {
        let mut residual = false;
        for c in &self.conjuncts {
            match eval(c, ctx) {
                V::B(false) => return false,
                V::B(true) => {}
                _ => {
                    if total {
                        residual = true;
                    }
                }
            }
        }
        if residual {
            self.saw_residual_unknown = true;
            return false;
        }
        true
    }

    fn dfs(&mut self, pos: usize, ctx: &mut Ctx) -> Result<bool, ()> {
        if pos == self.slots.len() {
            return Ok(self.consistent(ctx, true));
        }
        match &self.slots[pos] {
            Slot::Var { name, domain } => {
                let name = name.clone();
                let domain = domain.clone();
                for v in domain {
                    self.steps += 1;
                    if self.steps > STEP_BUDGET {
                        return Err(());
                    }
                    ctx.vars.insert(name.clone(), v);
                    if self.consistent(ctx, false) && self.dfs(pos + 1, ctx)? {
                        return Ok(true);
                    }
                }
                ctx.vars.remove(&name);
                Ok(false)
            }
            Slot::App {
                op,
                width,
                args,
                lo,
                hi,
                ..
            } => {
                let (op, width, lo, hi) = (*op, *width, *lo, *hi);
                let (a0, a1) = (args[0].clone(), args[1].clone());
                let (va, vb) = match (eval(&a0, ctx), eval(&a1, ctx)) {
                    (V::I(a), V::I(b)) => (a, b),
                    _ => {
                        // argument not determined: an unguarded division or an
                        // overflow; cannot enumerate this branch soundly
                        self.saw_residual_unknown = true;
                        return Ok(false);
                    }
                };
                let key: AppKey = (op, width, va, vb);
                if ctx.apps.contains_key(&key) {
                    // congruence: value already chosen for these arguments
                    return self.dfs(pos + 1, ctx);
                }
                for v in lo..=hi {
                    self.steps += 1;
                    if self.steps > STEP_BUDGET {
                        return Err(());
                    }
                    ctx.apps.insert(key, v);
                    if self.consistent(ctx, false) && self.dfs(pos + 1, ctx)? {
                        return Ok(true);
                    }
                    ctx.apps.remove(&key);
                }
                Ok(false)
            }
        }
    }
}

/// Splits nested top-level conjunctions into separate units.
fn split_conjuncts(t: &Term, out: &mut Vec<Term>) {
    if let TermKind::App(Op::And, args) = t.kind() {
        for a in args {
            split_conjuncts(a, out);
        }
    } else {
        out.push(t.clone());
    }
}

/// Extracts `lo <= x` / `x <= hi` bounds from one conjunct. Only top-level
/// conjuncts participate: a guarded comparison must not tighten any domain.
fn scan_bound(
    t: &Term,
    var_bounds: &mut HashMap<String, (Option<i128>, Option<i128>)>,
    app_bounds: &mut HashMap<Term, (Option<i128>, Option<i128>)>,
) {
    let TermKind::App(op, args) = t.kind() else {
        return;
    };
    // normalize >= into <=
    let (lhs, rhs) = match op {
        Op::IntLe => (&args[0], &args[1]),
        Op::IntGe => (&args[1], &args[0]),
        _ => return,
    };
    let update = |slot: &mut (Option<i128>, Option<i128>), lo: Option<i128>, hi: Option<i128>| {
        if let Some(lo) = lo {
            slot.0 = Some(slot.0.map_or(lo, |old: i128| old.max(lo)));
        }
        if let Some(hi) = hi {
            slot.1 = Some(slot.1.map_or(hi, |old: i128| old.min(hi)));
        }
    };
    match (lhs.kind(), rhs.kind()) {
        (TermKind::IntLit(lo), TermKind::Var(name)) => {
            update(var_bounds.entry(name.clone()).or_default(), Some(*lo), None);
        }
        (TermKind::Var(name), TermKind::IntLit(hi)) => {
            update(var_bounds.entry(name.clone()).or_default(), None, Some(*hi));
        }
        (TermKind::IntLit(lo), TermKind::App(Op::Uf(_, _), _)) => {
            update(app_bounds.entry(rhs.clone()).or_default(), Some(*lo), None);
        }
        (TermKind::App(Op::Uf(_, _), _), TermKind::IntLit(hi)) => {
            update(app_bounds.entry(lhs.clone()).or_default(), None, Some(*hi));
        }
        _ => {}
    }
}

/// Records Boolean variable polarities. `Eq`/`Xor`/`Ite` contexts count both
/// ways; everything under `Not` or an implication antecedent flips. The
/// `seen` set keeps shared subterms from being re-walked per polarity.
fn scan_polarity(
    t: &Term,
    positive: bool,
    out: &mut HashMap<String, Polarity>,
    seen: &mut HashMap<(usize, bool), ()>,
) {
    if seen.insert((t.ptr_id(), positive), ()).is_some() {
        return;
    }
    match t.kind() {
        TermKind::Var(name) if t.sort() == Sort::Bool => {
            let p = out.entry(name.clone()).or_default();
            if positive {
                p.pos = true;
            } else {
                p.neg = true;
            }
        }
        TermKind::App(op, args) => match op {
            Op::Not => scan_polarity(&args[0], !positive, out, seen),
            Op::Implies => {
                scan_polarity(&args[0], !positive, out, seen);
                scan_polarity(&args[1], positive, out, seen);
            }
            Op::And | Op::Or => {
                for a in args {
                    scan_polarity(a, positive, out, seen);
                }
            }
            _ => {
                // mixed or non-monotone context: both polarities
                for a in args {
                    scan_polarity(a, true, out, seen);
                    scan_polarity(a, false, out, seen);
                }
            }
        },
        _ => {}
    }
}
