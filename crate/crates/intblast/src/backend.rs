// SPDX-License-Identifier: Apache-2.0

//! Child-process client for SMT-LIB-2-compliant solvers.
//!
//! A session owns one solver process and speaks the text protocol over its
//! standard streams in strict request/response alternation (`:print-success`
//! is enabled first thing). Responses are read line-based with
//! balanced-parenthesis continuation for multi-line `get-value` output. A
//! timeout kills the child; a dead session never comes back.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::Instant;

use crate::error::BackendError;
use crate::printer;
use crate::sexp::{self, Atom, Sexp, SexpKind};
use crate::oracle::Value;
use crate::term::{Sort, Term, TermKind, UfOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckResult {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssumeResult {
    Sat,
    /// Unsat with the subset of assumption names in the unsat core.
    Unsat(Vec<String>),
    Unknown,
}

pub struct SolverSession {
    command: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    declared: HashSet<String>,
    dead: bool,
}

impl SolverSession {
    /// Spawns the solver and performs option/logic setup. `command` is a full
    /// command line, split on whitespace. For sessions that will run
    /// `check-sat-assuming`, pass `produce_unsat_assumptions`.
    pub fn start(
        command: &str,
        logic: &str,
        produce_unsat_assumptions: bool,
    ) -> Result<SolverSession, BackendError> {
        let mut parts = command.split_whitespace();
        let Some(program) = parts.next() else {
            return Err(BackendError::Protocol("empty solver command".into()));
        };
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BackendError::Spawn {
                command: command.to_string(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        let mut session = SolverSession {
            command: command.to_string(),
            child,
            stdin,
            lines,
            declared: HashSet::new(),
            dead: false,
        };
        session.command_expect_success("(set-option :print-success true)", None)?;
        session.command_expect_success("(set-option :produce-models true)", None)?;
        if produce_unsat_assumptions {
            session.command_expect_success("(set-option :produce-unsat-assumptions true)", None)?;
        }
        session.command_expect_success(&format!("(set-logic {logic})"), None)?;
        Ok(session)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.declared.contains(name)
    }

    fn guard(&self) -> Result<(), BackendError> {
        if self.dead {
            Err(BackendError::Died)
        } else {
            Ok(())
        }
    }

    fn send(&mut self, line: &str) -> Result<(), BackendError> {
        self.guard()?;
        writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush()).map_err(|_| {
            self.dead = true;
            BackendError::Died
        })
    }

    /// Reads one complete response form (single line or balanced multi-line).
    fn read_response(&mut self, deadline: Option<Instant>) -> Result<String, BackendError> {
        let mut response = String::new();
        let mut balance = 0i64;
        loop {
            let line = match deadline {
                None => self.lines.recv().map_err(|_| {
                    self.dead = true;
                    BackendError::Died
                })?,
                Some(d) => {
                    let now = Instant::now();
                    let remaining = d.saturating_duration_since(now);
                    if remaining.is_zero() {
                        self.kill();
                        return Err(BackendError::Timeout);
                    }
                    match self.lines.recv_timeout(remaining) {
                        Ok(line) => line,
                        Err(RecvTimeoutError::Timeout) => {
                            self.kill();
                            return Err(BackendError::Timeout);
                        }
                        Err(RecvTimeoutError::Disconnected) => {
                            self.dead = true;
                            return Err(BackendError::Died);
                        }
                    }
                }
            };
            let line = line.map_err(|_| {
                self.dead = true;
                BackendError::Died
            })?;
            if line.trim().is_empty() && response.is_empty() {
                continue;
            }
            balance += sexp::paren_balance(&line);
            if !response.is_empty() {
                response.push('\n');
            }
            response.push_str(&line);
            if balance <= 0 {
                return Ok(response);
            }
        }
    }

    fn command_expect_success(
        &mut self,
        line: &str,
        deadline: Option<Instant>,
    ) -> Result<(), BackendError> {
        self.send(line)?;
        let response = self.read_response(deadline)?;
        match response.trim() {
            "success" => Ok(()),
            other => Err(BackendError::Protocol(format!(
                "`{}` replied `{other}` to `{line}`",
                self.command
            ))),
        }
    }

    fn kill(&mut self) {
        self.dead = true;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Declares a constant once; later calls for the same name are no-ops.
    pub fn declare_const(&mut self, name: &str, sort: Sort) -> Result<(), BackendError> {
        if self.declared.contains(name) {
            return Ok(());
        }
        self.command_expect_success(&printer::declare_const(name, sort), None)?;
        self.declared.insert(name.to_string());
        Ok(())
    }

    pub fn declare_uf(&mut self, op: UfOp, width: u32) -> Result<(), BackendError> {
        let name = op.symbol(width);
        if self.declared.contains(&name) {
            return Ok(());
        }
        self.command_expect_success(&printer::declare_uf(op, width), None)?;
        self.declared.insert(name);
        Ok(())
    }

    /// Emits declarations for any symbols of `t` not yet declared, then
    /// asserts it. Re-asserting an identical term is permitted.
    pub fn assert_term(&mut self, t: &Term) -> Result<(), BackendError> {
        self.guard()?;
        let mut vars = Vec::new();
        let mut ufs = Vec::new();
        t.visit(&mut |s| match s.kind() {
            TermKind::Var(name) => {
                if !self.declared.contains(name) {
                    vars.push((name.clone(), s.sort()));
                }
            }
            TermKind::App(crate::term::Op::Uf(op, w), _) => {
                if !self.declared.contains(&op.symbol(*w)) {
                    ufs.push((*op, *w));
                }
            }
            _ => {}
        });
        for (op, w) in ufs {
            self.declare_uf(op, w)?;
        }
        for (name, sort) in vars {
            self.declare_const(&name, sort)?;
        }
        self.command_expect_success(&printer::assert_line(t), None)
    }

    fn parse_verdict(&mut self, response: &str) -> Result<CheckResult, BackendError> {
        match response.trim() {
            "sat" => Ok(CheckResult::Sat),
            "unsat" => Ok(CheckResult::Unsat),
            "unknown" => Ok(CheckResult::Unknown),
            other => Err(BackendError::Protocol(format!(
                "unexpected check-sat answer `{other}` from `{}`",
                self.command
            ))),
        }
    }

    /// `(check-sat)`. Timeout expiry kills the process and reports unknown.
    pub fn check(&mut self, deadline: Option<Instant>) -> Result<CheckResult, BackendError> {
        self.send("(check-sat)")?;
        match self.read_response(deadline) {
            Ok(response) => self.parse_verdict(&response),
            Err(BackendError::Timeout) => Ok(CheckResult::Unknown),
            Err(e) => Err(e),
        }
    }

    /// `(check-sat-assuming ...)` with the indicator pattern: each assumption
    /// `(name, formula)` declares Boolean `name` and asserts
    /// `(=> name formula)`; the indicators are then assumed by name, and on
    /// unsat the reported core is mapped back to the given names.
    pub fn check_assuming(
        &mut self,
        assumptions: &[(String, Term)],
        deadline: Option<Instant>,
    ) -> Result<AssumeResult, BackendError> {
        self.guard()?;
        for (name, formula) in assumptions {
            self.declare_const(name, Sort::Bool)?;
            let indicator = Term::var(name, Sort::Bool);
            self.assert_term(&Term::implies(indicator, formula.clone()))?;
        }
        let names: Vec<String> = assumptions
            .iter()
            .map(|(n, _)| printer::symbol_to_string(n))
            .collect();
        self.send(&format!("(check-sat-assuming ({}))", names.join(" ")))?;
        let verdict = match self.read_response(deadline) {
            Ok(response) => self.parse_verdict(&response)?,
            Err(BackendError::Timeout) => return Ok(AssumeResult::Unknown),
            Err(e) => return Err(e),
        };
        match verdict {
            CheckResult::Sat => Ok(AssumeResult::Sat),
            CheckResult::Unknown => Ok(AssumeResult::Unknown),
            CheckResult::Unsat => {
                self.send("(get-unsat-assumptions)")?;
                let response = self.read_response(deadline)?;
                let form = sexp::read_one(&response).map_err(|e| {
                    BackendError::Protocol(format!("bad unsat-assumptions response: {e}"))
                })?;
                let Some(items) = form.as_list() else {
                    return Err(BackendError::Protocol(
                        "unsat-assumptions response is not a list".into(),
                    ));
                };
                let mut core = Vec::new();
                for item in items {
                    let Some(sym) = item.as_sym() else {
                        return Err(BackendError::Protocol(
                            "unsat-assumptions entry is not a symbol".into(),
                        ));
                    };
                    if !assumptions.iter().any(|(n, _)| n == sym) {
                        return Err(BackendError::Protocol(format!(
                            "unsat core names unknown assumption `{sym}`"
                        )));
                    }
                    core.push(sym.to_string());
                }
                Ok(AssumeResult::Unsat(core))
            }
        }
    }

    /// `(get-value (t1 ... tn))`; results are matched positionally.
    pub fn get_values(&mut self, terms: &[Term]) -> Result<Vec<Value>, BackendError> {
        self.guard()?;
        if terms.is_empty() {
            return Ok(Vec::new());
        }
        let rendered: Vec<String> = terms.iter().map(printer::term_to_string).collect();
        self.send(&format!("(get-value ({}))", rendered.join(" ")))?;
        let response = self.read_response(None)?;
        let form = sexp::read_one(&response)
            .map_err(|e| BackendError::Protocol(format!("bad get-value response: {e}")))?;
        let Some(pairs) = form.as_list() else {
            return Err(BackendError::Protocol("get-value response is not a list".into()));
        };
        if pairs.len() != terms.len() {
            return Err(BackendError::Protocol(format!(
                "get-value returned {} values for {} terms",
                pairs.len(),
                terms.len()
            )));
        }
        pairs
            .iter()
            .map(|pair| {
                let Some(items) = pair.as_list() else {
                    return Err(BackendError::Protocol("get-value pair is not a list".into()));
                };
                let Some(value) = items.last() else {
                    return Err(BackendError::Protocol("empty get-value pair".into()));
                };
                parse_model_value(value)
            })
            .collect()
    }
}

impl Drop for SolverSession {
    fn drop(&mut self) {
        if !self.dead {
            let _ = self.send("(exit)");
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn parse_model_value(sexp: &Sexp) -> Result<Value, BackendError> {
    match &sexp.kind {
        SexpKind::Atom(Atom::Num(digits)) => digits
            .parse::<i128>()
            .map(Value::Int)
            .map_err(|_| BackendError::Protocol(format!("unparsable numeral `{digits}`"))),
        SexpKind::Atom(Atom::Sym(s)) if s == "true" => Ok(Value::Bool(true)),
        SexpKind::Atom(Atom::Sym(s)) if s == "false" => Ok(Value::Bool(false)),
        SexpKind::Atom(Atom::Bin(bits)) => {
            let width = bits.len() as u32;
            u64::from_str_radix(bits, 2)
                .map(|value| Value::Bv { value, width })
                .map_err(|_| BackendError::Protocol("unparsable binary literal".into()))
        }
        SexpKind::Atom(Atom::Hex(digits)) => {
            let width = (digits.len() as u32) * 4;
            u64::from_str_radix(digits, 16)
                .map(|value| Value::Bv { value, width })
                .map_err(|_| BackendError::Protocol("unparsable hex literal".into()))
        }
        SexpKind::List(items)
            if items.len() == 2 && items[0].as_sym() == Some("-") =>
        {
            // range axioms force non-negative values; a negative model value
            // means the backend violated an asserted constraint
            Err(BackendError::Protocol(
                "backend returned a negative value despite asserted ranges".into(),
            ))
        }
        SexpKind::List(items)
            if items.len() == 3 && items[0].as_sym() == Some("_") =>
        {
            // (_ bvN w) model value form
            if let (Some(sym), SexpKind::Atom(Atom::Num(w))) = (items[1].as_sym(), &items[2].kind)
            {
                if let Some(digits) = sym.strip_prefix("bv") {
                    if let (Ok(value), Ok(width)) = (digits.parse::<u64>(), w.parse::<u32>()) {
                        return Ok(Value::Bv { value, width });
                    }
                }
            }
            Err(BackendError::Protocol("unparsable model value".into()))
        }
        _ => Err(BackendError::Protocol(format!(
            "unparsable model value at {}",
            sexp.pos
        ))),
    }
}
