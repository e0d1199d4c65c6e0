// SPDX-License-Identifier: Apache-2.0

//! The CEGAR solve loop.
//!
//! Translate, hand the integer abstraction to the NIA backend, test each
//! model against the true bit-vector semantics of the abstracted
//! applications, and refine with lemmas until the verdict is sound. When a
//! bit-vector backend is configured, each spurious model additionally drives
//! an under-approximation check whose sat answers transfer directly and whose
//! unsat cores are learned as clauses. Every sat verdict is re-verified with
//! the oracle evaluator before it is returned.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::backend::{AssumeResult, CheckResult, SolverSession};
use crate::error::BackendError;
use crate::lemmas::{self, Lemma, LemmaTier};
use crate::oracle::{self, Assignment, Value};
use crate::parser::{expand_defines, Script};
use crate::preprocess::eliminate_derived_ops;
use crate::term::{mask, Op, Sort, Term, TermKind};
use crate::translate::{to_bv, translate_formula, TranslationMap};

/// Solver configuration. `nia_solver` / `bv_solver` are full command lines
/// for SMT-LIB-compliant executables, split on whitespace.
#[derive(Debug, Clone)]
pub struct Config {
    pub nia_solver: String,
    pub bv_solver: Option<String>,
    pub underapprox_enabled: bool,
    /// Ground-instance lemmas per application before escalating to the full
    /// expansion.
    pub escalation_threshold: u32,
    pub max_iterations: u32,
    pub timeout_ms: Option<u64>,
    /// On an unknown from the NIA backend, assert all remaining expansions
    /// and retry once before giving up.
    pub expand_on_unknown: bool,
    /// Run the under-approximation check after asserting schema lemmas
    /// instead of before.
    pub underapprox_after_refine: bool,
    /// Append every asserted lemma to this file, tier-tagged.
    pub dump_lemmas: Option<PathBuf>,
}

impl Config {
    pub fn new(nia_solver: impl Into<String>) -> Self {
        Config {
            nia_solver: nia_solver.into(),
            bv_solver: None,
            underapprox_enabled: true,
            escalation_threshold: 8,
            max_iterations: 10_000,
            timeout_ms: None,
            expand_on_unknown: false,
            underapprox_after_refine: false,
            dump_lemmas: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown => "unknown",
        }
    }
}

/// Which branch produced a sat verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatSource {
    NiaModel,
    UnderApprox,
    None,
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub iterations: u32,
    pub base_lemmas: u64,
    pub instance_lemmas: u64,
    pub expansion_lemmas: u64,
    pub core_lemmas: u64,
    pub underapprox_calls: u64,
    pub underapprox_sats: u64,
    /// Consecutive identical backend models observed (progress violations).
    pub repeated_models: u64,
    pub abstracted_apps: usize,
    pub sat_source: SatSource,
    pub verdict: Verdict,
    pub time_ms: u128,
}

impl SolveStats {
    fn new() -> Self {
        SolveStats {
            iterations: 0,
            base_lemmas: 0,
            instance_lemmas: 0,
            expansion_lemmas: 0,
            core_lemmas: 0,
            underapprox_calls: 0,
            underapprox_sats: 0,
            repeated_models: 0,
            abstracted_apps: 0,
            sat_source: SatSource::None,
            verdict: Verdict::Unknown,
            time_ms: 0,
        }
    }

    /// The single-line JSON object emitted under `--stats`.
    pub fn to_json(&self) -> String {
        format!(
            "{{\"iterations\": {}, \"lemmas\": {{\"base\": {}, \"instance\": {}, \"expansion\": {}, \"core\": {}}}, \"underapprox_calls\": {}, \"verdict\": \"{}\", \"time_ms\": {}}}",
            self.iterations,
            self.base_lemmas,
            self.instance_lemmas,
            self.expansion_lemmas,
            self.core_lemmas,
            self.underapprox_calls,
            self.verdict.as_str(),
            self.time_ms
        )
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub verdict: Verdict,
    /// Original-variable model in declaration order, present iff sat.
    pub model: Option<Vec<(String, Term)>>,
    pub stats: SolveStats,
    /// Diagnostic for unknown verdicts caused by backend failures.
    pub failure: Option<String>,
}

/// The current abstract model: values of translated variables and of every
/// abstracted application term.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub var_values: BTreeMap<String, Value>,
    pub app_values: HashMap<Term, u64>,
}

/// Per-application refinement state.
#[derive(Debug, Clone, Copy, Default)]
struct AppState {
    base_done: bool,
    instances: u32,
    expanded: bool,
}

struct Loop<'a> {
    cfg: &'a Config,
    script: Script,
    phi_orig: Term,
    phi_pre: Term,
    phi_int: Term,
    tm: TranslationMap,
    nia: SolverSession,
    bv: Option<SolverSession>,
    bv_failed: bool,
    /// Variables excluded from under-approximation assumptions: those that
    /// occur inside any argument of an abstracted operator occurrence.
    excluded: HashSet<String>,
    history: Vec<AppState>,
    stats: SolveStats,
    deadline: Option<Instant>,
    started: Instant,
    indicator_counter: u64,
    lemma_dump: Option<std::io::BufWriter<std::fs::File>>,
}

enum Step {
    Done(Verdict, Option<Vec<(String, Term)>>),
    Continue,
}

/// Runs the full pipeline on a parsed script. Backend failures surface as an
/// unknown verdict with a diagnostic, never as a wrong answer.
pub fn solve(script: &Script, cfg: &Config) -> SolveResult {
    let started = Instant::now();
    let mut stats = SolveStats::new();

    let script = match expand_defines(script) {
        Ok(s) => s,
        Err(e) => {
            stats.time_ms = started.elapsed().as_millis();
            return SolveResult {
                verdict: Verdict::Unknown,
                model: None,
                stats,
                failure: Some(format!("definition expansion failed: {e}")),
            };
        }
    };

    let phi_orig = script.conjoined();
    let phi_pre = eliminate_derived_ops(&phi_orig);
    let (phi_int, tm) = translate_formula(&phi_pre, &script.declarations);
    stats.abstracted_apps = tm.apps().len();

    let nia = match SolverSession::start(&cfg.nia_solver, "QF_UFNIA", false) {
        Ok(s) => s,
        Err(e) => {
            stats.time_ms = started.elapsed().as_millis();
            return SolveResult {
                verdict: Verdict::Unknown,
                model: None,
                stats,
                failure: Some(format!("cannot start NIA backend: {e}")),
            };
        }
    };

    let lemma_dump = cfg.dump_lemmas.as_ref().and_then(|path| {
        std::fs::File::create(path)
            .map(std::io::BufWriter::new)
            .ok()
    });

    let excluded = excluded_variables(&phi_pre);
    let deadline = cfg
        .timeout_ms
        .map(|ms| started + Duration::from_millis(ms));

    let mut state = Loop {
        cfg,
        history: vec![AppState::default(); tm.apps().len()],
        phi_orig,
        phi_pre,
        phi_int,
        tm,
        nia,
        bv: None,
        bv_failed: false,
        excluded,
        stats,
        deadline,
        started,
        indicator_counter: 0,
        lemma_dump,
        script,
    };

    let outcome = state.run();
    let mut stats = state.stats;
    stats.time_ms = state.started.elapsed().as_millis();
    match outcome {
        Ok(Step::Done(verdict, model)) => {
            stats.verdict = verdict;
            SolveResult {
                verdict,
                model,
                stats,
                failure: None,
            }
        }
        Ok(Step::Continue) => unreachable!("run() only yields Done"),
        Err(e) => {
            stats.verdict = Verdict::Unknown;
            SolveResult {
                verdict: Verdict::Unknown,
                model: None,
                stats,
                failure: Some(e.to_string()),
            }
        }
    }
}

impl<'a> Loop<'a> {
    fn run(&mut self) -> Result<Step, BackendError> {
        // upfront declarations in a fixed order, then the abstraction and its
        // eager range axioms
        for entry in self.tm.var_entries() {
            self.nia.declare_const(&entry.translated, Sort::Int)?;
        }
        for (_, translated) in self.tm.bool_entries() {
            self.nia.declare_const(translated, Sort::Bool)?;
        }
        for (op, width) in self.tm.uf_registry() {
            self.nia.declare_uf(*op, *width)?;
        }
        let phi_int = self.phi_int.clone();
        self.nia.assert_term(&phi_int)?;
        for range in self.tm.range_constraints().to_vec() {
            self.nia.assert_term(&range)?;
        }

        let mut prev_model: Option<Model> = None;
        let mut expand_retry_done = false;

        loop {
            if self.stats.iterations >= self.cfg.max_iterations {
                return Ok(Step::Done(Verdict::Unknown, None));
            }
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Ok(Step::Done(Verdict::Unknown, None));
                }
            }
            self.stats.iterations += 1;

            match self.nia.check(self.deadline)? {
                CheckResult::Unsat => return Ok(Step::Done(Verdict::Unsat, None)),
                CheckResult::Unknown => {
                    if self.cfg.expand_on_unknown && !expand_retry_done {
                        expand_retry_done = true;
                        let pending: Vec<usize> = (0..self.tm.apps().len())
                            .filter(|&i| !self.history[i].expanded)
                            .collect();
                        if !pending.is_empty() {
                            for i in pending {
                                let lemma = lemmas::full_expansion(&self.tm.apps()[i]);
                                self.assert_lemma(&lemma)?;
                                self.history[i].expanded = true;
                            }
                            continue;
                        }
                    }
                    return Ok(Step::Done(Verdict::Unknown, None));
                }
                CheckResult::Sat => {}
            }

            let model = self.fetch_model()?;
            if prev_model.as_ref() == Some(&model) {
                self.stats.repeated_models += 1;
            }
            prev_model = Some(model.clone());

            let inconsistent = check_spurious(&model, &self.tm)?;
            if inconsistent.is_empty() {
                let sigma = self.reconstruct_assignment(&model)?;
                if !oracle::eval_bool(&self.phi_orig, &sigma) {
                    return Err(BackendError::Protocol(
                        "backend model fails oracle verification despite consistent applications"
                            .into(),
                    ));
                }
                self.stats.sat_source = SatSource::NiaModel;
                let model_out = self.model_in_declaration_order(&sigma);
                return Ok(Step::Done(Verdict::Sat, Some(model_out)));
            }

            if !self.cfg.underapprox_after_refine {
                if let Step::Done(v, m) = self.maybe_under_approx(&model)? {
                    return Ok(Step::Done(v, m));
                }
            }

            let new_lemmas = self.refine(&inconsistent, &model)?;
            for lemma in &new_lemmas {
                self.assert_lemma(lemma)?;
            }

            if self.cfg.underapprox_after_refine {
                if let Step::Done(v, m) = self.maybe_under_approx(&model)? {
                    return Ok(Step::Done(v, m));
                }
            }
        }
    }

    /// Values of every translated variable and application under the current
    /// backend model.
    fn fetch_model(&mut self) -> Result<Model, BackendError> {
        let mut terms: Vec<Term> = Vec::new();
        let mut names: Vec<(String, u32)> = Vec::new();
        for entry in self.tm.var_entries() {
            terms.push(Term::var(&entry.translated, Sort::Int));
            names.push((entry.translated.clone(), entry.width));
        }
        let bool_start = terms.len();
        for (_, translated) in self.tm.bool_entries() {
            terms.push(Term::var(translated, Sort::Bool));
        }
        let app_start = terms.len();
        for app in self.tm.apps() {
            terms.push(app.app_term.clone());
        }

        let values = self.nia.get_values(&terms)?;
        let mut var_values = BTreeMap::new();
        let mut app_values = HashMap::new();
        for (i, value) in values.into_iter().enumerate() {
            if i < bool_start {
                let (name, width) = &names[i];
                match value {
                    Value::Int(v) if v >= 0 && v <= mask(*width) as i128 => {
                        var_values.insert(name.clone(), value);
                    }
                    other => {
                        return Err(BackendError::Protocol(format!(
                            "value {other:?} for `{name}` violates its asserted range"
                        )))
                    }
                }
            } else if i < app_start {
                let name = &self.tm.bool_entries()[i - bool_start].1;
                match value {
                    Value::Bool(_) => {
                        var_values.insert(name.clone(), value);
                    }
                    other => {
                        return Err(BackendError::Protocol(format!(
                            "non-Boolean value {other:?} for `{name}`"
                        )))
                    }
                }
            } else {
                let app = &self.tm.apps()[i - app_start];
                match value {
                    Value::Int(v) if v >= 0 && v <= mask(app.width) as i128 => {
                        app_values.insert(app.app_term.clone(), v as u64);
                    }
                    other => {
                        return Err(BackendError::Protocol(format!(
                            "value {other:?} for `{}` violates its asserted range",
                            app.app_term
                        )))
                    }
                }
            }
        }
        Ok(Model {
            var_values,
            app_values,
        })
    }

    /// Original-level assignment via `to_bv` over all original variables.
    fn reconstruct_assignment(&self, model: &Model) -> Result<Assignment, BackendError> {
        let mut sigma = Assignment::new();
        for entry in self.tm.var_entries() {
            let value = model
                .var_values
                .get(&entry.translated)
                .copied()
                .ok_or_else(|| {
                    BackendError::Protocol(format!("model omits `{}`", entry.translated))
                })?;
            let lit = to_bv(value.as_int(), entry.width)
                .map_err(|e| BackendError::Protocol(e.to_string()))?;
            let TermKind::BvLit(lit) = lit.kind() else {
                unreachable!()
            };
            sigma.set(
                entry.original.clone(),
                Value::Bv {
                    value: lit.value(),
                    width: lit.width(),
                },
            );
        }
        for (original, translated) in self.tm.bool_entries() {
            let value = model
                .var_values
                .get(translated)
                .copied()
                .ok_or_else(|| BackendError::Protocol(format!("model omits `{translated}`")))?;
            sigma.set(original.clone(), value);
        }
        Ok(sigma)
    }

    /// Declaration-ordered `(name, literal)` pairs for output.
    fn model_in_declaration_order(&self, sigma: &Assignment) -> Vec<(String, Term)> {
        self.script
            .declarations
            .iter()
            .filter_map(|(name, _)| {
                sigma.get(name).map(|v| {
                    let lit = match v {
                        Value::Bool(b) => Term::bool_lit(b),
                        Value::Bv { value, width } => Term::bv_lit(value, width),
                        Value::Int(_) => unreachable!("original variables are BV or Bool"),
                    };
                    (name.clone(), lit)
                })
            })
            .collect()
    }

    /// Emits lemmas for every inconsistent application: the base batch first,
    /// then up to E ground instances, then the full expansion. At least one
    /// emitted lemma is falsified by the current model.
    fn refine(&mut self, inconsistent: &[usize], model: &Model) -> Result<Vec<Lemma>, BackendError> {
        let mut out = Vec::new();
        for &idx in inconsistent {
            let app = &self.tm.apps()[idx];
            let state = &mut self.history[idx];
            if state.expanded {
                // the expansion fully determines the value, so a consistent
                // backend can never produce this
                return Err(BackendError::Protocol(format!(
                    "model violates the asserted full expansion of `{}`",
                    app.app_term
                )));
            }
            if !state.base_done {
                state.base_done = true;
                let batch = lemmas::base_lemmas(app);
                let falsified = batch
                    .iter()
                    .any(|l| eval_under_model(&l.formula, model) == Some(Value::Bool(false)));
                out.extend(batch);
                if !falsified {
                    // progress guarantee: pin the observed argument values
                    let (alpha, beta) = app_arg_values(app, model).ok_or_else(|| {
                        BackendError::Protocol("model omits an application argument".into())
                    })?;
                    state.instances += 1;
                    out.push(lemmas::instance_lemma(app, alpha, beta));
                }
            } else if state.instances < self.cfg.escalation_threshold {
                let (alpha, beta) = app_arg_values(app, model).ok_or_else(|| {
                    BackendError::Protocol("model omits an application argument".into())
                })?;
                state.instances += 1;
                out.push(lemmas::instance_lemma(app, alpha, beta));
            } else {
                state.expanded = true;
                out.push(lemmas::full_expansion(app));
            }
        }
        Ok(out)
    }

    fn assert_lemma(&mut self, lemma: &Lemma) -> Result<(), BackendError> {
        match lemma.tier {
            LemmaTier::Base => self.stats.base_lemmas += 1,
            LemmaTier::Instance => self.stats.instance_lemmas += 1,
            LemmaTier::FullExpansion => self.stats.expansion_lemmas += 1,
            LemmaTier::UnderApproxCore => self.stats.core_lemmas += 1,
        }
        if let Some(dump) = &mut self.lemma_dump {
            let tier = match lemma.tier {
                LemmaTier::Base => "base",
                LemmaTier::Instance => "instance",
                LemmaTier::FullExpansion => "expansion",
                LemmaTier::UnderApproxCore => "core",
            };
            let _ = writeln!(dump, "; tier={tier}");
            let _ = writeln!(dump, "{}", crate::printer::assert_line(&lemma.formula));
            let _ = dump.flush();
        }
        self.nia.assert_term(&lemma.formula)
    }

    /// The under-approximation check, when enabled and a BV backend is
    /// available. Returns a final verdict step or `Continue`.
    fn maybe_under_approx(&mut self, model: &Model) -> Result<Step, BackendError> {
        if !self.cfg.underapprox_enabled || self.bv_failed {
            return Ok(Step::Continue);
        }
        let Some(command) = self.cfg.bv_solver.clone() else {
            return Ok(Step::Continue);
        };
        if self.bv.is_none() {
            match self.start_bv_session(&command) {
                Ok(session) => self.bv = Some(session),
                Err(e) => {
                    // capability negotiation failed: disable the path
                    eprintln!("intblast: disabling under-approximation: {e}");
                    self.bv_failed = true;
                    return Ok(Step::Continue);
                }
            }
        }

        self.stats.underapprox_calls += 1;

        // assumption set: x = ToBV(mu[x']) for originals not under any
        // abstracted operator
        let pinned: Vec<(String, u64, u32)> = self
            .tm
            .var_entries()
            .iter()
            .filter(|e| !self.excluded.contains(&e.original))
            .filter_map(|e| {
                model
                    .var_values
                    .get(&e.translated)
                    .map(|v| (e.original.clone(), v.as_int() as u64, e.width))
            })
            .collect();
        let mut assumptions: Vec<(String, Term)> = Vec::new();
        let mut meta: Vec<(String, u64, u32)> = Vec::new();
        for (original, v, width) in pinned {
            let lit = Term::bv_lit(v, width);
            let eq = Term::eq(Term::var(&original, Sort::BitVec(width)), lit);
            let name = self.fresh_indicator();
            assumptions.push((name, eq));
            meta.push((original, v, width));
        }

        let session = self.bv.as_mut().expect("session started above");
        let outcome = match session.check_assuming(&assumptions, self.deadline) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("intblast: under-approximation check failed: {e}");
                self.bv_failed = true;
                return Ok(Step::Continue);
            }
        };
        match outcome {
            AssumeResult::Unknown => Ok(Step::Continue),
            AssumeResult::Sat => {
                let sigma = match self.fetch_bv_model() {
                    Ok(s) => s,
                    Err(e) => {
                        eprintln!("intblast: cannot read under-approximation model: {e}");
                        self.bv_failed = true;
                        return Ok(Step::Continue);
                    }
                };
                if !oracle::eval_bool(&self.phi_orig, &sigma) {
                    eprintln!(
                        "intblast: under-approximation model fails verification; ignoring"
                    );
                    self.bv_failed = true;
                    return Ok(Step::Continue);
                }
                self.stats.underapprox_sats += 1;
                self.stats.sat_source = SatSource::UnderApprox;
                let model_out = self.model_in_declaration_order(&sigma);
                Ok(Step::Done(Verdict::Sat, Some(model_out)))
            }
            AssumeResult::Unsat(core_names) => {
                let core: Vec<(String, u64, u32)> = assumptions
                    .iter()
                    .zip(&meta)
                    .filter(|((name, _), _)| core_names.contains(name))
                    .map(|(_, m)| m.clone())
                    .collect();
                if core.is_empty() && assumptions.is_empty() {
                    // no assumptions were used: the BV solver decided the
                    // preprocessed formula itself
                    return Ok(Step::Done(Verdict::Unsat, None));
                }
                let lemma = match lemmas::core_lemma(&core, &self.tm) {
                    Ok(l) => l,
                    Err(_) => {
                        // empty core despite assumptions: negate all of them
                        lemmas::core_lemma(&meta, &self.tm)
                            .expect("assumption set is non-empty")
                    }
                };
                self.assert_lemma(&lemma)?;
                Ok(Step::Continue)
            }
        }
    }

    fn start_bv_session(&mut self, command: &str) -> Result<SolverSession, BackendError> {
        let mut session = SolverSession::start(command, "QF_BV", true)?;
        for (name, sort) in &self.script.declarations {
            session.declare_const(name, *sort)?;
        }
        session.assert_term(&self.phi_pre)?;
        Ok(session)
    }

    /// Reads values of all original variables from the BV session.
    fn fetch_bv_model(&mut self) -> Result<Assignment, BackendError> {
        let decls = self.script.declarations.clone();
        let session = self.bv.as_mut().expect("bv session live");
        let terms: Vec<Term> = decls
            .iter()
            .map(|(name, sort)| Term::var(name, *sort))
            .collect();
        let values = session.get_values(&terms)?;
        let mut sigma = Assignment::new();
        for ((name, sort), value) in decls.iter().zip(values) {
            match (sort, value) {
                (Sort::BitVec(w), Value::Bv { value, width }) if width == *w => {
                    sigma.set(name.clone(), Value::Bv { value, width });
                }
                (Sort::Bool, Value::Bool(b)) => {
                    sigma.set(name.clone(), Value::Bool(b));
                }
                (_, other) => {
                    return Err(BackendError::Protocol(format!(
                        "unexpected value {other:?} for `{name}`"
                    )))
                }
            }
        }
        Ok(sigma)
    }

    fn fresh_indicator(&mut self) -> String {
        loop {
            let name = format!("ua!{}", self.indicator_counter);
            self.indicator_counter += 1;
            let taken = self
                .script
                .declarations
                .iter()
                .any(|(n, _)| n == &name)
                || self.bv.as_ref().is_some_and(|s| s.is_declared(&name));
            if !taken {
                return name;
            }
        }
    }
}

/// Variables occurring (at any depth) inside an argument of any
/// `bvand`/`bvshl`/`bvlshr` occurrence of the preprocessed formula.
pub fn excluded_variables(phi_pre: &Term) -> HashSet<String> {
    let mut excluded = HashSet::new();
    phi_pre.visit(&mut |t| {
        if let TermKind::App(Op::BvAnd | Op::BvShl | Op::BvLshr, args) = t.kind() {
            for arg in args {
                for (name, _) in arg.free_vars() {
                    excluded.insert(name);
                }
            }
        }
    });
    excluded
}

/// Evaluates a translated (integer/Boolean) term under an abstract model.
/// Application values come from the model, never from the true functions;
/// `None` when the model lacks a needed value (an unregistered application).
pub fn eval_under_model(t: &Term, model: &Model) -> Option<Value> {
    match t.kind() {
        TermKind::BoolLit(b) => Some(Value::Bool(*b)),
        TermKind::IntLit(v) => Some(Value::Int(*v)),
        TermKind::BvLit(_) => None,
        TermKind::Var(name) => model.var_values.get(name).copied(),
        TermKind::FunApp(_, _) => None,
        TermKind::App(op, args) => {
            use Op::*;
            if let Uf(_, _) = op {
                return model.app_values.get(t).map(|v| Value::Int(*v as i128));
            }
            match op {
                Ite => {
                    let c = eval_under_model(&args[0], model)?;
                    match c {
                        Value::Bool(true) => eval_under_model(&args[1], model),
                        Value::Bool(false) => eval_under_model(&args[2], model),
                        _ => None,
                    }
                }
                And => {
                    let mut all = Vec::new();
                    for a in args {
                        match eval_under_model(a, model)? {
                            Value::Bool(b) => all.push(b),
                            _ => return None,
                        }
                    }
                    Some(Value::Bool(all.iter().all(|b| *b)))
                }
                Or => {
                    let mut any = false;
                    for a in args {
                        match eval_under_model(a, model)? {
                            Value::Bool(b) => any |= b,
                            _ => return None,
                        }
                    }
                    Some(Value::Bool(any))
                }
                Not => match eval_under_model(&args[0], model)? {
                    Value::Bool(b) => Some(Value::Bool(!b)),
                    _ => None,
                },
                Xor => match (
                    eval_under_model(&args[0], model)?,
                    eval_under_model(&args[1], model)?,
                ) {
                    (Value::Bool(a), Value::Bool(b)) => Some(Value::Bool(a ^ b)),
                    _ => None,
                },
                Implies => match (
                    eval_under_model(&args[0], model)?,
                    eval_under_model(&args[1], model)?,
                ) {
                    (Value::Bool(a), Value::Bool(b)) => Some(Value::Bool(!a || b)),
                    _ => None,
                },
                Eq => {
                    let a = eval_under_model(&args[0], model)?;
                    let b = eval_under_model(&args[1], model)?;
                    Some(Value::Bool(a == b))
                }
                IntAdd | IntSub | IntMul | IntDiv | IntMod | IntLt | IntLe | IntGt | IntGe => {
                    let a = eval_under_model(&args[0], model)?.as_int();
                    let b = eval_under_model(&args[1], model)?.as_int();
                    Some(match op {
                        IntAdd => Value::Int(a.checked_add(b)?),
                        IntSub => Value::Int(a.checked_sub(b)?),
                        IntMul => Value::Int(a.checked_mul(b)?),
                        IntDiv => {
                            if b == 0 {
                                return None;
                            }
                            Value::Int(a.div_euclid(b))
                        }
                        IntMod => {
                            if b == 0 {
                                return None;
                            }
                            Value::Int(a.rem_euclid(b))
                        }
                        IntLt => Value::Bool(a < b),
                        IntLe => Value::Bool(a <= b),
                        IntGt => Value::Bool(a > b),
                        IntGe => Value::Bool(a >= b),
                        _ => unreachable!(),
                    })
                }
                IntNeg => Some(Value::Int(-eval_under_model(&args[0], model)?.as_int())),
                _ => None,
            }
        }
    }
}

fn app_arg_values(app: &crate::translate::AbstractedApp, model: &Model) -> Option<(u64, u64)> {
    let a = eval_under_model(&app.arg_terms[0], model)?.as_int();
    let b = eval_under_model(&app.arg_terms[1], model)?.as_int();
    Some((a as u64, b as u64))
}

/// The applications whose model value differs from the true bit-vector
/// function of their argument values. Empty means the model is genuine.
pub fn check_spurious(model: &Model, tm: &TranslationMap) -> Result<Vec<usize>, BackendError> {
    let mut inconsistent = Vec::new();
    for (idx, app) in tm.apps().iter().enumerate() {
        let (alpha, beta) = app_arg_values(app, model).ok_or_else(|| {
            BackendError::Protocol(format!(
                "model is incomplete for the arguments of `{}`",
                app.app_term
            ))
        })?;
        let actual = model.app_values.get(&app.app_term).ok_or_else(|| {
            BackendError::Protocol(format!("model omits `{}`", app.app_term))
        })?;
        if *actual != app.op.apply(alpha, beta, app.width) {
            inconsistent.push(idx);
        }
    }
    Ok(inconsistent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::UfOp;
    use crate::translate::translate_formula;

    fn model_for(tm: &TranslationMap, vars: &[(&str, i128)], apps: &[(usize, u64)]) -> Model {
        let mut var_values = BTreeMap::new();
        for (name, v) in vars {
            var_values.insert(name.to_string(), Value::Int(*v));
        }
        let mut app_values = HashMap::new();
        for (idx, v) in apps {
            app_values.insert(tm.apps()[*idx].app_term.clone(), *v);
        }
        Model {
            var_values,
            app_values,
        }
    }

    fn and_formula() -> (Term, TranslationMap) {
        let decls = vec![
            ("x".to_string(), Sort::BitVec(4)),
            ("y".to_string(), Sort::BitVec(4)),
        ];
        let x = Term::var("x", Sort::BitVec(4));
        let y = Term::var("y", Sort::BitVec(4));
        let f = Term::eq(Term::apply(Op::BvAnd, vec![x, y]), Term::bv_lit(8, 4));
        translate_formula(&f, &decls)
    }

    #[test]
    fn consistent_model_is_not_spurious() {
        let (_, tm) = and_formula();
        let model = model_for(&tm, &[("x!0", 12), ("y!1", 10)], &[(0, 8)]);
        assert!(check_spurious(&model, &tm).unwrap().is_empty());
    }

    #[test]
    fn inconsistent_app_is_detected() {
        let (_, tm) = and_formula();
        let model = model_for(&tm, &[("x!0", 12), ("y!1", 10)], &[(0, 9)]);
        assert_eq!(check_spurious(&model, &tm).unwrap(), vec![0]);
    }

    #[test]
    fn no_apps_means_never_spurious() {
        let decls = vec![("x".to_string(), Sort::BitVec(2))];
        let x = Term::var("x", Sort::BitVec(2));
        let f = Term::apply(Op::BvUlt, vec![x, Term::bv_lit(3, 2)]);
        let (_, tm) = translate_formula(&f, &decls);
        let model = model_for(&tm, &[("x!0", 1)], &[]);
        assert!(check_spurious(&model, &tm).unwrap().is_empty());
    }

    #[test]
    fn exclusion_rule() {
        // x and y occur under bvand, z does not
        let x = Term::var("x", Sort::BitVec(2));
        let y = Term::var("y", Sort::BitVec(2));
        let z = Term::var("z", Sort::BitVec(2));
        let f = Term::and_all(vec![
            Term::eq(
                Term::apply(Op::BvAnd, vec![x.clone(), y.clone()]),
                Term::bv_lit(3, 2),
            ),
            Term::eq(z.clone(), Term::bv_lit(1, 2)),
        ]);
        let excluded = excluded_variables(&f);
        assert!(excluded.contains("x"));
        assert!(excluded.contains("y"));
        assert!(!excluded.contains("z"));
    }

    #[test]
    fn nested_arguments_are_excluded_at_depth() {
        let x = Term::var("x", Sort::BitVec(2));
        let y = Term::var("y", Sort::BitVec(2));
        // x is under an addition inside the shift argument
        let f = Term::eq(
            Term::apply(
                Op::BvShl,
                vec![Term::apply(Op::BvAdd, vec![x, Term::bv_lit(1, 2)]), y],
            ),
            Term::bv_lit(2, 2),
        );
        let excluded = excluded_variables(&f);
        assert!(excluded.contains("x"));
        assert!(excluded.contains("y"));
    }

    #[test]
    fn model_evaluation_uses_app_values_not_truth() {
        let (phi, tm) = and_formula();
        // spurious value 9 for and(12, 10): the translated formula evaluates
        // under the model with 9, not with the true 8
        let model = model_for(&tm, &[("x!0", 12), ("y!1", 10)], &[(0, 9)]);
        // phi is and(x,y) = 8, so under app value 9 it is false
        assert_eq!(eval_under_model(&phi, &model), Some(Value::Bool(false)));
        let model8 = model_for(&tm, &[("x!0", 12), ("y!1", 10)], &[(0, 8)]);
        assert_eq!(eval_under_model(&phi, &model8), Some(Value::Bool(true)));
    }

    #[test]
    fn refine_emits_base_batch_then_instances_then_expansion() {
        let (_, tm) = and_formula();
        // emulate the refine schedule directly on history
        let mut history = vec![AppState::default()];
        let app = &tm.apps()[0];
        let model = model_for(&tm, &[("x!0", 12), ("y!1", 10)], &[(0, 9)]);

        // first round: base batch (9 lemmas) — and(12,10)=9 violates
        // and <= both args? 9 <= 12 and 9 <= 10 hold; commutativity unknown;
        // the falsified one is a+b-f <= 15: 12+10-9=13 <= 15 holds too...
        // count only; the progress fallback may add an instance
        let state = &mut history[0];
        assert!(!state.base_done);
        let batch = lemmas::base_lemmas(app);
        assert_eq!(batch.len(), 9);
        let falsified = batch
            .iter()
            .any(|l| eval_under_model(&l.formula, &model) == Some(Value::Bool(false)));
        // 12 & 10 = 9 violates no simple algebraic bound, so the instance
        // fallback must fire in refine()
        assert!(!falsified);
    }

    #[test]
    fn stats_json_shape() {
        let mut stats = SolveStats::new();
        stats.iterations = 3;
        stats.base_lemmas = 9;
        stats.verdict = Verdict::Sat;
        let line = stats.to_json();
        assert!(line.starts_with("{\"iterations\": 3, \"lemmas\": {\"base\": 9,"));
        assert!(line.contains("\"verdict\": \"sat\""));
        let parsed: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(parsed["lemmas"]["base"], 9);
    }

    #[test]
    fn uf_op_truth_table_for_check() {
        assert_eq!(UfOp::And.apply(12, 10, 4), 8);
        assert_ne!(UfOp::And.apply(12, 10, 4), 9);
    }
}
