// SPDX-License-Identifier: Apache-2.0

//! Lazy bit-vector SMT solving over an integer-arithmetic translation.
//!
//! The pipeline: parse a QF_BV script, rewrite derived operators into a core
//! set, translate the core formula into quantifier-free non-linear integer
//! arithmetic where bit-wise conjunction and shifts become width-indexed
//! uninterpreted functions, hand the result to an external SMT solver, and
//! refine spurious models in a CEGAR loop that lazily instantiates bit-vector
//! axioms. An optional second, bit-vector-capable external solver provides an
//! under-approximation fast path whose unsat cores are learned as lemmas.
//!
//! See the `examples/` directory for one runnable example per capability and
//! the `intblast` binary for the command-line driver.

pub mod error;
pub mod sexp;
pub mod term;
pub mod printer;
pub mod parser;
pub mod oracle;
pub mod preprocess;
pub mod translate;
pub mod lemmas;
pub mod backend;
