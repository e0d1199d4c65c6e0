// SPDX-License-Identifier: Apache-2.0

//! Error types shared across the crate.

use thiserror::Error;

use crate::term::Sort;

/// Sort-checking failures (SMT-LIB 2 typing rules).
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SortError {
    #[error("`{op}` expects {expected} argument(s), got {got}")]
    Arity {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("`{op}` expects {expected}, got {got}")]
    Expected {
        op: &'static str,
        expected: &'static str,
        got: Sort,
    },
    #[error("`{op}` arguments have mismatched sorts {left} and {right}")]
    Mismatch {
        op: &'static str,
        left: Sort,
        right: Sort,
    },
    #[error("extract [{high}:{low}] out of bounds for width {width}")]
    BadExtract { high: u32, low: u32, width: u32 },
    #[error("repeat count must be at least 1")]
    BadRepeat,
    #[error("bit-vector width {width} outside the supported range 1..=64")]
    WidthOutOfRange { width: u32 },
}

/// Errors from lexing, parsing, and validating input scripts.
#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("sort error at {line}:{col}: {source}")]
    Sort {
        line: usize,
        col: usize,
        #[source]
        source: SortError,
    },
    #[error("unsupported at {line}:{col}: `{symbol}`{}", detail_suffix(.detail))]
    Unsupported {
        line: usize,
        col: usize,
        symbol: String,
        detail: String,
    },
    #[error("recursive definition `{name}` cannot be expanded")]
    Recursion { name: String },
}

fn detail_suffix(detail: &str) -> String {
    if detail.is_empty() {
        String::new()
    } else {
        format!(" ({detail})")
    }
}

/// Failures while driving an external solver process.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("failed to spawn solver `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver protocol error: {0}")]
    Protocol(String),
    #[error("solver process exited or its stream closed")]
    Died,
    #[error("solver call timed out")]
    Timeout,
}

/// A model value outside `[0, 2^k)` for its width.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("value {value} out of range for width {width}")]
pub struct RangeError {
    pub value: i128,
    pub width: u32,
}

/// Raised when a backend reports unsat under assumptions but hands back an
/// empty core even though assumptions were sent.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("backend returned an empty unsat core despite non-empty assumptions")]
pub struct EmptyCoreError;
