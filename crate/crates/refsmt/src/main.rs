// SPDX-License-Identifier: Apache-2.0

//! Reference SMT-LIB 2 backend.
//!
//! Reads commands from a file argument or standard input and answers on
//! standard output. Decides small QF_BV problems and the range-constrained
//! QF_UFNIA fragment produced by int-blasting translations, by bounded
//! enumeration with congruence-closed uninterpreted applications. Intended as
//! a hermetic stand-in for a production solver behind the same protocol.

mod eval;
mod solver;

use std::io::{BufRead, Write};

use intblast::sexp;
use solver::{Engine, Reply};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let status = match args.as_slice() {
        [] => run_stream(&mut std::io::stdin().lock()),
        [path] if path != "-h" && path != "--help" => match std::fs::File::open(path) {
            Ok(file) => run_stream(&mut std::io::BufReader::new(file)),
            Err(e) => {
                eprintln!("refsmt: cannot open `{path}`: {e}");
                2
            }
        },
        _ => {
            eprintln!("usage: refsmt [script.smt2]   (no argument: read stdin)");
            2
        }
    };
    std::process::exit(status);
}

fn run_stream(input: &mut dyn BufRead) -> i32 {
    let mut engine = Engine::new();
    let stdout = std::io::stdout();
    let mut buffer = String::new();
    let mut balance = 0i64;

    let mut line = String::new();
    loop {
        line.clear();
        match input.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => {
                eprintln!("refsmt: read error: {e}");
                return 1;
            }
        }
        balance += sexp::paren_balance(&line);
        buffer.push_str(&line);
        if balance > 0 {
            continue;
        }
        if balance < 0 {
            let mut out = stdout.lock();
            let _ = writeln!(out, "(error \"unbalanced parentheses\")");
            let _ = out.flush();
            buffer.clear();
            balance = 0;
            continue;
        }
        if buffer.trim().is_empty() {
            buffer.clear();
            continue;
        }
        let forms = match sexp::read_all(&buffer) {
            Ok(forms) => forms,
            Err(e) => {
                let mut out = stdout.lock();
                let _ = writeln!(out, "(error \"{e}\")");
                let _ = out.flush();
                buffer.clear();
                continue;
            }
        };
        buffer.clear();
        for form in &forms {
            let reply = engine.execute(form);
            let mut out = stdout.lock();
            match reply {
                Reply::Success => {
                    if engine.print_success {
                        let _ = writeln!(out, "success");
                    }
                }
                Reply::Verdict(v) => {
                    let _ = writeln!(out, "{v}");
                }
                Reply::Form(s) => {
                    let _ = writeln!(out, "{s}");
                }
                Reply::Error(msg) => {
                    let _ = writeln!(out, "(error \"{}\")", msg.replace('"', "'"));
                }
                Reply::Exit => {
                    let _ = out.flush();
                    return 0;
                }
            }
            let _ = out.flush();
        }
    }
    0
}
