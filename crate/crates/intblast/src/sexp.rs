// SPDX-License-Identifier: Apache-2.0

//! S-expression reader for SMT-LIB 2 concrete syntax.
//!
//! Produces a raw tree of atoms and lists with source positions; all
//! SMT-LIB-level interpretation happens in the parser on top of this.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl Pos {
    pub fn start() -> Self {
        Pos { line: 1, col: 1 }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    /// Simple or quoted symbol; quoting bars are stripped.
    Sym(String),
    /// Decimal numeral, kept raw (digits only).
    Num(String),
    /// `#b...` literal, the bits after the prefix.
    Bin(String),
    /// `#x...` literal, the hex digits after the prefix.
    Hex(String),
    /// String literal, unescaped.
    Str(String),
    /// Keyword `:name`, without the colon.
    Kw(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SexpKind {
    Atom(Atom),
    List(Vec<Sexp>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sexp {
    pub kind: SexpKind,
    pub pos: Pos,
}

impl Sexp {
    pub fn as_list(&self) -> Option<&[Sexp]> {
        match &self.kind {
            SexpKind::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match &self.kind {
            SexpKind::Atom(Atom::Sym(s)) => Some(s),
            _ => None,
        }
    }

    /// Head symbol of a non-empty list.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(|h| h.as_sym())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadError {
    pub pos: Pos,
    pub msg: String,
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.msg)
    }
}

impl std::error::Error for ReadError {}

/// Characters allowed in simple symbols besides alphanumerics.
fn is_sym_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c)
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Reader<'a> {
    fn new(input: &'a str) -> Self {
        Reader {
            chars: input.chars().peekable(),
            pos: Pos::start(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn err<T>(&self, pos: Pos, msg: impl Into<String>) -> Result<T, ReadError> {
        Err(ReadError {
            pos,
            msg: msg.into(),
        })
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read_sexp(&mut self) -> Result<Option<Sexp>, ReadError> {
        self.skip_trivia();
        let pos = self.pos;
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        match c {
            '(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        Some(')') => {
                            self.bump();
                            return Ok(Some(Sexp {
                                kind: SexpKind::List(items),
                                pos,
                            }));
                        }
                        Some(_) => match self.read_sexp()? {
                            Some(item) => items.push(item),
                            None => return self.err(pos, "unclosed parenthesis"),
                        },
                        None => return self.err(pos, "unclosed parenthesis"),
                    }
                }
            }
            ')' => self.err(pos, "unexpected `)`"),
            '|' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('|') => break,
                        Some('\\') => return self.err(pos, "`\\` not allowed in quoted symbol"),
                        Some(c) => s.push(c),
                        None => return self.err(pos, "unterminated quoted symbol"),
                    }
                }
                Ok(Some(Sexp {
                    kind: SexpKind::Atom(Atom::Sym(s)),
                    pos,
                }))
            }
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('"') => {
                            // `""` escapes a double quote inside strings
                            if self.peek() == Some('"') {
                                self.bump();
                                s.push('"');
                            } else {
                                break;
                            }
                        }
                        Some(c) => s.push(c),
                        None => return self.err(pos, "unterminated string literal"),
                    }
                }
                Ok(Some(Sexp {
                    kind: SexpKind::Atom(Atom::Str(s)),
                    pos,
                }))
            }
            '#' => {
                self.bump();
                match self.bump() {
                    Some('b') => {
                        let digits = self.read_while(|c| c == '0' || c == '1');
                        if digits.is_empty() {
                            return self.err(pos, "empty binary literal");
                        }
                        Ok(Some(Sexp {
                            kind: SexpKind::Atom(Atom::Bin(digits)),
                            pos,
                        }))
                    }
                    Some('x') => {
                        let digits = self.read_while(|c| c.is_ascii_hexdigit());
                        if digits.is_empty() {
                            return self.err(pos, "empty hexadecimal literal");
                        }
                        Ok(Some(Sexp {
                            kind: SexpKind::Atom(Atom::Hex(digits)),
                            pos,
                        }))
                    }
                    _ => self.err(pos, "expected `#b` or `#x` literal"),
                }
            }
            ':' => {
                self.bump();
                let name = self.read_while(is_sym_char);
                if name.is_empty() {
                    return self.err(pos, "empty keyword");
                }
                Ok(Some(Sexp {
                    kind: SexpKind::Atom(Atom::Kw(name)),
                    pos,
                }))
            }
            c if c.is_ascii_digit() => {
                let digits = self.read_while(|c| c.is_ascii_digit());
                // reject things like `12abc`
                if let Some(next) = self.peek() {
                    if is_sym_char(next) {
                        return self.err(pos, format!("malformed numeral `{digits}{next}...`"));
                    }
                }
                Ok(Some(Sexp {
                    kind: SexpKind::Atom(Atom::Num(digits)),
                    pos,
                }))
            }
            c if is_sym_char(c) => {
                let sym = self.read_while(is_sym_char);
                Ok(Some(Sexp {
                    kind: SexpKind::Atom(Atom::Sym(sym)),
                    pos,
                }))
            }
            c => self.err(pos, format!("unexpected character `{c}`")),
        }
    }

    fn read_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if pred(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }
}

/// Reads every top-level form in the input.
pub fn read_all(input: &str) -> Result<Vec<Sexp>, ReadError> {
    let mut reader = Reader::new(input);
    let mut out = Vec::new();
    while let Some(sexp) = reader.read_sexp()? {
        out.push(sexp);
    }
    Ok(out)
}

/// Reads a single form; trailing input is an error.
pub fn read_one(input: &str) -> Result<Sexp, ReadError> {
    let mut reader = Reader::new(input);
    let first = reader.read_sexp()?.ok_or(ReadError {
        pos: Pos::start(),
        msg: "empty input".to_string(),
    })?;
    reader.skip_trivia();
    if reader.peek().is_some() {
        return Err(ReadError {
            pos: reader.pos,
            msg: "trailing input after term".to_string(),
        });
    }
    Ok(first)
}

/// Net parenthesis balance of a chunk of SMT-LIB text, ignoring parentheses
/// inside strings, quoted symbols, and comments. Used for line-based response
/// framing: a response form is complete once the running balance returns to
/// zero.
pub fn paren_balance(chunk: &str) -> i64 {
    let mut balance = 0i64;
    let mut chars = chunk.chars();
    while let Some(c) = chars.next() {
        match c {
            '(' => balance += 1,
            ')' => balance -= 1,
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' => {
                while let Some(c) = chars.next() {
                    if c == '"' {
                        break;
                    }
                }
            }
            '|' => {
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                }
            }
            _ => {}
        }
    }
    balance
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists() {
        let forms = read_all("(assert (bvult x #x3)) ; comment\n(check-sat)").unwrap();
        assert_eq!(forms.len(), 2);
        assert_eq!(forms[0].head(), Some("assert"));
        assert_eq!(forms[1].head(), Some("check-sat"));
    }

    #[test]
    fn positions_track_lines() {
        let forms = read_all("(a)\n  (b)").unwrap();
        assert_eq!(forms[1].pos, Pos { line: 2, col: 3 });
    }

    #[test]
    fn literals_lex() {
        let forms = read_all("#b101 #xAf 42 :named |a b| \"s\"\"t\"").unwrap();
        let atoms: Vec<&Atom> = forms
            .iter()
            .map(|f| match &f.kind {
                SexpKind::Atom(a) => a,
                _ => panic!("expected atom"),
            })
            .collect();
        assert_eq!(atoms[0], &Atom::Bin("101".into()));
        assert_eq!(atoms[1], &Atom::Hex("Af".into()));
        assert_eq!(atoms[2], &Atom::Num("42".into()));
        assert_eq!(atoms[3], &Atom::Kw("named".into()));
        assert_eq!(atoms[4], &Atom::Sym("a b".into()));
        assert_eq!(atoms[5], &Atom::Str("s\"t".into()));
    }

    #[test]
    fn unclosed_paren_is_an_error() {
        assert!(read_all("(assert (= a b)").is_err());
    }

    #[test]
    fn balance_ignores_strings_and_comments() {
        assert_eq!(paren_balance("(a \"()(\" ; )))\n b"), 1);
        assert_eq!(paren_balance("(x)"), 0);
        assert_eq!(paren_balance("((x 1) (y 2)"), 1);
    }
}
