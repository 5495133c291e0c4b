//! Recursive-descent parsers for protocol (`.pt`) and program (`.mpp`) text.
//!
//! Syntax errors stop parsing at the first offending token. Scoping errors
//! (unbound variables, rebinding `size`/`rank`, shadowing a protocol
//! binder) are collected and reported together.

mod lexer;
mod program;
mod protocol;

use std::fmt;

use crate::protocol::{CmpOp, Datatype, IndexOp, IndexTerm, Proposition};
use crate::span::{Diagnostic, Span};

pub use program::parse_program;
pub use protocol::parse_protocol;

use lexer::{Tok, Token};

/// One or more diagnostics explaining why a text failed to parse.
#[derive(Debug, Clone)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

const KEYWORDS: &[&str] = &[
    "protocol",
    "message",
    "broadcast",
    "scatter",
    "gather",
    "reduce",
    "allgather",
    "allreduce",
    "val",
    "foreach",
    "if",
    "else",
    "integer",
    "float",
    "natural",
    "positive",
    "true",
    "and",
    "or",
    "not",
    "max",
    "min",
    "sum",
    "length",
    "let",
    "for",
    "in",
    "extern",
    "send",
    "recv",
    "apply",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

type PResult<T> = Result<T, Diagnostic>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Lang {
    Protocol,
    Program,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    scopes: Vec<Vec<String>>,
    lang: Lang,
}

impl Parser {
    fn new(text: &str, lang: Lang) -> PResult<Self> {
        let toks = lexer::lex(text)?;
        let builtins = match lang {
            Lang::Protocol => vec!["size".to_string()],
            Lang::Program => vec!["rank".to_string(), "size".to_string()],
        };
        Ok(Parser { toks, pos: 0, diags: Vec::new(), scopes: vec![builtins], lang })
    }

    fn finish<T>(self, value: T) -> Result<T, ParseError> {
        if self.diags.is_empty() {
            Ok(value)
        } else {
            Err(ParseError { diagnostics: self.diags })
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        Diagnostic::error(
            "parse.unexpected-token",
            format!("expected {expected}, found {}", self.peek().describe()),
            self.span(),
        )
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{}`", tok.symbol())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    /// A non-keyword identifier.
    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            Tok::Ident(s) => Err(Diagnostic::error(
                "parse.reserved-word",
                format!("`{s}` is a reserved word and cannot be used as {what}"),
                self.span(),
            )),
            _ => Err(self.unexpected(what)),
        }
    }

    fn in_scope(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.iter().any(|n| n == name))
    }

    fn use_var(&mut self, name: &str, span: Span) {
        if self.lang == Lang::Protocol && name == "rank" {
            self.diags.push(Diagnostic::error(
                "scope.rank-in-protocol",
                "`rank` is not available in protocols; protocols are written from a global viewpoint",
                span,
            ));
        } else if !self.in_scope(name) {
            self.diags.push(Diagnostic::error("scope.unbound-variable", format!("unbound variable `{name}`"), span));
        }
    }

    /// Checks a new binder; `strict` rejects shadowing of an in-scope name.
    fn check_binder(&mut self, name: &str, span: Span, strict: bool) {
        if name == "size" || name == "rank" {
            self.diags.push(Diagnostic::error(
                "scope.rebind-builtin",
                format!("`{name}` is built in and cannot be rebound"),
                span,
            ));
        } else if strict && self.in_scope(name) {
            self.diags.push(Diagnostic::error(
                "scope.shadowing",
                format!("`{name}` is already bound in an enclosing scope"),
                span,
            ));
        }
    }

    fn bind(&mut self, name: &str) {
        self.scopes.last_mut().expect("scope stack never empty").push(name.to_string());
    }

    fn with_scope<T>(&mut self, names: &[&str], f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        self.scopes.push(names.iter().map(|s| s.to_string()).collect());
        let r = f(self);
        self.scopes.pop();
        r
    }

    // ---- index terms -------------------------------------------------

    fn index_term(&mut self) -> PResult<IndexTerm> {
        let mut lhs = self.index_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => IndexOp::Add,
                Tok::Minus => IndexOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.index_mul()?;
            lhs = IndexTerm::bin(op, lhs, rhs);
        }
    }

    fn index_mul(&mut self) -> PResult<IndexTerm> {
        let mut lhs = self.index_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => IndexOp::Mul,
                Tok::Slash => IndexOp::Div,
                Tok::Percent => IndexOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.index_unary()?;
            lhs = IndexTerm::bin(op, lhs, rhs);
        }
    }

    fn index_unary(&mut self) -> PResult<IndexTerm> {
        if *self.peek() == Tok::Minus {
            let span = self.bump().span;
            match self.peek().clone() {
                Tok::Int(n) => {
                    let lit_span = self.bump().span;
                    return negate_int(n, span.to(lit_span)).map(IndexTerm::Int);
                }
                Tok::Float(x) => {
                    self.bump();
                    return Ok(IndexTerm::Float(-x));
                }
                _ => {
                    let t = self.index_unary()?;
                    return Ok(IndexTerm::sub(IndexTerm::Int(0), t));
                }
            }
        }
        let mut t = self.index_primary()?;
        while *self.peek() == Tok::LBracket {
            self.bump();
            let i = self.index_term()?;
            self.expect(Tok::RBracket)?;
            t = IndexTerm::index(t, i);
        }
        Ok(t)
    }

    fn index_primary(&mut self) -> PResult<IndexTerm> {
        match self.peek().clone() {
            Tok::Int(n) => {
                let span = self.bump().span;
                positive_int(n, span).map(IndexTerm::Int)
            }
            Tok::Float(x) => {
                self.bump();
                Ok(IndexTerm::Float(x))
            }
            Tok::LParen => {
                self.bump();
                let t = self.index_term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        items.push(self.index_term()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket)?;
                Ok(IndexTerm::Array(items))
            }
            Tok::Ident(s) if s == "max" || s == "min" => {
                self.bump();
                let op = if s == "max" { IndexOp::Max } else { IndexOp::Min };
                self.expect(Tok::LParen)?;
                let a = self.index_term()?;
                self.expect(Tok::Comma)?;
                let b = self.index_term()?;
                self.expect(Tok::RParen)?;
                Ok(IndexTerm::bin(op, a, b))
            }
            Tok::Ident(s) if s == "length" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let a = self.index_term()?;
                self.expect(Tok::RParen)?;
                Ok(IndexTerm::length(a))
            }
            Tok::Ident(_) => {
                let (name, span) = self.ident("an index term")?;
                self.use_var(&name, span);
                Ok(IndexTerm::Var(name))
            }
            _ => Err(self.unexpected("an index term")),
        }
    }

    // ---- propositions ------------------------------------------------

    fn proposition(&mut self) -> PResult<Proposition> {
        let mut lhs = self.prop_and()?;
        while self.eat_kw("or") {
            let rhs = self.prop_and()?;
            lhs = Proposition::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn prop_and(&mut self) -> PResult<Proposition> {
        let mut lhs = self.prop_not()?;
        while self.eat_kw("and") {
            let rhs = self.prop_not()?;
            lhs = Proposition::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn prop_not(&mut self) -> PResult<Proposition> {
        if self.eat_kw("not") {
            return Ok(Proposition::not(self.prop_not()?));
        }
        self.prop_atom()
    }

    fn prop_atom(&mut self) -> PResult<Proposition> {
        if self.eat_kw("true") {
            return Ok(Proposition::True);
        }
        if let (Tok::Ident(name), Tok::LParen) = (self.peek().clone(), self.peek_at(1).clone()) {
            if !is_keyword(&name) {
                return Err(Diagnostic::error(
                    "parse.uninterpreted-predicate",
                    format!("uninterpreted predicate `{name}(...)` is not supported; use comparisons of index terms"),
                    self.span(),
                ));
            }
        }
        if *self.peek() == Tok::LParen {
            // `(a + b) <= c` or `(p)`: try the comparison reading first
            let (save, diag_len) = (self.pos, self.diags.len());
            if let Ok(p) = self.comparison() {
                return Ok(p);
            }
            self.pos = save;
            self.diags.truncate(diag_len);
            self.bump();
            let p = self.proposition()?;
            self.expect(Tok::RParen)?;
            return Ok(p);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Proposition> {
        let lhs = self.index_term()?;
        let op = match self.peek() {
            Tok::Le => CmpOp::Le,
            Tok::Lt => CmpOp::Lt,
            Tok::Eq => CmpOp::Eq,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            Tok::Ne => CmpOp::Ne,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.bump();
        let rhs = self.index_term()?;
        Ok(Proposition::cmp(op, lhs, rhs))
    }

    // ---- datatypes ---------------------------------------------------

    fn datatype(&mut self) -> PResult<Datatype> {
        let mut d = match self.peek().clone() {
            Tok::Ident(s) if s == "integer" => {
                self.bump();
                Datatype::Integer
            }
            Tok::Ident(s) if s == "float" => {
                self.bump();
                Datatype::Float
            }
            Tok::Ident(s) if s == "natural" => {
                self.bump();
                Datatype::natural()
            }
            Tok::Ident(s) if s == "positive" => {
                self.bump();
                Datatype::positive()
            }
            Tok::LBrace => {
                self.bump();
                let (var, span) = self.ident("a refinement variable")?;
                self.check_binder(&var, span, false);
                self.expect(Tok::Colon)?;
                let base = self.datatype()?;
                self.expect(Tok::Pipe)?;
                let prop = self.with_scope(&[var.as_str()], |p| p.proposition())?;
                self.expect(Tok::RBrace)?;
                Datatype::refinement(var, base, prop)
            }
            _ => return Err(self.unexpected("a datatype")),
        };
        while *self.peek() == Tok::LBracket {
            self.bump();
            if self.eat(&Tok::RBracket) {
                d = Datatype::array(d);
            } else {
                let len = self.index_term()?;
                self.expect(Tok::RBracket)?;
                d = Datatype::sized_array(d, len);
            }
        }
        Ok(d)
    }
}

fn positive_int(n: u64, span: Span) -> PResult<i64> {
    i64::try_from(n)
        .map_err(|_| Diagnostic::error("lex.bad-number", format!("integer literal `{n}` out of range"), span))
}

fn negate_int(n: u64, span: Span) -> PResult<i64> {
    if n == i64::MIN.unsigned_abs() {
        return Ok(i64::MIN);
    }
    positive_int(n, span).map(|v| -v)
}
