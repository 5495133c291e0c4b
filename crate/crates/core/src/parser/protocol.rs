use super::{Lang, PResult, ParseError, Parser, Tok};
use crate::protocol::{GlobalProtocol, ProtocolTerm, ReduceOp, TermKind};
use crate::span::{Diagnostic, Span};

/// Parses `protocol Name (prop) { items }`. The body is returned normalized.
pub fn parse_protocol(text: &str) -> Result<GlobalProtocol, ParseError> {
    let mut p = Parser::new(text, Lang::Protocol).map_err(|d| ParseError { diagnostics: vec![d] })?;
    match p.protocol() {
        Ok(proto) => p.finish(proto),
        Err(d) => {
            let mut diagnostics = p.diags;
            diagnostics.push(d);
            Err(ParseError { diagnostics })
        }
    }
}

impl Parser {
    fn protocol(&mut self) -> PResult<GlobalProtocol> {
        let start = self.expect_kw("protocol")?;
        let (name, _) = self.ident("a protocol name")?;
        self.expect(Tok::LParen)?;
        let size_prop = self.proposition()?;
        self.expect(Tok::RParen)?;
        let body = self.block()?;
        let span = start.to(self.prev_span());
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("end of input"));
        }
        Ok(GlobalProtocol { name, size_prop, body: body.normalize(), span })
    }

    /// `{ items }` in a fresh scope.
    fn block(&mut self) -> PResult<ProtocolTerm> {
        let open = self.expect(Tok::LBrace)?;
        self.scopes.push(Vec::new());
        let mut items = Vec::new();
        let r = loop {
            if *self.peek() == Tok::RBrace {
                break Ok(());
            }
            match self.item() {
                Ok(item) => items.push(item),
                Err(e) => break Err(e),
            }
            self.eat(&Tok::Semi);
        };
        self.scopes.pop();
        r?;
        let close = self.expect(Tok::RBrace)?;
        Ok(ProtocolTerm::new(TermKind::Seq(items), open.to(close)))
    }

    fn binder(&mut self) -> PResult<(String, Span)> {
        let (name, span) = self.ident("a variable name")?;
        self.check_binder(&name, span, true);
        Ok((name, span))
    }

    fn reduce_op(&mut self) -> PResult<ReduceOp> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(op) = ReduceOp::from_name(s) {
                self.bump();
                return Ok(op);
            }
        }
        Err(self.unexpected("a reduce operator (`max`, `min` or `sum`)"))
    }

    fn item(&mut self) -> PResult<ProtocolTerm> {
        let start = self.span();
        let Tok::Ident(kw) = self.peek().clone() else {
            return Err(self.unexpected("a protocol item"));
        };
        let kind = match kw.as_str() {
            "message" => {
                self.bump();
                let from = self.index_term()?;
                self.expect(Tok::Comma)?;
                let to = self.index_term()?;
                let payload = self.datatype()?;
                TermKind::Message { from, to, payload }
            }
            "broadcast" => {
                self.bump();
                let root = self.index_term()?;
                let (var, _) = self.binder()?;
                self.expect(Tok::Colon)?;
                let payload = self.datatype()?;
                self.bind(&var);
                TermKind::Broadcast { root, var, payload }
            }
            "scatter" | "gather" => {
                self.bump();
                let root = self.index_term()?;
                let payload = self.datatype()?;
                if kw == "scatter" {
                    TermKind::Scatter { root, payload }
                } else {
                    TermKind::Gather { root, payload }
                }
            }
            "reduce" => {
                self.bump();
                let root = self.index_term()?;
                let op = self.reduce_op()?;
                let payload = self.datatype()?;
                TermKind::Reduce { root, op, payload }
            }
            "allgather" => {
                self.bump();
                let (var, _) = self.binder()?;
                self.expect(Tok::Colon)?;
                let payload = self.datatype()?;
                self.bind(&var);
                TermKind::Allgather { var, payload }
            }
            "allreduce" => {
                self.bump();
                let op = self.reduce_op()?;
                let (var, _) = self.binder()?;
                self.expect(Tok::Colon)?;
                let payload = self.datatype()?;
                self.bind(&var);
                TermKind::Allreduce { op, var, payload }
            }
            "val" => {
                self.bump();
                let (var, _) = self.binder()?;
                self.expect(Tok::Colon)?;
                let payload = self.datatype()?;
                self.bind(&var);
                TermKind::Val { var, payload }
            }
            "foreach" => {
                self.bump();
                let (var, _) = self.binder()?;
                self.expect(Tok::Colon)?;
                let lo = self.index_term()?;
                self.expect(Tok::DotDot)?;
                let hi = self.index_term()?;
                self.scopes.push(vec![var.clone()]);
                let body = self.block();
                self.scopes.pop();
                TermKind::Foreach { var, lo, hi, body: Box::new(body?) }
            }
            "if" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.proposition()?;
                self.expect(Tok::RParen)?;
                let then = self.block()?;
                let otherwise = if self.eat_kw("else") {
                    if self.is_kw("if") {
                        self.item()?
                    } else {
                        self.block()?
                    }
                } else {
                    ProtocolTerm::new(TermKind::Skip, self.prev_span())
                };
                TermKind::Choice { cond, then: Box::new(then), otherwise: Box::new(otherwise) }
            }
            _ => return Err(Diagnostic::error("parse.unknown-item", format!("unknown protocol item `{kw}`"), start)),
        };
        Ok(ProtocolTerm::new(kind, start.to(self.prev_span())))
    }
}
