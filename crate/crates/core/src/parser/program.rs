use super::{is_keyword, Lang, PResult, ParseError, Parser, Tok};
use crate::program::{BinOp, Builtin, CommCall, Expr, Extern, Program, Stmt, StmtKind};
use crate::protocol::ReduceOp;
use crate::span::Diagnostic;

/// Parses an SPMD program. `extern` declarations are only allowed at top level.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text, Lang::Program).map_err(|d| ParseError { diagnostics: vec![d] })?;
    match p.program() {
        Ok(prog) => p.finish(prog),
        Err(d) => {
            let mut diagnostics = p.diags;
            diagnostics.push(d);
            Err(ParseError { diagnostics })
        }
    }
}

impl Parser {
    fn program(&mut self) -> PResult<Program> {
        let mut prog = Program::default();
        while *self.peek() != Tok::Eof {
            if self.is_kw("extern") {
                let start = self.bump().span;
                let (name, span) = self.ident("an extern name")?;
                self.check_binder(&name, span, false);
                let ty = if self.eat(&Tok::Colon) { Some(self.datatype()?) } else { None };
                self.bind(&name);
                prog.externs.push(Extern { name, ty, span: start.to(self.prev_span()) });
            } else {
                prog.body.push(self.stmt()?);
            }
            self.eat(&Tok::Semi);
        }
        Ok(prog)
    }

    fn stmt_block(&mut self, bound: &[&str]) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        self.with_scope(bound, |p| {
            let mut stmts = Vec::new();
            while *p.peek() != Tok::RBrace {
                if p.is_kw("extern") {
                    return Err(Diagnostic::error(
                        "parse.nested-extern",
                        "`extern` is only allowed at top level",
                        p.span(),
                    ));
                }
                stmts.push(p.stmt()?);
                p.eat(&Tok::Semi);
            }
            p.bump();
            Ok(stmts)
        })
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Ident(kw) if kw == "let" => {
                self.bump();
                let (var, span) = self.ident("a variable name")?;
                self.check_binder(&var, span, false);
                self.expect(Tok::Eq)?;
                let kind = match self.comm_call()? {
                    Some(call) => StmtKind::Comm { var: var.clone(), call },
                    None => StmtKind::Let { var: var.clone(), value: self.expr()? },
                };
                self.bind(&var);
                kind
            }
            Tok::Ident(kw) if kw == "if" => self.if_stmt()?,
            Tok::Ident(kw) if kw == "for" => {
                self.bump();
                let (var, span) = self.ident("a loop variable")?;
                self.check_binder(&var, span, false);
                self.expect_kw("in")?;
                let lo = self.expr()?;
                self.expect(Tok::DotDot)?;
                let hi = self.expr()?;
                let body = self.stmt_block(&[var.as_str()])?;
                StmtKind::For { var, lo, hi, body }
            }
            Tok::Ident(kw) if kw == "send" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let to = self.expr()?;
                self.expect(Tok::Comma)?;
                let value = self.expr()?;
                self.expect(Tok::RParen)?;
                StmtKind::Send { to, value }
            }
            Tok::Ident(kw) if kw == "apply" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let value = self.expr()?;
                self.expect(Tok::RParen)?;
                StmtKind::Apply(value)
            }
            Tok::Ident(kw) if is_keyword(&kw) => {
                return Err(Diagnostic::error(
                    "parse.unknown-statement",
                    format!("`{kw}` cannot start a statement"),
                    start,
                ))
            }
            Tok::Ident(_) => {
                let (var, span) = self.ident("a variable name")?;
                if var == "rank" || var == "size" {
                    self.diags.push(Diagnostic::error("scope.assign-builtin", format!("`{var}` is read-only"), span));
                } else {
                    self.use_var(&var, span);
                }
                if self.eat(&Tok::LBracket) {
                    let index = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    self.expect(Tok::Eq)?;
                    let value = self.expr()?;
                    StmtKind::AssignIndex { var, index, value }
                } else {
                    self.expect(Tok::Eq)?;
                    StmtKind::Assign { var, value: self.expr()? }
                }
            }
            _ => return Err(self.unexpected("a statement")),
        };
        Ok(Stmt { kind, span: start.to(self.prev_span()) })
    }

    fn if_stmt(&mut self) -> PResult<StmtKind> {
        self.expect_kw("if")?;
        self.expect(Tok::LParen)?;
        let cond = self.expr()?;
        self.expect(Tok::RParen)?;
        let then = self.stmt_block(&[])?;
        let otherwise = if self.eat_kw("else") {
            if self.is_kw("if") {
                let start = self.span();
                let kind = self.if_stmt()?;
                vec![Stmt { kind, span: start.to(self.prev_span()) }]
            } else {
                self.stmt_block(&[])?
            }
        } else {
            Vec::new()
        };
        Ok(StmtKind::If { cond, then, otherwise })
    }

    fn reduce_op_arg(&mut self) -> PResult<ReduceOp> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(op) = ReduceOp::from_name(s) {
                self.bump();
                return Ok(op);
            }
        }
        Err(self.unexpected("a reduce operator (`max`, `min` or `sum`)"))
    }

    /// The right-hand side of `let x = ...` when it is a communication call.
    fn comm_call(&mut self) -> PResult<Option<CommCall>> {
        let Tok::Ident(name) = self.peek().clone() else { return Ok(None) };
        let known = ["recv", "broadcast", "scatter", "gather", "reduce", "allgather", "allreduce"];
        if !known.contains(&name.as_str()) {
            return Ok(None);
        }
        self.bump();
        self.expect(Tok::LParen)?;
        let call = match name.as_str() {
            "recv" => CommCall::Recv { from: self.expr()? },
            "allgather" => CommCall::Allgather { value: self.expr()? },
            "allreduce" => {
                let op = self.reduce_op_arg()?;
                self.expect(Tok::Comma)?;
                CommCall::Allreduce { op, value: self.expr()? }
            }
            _ => {
                let root = self.expr()?;
                self.expect(Tok::Comma)?;
                match name.as_str() {
                    "broadcast" => CommCall::Broadcast { root, value: self.expr()? },
                    "scatter" => CommCall::Scatter { root, value: self.expr()? },
                    "gather" => CommCall::Gather { root, value: self.expr()? },
                    _ => {
                        let op = self.reduce_op_arg()?;
                        self.expect(Tok::Comma)?;
                        CommCall::Reduce { root, op, value: self.expr()? }
                    }
                }
            }
        };
        self.expect(Tok::RParen)?;
        Ok(Some(call))
    }

    // ---- expressions -------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.expr_and()?;
        while self.eat_kw("or") {
            let rhs = self.expr_and()?;
            lhs = Expr::bin(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn expr_and(&mut self) -> PResult<Expr> {
        let mut lhs = self.expr_not()?;
        while self.eat_kw("and") {
            let rhs = self.expr_not()?;
            lhs = Expr::bin(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn expr_not(&mut self) -> PResult<Expr> {
        if self.eat_kw("not") {
            return Ok(Expr::Not(Box::new(self.expr_not()?)));
        }
        self.expr_cmp()
    }

    fn expr_cmp(&mut self) -> PResult<Expr> {
        let lhs = self.expr_add()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.expr_add()?;
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn expr_add(&mut self) -> PResult<Expr> {
        let mut lhs = self.expr_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.expr_mul()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn expr_mul(&mut self) -> PResult<Expr> {
        let mut lhs = self.expr_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.expr_unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn expr_unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            let span = self.bump().span;
            return match self.peek().clone() {
                Tok::Int(n) => {
                    let lit = self.bump().span;
                    Ok(Expr::Int(super::negate_int(n, span.to(lit))?))
                }
                Tok::Float(x) => {
                    self.bump();
                    Ok(Expr::Float(-x))
                }
                _ => Ok(Expr::Neg(Box::new(self.expr_unary()?))),
            };
        }
        let mut e = self.expr_primary()?;
        while *self.peek() == Tok::LBracket {
            self.bump();
            let i = self.expr()?;
            self.expect(Tok::RBracket)?;
            e = Expr::Index(Box::new(e), Box::new(i));
        }
        Ok(e)
    }

    fn expr_primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                let span = self.bump().span;
                Ok(Expr::Int(super::positive_int(n, span)?))
            }
            Tok::Float(x) => {
                self.bump();
                Ok(Expr::Float(x))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket)?;
                Ok(Expr::Array(items))
            }
            Tok::Ident(name) if *self.peek_at(1) == Tok::LParen => {
                let span = self.bump().span;
                let Some(builtin) = Builtin::from_name(&name) else {
                    return Err(Diagnostic::error(
                        "parse.unknown-function",
                        format!("unknown function `{name}`"),
                        span,
                    ));
                };
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                if args.len() != builtin.arity() {
                    return Err(Diagnostic::error(
                        "parse.arity",
                        format!("`{name}` takes {} argument(s), found {}", builtin.arity(), args.len()),
                        span.to(self.prev_span()),
                    ));
                }
                Ok(Expr::Call(builtin, args))
            }
            Tok::Ident(_) => {
                let (name, span) = self.ident("an expression")?;
                self.use_var(&name, span);
                Ok(Expr::Var(name))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pretty::pretty_program;

    fn stmts(src: &str) -> Vec<StmtKind> {
        parse_program(src).unwrap().body.into_iter().map(|s| s.kind).collect()
    }

    fn err_codes(src: &str) -> Vec<&'static str> {
        parse_program(src).unwrap_err().diagnostics.iter().map(|d| d.code).collect()
    }

    #[test]
    fn send_statement() {
        assert_eq!(stmts("let v = 1 send(1, v)")[1], StmtKind::Send { to: Expr::Int(1), value: Expr::var("v") });
    }

    #[test]
    fn broadcast_binding() {
        let expected = StmtKind::Comm {
            var: "n".into(),
            call: CommCall::Broadcast { root: Expr::Int(0), value: Expr::var("len") },
        };
        assert_eq!(stmts("extern len let n = broadcast(0, len)")[0], expected);
    }

    #[test]
    fn for_loop() {
        let kinds = stmts("extern iterations\nfor i in 1 .. iterations { let y = i }");
        let StmtKind::For { var, lo, hi, body } = &kinds[0] else { panic!() };
        assert_eq!(var, "i");
        assert_eq!(*lo, Expr::Int(1));
        assert_eq!(*hi, Expr::var("iterations"));
        assert_eq!(body.len(), 1);
    }

    #[test]
    fn externs_with_types() {
        let p = parse_program("extern iterations: positive\nextern v: float[]\n").unwrap();
        assert_eq!(p.externs.len(), 2);
        assert!(p.externs[0].ty.is_some());
    }

    #[test]
    fn read_only_builtins() {
        assert_eq!(err_codes("rank = 3"), vec!["scope.assign-builtin"]);
        assert_eq!(err_codes("let size = 3"), vec!["scope.rebind-builtin"]);
        assert_eq!(err_codes("send(q, 1)"), vec!["scope.unbound-variable"]);
    }

    #[test]
    fn block_scoping() {
        assert_eq!(err_codes("if (rank = 0) { let a = 1 } send(a, 1)"), vec!["scope.unbound-variable"]);
        assert_eq!(err_codes("for i in 0 .. 1 { } send(i, 1)"), vec!["scope.unbound-variable"]);
        assert_eq!(err_codes("if (rank = 0) { extern x }"), vec!["parse.nested-extern"]);
    }

    #[test]
    fn expression_precedence() {
        let kinds = stmts("let a = 1 + 2 * 3 = 7 and not rank < 1");
        let StmtKind::Let { value, .. } = &kinds[0] else { panic!() };
        assert_eq!(value.to_string(), "1 + 2 * 3 = 7 and not rank < 1");
        let Expr::Bin(BinOp::And, lhs, _) = value else { panic!() };
        assert!(matches!(**lhs, Expr::Bin(BinOp::Eq, ..)));
    }

    #[test]
    fn unknown_function_and_arity() {
        assert_eq!(err_codes("let a = foo(1)"), vec!["parse.unknown-function"]);
        assert_eq!(err_codes("let a = max(1)"), vec!["parse.arity"]);
    }

    #[test]
    fn pretty_round_trip() {
        let src = "extern xs: float[]\nlet n = broadcast(0, length(xs))\nlet part = scatter(0, xs)\n\
                   let acc = 0.0\nfor i in 0 .. length(part) - 1 {\n  acc = acc + part[i] * part[i]\n}\n\
                   if (rank = 0) {\n  send(1, acc)\n} else {\n  if (rank = 1) {\n    let r = recv(0)\n  }\n}\n\
                   let total = allreduce(sum, acc)\nlet m = reduce(0, max, -acc)\napply(n)\n";
        let p = parse_program(src).unwrap();
        let printed = pretty_program(&p);
        assert_eq!(parse_program(&printed).unwrap(), p);
    }
}
