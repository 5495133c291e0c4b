//! Concrete-syntax printers. Output reparses to an equal AST.

use std::fmt::{self, Display, Formatter, Write};

use crate::program::{BinOp, CommCall, Expr, Program, Stmt, StmtKind};
use crate::protocol::{
    sized_array_binder, CmpOp, Datatype, GlobalProtocol, IndexOp, IndexTerm, Proposition, ProtocolTerm, TermKind,
};

const INDENT: &str = "  ";

fn index_prec(t: &IndexTerm) -> u8 {
    match t {
        IndexTerm::Bin(IndexOp::Add | IndexOp::Sub, ..) => 1,
        IndexTerm::Bin(IndexOp::Mul | IndexOp::Div | IndexOp::Mod, ..) => 2,
        _ => 3,
    }
}

fn fmt_index(t: &IndexTerm, f: &mut Formatter<'_>, min_prec: u8) -> fmt::Result {
    let prec = index_prec(t);
    if prec < min_prec {
        f.write_str("(")?;
        fmt_index(t, f, 0)?;
        return f.write_str(")");
    }
    match t {
        IndexTerm::Var(x) => f.write_str(x),
        IndexTerm::Int(n) => write!(f, "{n}"),
        IndexTerm::Float(x) => write!(f, "{x:?}"),
        IndexTerm::Array(items) => {
            f.write_str("[")?;
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                fmt_index(item, f, 0)?;
            }
            f.write_str("]")
        }
        IndexTerm::Bin(op @ (IndexOp::Max | IndexOp::Min), a, b) => {
            write!(f, "{}(", op.symbol())?;
            fmt_index(a, f, 0)?;
            f.write_str(", ")?;
            fmt_index(b, f, 0)?;
            f.write_str(")")
        }
        IndexTerm::Bin(op, a, b) => {
            fmt_index(a, f, prec)?;
            write!(f, " {} ", op.symbol())?;
            fmt_index(b, f, prec + 1)
        }
        IndexTerm::Length(a) => {
            f.write_str("length(")?;
            fmt_index(a, f, 0)?;
            f.write_str(")")
        }
        IndexTerm::Index(a, i) => {
            // negative literals would lex as subtraction from the base
            let atomic =
                matches!(&**a, IndexTerm::Var(_) | IndexTerm::Array(_) | IndexTerm::Length(_) | IndexTerm::Index(..))
                    || matches!(&**a, IndexTerm::Bin(IndexOp::Max | IndexOp::Min, ..));
            if atomic {
                fmt_index(a, f, 3)?;
            } else {
                f.write_str("(")?;
                fmt_index(a, f, 0)?;
                f.write_str(")")?;
            }
            f.write_str("[")?;
            fmt_index(i, f, 0)?;
            f.write_str("]")
        }
    }
}

impl Display for IndexTerm {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        fmt_index(self, f, 0)
    }
}

fn prop_prec(p: &Proposition) -> u8 {
    match p {
        Proposition::Or(..) => 1,
        Proposition::And(..) => 2,
        Proposition::Not(_) => 3,
        Proposition::True | Proposition::Cmp(..) => 4,
    }
}

fn fmt_prop(p: &Proposition, f: &mut Formatter<'_>, min_prec: u8) -> fmt::Result {
    let prec = prop_prec(p);
    if prec < min_prec {
        f.write_str("(")?;
        fmt_prop(p, f, 0)?;
        return f.write_str(")");
    }
    match p {
        Proposition::True => f.write_str("true"),
        Proposition::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
        Proposition::And(a, b) => {
            fmt_prop(a, f, 2)?;
            f.write_str(" and ")?;
            fmt_prop(b, f, 3)
        }
        Proposition::Or(a, b) => {
            fmt_prop(a, f, 1)?;
            f.write_str(" or ")?;
            fmt_prop(b, f, 2)
        }
        Proposition::Not(a) => {
            f.write_str("not ")?;
            fmt_prop(a, f, 3)
        }
    }
}

impl Display for Proposition {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        fmt_prop(self, f, 0)
    }
}

/// `natural` / `positive` shorthand, if `d` is exactly one of them.
fn shorthand(d: &Datatype) -> Option<&'static str> {
    let Datatype::Refinement { var, base, prop } = d else { return None };
    if var != "x" || **base != Datatype::Integer {
        return None;
    }
    match prop {
        Proposition::Cmp(CmpOp::Ge, IndexTerm::Var(v), IndexTerm::Int(0)) if v == "x" => Some("natural"),
        Proposition::Cmp(CmpOp::Ge, IndexTerm::Var(v), IndexTerm::Int(1)) if v == "x" => Some("positive"),
        _ => None,
    }
}

/// `(elem, len)` if `d` is the desugaring of `elem[len]`.
fn sized_array(d: &Datatype) -> Option<(&Datatype, &IndexTerm)> {
    let Datatype::Refinement { var, base, prop } = d else { return None };
    let Datatype::Array(elem, None) = &**base else { return None };
    let Proposition::Cmp(CmpOp::Eq, IndexTerm::Length(x), len) = prop else { return None };
    match &**x {
        IndexTerm::Var(v) if v == var && *var == sized_array_binder(len) => Some((elem, len)),
        _ => None,
    }
}

impl Display for Datatype {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if let Some(name) = shorthand(self) {
            return f.write_str(name);
        }
        if let Some((elem, len)) = sized_array(self) {
            return write!(f, "{elem}[{len}]");
        }
        match self {
            Datatype::Integer => f.write_str("integer"),
            Datatype::Float => f.write_str("float"),
            Datatype::Array(elem, None) => write!(f, "{elem}[]"),
            Datatype::Array(elem, Some(len)) => {
                // no surface syntax; print the equivalent refinement
                let var = sized_array_binder(len);
                write!(f, "{{{var}: {elem}[] | length({var}) = {len}}}")
            }
            Datatype::Refinement { var, base, prop } => write!(f, "{{{var}: {base} | {prop}}}"),
        }
    }
}

impl Datatype {
    /// Top-level refinement spelled out even when a shorthand exists, e.g.
    /// `{x: integer | x >= 1}` for `positive`.
    pub fn spelled_out(&self) -> String {
        match self {
            Datatype::Refinement { var, base, prop } => format!("{{{var}: {base} | {prop}}}"),
            other => other.to_string(),
        }
    }
}

fn write_items(out: &mut String, t: &ProtocolTerm, depth: usize) {
    match &t.kind {
        TermKind::Skip => {}
        TermKind::Seq(items) => items.iter().for_each(|i| write_items(out, i, depth)),
        _ => write_item(out, t, depth),
    }
}

fn write_item(out: &mut String, t: &ProtocolTerm, depth: usize) {
    let pad = INDENT.repeat(depth);
    let _ = match &t.kind {
        TermKind::Skip => Ok(()),
        TermKind::Seq(_) => {
            write_items(out, t, depth);
            Ok(())
        }
        TermKind::Message { from, to, payload } => writeln!(out, "{pad}message {from}, {to} {payload}"),
        TermKind::Broadcast { root, var, payload } => writeln!(out, "{pad}broadcast {root} {var}: {payload}"),
        TermKind::Scatter { root, payload } => writeln!(out, "{pad}scatter {root} {payload}"),
        TermKind::Gather { root, payload } => writeln!(out, "{pad}gather {root} {payload}"),
        TermKind::Reduce { root, op, payload } => writeln!(out, "{pad}reduce {root} {op} {payload}"),
        TermKind::Allgather { var, payload } => writeln!(out, "{pad}allgather {var}: {payload}"),
        TermKind::Allreduce { op, var, payload } => writeln!(out, "{pad}allreduce {op} {var}: {payload}"),
        TermKind::Val { var, payload } => writeln!(out, "{pad}val {var}: {payload}"),
        TermKind::Foreach { var, lo, hi, body } => {
            let _ = writeln!(out, "{pad}foreach {var}: {lo} .. {hi} {{");
            write_items(out, body, depth + 1);
            writeln!(out, "{pad}}}")
        }
        TermKind::Choice { cond, then, otherwise } => {
            let _ = writeln!(out, "{pad}if ({cond}) {{");
            write_items(out, then, depth + 1);
            let _ = writeln!(out, "{pad}}} else {{");
            write_items(out, otherwise, depth + 1);
            writeln!(out, "{pad}}}")
        }
    };
}

/// Protocol text with two-space indentation and one item per line.
pub fn pretty_protocol(p: &GlobalProtocol) -> String {
    let mut out = format!("protocol {} ({}) {{\n", p.name, p.size_prop);
    write_items(&mut out, &p.body, 1);
    out.push('}');
    out
}

/// A single protocol item (or sequence) without the header.
pub fn pretty_term(t: &ProtocolTerm) -> String {
    let mut out = String::new();
    write_items(&mut out, t, 0);
    if out.ends_with('\n') {
        out.pop();
    }
    out
}

fn fmt_expr(e: &Expr, f: &mut Formatter<'_>, min_prec: u8) -> fmt::Result {
    let prec = match e {
        Expr::Bin(op, ..) => op.precedence(),
        Expr::Not(_) => 3,
        Expr::Neg(_) => 7,
        _ => 8,
    };
    if prec < min_prec {
        f.write_str("(")?;
        fmt_expr(e, f, 0)?;
        return f.write_str(")");
    }
    match e {
        Expr::Int(n) => write!(f, "{n}"),
        Expr::Float(x) => write!(f, "{x:?}"),
        Expr::Array(items) => {
            f.write_str("[")?;
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                fmt_expr(item, f, 0)?;
            }
            f.write_str("]")
        }
        Expr::Var(x) => f.write_str(x),
        Expr::Neg(a) => {
            f.write_str("-")?;
            if matches!(**a, Expr::Int(_) | Expr::Float(_)) {
                f.write_str("(")?;
                fmt_expr(a, f, 0)?;
                f.write_str(")")
            } else {
                fmt_expr(a, f, 7)
            }
        }
        Expr::Not(a) => {
            f.write_str("not ")?;
            fmt_expr(a, f, 3)
        }
        Expr::Bin(op, a, b) => {
            // comparisons do not chain
            let (lp, rp) = if op.precedence() == 4 { (5, 5) } else { (prec, prec + 1) };
            fmt_expr(a, f, lp)?;
            write!(f, " {} ", op.symbol())?;
            fmt_expr(b, f, rp)
        }
        Expr::Call(b, args) => {
            write!(f, "{}(", b.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                fmt_expr(a, f, 0)?;
            }
            f.write_str(")")
        }
        Expr::Index(a, i) => {
            if matches!(**a, Expr::Var(_) | Expr::Array(_) | Expr::Call(..) | Expr::Index(..)) {
                fmt_expr(a, f, 8)?;
            } else {
                f.write_str("(")?;
                fmt_expr(a, f, 0)?;
                f.write_str(")")?;
            }
            f.write_str("[")?;
            fmt_expr(i, f, 0)?;
            f.write_str("]")
        }
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        fmt_expr(self, f, 0)
    }
}

impl Display for BinOp {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Display for CommCall {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            CommCall::Recv { from } => write!(f, "recv({from})"),
            CommCall::Broadcast { root, value } => write!(f, "broadcast({root}, {value})"),
            CommCall::Scatter { root, value } => write!(f, "scatter({root}, {value})"),
            CommCall::Gather { root, value } => write!(f, "gather({root}, {value})"),
            CommCall::Reduce { root, op, value } => write!(f, "reduce({root}, {op}, {value})"),
            CommCall::Allgather { value } => write!(f, "allgather({value})"),
            CommCall::Allreduce { op, value } => write!(f, "allreduce({op}, {value})"),
        }
    }
}

fn write_stmts(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = INDENT.repeat(depth);
    let _ = match &s.kind {
        StmtKind::Let { var, value } => writeln!(out, "{pad}let {var} = {value}"),
        StmtKind::Assign { var, value } => writeln!(out, "{pad}{var} = {value}"),
        StmtKind::AssignIndex { var, index, value } => writeln!(out, "{pad}{var}[{index}] = {value}"),
        StmtKind::If { cond, then, otherwise } => {
            let _ = writeln!(out, "{pad}if ({cond}) {{");
            write_stmts(out, then, depth + 1);
            if otherwise.is_empty() {
                writeln!(out, "{pad}}}")
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                write_stmts(out, otherwise, depth + 1);
                writeln!(out, "{pad}}}")
            }
        }
        StmtKind::For { var, lo, hi, body } => {
            let _ = writeln!(out, "{pad}for {var} in {lo} .. {hi} {{");
            write_stmts(out, body, depth + 1);
            writeln!(out, "{pad}}}")
        }
        StmtKind::Send { to, value } => writeln!(out, "{pad}send({to}, {value})"),
        StmtKind::Comm { var, call } => writeln!(out, "{pad}let {var} = {call}"),
        StmtKind::Apply(e) => writeln!(out, "{pad}apply({e})"),
    };
}

pub fn pretty_program(p: &Program) -> String {
    let mut out = String::new();
    for ext in &p.externs {
        let _ = match &ext.ty {
            Some(ty) => writeln!(out, "extern {}: {ty}", ext.name),
            None => writeln!(out, "extern {}", ext.name),
        };
    }
    write_stmts(&mut out, &p.body, 0);
    out
}
