//! Small-step interpreter for one rank of an SPMD program.
//!
//! A [`RankMachine`] runs statements until it reaches a communication
//! statement, where it stops with a [`Request`] for the scheduler. Once the
//! rendezvous completes the scheduler calls [`RankMachine::complete`] with
//! the received value, if any.

use thiserror::Error;

use crate::program::{BinOp, Builtin, CommCall, Expr, Program, Stmt, StmtKind};
use crate::project::Offer;
use crate::span::Span;
use crate::value::Value;

/// Largest array `array(n, v)` may build.
const MAX_ARRAY_LEN: i64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message}")]
pub struct RuntimeError {
    pub message: String,
    pub span: Span,
}

type EResult<T> = Result<T, String>;

/// Lexically scoped variable store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vars {
    slots: Vec<(String, Value)>,
}

impl Vars {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.slots.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn get_mut(&mut self, name: &str) -> Option<&mut Value> {
        self.slots.iter_mut().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn push(&mut self, name: impl Into<String>, v: Value) {
        self.slots.push((name.into(), v));
    }

    fn mark(&self) -> usize {
        self.slots.len()
    }

    fn truncate(&mut self, mark: usize) {
        self.slots.truncate(mark);
    }

    /// Innermost binding of each visible name.
    pub fn visible(&self) -> Vec<(&str, &Value)> {
        let mut out: Vec<(&str, &Value)> = Vec::new();
        for (n, v) in self.slots.iter().rev() {
            if !out.iter().any(|(m, _)| m == n) {
                out.push((n, v));
            }
        }
        out.reverse();
        out
    }
}

fn truthy(v: &Value) -> EResult<bool> {
    match v {
        Value::Int(n) => Ok(*n != 0),
        other => Err(format!("condition must be an integer, found {}", other.kind_name())),
    }
}

fn as_index(v: &Value, what: &str) -> EResult<i64> {
    v.as_int().ok_or_else(|| format!("{what} must be an integer, found {}", v.kind_name()))
}

fn arith(op: BinOp, a: &Value, b: &Value) -> EResult<Value> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let (x, y) = (*x, *y);
            let r = match op {
                BinOp::Add => x.checked_add(y),
                BinOp::Sub => x.checked_sub(y),
                BinOp::Mul => x.checked_mul(y),
                BinOp::Div | BinOp::Mod if y == 0 => return Err("division by zero".into()),
                BinOp::Div => x.checked_div_euclid(y),
                BinOp::Mod => x.checked_rem_euclid(y),
                _ => unreachable!("not arithmetic"),
            };
            r.map(Value::Int).ok_or_else(|| "integer overflow".to_string())
        }
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
            let x = to_f64(a);
            let y = to_f64(b);
            Ok(Value::Float(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Mod => x.rem_euclid(y),
                _ => unreachable!("not arithmetic"),
            }))
        }
        _ => Err(format!("cannot apply `{}` to {} and {}", op.symbol(), a.kind_name(), b.kind_name())),
    }
}

fn to_f64(v: &Value) -> f64 {
    match v {
        Value::Int(n) => *n as f64,
        Value::Float(x) => *x,
        Value::Array(_) => f64::NAN,
    }
}

fn compare(op: BinOp, a: &Value, b: &Value) -> EResult<bool> {
    use std::cmp::Ordering;
    let ord = match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => to_f64(a).partial_cmp(&to_f64(b)),
        (Value::Array(_), Value::Array(_)) if matches!(op, BinOp::Eq | BinOp::Ne) => {
            return Ok((a == b) == (op == BinOp::Eq));
        }
        _ => return Err(format!("cannot compare {} with {} using `{}`", a.kind_name(), b.kind_name(), op.symbol())),
    };
    let Some(ord) = ord else { return Ok(op == BinOp::Ne) };
    Ok(match op {
        BinOp::Eq => ord == Ordering::Equal,
        BinOp::Ne => ord != Ordering::Equal,
        BinOp::Lt => ord == Ordering::Less,
        BinOp::Le => ord != Ordering::Greater,
        BinOp::Gt => ord == Ordering::Greater,
        BinOp::Ge => ord != Ordering::Less,
        _ => unreachable!("not a comparison"),
    })
}

fn bool_value(b: bool) -> Value {
    Value::Int(b as i64)
}

fn builtin(b: Builtin, args: Vec<Value>) -> EResult<Value> {
    let mut args = args.into_iter();
    let mut next = || args.next().expect("arity checked by the parser");
    match b {
        Builtin::Length => match next() {
            Value::Array(items) => Ok(Value::Int(items.len() as i64)),
            other => Err(format!("length of {}", other.kind_name())),
        },
        Builtin::Max | Builtin::Min => {
            let (a, c) = (next(), next());
            let pick_first = compare(if b == Builtin::Max { BinOp::Ge } else { BinOp::Le }, &a, &c)?;
            let mixed = matches!((&a, &c), (Value::Float(_), Value::Int(_)) | (Value::Int(_), Value::Float(_)));
            let r = if pick_first { a } else { c };
            Ok(if mixed { Value::Float(to_f64(&r)) } else { r })
        }
        Builtin::Abs => match next() {
            Value::Int(n) => n.checked_abs().map(Value::Int).ok_or_else(|| "integer overflow".into()),
            Value::Float(x) => Ok(Value::Float(x.abs())),
            other => Err(format!("abs of {}", other.kind_name())),
        },
        Builtin::Float => match next() {
            Value::Int(n) => Ok(Value::Float(n as f64)),
            Value::Float(x) => Ok(Value::Float(x)),
            other => Err(format!("float of {}", other.kind_name())),
        },
        Builtin::Int => match next() {
            Value::Int(n) => Ok(Value::Int(n)),
            Value::Float(x) if x.is_finite() && x.abs() < 9.2e18 => Ok(Value::Int(x.trunc() as i64)),
            Value::Float(x) => Err(format!("float {x} has no integer value")),
            other => Err(format!("int of {}", other.kind_name())),
        },
        Builtin::Sqrt => match next() {
            v @ (Value::Int(_) | Value::Float(_)) => Ok(Value::Float(to_f64(&v).sqrt())),
            other => Err(format!("sqrt of {}", other.kind_name())),
        },
        Builtin::Array => {
            let n = as_index(&next(), "array length")?;
            if !(0..=MAX_ARRAY_LEN).contains(&n) {
                return Err(format!("array length {n} out of range"));
            }
            Ok(Value::Array(vec![next(); n as usize]))
        }
        Builtin::Slice => {
            let a = next();
            let lo = as_index(&next(), "slice bound")?;
            let hi = as_index(&next(), "slice bound")?;
            let Value::Array(items) = a else { return Err(format!("slice of {}", a.kind_name())) };
            if lo < 0 || hi < lo || hi as usize > items.len() {
                return Err(format!("slice {lo}..{hi} out of range for array of length {}", items.len()));
            }
            Ok(Value::Array(items[lo as usize..hi as usize].to_vec()))
        }
        Builtin::Concat => match (next(), next()) {
            (Value::Array(mut a), Value::Array(b)) => {
                a.extend(b);
                let v = Value::Array(a);
                if v.is_homogeneous() {
                    Ok(v)
                } else {
                    Err("concat of arrays with different element types".into())
                }
            }
            (a, b) => Err(format!("concat of {} and {}", a.kind_name(), b.kind_name())),
        },
    }
}

/// Evaluates a program expression.
pub fn eval_expr(e: &Expr, vars: &Vars) -> EResult<Value> {
    match e {
        Expr::Int(n) => Ok(Value::Int(*n)),
        Expr::Float(x) => Ok(Value::Float(*x)),
        Expr::Array(items) => {
            let v = Value::Array(items.iter().map(|i| eval_expr(i, vars)).collect::<EResult<_>>()?);
            if v.is_homogeneous() {
                Ok(v)
            } else {
                Err("array literal mixes element types".into())
            }
        }
        Expr::Var(x) => vars.get(x).cloned().ok_or_else(|| format!("unbound variable `{x}`")),
        Expr::Neg(a) => match eval_expr(a, vars)? {
            Value::Int(n) => n.checked_neg().map(Value::Int).ok_or_else(|| "integer overflow".into()),
            Value::Float(x) => Ok(Value::Float(-x)),
            other => Err(format!("cannot negate {}", other.kind_name())),
        },
        Expr::Not(a) => Ok(bool_value(!truthy(&eval_expr(a, vars)?)?)),
        Expr::Bin(BinOp::And, a, b) => Ok(bool_value(truthy(&eval_expr(a, vars)?)? && truthy(&eval_expr(b, vars)?)?)),
        Expr::Bin(BinOp::Or, a, b) => Ok(bool_value(truthy(&eval_expr(a, vars)?)? || truthy(&eval_expr(b, vars)?)?)),
        Expr::Bin(op, a, b) => {
            let a = eval_expr(a, vars)?;
            let b = eval_expr(b, vars)?;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod => arith(*op, &a, &b),
                _ => compare(*op, &a, &b).map(bool_value),
            }
        }
        Expr::Call(b, args) => builtin(*b, args.iter().map(|a| eval_expr(a, vars)).collect::<EResult<_>>()?),
        Expr::Index(a, i) => {
            let a = eval_expr(a, vars)?;
            let i = as_index(&eval_expr(i, vars)?, "array index")?;
            match a {
                Value::Array(mut items) => {
                    if i < 0 || i as usize >= items.len() {
                        return Err(format!("index {i} out of range for array of length {}", items.len()));
                    }
                    Ok(items.swap_remove(i as usize))
                }
                other => Err(format!("cannot index into {}", other.kind_name())),
            }
        }
    }
}

/// A communication the rank is blocked on.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub offer: Offer,
    /// Value sent or contributed; `None` for receives and for the non-root
    /// side of broadcast and scatter.
    pub value: Option<Value>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Executed one statement; call again.
    Ran,
    Blocked(Request),
    Done,
    Fault(RuntimeError),
}

#[derive(Debug, Clone)]
enum Frame<'p> {
    Block { stmts: &'p [Stmt], pc: usize, mark: usize },
    Loop { var: &'p str, next: i64, hi: i64, body: &'p [Stmt], mark: usize },
}

#[derive(Debug, Clone)]
pub struct RankMachine<'p> {
    rank: i64,
    size: i64,
    vars: Vars,
    frames: Vec<Frame<'p>>,
    /// Variable waiting for the result of the current communication.
    pending: Option<(&'p str, Request)>,
    blocked: Option<Request>,
    statements: u64,
}

impl<'p> RankMachine<'p> {
    /// `inputs` are the extern values, already validated.
    pub fn new(prog: &'p Program, rank: i64, size: i64, inputs: &[(String, Value)]) -> Self {
        let mut vars = Vars::default();
        vars.push("size", Value::Int(size));
        vars.push("rank", Value::Int(rank));
        for (n, v) in inputs {
            vars.push(n.clone(), v.clone());
        }
        let mark = vars.mark();
        RankMachine {
            rank,
            size,
            vars,
            frames: vec![Frame::Block { stmts: &prog.body, pc: 0, mark }],
            pending: None,
            blocked: None,
            statements: 0,
        }
    }

    pub fn rank(&self) -> i64 {
        self.rank
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    /// Statements executed so far.
    pub fn statements(&self) -> u64 {
        self.statements
    }

    /// The request this rank is blocked on, if any.
    pub fn blocked_on(&self) -> Option<&Request> {
        self.blocked.as_ref()
    }

    fn fault(&self, message: String, span: Span) -> Step {
        Step::Fault(RuntimeError { message, span })
    }

    fn eval(&self, e: &Expr, span: Span) -> Result<Value, Step> {
        eval_expr(e, &self.vars).map_err(|m| self.fault(m, span))
    }

    fn eval_rank(&self, e: &Expr, role: &str, span: Span) -> Result<i64, Step> {
        let v = self.eval(e, span)?;
        let r = as_index(&v, role).map_err(|m| self.fault(m, span))?;
        if !(0..self.size).contains(&r) {
            return Err(self.fault(format!("{role} {r} is not a rank (size is {})", self.size), span));
        }
        Ok(r)
    }

    /// Runs one statement (or loop transition).
    pub fn step(&mut self) -> Step {
        if let Some(req) = &self.blocked {
            return Step::Blocked(req.clone());
        }
        match self.step_inner() {
            Ok(step) | Err(step) => {
                if let Step::Blocked(req) = &step {
                    self.blocked = Some(req.clone());
                }
                step
            }
        }
    }

    /// Runs until blocked, done or faulted, or until `budget` statements
    /// have executed. Returns `Step::Ran` only when the budget ran out.
    pub fn run(&mut self, budget: &mut u64) -> Step {
        loop {
            if *budget == 0 {
                return Step::Ran;
            }
            match self.step() {
                Step::Ran => *budget -= 1,
                other => return other,
            }
        }
    }

    fn step_inner(&mut self) -> Result<Step, Step> {
        let Some(frame) = self.frames.last_mut() else { return Ok(Step::Done) };
        let stmt = match frame {
            Frame::Block { stmts, pc, mark } => {
                if *pc >= stmts.len() {
                    let mark = *mark;
                    self.frames.pop();
                    self.vars.truncate(mark);
                    return Ok(if self.frames.is_empty() { Step::Done } else { Step::Ran });
                }
                *pc += 1;
                &stmts[*pc - 1]
            }
            Frame::Loop { var, next, hi, body, mark } => {
                self.vars.truncate(*mark);
                if *next > *hi {
                    self.frames.pop();
                    return Ok(Step::Ran);
                }
                let (var, i, body) = (*var, *next, *body);
                *next += 1;
                self.vars.push(var, Value::Int(i));
                let mark = self.vars.mark();
                self.frames.push(Frame::Block { stmts: body, pc: 0, mark });
                return Ok(Step::Ran);
            }
        };
        self.statements += 1;
        let span = stmt.span;
        match &stmt.kind {
            StmtKind::Let { var, value } => {
                let v = self.eval(value, span)?;
                self.vars.push(var.clone(), v);
            }
            StmtKind::Assign { var, value } => {
                let v = self.eval(value, span)?;
                match self.vars.get_mut(var) {
                    Some(slot) => *slot = v,
                    None => return Err(self.fault(format!("unbound variable `{var}`"), span)),
                }
            }
            StmtKind::AssignIndex { var, index, value } => {
                let i = self.eval(index, span)?;
                let i = as_index(&i, "array index").map_err(|m| self.fault(m, span))?;
                let v = self.eval(value, span)?;
                let r = match self.vars.get_mut(var) {
                    Some(Value::Array(items)) => match usize::try_from(i).ok().filter(|&i| i < items.len()) {
                        Some(i) if items[i].kind_name() == v.kind_name() => {
                            items[i] = v;
                            Ok(())
                        }
                        Some(i) => {
                            Err(format!("cannot store {} into an array of {}", v.kind_name(), items[i].kind_name()))
                        }
                        None => Err(format!("index {i} out of range for array of length {}", items.len())),
                    },
                    Some(other) => Err(format!("cannot index into {}", other.kind_name())),
                    None => Err(format!("unbound variable `{var}`")),
                };
                r.map_err(|m| self.fault(m, span))?;
            }
            StmtKind::If { cond, then, otherwise } => {
                let c = self.eval(cond, span)?;
                let c = truthy(&c).map_err(|m| self.fault(m, span))?;
                let mark = self.vars.mark();
                self.frames.push(Frame::Block { stmts: if c { then } else { otherwise }, pc: 0, mark });
            }
            StmtKind::For { var, lo, hi, body } => {
                let lo = self.eval(lo, span)?;
                let hi = self.eval(hi, span)?;
                let lo = as_index(&lo, "loop bound").map_err(|m| self.fault(m, span))?;
                let hi = as_index(&hi, "loop bound").map_err(|m| self.fault(m, span))?;
                let mark = self.vars.mark();
                self.frames.push(Frame::Loop { var, next: lo, hi, body, mark });
            }
            StmtKind::Send { to, value } => {
                let to = self.eval_rank(to, "destination", span)?;
                if to == self.rank {
                    return Err(self.fault(format!("rank {to} sends to itself"), span));
                }
                let value = self.eval(value, span)?;
                return Ok(Step::Blocked(Request { offer: Offer::Send { to }, value: Some(value), span }));
            }
            StmtKind::Apply(e) => {
                let value = self.eval(e, span)?;
                return Ok(Step::Blocked(Request { offer: Offer::Apply, value: Some(value), span }));
            }
            StmtKind::Comm { var, call } => {
                let req = self.comm_request(call, span)?;
                self.pending = Some((var, req.clone()));
                return Ok(Step::Blocked(req));
            }
        }
        Ok(Step::Ran)
    }

    fn comm_request(&self, call: &CommCall, span: Span) -> Result<Request, Step> {
        let at_root = |root: i64| root == self.rank;
        let (offer, value) = match call {
            CommCall::Recv { from } => {
                let from = self.eval_rank(from, "source", span)?;
                if from == self.rank {
                    return Err(self.fault(format!("rank {from} receives from itself"), span));
                }
                (Offer::Recv { from }, None)
            }
            CommCall::Broadcast { root, value } => {
                let root = self.eval_rank(root, "root", span)?;
                let v = if at_root(root) { Some(self.eval(value, span)?) } else { None };
                (Offer::Broadcast { root }, v)
            }
            CommCall::Scatter { root, value } => {
                let root = self.eval_rank(root, "root", span)?;
                let v = if at_root(root) { Some(self.eval(value, span)?) } else { None };
                (Offer::Scatter { root }, v)
            }
            CommCall::Gather { root, value } => {
                let root = self.eval_rank(root, "root", span)?;
                (Offer::Gather { root }, Some(self.eval(value, span)?))
            }
            CommCall::Reduce { root, op, value } => {
                let root = self.eval_rank(root, "root", span)?;
                (Offer::Reduce { root, op: *op }, Some(self.eval(value, span)?))
            }
            CommCall::Allgather { value } => (Offer::Allgather, Some(self.eval(value, span)?)),
            CommCall::Allreduce { op, value } => (Offer::Allreduce { op: *op }, Some(self.eval(value, span)?)),
        };
        Ok(Request { offer, value, span })
    }

    /// Finishes the blocked communication, binding `result` when the
    /// statement was a `let`.
    pub fn complete(&mut self, result: Option<Value>) {
        self.blocked = None;
        if let Some((var, _)) = self.pending.take() {
            let v = result.expect("value-returning communication completes with a value");
            self.vars.push(var, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn run_solo(src: &str, rank: i64, size: i64) -> (Vec<Request>, Vars) {
        let prog = parse_program(src).unwrap();
        let mut m = RankMachine::new(&prog, rank, size, &[]);
        let mut reqs = Vec::new();
        let mut budget = 10_000;
        loop {
            match m.run(&mut budget) {
                Step::Blocked(r) => {
                    let result = match r.offer {
                        Offer::Send { .. } | Offer::Apply => None,
                        _ => Some(Value::Int(0)),
                    };
                    reqs.push(r);
                    m.complete(result);
                }
                Step::Done => return (reqs, m.vars.clone()),
                other => panic!("{other:?}"),
            }
        }
    }

    fn expr(src: &str) -> Result<Value, String> {
        let prog = parse_program(&format!("let r = {src}")).unwrap();
        let StmtKind::Let { value, .. } = &prog.body[0].kind else { panic!() };
        let mut vars = Vars::default();
        vars.push("rank", Value::Int(1));
        vars.push("size", Value::Int(4));
        eval_expr(value, &vars)
    }

    #[test]
    fn let_binds() {
        let prog = parse_program("let x = 2 + 3").unwrap();
        let mut m = RankMachine::new(&prog, 0, 1, &[]);
        assert_eq!(m.step(), Step::Ran);
        assert_eq!(m.vars().get("x"), Some(&Value::Int(5)));
        assert_eq!(m.step(), Step::Done);
        // top-level bindings are dropped once the program ends
        assert_eq!(m.vars().get("x"), None);
    }

    #[test]
    fn symmetric_apply() {
        let src = "if (rank = 0) { apply(100) } else { apply(100) }";
        for rank in 0..2 {
            let (reqs, _) = run_solo(src, rank, 2);
            assert_eq!(reqs.len(), 1);
            assert_eq!(reqs[0].offer, Offer::Apply);
            assert_eq!(reqs[0].value, Some(Value::Int(100)));
        }
    }

    #[test]
    fn empty_loop() {
        let (reqs, _) = run_solo("for i in 1 .. 0 { send(0, i) }", 1, 2);
        assert!(reqs.is_empty());
    }

    #[test]
    fn loops_scope_and_assignment() {
        let src = "let acc = 0\nfor i in 1 .. 4 { let sq = i * i\nacc = acc + sq }\nsend(0, acc)";
        let (reqs, _) = run_solo(src, 1, 2);
        assert_eq!(reqs[0].value, Some(Value::Int(30)));
    }

    #[test]
    fn array_updates() {
        let src = "let a = array(3, 0.0)\na[1] = 2.5\nsend(0, a)";
        let (reqs, _) = run_solo(src, 1, 2);
        assert_eq!(reqs[0].value, Some(Value::Array(vec![Value::Float(0.0), Value::Float(2.5), Value::Float(0.0)])));
    }

    #[test]
    fn comm_results_are_bound() {
        let (reqs, vars) = run_solo("let x = recv(0)\nlet y = x + 1", 1, 2);
        assert_eq!(reqs[0].offer, Offer::Recv { from: 0 });
        assert_eq!(reqs[0].value, None);
        assert_eq!(vars.get("y"), None);
        let (reqs, _) = run_solo("let n = broadcast(0, 7)", 1, 2);
        assert_eq!(reqs[0].value, None);
        let (reqs, _) = run_solo("let n = broadcast(0, 7)", 0, 2);
        assert_eq!(reqs[0].value, Some(Value::Int(7)));
    }

    #[test]
    fn runtime_faults() {
        for (src, msg) in [
            ("let x = 1 / 0", "division by zero"),
            ("let a = [1, 2]\nlet x = a[2]", "out of range"),
            ("send(rank, 1)", "sends to itself"),
            ("send(size, 1)", "not a rank"),
            ("let x = recv(0 - 1)", "not a rank"),
            ("if (1.5) { }", "condition"),
        ] {
            let prog = parse_program(src).unwrap();
            let mut m = RankMachine::new(&prog, 1, 2, &[]);
            let mut budget = 100;
            match m.run(&mut budget) {
                Step::Fault(e) => assert!(e.message.contains(msg), "{src}: {}", e.message),
                other => panic!("{src}: {other:?}"),
            }
        }
    }

    #[test]
    fn expressions() {
        assert_eq!(expr("7 / 2"), Ok(Value::Int(3)));
        assert_eq!(expr("0 - 7 % 3"), Ok(Value::Int(-1)));
        assert_eq!(expr("(0 - 7) % 3"), Ok(Value::Int(2)));
        assert_eq!(expr("1 + 0.5"), Ok(Value::Float(1.5)));
        assert_eq!(expr("rank = 1 and size > 2"), Ok(Value::Int(1)));
        assert_eq!(expr("not (rank = 1) or 1 / 0 = 0").unwrap_err(), "division by zero");
        assert_eq!(expr("rank = 1 or 1 / 0 = 0"), Ok(Value::Int(1)));
        assert_eq!(expr("length(concat([1, 2], [3]))"), Ok(Value::Int(3)));
        assert_eq!(expr("slice([1, 2, 3], 1, 3)"), Ok(Value::Array(vec![Value::Int(2), Value::Int(3)])));
        assert_eq!(expr("max(2, 3.5)"), Ok(Value::Float(3.5)));
        assert_eq!(expr("min(2, 3)"), Ok(Value::Int(2)));
        assert_eq!(expr("max(2.5, 3)"), Ok(Value::Float(3.0)));
        assert_eq!(expr("int(2.9) + abs(0 - 4)"), Ok(Value::Int(6)));
        assert_eq!(expr("sqrt(16)"), Ok(Value::Float(4.0)));
        assert_eq!(expr("[1, 2] = [1, 2]"), Ok(Value::Int(1)));
        assert!(expr("[1, 2.0]").is_err());
        assert!(expr("[1] < [2]").is_err());
    }

    #[test]
    fn budget_limits_execution() {
        let prog = parse_program("for i in 1 .. 1000 { let x = i }").unwrap();
        let mut m = RankMachine::new(&prog, 0, 1, &[]);
        let mut budget = 50;
        assert_eq!(m.run(&mut budget), Step::Ran);
        assert_eq!(budget, 0);
    }
}
