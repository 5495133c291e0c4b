//! Abstract syntax of the protocol language: index terms, propositions,
//! datatypes and protocol terms, with substitution and normalization.
//!
//! Variables introduced by `val`, `broadcast`, `allgather` and `allreduce`
//! scope over the remaining items of the enclosing sequence; a `foreach`
//! variable scopes over its body. `size` is bound everywhere.

use std::collections::BTreeSet;
use std::fmt;

use crate::span::Span;
use crate::value::Value;

/// Binary operators on index terms. `Div` and `Mod` are Euclidean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Max,
    Min,
}

impl IndexOp {
    pub fn symbol(self) -> &'static str {
        match self {
            IndexOp::Add => "+",
            IndexOp::Sub => "-",
            IndexOp::Mul => "*",
            IndexOp::Div => "/",
            IndexOp::Mod => "%",
            IndexOp::Max => "max",
            IndexOp::Min => "min",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexTerm {
    Var(String),
    Int(i64),
    /// Only meaningful under comparisons.
    Float(f64),
    /// Array literal; produced when an array value is substituted into a term.
    Array(Vec<IndexTerm>),
    Bin(IndexOp, Box<IndexTerm>, Box<IndexTerm>),
    Length(Box<IndexTerm>),
    Index(Box<IndexTerm>, Box<IndexTerm>),
}

impl IndexTerm {
    pub fn var(name: impl Into<String>) -> Self {
        IndexTerm::Var(name.into())
    }

    pub fn int(n: i64) -> Self {
        IndexTerm::Int(n)
    }

    pub fn bin(op: IndexOp, lhs: IndexTerm, rhs: IndexTerm) -> Self {
        IndexTerm::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(lhs: IndexTerm, rhs: IndexTerm) -> Self {
        Self::bin(IndexOp::Add, lhs, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(lhs: IndexTerm, rhs: IndexTerm) -> Self {
        Self::bin(IndexOp::Sub, lhs, rhs)
    }

    pub fn length(t: IndexTerm) -> Self {
        IndexTerm::Length(Box::new(t))
    }

    pub fn index(array: IndexTerm, at: IndexTerm) -> Self {
        IndexTerm::Index(Box::new(array), Box::new(at))
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            IndexTerm::Var(x) => {
                out.insert(x.clone());
            }
            IndexTerm::Int(_) | IndexTerm::Float(_) => {}
            IndexTerm::Array(items) => items.iter().for_each(|t| t.free_vars_into(out)),
            IndexTerm::Bin(_, a, b) | IndexTerm::Index(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            IndexTerm::Length(a) => a.free_vars_into(out),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            IndexTerm::Var(x) => x == var,
            IndexTerm::Int(_) | IndexTerm::Float(_) => false,
            IndexTerm::Array(items) => items.iter().any(|t| t.mentions(var)),
            IndexTerm::Bin(_, a, b) | IndexTerm::Index(a, b) => a.mentions(var) || b.mentions(var),
            IndexTerm::Length(a) => a.mentions(var),
        }
    }

    /// Replaces every occurrence of `var` with the literal embedding of `v`.
    pub fn subst(&self, var: &str, v: &Value) -> IndexTerm {
        match self {
            IndexTerm::Var(x) if x == var => v.to_term(),
            IndexTerm::Var(_) | IndexTerm::Int(_) | IndexTerm::Float(_) => self.clone(),
            IndexTerm::Array(items) => IndexTerm::Array(items.iter().map(|t| t.subst(var, v)).collect()),
            IndexTerm::Bin(op, a, b) => IndexTerm::bin(*op, a.subst(var, v), b.subst(var, v)),
            IndexTerm::Length(a) => IndexTerm::length(a.subst(var, v)),
            IndexTerm::Index(a, b) => IndexTerm::index(a.subst(var, v), b.subst(var, v)),
        }
    }

    fn rename(&self, from: &str, to: &str) -> IndexTerm {
        match self {
            IndexTerm::Var(x) if x == from => IndexTerm::Var(to.to_string()),
            IndexTerm::Var(_) | IndexTerm::Int(_) | IndexTerm::Float(_) => self.clone(),
            IndexTerm::Array(items) => IndexTerm::Array(items.iter().map(|t| t.rename(from, to)).collect()),
            IndexTerm::Bin(op, a, b) => IndexTerm::bin(*op, a.rename(from, to), b.rename(from, to)),
            IndexTerm::Length(a) => IndexTerm::length(a.rename(from, to)),
            IndexTerm::Index(a, b) => IndexTerm::index(a.rename(from, to), b.rename(from, to)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl CmpOp {
    /// The operator with its operands swapped: `a < b` iff `b > a`.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Proposition {
    True,
    Cmp(CmpOp, IndexTerm, IndexTerm),
    And(Box<Proposition>, Box<Proposition>),
    Or(Box<Proposition>, Box<Proposition>),
    Not(Box<Proposition>),
}

impl Proposition {
    pub fn cmp(op: CmpOp, lhs: IndexTerm, rhs: IndexTerm) -> Self {
        Proposition::Cmp(op, lhs, rhs)
    }

    pub fn and(lhs: Proposition, rhs: Proposition) -> Self {
        Proposition::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Proposition, rhs: Proposition) -> Self {
        Proposition::Or(Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Proposition) -> Self {
        Proposition::Not(Box::new(p))
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Proposition::True => {}
            Proposition::Cmp(_, a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            Proposition::And(a, b) | Proposition::Or(a, b) => {
                a.free_vars_into(out);
                b.free_vars_into(out);
            }
            Proposition::Not(a) => a.free_vars_into(out),
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            Proposition::True => false,
            Proposition::Cmp(_, a, b) => a.mentions(var) || b.mentions(var),
            Proposition::And(a, b) | Proposition::Or(a, b) => a.mentions(var) || b.mentions(var),
            Proposition::Not(a) => a.mentions(var),
        }
    }

    pub fn subst(&self, var: &str, v: &Value) -> Proposition {
        self.map_terms(&|t| t.subst(var, v))
    }

    fn rename(&self, from: &str, to: &str) -> Proposition {
        self.map_terms(&|t| t.rename(from, to))
    }

    fn map_terms(&self, f: &dyn Fn(&IndexTerm) -> IndexTerm) -> Proposition {
        match self {
            Proposition::True => Proposition::True,
            Proposition::Cmp(op, a, b) => Proposition::Cmp(*op, f(a), f(b)),
            Proposition::And(a, b) => Proposition::and(a.map_terms(f), b.map_terms(f)),
            Proposition::Or(a, b) => Proposition::or(a.map_terms(f), b.map_terms(f)),
            Proposition::Not(a) => Proposition::not(a.map_terms(f)),
        }
    }

    /// Visits every comparison leaf.
    pub fn for_each_cmp(&self, f: &mut dyn FnMut(CmpOp, &IndexTerm, &IndexTerm)) {
        match self {
            Proposition::True => {}
            Proposition::Cmp(op, a, b) => f(*op, a, b),
            Proposition::And(a, b) | Proposition::Or(a, b) => {
                a.for_each_cmp(f);
                b.for_each_cmp(f);
            }
            Proposition::Not(a) => a.for_each_cmp(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Datatype {
    Integer,
    Float,
    Array(Box<Datatype>, Option<IndexTerm>),
    Refinement { var: String, base: Box<Datatype>, prop: Proposition },
}

impl Datatype {
    pub fn array(elem: Datatype) -> Self {
        Datatype::Array(Box::new(elem), None)
    }

    pub fn refinement(var: impl Into<String>, base: Datatype, prop: Proposition) -> Self {
        Datatype::Refinement { var: var.into(), base: Box::new(base), prop }
    }

    /// `{x: integer | x >= 0}`
    pub fn natural() -> Self {
        Self::int_at_least(0)
    }

    /// `{x: integer | x >= 1}`
    pub fn positive() -> Self {
        Self::int_at_least(1)
    }

    fn int_at_least(n: i64) -> Self {
        Datatype::refinement(
            "x",
            Datatype::Integer,
            Proposition::cmp(CmpOp::Ge, IndexTerm::var("x"), IndexTerm::int(n)),
        )
    }

    /// `elem[len]`, i.e. `{x: elem[] | length(x) = len}` with a binder fresh for `len`.
    pub fn sized_array(elem: Datatype, len: IndexTerm) -> Self {
        let var = sized_array_binder(&len);
        let prop = Proposition::cmp(CmpOp::Eq, IndexTerm::length(IndexTerm::var(&var)), len);
        Datatype::refinement(var, Datatype::array(elem), prop)
    }

    /// The datatype with all refinements stripped.
    pub fn erase(&self) -> &Datatype {
        match self {
            Datatype::Refinement { base, .. } => base.erase(),
            _ => self,
        }
    }

    pub fn is_array(&self) -> bool {
        matches!(self.erase(), Datatype::Array(..))
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Datatype::Integer | Datatype::Float => {}
            Datatype::Array(elem, len) => {
                elem.free_vars_into(out);
                if let Some(len) = len {
                    len.free_vars_into(out);
                }
            }
            Datatype::Refinement { var, base, prop } => {
                base.free_vars_into(out);
                let mut inner = BTreeSet::new();
                prop.free_vars_into(&mut inner);
                inner.remove(var);
                out.extend(inner);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    /// Substitution; the refinement binder shadows `var` inside its proposition.
    pub fn subst(&self, var: &str, v: &Value) -> Datatype {
        match self {
            Datatype::Integer | Datatype::Float => self.clone(),
            Datatype::Array(elem, len) => {
                Datatype::Array(Box::new(elem.subst(var, v)), len.as_ref().map(|l| l.subst(var, v)))
            }
            Datatype::Refinement { var: x, base, prop } => Datatype::Refinement {
                var: x.clone(),
                base: Box::new(base.subst(var, v)),
                prop: if x == var { prop.clone() } else { prop.subst(var, v) },
            },
        }
    }

    /// Structural equality up to renaming of refinement binders.
    pub fn alpha_eq(&self, other: &Datatype) -> bool {
        match (self, other) {
            (Datatype::Integer, Datatype::Integer) | (Datatype::Float, Datatype::Float) => true,
            (Datatype::Array(a, la), Datatype::Array(b, lb)) => a.alpha_eq(b) && la == lb,
            (
                Datatype::Refinement { var: x, base: ba, prop: pa },
                Datatype::Refinement { var: y, base: bb, prop: pb },
            ) => {
                if !ba.alpha_eq(bb) {
                    return false;
                }
                if x == y {
                    return pa == pb;
                }
                // rename both binders to a name free in neither proposition
                let mut used = BTreeSet::new();
                pa.free_vars_into(&mut used);
                pb.free_vars_into(&mut used);
                let fresh = fresh_name("_r", &used);
                pa.rename(x, &fresh) == pb.rename(y, &fresh)
            }
            _ => false,
        }
    }
}

/// Binder used when desugaring `D[len]`: `x`, or `x1`, `x2`, ... if `x` occurs in `len`.
pub fn sized_array_binder(len: &IndexTerm) -> String {
    fresh_name("x", &len.free_vars())
}

fn fresh_name(base: &str, used: &BTreeSet<String>) -> String {
    if !used.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}{i}")).find(|n| !used.contains(n)).expect("unbounded")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReduceOp {
    Max,
    Min,
    Sum,
}

impl ReduceOp {
    pub fn name(self) -> &'static str {
        match self {
            ReduceOp::Max => "max",
            ReduceOp::Min => "min",
            ReduceOp::Sum => "sum",
        }
    }

    pub fn from_name(s: &str) -> Option<ReduceOp> {
        match s {
            "max" => Some(ReduceOp::Max),
            "min" => Some(ReduceOp::Min),
            "sum" => Some(ReduceOp::Sum),
            _ => None,
        }
    }
}

impl fmt::Display for ReduceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTerm {
    pub kind: TermKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    Skip,
    Message { from: IndexTerm, to: IndexTerm, payload: Datatype },
    Broadcast { root: IndexTerm, var: String, payload: Datatype },
    Scatter { root: IndexTerm, payload: Datatype },
    Gather { root: IndexTerm, payload: Datatype },
    Reduce { root: IndexTerm, op: ReduceOp, payload: Datatype },
    Allgather { var: String, payload: Datatype },
    Allreduce { op: ReduceOp, var: String, payload: Datatype },
    Seq(Vec<ProtocolTerm>),
    Foreach { var: String, lo: IndexTerm, hi: IndexTerm, body: Box<ProtocolTerm> },
    Choice { cond: Proposition, then: Box<ProtocolTerm>, otherwise: Box<ProtocolTerm> },
    Val { var: String, payload: Datatype },
}

impl From<TermKind> for ProtocolTerm {
    fn from(kind: TermKind) -> Self {
        ProtocolTerm { kind, span: Span::default() }
    }
}

impl ProtocolTerm {
    pub fn new(kind: TermKind, span: Span) -> Self {
        ProtocolTerm { kind, span }
    }

    pub fn skip() -> Self {
        TermKind::Skip.into()
    }

    pub fn message(from: IndexTerm, to: IndexTerm, payload: Datatype) -> Self {
        TermKind::Message { from, to, payload }.into()
    }

    pub fn seq(items: Vec<ProtocolTerm>) -> Self {
        TermKind::Seq(items).into()
    }

    pub fn foreach(var: impl Into<String>, lo: IndexTerm, hi: IndexTerm, body: ProtocolTerm) -> Self {
        TermKind::Foreach { var: var.into(), lo, hi, body: Box::new(body) }.into()
    }

    pub fn choice(cond: Proposition, then: ProtocolTerm, otherwise: ProtocolTerm) -> Self {
        TermKind::Choice { cond, then: Box::new(then), otherwise: Box::new(otherwise) }.into()
    }

    pub fn val(var: impl Into<String>, payload: Datatype) -> Self {
        TermKind::Val { var: var.into(), payload }.into()
    }

    pub fn broadcast(root: IndexTerm, var: impl Into<String>, payload: Datatype) -> Self {
        TermKind::Broadcast { root, var: var.into(), payload }.into()
    }

    pub fn is_skip(&self) -> bool {
        matches!(self.kind, TermKind::Skip)
    }

    /// The variable this item binds over the rest of its sequence, if any.
    pub fn binder(&self) -> Option<&str> {
        match &self.kind {
            TermKind::Broadcast { var, .. }
            | TermKind::Allgather { var, .. }
            | TermKind::Allreduce { var, .. }
            | TermKind::Val { var, .. } => Some(var),
            _ => None,
        }
    }

    /// Capture-free substitution of a closed value for `var`.
    pub fn subst(&self, var: &str, v: &Value) -> ProtocolTerm {
        let kind = match &self.kind {
            TermKind::Skip => TermKind::Skip,
            TermKind::Message { from, to, payload } => {
                TermKind::Message { from: from.subst(var, v), to: to.subst(var, v), payload: payload.subst(var, v) }
            }
            TermKind::Broadcast { root, var: x, payload } => TermKind::Broadcast {
                root: root.subst(var, v),
                var: x.clone(),
                payload: if x == var { payload.clone() } else { payload.subst(var, v) },
            },
            TermKind::Scatter { root, payload } => {
                TermKind::Scatter { root: root.subst(var, v), payload: payload.subst(var, v) }
            }
            TermKind::Gather { root, payload } => {
                TermKind::Gather { root: root.subst(var, v), payload: payload.subst(var, v) }
            }
            TermKind::Reduce { root, op, payload } => {
                TermKind::Reduce { root: root.subst(var, v), op: *op, payload: payload.subst(var, v) }
            }
            TermKind::Allgather { var: x, payload } => TermKind::Allgather {
                var: x.clone(),
                payload: if x == var { payload.clone() } else { payload.subst(var, v) },
            },
            TermKind::Allreduce { op, var: x, payload } => TermKind::Allreduce {
                op: *op,
                var: x.clone(),
                payload: if x == var { payload.clone() } else { payload.subst(var, v) },
            },
            TermKind::Val { var: x, payload } => TermKind::Val {
                var: x.clone(),
                payload: if x == var { payload.clone() } else { payload.subst(var, v) },
            },
            TermKind::Seq(items) => {
                let mut out = Vec::with_capacity(items.len());
                let mut shadowed = false;
                for item in items {
                    if shadowed {
                        out.push(item.clone());
                    } else {
                        out.push(item.subst(var, v));
                        shadowed = item.binder() == Some(var);
                    }
                }
                TermKind::Seq(out)
            }
            TermKind::Foreach { var: x, lo, hi, body } => TermKind::Foreach {
                var: x.clone(),
                lo: lo.subst(var, v),
                hi: hi.subst(var, v),
                body: Box::new(if x == var { (**body).clone() } else { body.subst(var, v) }),
            },
            TermKind::Choice { cond, then, otherwise } => TermKind::Choice {
                cond: cond.subst(var, v),
                then: Box::new(then.subst(var, v)),
                otherwise: Box::new(otherwise.subst(var, v)),
            },
        };
        ProtocolTerm { kind, span: self.span }
    }

    /// Flattens nested sequences, drops `skip` items and collapses empty and
    /// singleton sequences.
    pub fn normalize(&self) -> ProtocolTerm {
        match &self.kind {
            TermKind::Seq(items) => {
                let mut flat = Vec::with_capacity(items.len());
                for item in items {
                    push_flat(item.normalize(), &mut flat);
                }
                match flat.len() {
                    0 => ProtocolTerm::new(TermKind::Skip, self.span),
                    1 => flat.pop().expect("one item"),
                    _ => ProtocolTerm::new(TermKind::Seq(flat), self.span),
                }
            }
            TermKind::Foreach { var, lo, hi, body } => ProtocolTerm::new(
                TermKind::Foreach {
                    var: var.clone(),
                    lo: lo.clone(),
                    hi: hi.clone(),
                    body: Box::new(body.normalize()),
                },
                self.span,
            ),
            TermKind::Choice { cond, then, otherwise } => ProtocolTerm::new(
                TermKind::Choice {
                    cond: cond.clone(),
                    then: Box::new(then.normalize()),
                    otherwise: Box::new(otherwise.normalize()),
                },
                self.span,
            ),
            _ => self.clone(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut out);
        out
    }

    pub fn free_vars_into(&self, out: &mut BTreeSet<String>) {
        match &self.kind {
            TermKind::Skip => {}
            TermKind::Message { from, to, payload } => {
                from.free_vars_into(out);
                to.free_vars_into(out);
                payload.free_vars_into(out);
            }
            TermKind::Scatter { root, payload }
            | TermKind::Gather { root, payload }
            | TermKind::Reduce { root, payload, .. } => {
                root.free_vars_into(out);
                payload.free_vars_into(out);
            }
            TermKind::Broadcast { root, var, payload } => {
                root.free_vars_into(out);
                let mut inner = payload.free_vars();
                inner.remove(var);
                out.extend(inner);
            }
            TermKind::Allgather { var, payload }
            | TermKind::Allreduce { var, payload, .. }
            | TermKind::Val { var, payload } => {
                let mut inner = payload.free_vars();
                inner.remove(var);
                out.extend(inner);
            }
            TermKind::Seq(items) => {
                let mut bound: Vec<&str> = Vec::new();
                for item in items {
                    let mut inner = item.free_vars();
                    inner.retain(|x| !bound.contains(&x.as_str()));
                    out.extend(inner);
                    if let Some(b) = item.binder() {
                        bound.push(b);
                    }
                }
            }
            TermKind::Foreach { var, lo, hi, body } => {
                lo.free_vars_into(out);
                hi.free_vars_into(out);
                let mut inner = body.free_vars();
                inner.remove(var);
                out.extend(inner);
            }
            TermKind::Choice { cond, then, otherwise } => {
                cond.free_vars_into(out);
                then.free_vars_into(out);
                otherwise.free_vars_into(out);
            }
        }
    }

    /// Visits this term and every nested term, pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a ProtocolTerm)) {
        f(self);
        match &self.kind {
            TermKind::Seq(items) => items.iter().for_each(|t| t.walk(f)),
            TermKind::Foreach { body, .. } => body.walk(f),
            TermKind::Choice { then, otherwise, .. } => {
                then.walk(f);
                otherwise.walk(f);
            }
            _ => {}
        }
    }
}

fn push_flat(t: ProtocolTerm, out: &mut Vec<ProtocolTerm>) {
    match t.kind {
        TermKind::Skip => {}
        TermKind::Seq(items) => out.extend(items),
        _ => out.push(t),
    }
}

/// A named protocol with its size precondition.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalProtocol {
    pub name: String,
    pub size_prop: Proposition,
    pub body: ProtocolTerm,
    pub span: Span,
}

impl GlobalProtocol {
    pub fn new(name: impl Into<String>, size_prop: Proposition, body: ProtocolTerm) -> Self {
        GlobalProtocol { name: name.into(), size_prop, body, span: Span::default() }
    }

    pub fn normalize(&self) -> GlobalProtocol {
        GlobalProtocol { body: self.body.normalize(), ..self.clone() }
    }
}
