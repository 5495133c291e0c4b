//! Abstract syntax of the SPMD mini-language (`.mpp` files).
//!
//! Every rank runs the same statements; `rank` and `size` are read-only
//! built-ins. Communication statements mirror the protocol primitives.

use crate::protocol::{Datatype, ReduceOp};
use crate::span::Span;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub externs: Vec<Extern>,
    pub body: Vec<Stmt>,
}

/// An input supplied through bindings. Without a datatype the value is unchecked.
#[derive(Debug, Clone, PartialEq)]
pub struct Extern {
    pub name: String,
    pub ty: Option<Datatype>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl From<StmtKind> for Stmt {
    fn from(kind: StmtKind) -> Self {
        Stmt { kind, span: Span::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Let {
        var: String,
        value: Expr,
    },
    Assign {
        var: String,
        value: Expr,
    },
    AssignIndex {
        var: String,
        index: Expr,
        value: Expr,
    },
    If {
        cond: Expr,
        then: Vec<Stmt>,
        otherwise: Vec<Stmt>,
    },
    /// Inclusive range, like protocol `foreach`.
    For {
        var: String,
        lo: Expr,
        hi: Expr,
        body: Vec<Stmt>,
    },
    Send {
        to: Expr,
        value: Expr,
    },
    /// `let var = <call>` for every value-returning communication.
    Comm {
        var: String,
        call: CommCall,
    },
    Apply(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommCall {
    Recv {
        from: Expr,
    },
    /// `value` is evaluated at the root only.
    Broadcast {
        root: Expr,
        value: Expr,
    },
    /// `value` is evaluated at the root only.
    Scatter {
        root: Expr,
        value: Expr,
    },
    Gather {
        root: Expr,
        value: Expr,
    },
    Reduce {
        root: Expr,
        op: ReduceOp,
        value: Expr,
    },
    Allgather {
        value: Expr,
    },
    Allreduce {
        op: ReduceOp,
        value: Expr,
    },
}

impl CommCall {
    pub fn name(&self) -> &'static str {
        match self {
            CommCall::Recv { .. } => "recv",
            CommCall::Broadcast { .. } => "broadcast",
            CommCall::Scatter { .. } => "scatter",
            CommCall::Gather { .. } => "gather",
            CommCall::Reduce { .. } => "reduce",
            CommCall::Allgather { .. } => "allgather",
            CommCall::Allreduce { .. } => "allreduce",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Float(f64),
    Array(Vec<Expr>),
    Var(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn literal(v: &Value) -> Self {
        match v {
            Value::Int(n) => Expr::Int(*n),
            Value::Float(x) => Expr::Float(*x),
            Value::Array(items) => Expr::Array(items.iter().map(Expr::literal).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Length,
    Max,
    Min,
    Abs,
    Float,
    Int,
    Sqrt,
    /// `array(n, v)`: `n` copies of `v`.
    Array,
    /// `slice(a, lo, hi)`: elements `lo..hi`, `hi` exclusive.
    Slice,
    Concat,
}

impl Builtin {
    pub const ALL: [Builtin; 10] = [
        Builtin::Length,
        Builtin::Max,
        Builtin::Min,
        Builtin::Abs,
        Builtin::Float,
        Builtin::Int,
        Builtin::Sqrt,
        Builtin::Array,
        Builtin::Slice,
        Builtin::Concat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Length => "length",
            Builtin::Max => "max",
            Builtin::Min => "min",
            Builtin::Abs => "abs",
            Builtin::Float => "float",
            Builtin::Int => "int",
            Builtin::Sqrt => "sqrt",
            Builtin::Array => "array",
            Builtin::Slice => "slice",
            Builtin::Concat => "concat",
        }
    }

    pub fn from_name(s: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Length | Builtin::Abs | Builtin::Float | Builtin::Int | Builtin::Sqrt => 1,
            Builtin::Max | Builtin::Min | Builtin::Array | Builtin::Concat => 2,
            Builtin::Slice => 3,
        }
    }
}

impl Program {
    /// Visits every statement, pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        fn go<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
            for s in stmts {
                f(s);
                match &s.kind {
                    StmtKind::If { then, otherwise, .. } => {
                        go(then, f);
                        go(otherwise, f);
                    }
                    StmtKind::For { body, .. } => go(body, f),
                    _ => {}
                }
            }
        }
        go(&self.body, f)
    }
}
