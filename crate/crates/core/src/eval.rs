//! Evaluation of index terms and propositions, and datatype membership.

use std::cmp::Ordering;

use thiserror::Error;

use crate::protocol::{CmpOp, Datatype, IndexOp, IndexTerm, Proposition, ReduceOp};
use crate::value::{Env, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("index {index} out of range for array of length {len}")]
    IndexOutOfRange { index: i64, len: usize },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("integer overflow")]
    Overflow,
}

pub fn eval_index(t: &IndexTerm, env: &Env) -> Result<Value, EvalError> {
    match t {
        IndexTerm::Var(x) => env.get(x).cloned().ok_or_else(|| EvalError::UnboundVariable(x.clone())),
        IndexTerm::Int(n) => Ok(Value::Int(*n)),
        IndexTerm::Float(x) => Ok(Value::Float(*x)),
        IndexTerm::Array(items) => {
            Ok(Value::Array(items.iter().map(|i| eval_index(i, env)).collect::<Result<_, _>>()?))
        }
        IndexTerm::Bin(op, a, b) => {
            let a = eval_int(a, env)?;
            let b = eval_int(b, env)?;
            int_op(*op, a, b).map(Value::Int)
        }
        IndexTerm::Length(a) => match eval_index(a, env)? {
            Value::Array(items) => Ok(Value::Int(items.len() as i64)),
            other => Err(EvalError::TypeMismatch(format!("length of {}", other.kind_name()))),
        },
        IndexTerm::Index(a, i) => {
            let array = eval_index(a, env)?;
            let i = eval_int(i, env)?;
            match array {
                Value::Array(mut items) => {
                    let len = items.len();
                    if i < 0 || i as usize >= len {
                        return Err(EvalError::IndexOutOfRange { index: i, len });
                    }
                    Ok(items.swap_remove(i as usize))
                }
                other => Err(EvalError::TypeMismatch(format!("indexing into {}", other.kind_name()))),
            }
        }
    }
}

/// Evaluates a term that must denote an integer.
pub fn eval_int(t: &IndexTerm, env: &Env) -> Result<i64, EvalError> {
    match eval_index(t, env)? {
        Value::Int(n) => Ok(n),
        other => Err(EvalError::TypeMismatch(format!("expected integer, found {}", other.kind_name()))),
    }
}

pub(crate) fn int_op(op: IndexOp, a: i64, b: i64) -> Result<i64, EvalError> {
    match op {
        IndexOp::Add => a.checked_add(b).ok_or(EvalError::Overflow),
        IndexOp::Sub => a.checked_sub(b).ok_or(EvalError::Overflow),
        IndexOp::Mul => a.checked_mul(b).ok_or(EvalError::Overflow),
        IndexOp::Div if b == 0 => Err(EvalError::DivisionByZero),
        IndexOp::Mod if b == 0 => Err(EvalError::DivisionByZero),
        IndexOp::Div => a.checked_div_euclid(b).ok_or(EvalError::Overflow),
        IndexOp::Mod => a.checked_rem_euclid(b).ok_or(EvalError::Overflow),
        IndexOp::Max => Ok(a.max(b)),
        IndexOp::Min => Ok(a.min(b)),
    }
}

pub fn eval_prop(p: &Proposition, env: &Env) -> Result<bool, EvalError> {
    match p {
        Proposition::True => Ok(true),
        Proposition::Cmp(op, a, b) => {
            let a = eval_index(a, env)?;
            let b = eval_index(b, env)?;
            compare(*op, &a, &b)
        }
        Proposition::And(a, b) => Ok(eval_prop(a, env)? && eval_prop(b, env)?),
        Proposition::Or(a, b) => Ok(eval_prop(a, env)? || eval_prop(b, env)?),
        Proposition::Not(a) => Ok(!eval_prop(a, env)?),
    }
}

fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<bool, EvalError> {
    let ord = match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Int(x), Value::Float(y)) => (*x as f64).partial_cmp(y),
        (Value::Float(x), Value::Int(y)) => x.partial_cmp(&(*y as f64)),
        (Value::Float(x), Value::Float(y)) => x.partial_cmp(y),
        (Value::Array(_), Value::Array(_)) => {
            return match op {
                CmpOp::Eq => Ok(a == b),
                CmpOp::Ne => Ok(a != b),
                _ => Err(EvalError::TypeMismatch("ordering comparison of arrays".into())),
            };
        }
        _ => return Err(EvalError::TypeMismatch(format!("comparing {} with {}", a.kind_name(), b.kind_name()))),
    };
    // NaN compares false under every operator except `!=`
    let Some(ord) = ord else { return Ok(op == CmpOp::Ne) };
    Ok(match op {
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ge => ord != Ordering::Less,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Ne => ord != Ordering::Equal,
    })
}

/// Datatype membership. `Ok(false)` is a genuine non-member; `Err` means the
/// refinement could not be evaluated.
pub fn check_value(v: &Value, d: &Datatype, env: &Env) -> Result<bool, EvalError> {
    match (d, v) {
        (Datatype::Integer, Value::Int(_)) => Ok(true),
        (Datatype::Float, Value::Float(_)) => Ok(true),
        (Datatype::Array(elem, len), Value::Array(items)) => {
            if let Some(len) = len {
                if eval_int(len, env)? != items.len() as i64 {
                    return Ok(false);
                }
            }
            for item in items {
                if !check_value(item, elem, env)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        (Datatype::Refinement { var, base, prop }, _) => {
            if !check_value(v, base, env)? {
                return Ok(false);
            }
            eval_prop(prop, &env.with(var.clone(), v.clone()))
        }
        _ => Ok(false),
    }
}

/// Folds contributions left to right in the given (rank) order. Arrays are
/// combined elementwise and must agree in length.
pub fn reduce_values(op: ReduceOp, values: &[Value]) -> Result<Value, EvalError> {
    let (first, rest) =
        values.split_first().ok_or_else(|| EvalError::TypeMismatch("reduction over no contributions".into()))?;
    rest.iter().try_fold(first.clone(), |acc, v| combine(op, &acc, v))
}

fn combine(op: ReduceOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(Value::Int(match op {
            ReduceOp::Sum => x.checked_add(*y).ok_or(EvalError::Overflow)?,
            ReduceOp::Max => *x.max(y),
            ReduceOp::Min => *x.min(y),
        })),
        (Value::Float(x), Value::Float(y)) => Ok(Value::Float(match op {
            ReduceOp::Sum => x + y,
            ReduceOp::Max => {
                if y > x {
                    *y
                } else {
                    *x
                }
            }
            ReduceOp::Min => {
                if y < x {
                    *y
                } else {
                    *x
                }
            }
        })),
        (Value::Array(xs), Value::Array(ys)) if xs.len() == ys.len() => {
            Ok(Value::Array(xs.iter().zip(ys).map(|(x, y)| combine(op, x, y)).collect::<Result<_, _>>()?))
        }
        (Value::Array(xs), Value::Array(ys)) => {
            Err(EvalError::TypeMismatch(format!("reducing arrays of lengths {} and {}", xs.len(), ys.len())))
        }
        _ => Err(EvalError::TypeMismatch(format!("reducing {} with {}", a.kind_name(), b.kind_name()))),
    }
}
