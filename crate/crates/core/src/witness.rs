//! Concrete inhabitants of datatypes.
//!
//! Integers and floats are searched in `[-2^16, 2^16]`; arrays are built
//! from the element witness with lengths in `0..=1024` unless a
//! `length(x) = n` conjunct fixes the length.

use thiserror::Error;

use crate::eval::{check_value, eval_int, EvalError};
use crate::protocol::{CmpOp, Datatype, IndexTerm, Proposition};
use crate::value::{Env, Value};

pub const SCAN_BOUND: i64 = 1 << 16;
pub const MAX_ARRAY_LEN: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("no value of type `{0}` found within the search bounds")]
    Uninhabited(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Order {
    /// 0, 1, 2, ..., then -1, -2, ...
    Canonical,
    Ascending,
    Descending,
}

fn scalar_candidates(order: Order, (lo, hi): (i64, i64)) -> Box<dyn Iterator<Item = i64>> {
    let (lo, hi) = (lo.max(-SCAN_BOUND), hi.min(SCAN_BOUND));
    match order {
        Order::Canonical => Box::new((lo.max(0)..=hi).chain((lo..=hi.min(-1)).rev())),
        Order::Ascending => Box::new(lo..=hi),
        Order::Descending => Box::new((lo..=hi).rev()),
    }
}

/// Integer interval implied by comparisons of the refined variable against
/// terms that do not mention it. Only narrows the search; every candidate is
/// still checked against the full type.
fn scalar_bounds(d: &Datatype, env: &Env) -> (i64, i64) {
    let mut b = (i64::MIN, i64::MAX);
    let mut d = d;
    while let Datatype::Refinement { var, base, prop } = d {
        conjuncts(prop, &mut |c| {
            let Proposition::Cmp(op, l, r) = c else { return };
            let (op, bound) = match (l, r) {
                (IndexTerm::Var(v), t) if v == var && !t.mentions(var) => (*op, t),
                (t, IndexTerm::Var(v)) if v == var && !t.mentions(var) => (op.flip(), t),
                _ => return,
            };
            let Ok(Value::Int(n)) = crate::eval::eval_index(bound, env) else { return };
            match op {
                CmpOp::Ge => b.0 = b.0.max(n),
                CmpOp::Gt => b.0 = b.0.max(n.saturating_add(1)),
                CmpOp::Le => b.1 = b.1.min(n),
                CmpOp::Lt => b.1 = b.1.min(n.saturating_sub(1)),
                CmpOp::Eq => b = (b.0.max(n), b.1.min(n)),
                CmpOp::Ne => {}
            }
        });
        d = base;
    }
    b
}

/// The array length forced by `d`, if any: an explicit length term or a
/// `length(x) = n` conjunct in one of the refinements.
fn forced_length(d: &Datatype, env: &Env) -> Option<i64> {
    match d {
        Datatype::Array(_, Some(len)) => eval_int(len, env).ok(),
        Datatype::Refinement { var, base, prop } => {
            let mut found = None;
            conjuncts(prop, &mut |c| {
                if found.is_some() {
                    return;
                }
                let Proposition::Cmp(CmpOp::Eq, a, b) = c else { return };
                for (l, r) in [(a, b), (b, a)] {
                    if matches!(l, IndexTerm::Length(inner) if **inner == IndexTerm::Var(var.clone()))
                        && !r.mentions(var)
                    {
                        found = eval_int(r, env).ok();
                        return;
                    }
                }
            });
            found.or_else(|| forced_length(base, env))
        }
        _ => None,
    }
}

fn conjuncts<'a>(p: &'a Proposition, f: &mut dyn FnMut(&'a Proposition)) {
    match p {
        Proposition::And(a, b) => {
            conjuncts(a, f);
            conjuncts(b, f);
        }
        other => f(other),
    }
}

fn candidates(d: &Datatype, env: &Env, order: Order) -> Result<Box<dyn Iterator<Item = Value>>, WitnessError> {
    Ok(match d.erase() {
        Datatype::Integer => Box::new(scalar_candidates(order, scalar_bounds(d, env)).map(Value::Int)),
        Datatype::Float => Box::new(scalar_candidates(order, scalar_bounds(d, env)).map(|n| Value::Float(n as f64))),
        Datatype::Array(elem, _) => {
            let e = canonical(elem, env)?;
            let lengths: Box<dyn Iterator<Item = usize>> = match forced_length(d, env) {
                Some(n) if n >= 0 => Box::new(std::iter::once(n as usize)),
                Some(_) => Box::new(std::iter::empty()),
                None if order == Order::Descending => Box::new((0..=MAX_ARRAY_LEN).rev()),
                None => Box::new(0..=MAX_ARRAY_LEN),
            };
            Box::new(lengths.map(move |n| Value::Array(vec![e.clone(); n])))
        }
        Datatype::Refinement { .. } => unreachable!("erase strips refinements"),
    })
}

fn search(
    d: &Datatype,
    env: &Env,
    order: Order,
    accept: &mut dyn FnMut(&Value) -> Result<bool, EvalError>,
) -> Result<Option<Value>, WitnessError> {
    for v in candidates(d, env, order)? {
        if check_value(&v, d, env)? && accept(&v)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

fn uninhabited(d: &Datatype) -> WitnessError {
    WitnessError::Uninhabited(d.to_string())
}

/// First value of `d` in canonical search order (0 first, then upwards, then negatives).
pub fn canonical(d: &Datatype, env: &Env) -> Result<Value, WitnessError> {
    canonical_where(d, env, |_| Ok(true))
}

/// First canonical value of `d` that also satisfies `accept`.
pub fn canonical_where(
    d: &Datatype,
    env: &Env,
    mut accept: impl FnMut(&Value) -> Result<bool, EvalError>,
) -> Result<Value, WitnessError> {
    search(d, env, Order::Canonical, &mut accept)?.ok_or_else(|| uninhabited(d))
}

/// Canonical array of `d` whose length splits evenly into `parts` chunks.
pub fn canonical_divisible(d: &Datatype, env: &Env, parts: i64) -> Result<Value, WitnessError> {
    canonical_where(d, env, |v| Ok(v.as_array().is_some_and(|items| parts > 0 && items.len() as i64 % parts == 0)))
}

/// Small set of values probing the edges of `d`, used when a bound variable
/// has to be checked without knowing its runtime value.
///
/// Unrefined integers give `{0, 1, 2}`. Refined scalars give the smallest
/// satisfying value, the next satisfying value above it, and the largest
/// satisfying value. Arrays give the first two satisfying lengths.
pub fn boundary(d: &Datatype, env: &Env) -> Result<Vec<Value>, WitnessError> {
    let mut out: Vec<Value> = Vec::new();
    let push = |v: Value, out: &mut Vec<Value>| {
        if !out.iter().any(|w| w.bit_eq(&v)) {
            out.push(v);
        }
    };
    match d {
        Datatype::Integer => return Ok((0..3).map(Value::Int).collect()),
        Datatype::Float => return Ok(vec![Value::Float(0.0), Value::Float(1.0)]),
        _ => {}
    }
    if d.is_array() {
        let mut found = 0;
        for v in candidates(d, env, Order::Ascending)? {
            if check_value(&v, d, env)? {
                push(v, &mut out);
                found += 1;
                if found == 2 {
                    break;
                }
            }
        }
    } else {
        let mut asc = candidates(d, env, Order::Ascending)?;
        let mut found = 0;
        for v in asc.by_ref() {
            if check_value(&v, d, env)? {
                push(v, &mut out);
                found += 1;
                if found == 2 {
                    break;
                }
            }
        }
        if found > 0 {
            if let Some(v) = search(d, env, Order::Descending, &mut |_| Ok(true))? {
                push(v, &mut out);
            }
        }
    }
    if out.is_empty() {
        return Err(uninhabited(d));
    }
    Ok(out)
}
