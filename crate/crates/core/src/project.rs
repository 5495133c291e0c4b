//! Per-rank projection of a global protocol and the small-step relation
//! used to consume it.
//!
//! A [`LocalState`] holds the residual protocol from one rank's point of
//! view. [`project_head`] finds the next action that involves the rank,
//! skipping messages between other ranks, deciding collective choices and
//! expanding `foreach` loops for the concrete environment. [`advance`]
//! consumes that action, checking the supplied value against the payload and
//! binding it when the action introduces a variable.

use std::fmt;

use serde_json::json;
use thiserror::Error;

use crate::eval::{check_value, eval_int, eval_prop, reduce_values, EvalError};
use crate::protocol::{Datatype, GlobalProtocol, IndexTerm, ProtocolTerm, ReduceOp, TermKind};
use crate::span::Span;
use crate::value::{Env, Value};
use crate::witness::{self, WitnessError};

/// Longest `foreach` range that is expanded.
pub const MAX_FOREACH_ITERATIONS: i64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Then,
    Else,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Then => "then",
            Branch::Else => "else",
        }
    }
}

/// The next thing a rank must do according to the protocol. Ranks are
/// concrete integers in `0..size`.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalAction {
    Send { to: i64, payload: Datatype },
    Recv { from: i64, payload: Datatype },
    Broadcast { root: i64, var: String, payload: Datatype },
    Scatter { root: i64, payload: Datatype },
    Gather { root: i64, payload: Datatype },
    Reduce { root: i64, op: ReduceOp, payload: Datatype },
    Allgather { var: String, payload: Datatype },
    Allreduce { op: ReduceOp, var: String, payload: Datatype },
    Apply { var: String, payload: Datatype },
    EnterChoice { taken: Branch },
}

/// A communication step as performed by a program, without type information.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Offer {
    Send { to: i64 },
    Recv { from: i64 },
    Broadcast { root: i64 },
    Scatter { root: i64 },
    Gather { root: i64 },
    Reduce { root: i64, op: ReduceOp },
    Allgather,
    Allreduce { op: ReduceOp },
    Apply,
}

impl Offer {
    pub fn is_collective(self) -> bool {
        !matches!(self, Offer::Send { .. } | Offer::Recv { .. })
    }

    pub fn kind(self) -> &'static str {
        match self {
            Offer::Send { .. } => "send",
            Offer::Recv { .. } => "recv",
            Offer::Broadcast { .. } => "broadcast",
            Offer::Scatter { .. } => "scatter",
            Offer::Gather { .. } => "gather",
            Offer::Reduce { .. } => "reduce",
            Offer::Allgather => "allgather",
            Offer::Allreduce { .. } => "allreduce",
            Offer::Apply => "apply",
        }
    }

    pub fn root(self) -> Option<i64> {
        match self {
            Offer::Broadcast { root }
            | Offer::Scatter { root }
            | Offer::Gather { root }
            | Offer::Reduce { root, .. } => Some(root),
            _ => None,
        }
    }
}

impl fmt::Display for Offer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offer::Send { to } => write!(f, "send {to}"),
            Offer::Recv { from } => write!(f, "recv {from}"),
            Offer::Reduce { root, op } => write!(f, "reduce root {root} {op}"),
            Offer::Allreduce { op } => write!(f, "allreduce {op}"),
            other => match other.root() {
                Some(root) => write!(f, "{} root {root}", other.kind()),
                None => f.write_str(other.kind()),
            },
        }
    }
}

impl LocalAction {
    pub fn kind(&self) -> &'static str {
        match self {
            LocalAction::Send { .. } => "send",
            LocalAction::Recv { .. } => "recv",
            LocalAction::Broadcast { .. } => "broadcast",
            LocalAction::Scatter { .. } => "scatter",
            LocalAction::Gather { .. } => "gather",
            LocalAction::Reduce { .. } => "reduce",
            LocalAction::Allgather { .. } => "allgather",
            LocalAction::Allreduce { .. } => "allreduce",
            LocalAction::Apply { .. } => "val",
            LocalAction::EnterChoice { .. } => "choice",
        }
    }

    pub fn payload(&self) -> Option<&Datatype> {
        match self {
            LocalAction::Send { payload, .. }
            | LocalAction::Recv { payload, .. }
            | LocalAction::Broadcast { payload, .. }
            | LocalAction::Scatter { payload, .. }
            | LocalAction::Gather { payload, .. }
            | LocalAction::Reduce { payload, .. }
            | LocalAction::Allgather { payload, .. }
            | LocalAction::Allreduce { payload, .. }
            | LocalAction::Apply { payload, .. } => Some(payload),
            LocalAction::EnterChoice { .. } => None,
        }
    }

    /// The variable this action binds in the protocol.
    pub fn binder(&self) -> Option<&str> {
        match self {
            LocalAction::Broadcast { var, .. }
            | LocalAction::Allgather { var, .. }
            | LocalAction::Allreduce { var, .. }
            | LocalAction::Apply { var, .. } => Some(var),
            _ => None,
        }
    }

    pub fn is_collective(&self) -> bool {
        !matches!(self, LocalAction::Send { .. } | LocalAction::Recv { .. } | LocalAction::EnterChoice { .. })
    }

    /// Whether a program offer is the step this action expects.
    pub fn matches(&self, offer: &Offer) -> bool {
        match (self, offer) {
            (LocalAction::Send { to, .. }, Offer::Send { to: t }) => to == t,
            (LocalAction::Recv { from, .. }, Offer::Recv { from: f }) => from == f,
            (LocalAction::Broadcast { root, .. }, Offer::Broadcast { root: r })
            | (LocalAction::Scatter { root, .. }, Offer::Scatter { root: r })
            | (LocalAction::Gather { root, .. }, Offer::Gather { root: r }) => root == r,
            (LocalAction::Reduce { root, op, .. }, Offer::Reduce { root: r, op: o }) => root == r && op == o,
            (LocalAction::Allgather { .. }, Offer::Allgather) => true,
            (LocalAction::Allreduce { op, .. }, Offer::Allreduce { op: o }) => op == o,
            (LocalAction::Apply { .. }, Offer::Apply) => true,
            _ => false,
        }
    }

    /// Structural equality with payloads compared up to renaming of
    /// refinement binders.
    pub fn equivalent(&self, other: &LocalAction) -> bool {
        use LocalAction as A;
        let same_payload = match (self.payload(), other.payload()) {
            (Some(a), Some(b)) => a.alpha_eq(b),
            (None, None) => true,
            _ => false,
        };
        same_payload
            && match (self, other) {
                (A::Send { to: a, .. }, A::Send { to: b, .. }) => a == b,
                (A::Recv { from: a, .. }, A::Recv { from: b, .. }) => a == b,
                (A::Broadcast { root: r1, var: v1, .. }, A::Broadcast { root: r2, var: v2, .. }) => {
                    r1 == r2 && v1 == v2
                }
                (A::Scatter { root: a, .. }, A::Scatter { root: b, .. })
                | (A::Gather { root: a, .. }, A::Gather { root: b, .. }) => a == b,
                (A::Reduce { root: r1, op: o1, .. }, A::Reduce { root: r2, op: o2, .. }) => r1 == r2 && o1 == o2,
                (A::Allgather { var: a, .. }, A::Allgather { var: b, .. })
                | (A::Apply { var: a, .. }, A::Apply { var: b, .. }) => a == b,
                (A::Allreduce { op: o1, var: v1, .. }, A::Allreduce { op: o2, var: v2, .. }) => o1 == o2 && v1 == v2,
                (A::EnterChoice { taken: a }, A::EnterChoice { taken: b }) => a == b,
                _ => false,
            }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = json!({ "kind": self.kind() });
        let m = obj.as_object_mut().expect("object literal");
        match self {
            LocalAction::Send { to, .. } => {
                m.insert("peer".into(), json!(to));
            }
            LocalAction::Recv { from, .. } => {
                m.insert("peer".into(), json!(from));
            }
            LocalAction::Broadcast { root, var, .. } => {
                m.insert("root".into(), json!(root));
                m.insert("var".into(), json!(var));
            }
            LocalAction::Scatter { root, .. } | LocalAction::Gather { root, .. } => {
                m.insert("root".into(), json!(root));
            }
            LocalAction::Reduce { root, op, .. } => {
                m.insert("root".into(), json!(root));
                m.insert("op".into(), json!(op.name()));
            }
            LocalAction::Allgather { var, .. } | LocalAction::Apply { var, .. } => {
                m.insert("var".into(), json!(var));
            }
            LocalAction::Allreduce { op, var, .. } => {
                m.insert("op".into(), json!(op.name()));
                m.insert("var".into(), json!(var));
            }
            LocalAction::EnterChoice { taken } => {
                m.insert("taken".into(), json!(taken.name()));
            }
        }
        if let Some(p) = self.payload() {
            m.insert("payload".into(), json!(p.to_string()));
        }
        obj
    }
}

impl fmt::Display for LocalAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalAction::Send { to, payload } => write!(f, "send {to} : {payload}"),
            LocalAction::Recv { from, payload } => write!(f, "recv {from} : {payload}"),
            LocalAction::Broadcast { root, var, payload } => write!(f, "broadcast root {root} {var} : {payload}"),
            LocalAction::Scatter { root, payload } => write!(f, "scatter root {root} : {payload}"),
            LocalAction::Gather { root, payload } => write!(f, "gather root {root} : {payload}"),
            LocalAction::Reduce { root, op, payload } => write!(f, "reduce root {root} {op} : {payload}"),
            LocalAction::Allgather { var, payload } => write!(f, "allgather {var} : {payload}"),
            LocalAction::Allreduce { op, var, payload } => write!(f, "allreduce {op} {var} : {payload}"),
            LocalAction::Apply { var, payload } => write!(f, "val {var} : {payload}"),
            LocalAction::EnterChoice { taken } => write!(f, "choice {}", taken.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectError {
    #[error("{error}")]
    Eval { error: EvalError, span: Span },
    #[error("message from rank {rank} to itself")]
    SelfMessage { rank: i64, span: Span },
    #[error("{role} {value} is not a rank (size is {size})")]
    RankOutOfRange { role: &'static str, value: i64, size: i64, span: Span },
    #[error("foreach range of {count} iterations is too large for bounded checking (limit {MAX_FOREACH_ITERATIONS})")]
    RangeTooLarge { count: i64, span: Span },
    #[error("expected {expected}, offered {offered}")]
    Mismatch { expected: String, offered: String, span: Span },
    #[error("value {} does not satisfy `{}`", value.describe(), payload.spelled_out())]
    Refinement { value: Value, payload: Box<Datatype>, span: Span },
    #[error("no value supplied for `{action}`")]
    MissingValue { action: String, span: Span },
    #[error(transparent)]
    Witness(#[from] WitnessError),
}

impl ProjectError {
    pub fn span(&self) -> Span {
        match self {
            ProjectError::Eval { span, .. }
            | ProjectError::SelfMessage { span, .. }
            | ProjectError::RankOutOfRange { span, .. }
            | ProjectError::RangeTooLarge { span, .. }
            | ProjectError::Mismatch { span, .. }
            | ProjectError::Refinement { span, .. }
            | ProjectError::MissingValue { span, .. } => *span,
            ProjectError::Witness(_) => Span::default(),
        }
    }
}

/// One rank's view of the protocol still to be performed.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalState {
    pub residual: ProtocolTerm,
    pub env: Env,
    pub rank: i64,
    /// Span of the protocol item behind the most recent head action.
    head_span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Action(LocalAction, Box<LocalState>),
    AtSkip,
    /// Reserved: eager expansion never needs a value that has not been applied.
    NeedsValue,
}

impl LocalState {
    pub fn new(p: &GlobalProtocol, size: i64, rank: i64) -> Self {
        Self::from_term(p.body.clone(), Env::new(size), rank)
    }

    pub fn from_term(residual: ProtocolTerm, env: Env, rank: i64) -> Self {
        LocalState { residual: residual.normalize(), env, rank, head_span: Span::default() }
    }

    pub fn size(&self) -> i64 {
        self.env.size()
    }

    /// Span of the protocol item that produced the last projected action.
    pub fn head_span(&self) -> Span {
        self.head_span
    }
}

fn eval_at(t: &IndexTerm, env: &Env, span: Span) -> Result<i64, ProjectError> {
    eval_int(t, env).map_err(|error| ProjectError::Eval { error, span })
}

pub(crate) fn eval_rank(t: &IndexTerm, env: &Env, role: &'static str, span: Span) -> Result<i64, ProjectError> {
    let value = eval_at(t, env, span)?;
    let size = env.size();
    if !(0..size).contains(&value) {
        return Err(ProjectError::RankOutOfRange { role, value, size, span });
    }
    Ok(value)
}

/// Evaluates the bounds of a foreach; an empty range yields `lo > hi`.
pub(crate) fn foreach_bounds(
    lo: &IndexTerm,
    hi: &IndexTerm,
    env: &Env,
    span: Span,
) -> Result<(i64, i64), ProjectError> {
    let lo = eval_at(lo, env, span)?;
    let hi = eval_at(hi, env, span)?;
    let count = (hi as i128 - lo as i128 + 1).max(0);
    if count > MAX_FOREACH_ITERATIONS as i128 {
        return Err(ProjectError::RangeTooLarge { count: count.min(i64::MAX as i128) as i64, span });
    }
    Ok((lo, hi))
}

fn push_items(t: ProtocolTerm, out: &mut Vec<ProtocolTerm>) {
    match t.kind {
        TermKind::Skip => {}
        TermKind::Seq(items) => items.into_iter().rev().for_each(|i| push_items(i, out)),
        _ => out.push(t),
    }
}

/// The next action for `s.rank`, with the state after it.
pub fn project_head(s: &LocalState) -> Result<Head, ProjectError> {
    // work list in reverse order: the head item is at the end
    let mut work = Vec::new();
    push_items(s.residual.clone(), &mut work);
    let env = &s.env;
    let rank = s.rank;
    while let Some(item) = work.pop() {
        let span = item.span;
        let action = match item.kind {
            TermKind::Skip => continue,
            TermKind::Seq(_) => {
                push_items(item, &mut work);
                continue;
            }
            TermKind::Message { from, to, payload } => {
                let f = eval_rank(&from, env, "sender", span)?;
                let t = eval_rank(&to, env, "receiver", span)?;
                if f == t {
                    return Err(ProjectError::SelfMessage { rank: f, span });
                }
                if f == rank {
                    LocalAction::Send { to: t, payload }
                } else if t == rank {
                    LocalAction::Recv { from: f, payload }
                } else {
                    continue;
                }
            }
            TermKind::Broadcast { root, var, payload } => {
                LocalAction::Broadcast { root: eval_rank(&root, env, "root", span)?, var, payload }
            }
            TermKind::Scatter { root, payload } => {
                LocalAction::Scatter { root: eval_rank(&root, env, "root", span)?, payload }
            }
            TermKind::Gather { root, payload } => {
                LocalAction::Gather { root: eval_rank(&root, env, "root", span)?, payload }
            }
            TermKind::Reduce { root, op, payload } => {
                LocalAction::Reduce { root: eval_rank(&root, env, "root", span)?, op, payload }
            }
            TermKind::Allgather { var, payload } => LocalAction::Allgather { var, payload },
            TermKind::Allreduce { op, var, payload } => LocalAction::Allreduce { op, var, payload },
            TermKind::Val { var, payload } => LocalAction::Apply { var, payload },
            TermKind::Choice { cond, then, otherwise } => {
                let taken = eval_prop(&cond, env).map_err(|error| ProjectError::Eval { error, span })?;
                let (branch, body) = if taken { (Branch::Then, *then) } else { (Branch::Else, *otherwise) };
                push_items(body, &mut work);
                LocalAction::EnterChoice { taken: branch }
            }
            TermKind::Foreach { var, lo, hi, body } => {
                let (lo, hi) = foreach_bounds(&lo, &hi, env, span)?;
                for i in (lo..=hi).rev() {
                    push_items(body.subst(&var, &Value::Int(i)), &mut work);
                }
                continue;
            }
        };
        work.reverse();
        let next =
            LocalState { residual: ProtocolTerm::seq(work).normalize(), env: s.env.clone(), rank, head_span: span };
        return Ok(Head::Action(action, Box::new(next)));
    }
    Ok(Head::AtSkip)
}

/// Whether nothing remains for this rank.
pub fn is_skip(s: &LocalState) -> Result<bool, ProjectError> {
    Ok(matches!(project_head(s)?, Head::AtSkip))
}

/// Checks `v` against `payload` in the rank's environment.
pub fn check_payload(s: &LocalState, payload: &Datatype, v: &Value, span: Span) -> Result<(), ProjectError> {
    match check_value(v, payload, &s.env) {
        Ok(true) => Ok(()),
        Ok(false) => Err(ProjectError::Refinement { value: v.clone(), payload: Box::new(payload.clone()), span }),
        Err(error) => Err(ProjectError::Eval { error, span }),
    }
}

/// Consumes action `a`. When `v` is present it is checked against the
/// payload; binder actions require it and bind it in the continuation.
pub fn advance(s: &LocalState, a: &LocalAction, v: Option<&Value>) -> Result<LocalState, ProjectError> {
    let (expected, mut next) = match project_head(s)? {
        Head::Action(expected, next) => (expected, *next),
        Head::AtSkip => {
            return Err(ProjectError::Mismatch {
                expected: "end of protocol".into(),
                offered: a.to_string(),
                span: s.residual.span,
            })
        }
        Head::NeedsValue => unreachable!("eager projection never needs a value"),
    };
    let span = next.head_span;
    if !expected.equivalent(a) {
        return Err(ProjectError::Mismatch { expected: expected.to_string(), offered: a.to_string(), span });
    }
    if let (Some(payload), Some(v)) = (expected.payload(), v) {
        check_payload(s, payload, v, span)?;
    }
    if let Some(var) = expected.binder() {
        let v = v.ok_or_else(|| ProjectError::MissingValue { action: expected.to_string(), span })?;
        next.residual = next.residual.subst(var, v).normalize();
        next.env.insert(var, v.clone());
    }
    Ok(next)
}

/// Canonical value for an action, as used by expansion tables and
/// synthesized programs. `vals` supplies values for `val` binders; other
/// values come from [`witness::canonical`].
pub(crate) fn witness_for(s: &LocalState, a: &LocalAction, vals: &Env) -> Result<Option<Value>, ProjectError> {
    let env = &s.env;
    let size = env.size();
    let w = match a {
        LocalAction::EnterChoice { .. } => return Ok(None),
        LocalAction::Apply { var, payload } => match vals.get(var) {
            Some(v) => v.clone(),
            None => witness::canonical(payload, env)?,
        },
        LocalAction::Scatter { payload, .. }
        | LocalAction::Gather { payload, .. }
        | LocalAction::Allgather { payload, .. } => witness::canonical_divisible(payload, env, size)?,
        LocalAction::Allreduce { op, payload, .. } => witness::canonical_where(payload, env, |w| {
            let folded = reduce_values(*op, &vec![w.clone(); size as usize])?;
            check_value(&folded, payload, env)
        })?,
        LocalAction::Send { payload, .. }
        | LocalAction::Recv { payload, .. }
        | LocalAction::Broadcast { payload, .. }
        | LocalAction::Reduce { payload, .. } => witness::canonical(payload, env)?,
    };
    Ok(Some(w))
}

/// The value a rank binds (in the protocol) or checks when performing `a`
/// with every rank contributing `w`.
pub(crate) fn collective_result(a: &LocalAction, w: &Value, size: i64) -> Result<Value, EvalError> {
    match a {
        LocalAction::Allreduce { op, .. } => reduce_values(*op, &vec![w.clone(); size as usize]),
        _ => Ok(w.clone()),
    }
}

/// Complete projected action sequence of one rank, with the witness value
/// used at each step.
pub fn expand_rank(
    p: &GlobalProtocol,
    vals: &Env,
    rank: i64,
) -> Result<Vec<(LocalAction, Option<Value>)>, ProjectError> {
    let size = vals.size();
    let mut s = LocalState::new(p, size, rank);
    let mut out = Vec::new();
    loop {
        let a = match project_head(&s)? {
            Head::AtSkip => return Ok(out),
            Head::Action(a, _) => a,
            Head::NeedsValue => unreachable!("eager projection never needs a value"),
        };
        let w = witness_for(&s, &a, vals)?;
        let checked = match &w {
            Some(w) => {
                Some(collective_result(&a, w, size).map_err(|error| ProjectError::Eval { error, span: s.head_span })?)
            }
            None => None,
        };
        // scatter/gather/reduce contributions are not the protocol-level value
        let bound = match a {
            LocalAction::Scatter { .. } | LocalAction::Gather { .. } | LocalAction::Reduce { .. } => None,
            _ => checked,
        };
        s = advance(&s, &a, bound.as_ref())?;
        out.push((a, w));
    }
}

/// Projected actions for every rank. `env` fixes `size` and may supply
/// values for `val` binders; missing ones use canonical witnesses.
pub fn expansion_table(p: &GlobalProtocol, size: i64, env: &Env) -> Result<Vec<Vec<LocalAction>>, ProjectError> {
    let mut vals = env.clone();
    vals.insert("size", Value::Int(size));
    (0..size).map(|rank| Ok(expand_rank(p, &vals, rank)?.into_iter().map(|(a, _)| a).collect())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_protocol;

    fn state(body: &str, size: i64, rank: i64) -> LocalState {
        let p = parse_protocol(&format!("protocol P (true) {{ {body} }}")).unwrap();
        LocalState::new(&p, size, rank)
    }

    fn head(s: &LocalState) -> (LocalAction, LocalState) {
        match project_head(s).unwrap() {
            Head::Action(a, next) => (a, *next),
            other => panic!("expected an action, got {other:?}"),
        }
    }

    #[test]
    fn skips_unrelated_messages() {
        let s = state("message 0, size - 1 float message 1, 2 integer", 4, 1);
        let (a, next) = head(&s);
        assert_eq!(a, LocalAction::Send { to: 2, payload: Datatype::Integer });
        assert!(is_skip(&next).unwrap());
    }

    #[test]
    fn sender_side() {
        let (a, next) = head(&state("message 0, 1 float", 2, 0));
        assert_eq!(a, LocalAction::Send { to: 1, payload: Datatype::Float });
        assert!(next.residual.is_skip());
    }

    #[test]
    fn skip_equivalence() {
        assert!(is_skip(&state("", 4, 0)).unwrap());
        assert!(is_skip(&state("message 2, 3 float", 4, 0)).unwrap());
        assert!(!is_skip(&state("broadcast 0 n: integer", 4, 3)).unwrap());
        assert!(is_skip(&state("foreach i: 1 .. 0 { message 0, 1 float }", 4, 0)).unwrap());
    }

    #[test]
    fn choice_is_decided_from_env() {
        let s = state("if (size = 2) { message 0, 1 float } else { message 1, 0 float }", 3, 0);
        let (a, next) = head(&s);
        assert_eq!(a, LocalAction::EnterChoice { taken: Branch::Else });
        assert_eq!(head(&next).0, LocalAction::Recv { from: 1, payload: Datatype::Float });
    }

    #[test]
    fn apply_binds_value() {
        let s = state("val iterations: positive foreach i: 1 .. iterations { message 0, 1 float }", 2, 0);
        let a = LocalAction::Apply { var: "iterations".into(), payload: Datatype::positive() };
        let next = advance(&s, &a, Some(&Value::Int(100))).unwrap();
        assert_eq!(next.env.get("iterations"), Some(&Value::Int(100)));
        let expected = ProtocolTerm::foreach(
            "i",
            IndexTerm::int(1),
            IndexTerm::int(100),
            ProtocolTerm::message(IndexTerm::int(0), IndexTerm::int(1), Datatype::Float),
        );
        assert_eq!(next.residual, expected);
    }

    #[test]
    fn apply_refinement_violation() {
        let s = state("val iterations: positive", 2, 0);
        let a = LocalAction::Apply { var: "iterations".into(), payload: Datatype::positive() };
        let err = advance(&s, &a, Some(&Value::Int(-1))).unwrap_err();
        assert!(matches!(err, ProjectError::Refinement { .. }));
        assert!(err.to_string().contains("x >= 1"), "{err}");
    }

    #[test]
    fn offered_action_mismatch() {
        let s = state("message 0, 1 float", 3, 0);
        let err = advance(&s, &LocalAction::Send { to: 2, payload: Datatype::Float }, None).unwrap_err();
        let ProjectError::Mismatch { expected, offered, .. } = err else { panic!() };
        assert_eq!(expected, "send 1 : float");
        assert_eq!(offered, "send 2 : float");
        let at_end = advance(&state("", 2, 0), &LocalAction::Send { to: 1, payload: Datatype::Float }, None);
        assert!(matches!(at_end, Err(ProjectError::Mismatch { .. })));
    }

    #[test]
    fn payloads_compare_up_to_binder_renaming() {
        let s = state("val n: {y: integer | y >= 1}", 2, 0);
        let a = LocalAction::Apply { var: "n".into(), payload: Datatype::positive() };
        assert!(advance(&s, &a, Some(&Value::Int(3))).is_ok());
    }

    #[test]
    fn defensive_rank_checks() {
        let err = project_head(&state("message 0, size - 1 float", 1, 0)).unwrap_err();
        assert!(matches!(err, ProjectError::SelfMessage { rank: 0, .. }));
        let err = project_head(&state("message 0, size float", 2, 0)).unwrap_err();
        assert!(matches!(err, ProjectError::RankOutOfRange { value: 2, .. }));
        let err = project_head(&state("foreach i: 0 .. 100000 { }", 2, 0)).unwrap_err();
        assert!(matches!(err, ProjectError::RangeTooLarge { count: 100001, .. }));
    }

    #[test]
    fn needs_value_is_never_produced() {
        let s = state("val k: natural foreach i: 0 .. k { message 0, 1 integer }", 2, 1);
        let vals = Env::new(2).with("k", Value::Int(3));
        let mut s2 = s.clone();
        let mut steps = 0;
        loop {
            let h = project_head(&s2).unwrap();
            assert_ne!(h, Head::NeedsValue);
            let Head::Action(a, _) = h else { break };
            let w = witness_for(&s2, &a, &vals).unwrap();
            s2 = advance(&s2, &a, w.as_ref()).unwrap();
            steps += 1;
        }
        assert_eq!(steps, 5);
    }

    #[test]
    fn skip_protocol_has_empty_table() {
        let p = parse_protocol("protocol P (true) { }").unwrap();
        let table = expansion_table(&p, 3, &Env::new(3)).unwrap();
        assert_eq!(table, vec![Vec::<LocalAction>::new(); 3]);
    }
}
