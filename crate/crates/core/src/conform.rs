//! Lockstep checking of an SPMD program against a global protocol.
//!
//! Every rank runs under the synchronous scheduler while a per-rank
//! [`LocalState`] tracks the protocol still owed. Each communication the
//! program offers must be the rank's next projected action, and every value
//! that crosses a rendezvous is checked against the protocol payload.

use std::fmt;
use std::ops::ControlFlow;

use serde_json::json;
use thiserror::Error;

use crate::bindings::{BindingError, Bindings};
use crate::interp::{Request, RuntimeError};
use crate::program::Program;
use crate::project::{advance, check_payload, project_head, Head, LocalAction, LocalState, Offer, ProjectError};
use crate::protocol::GlobalProtocol;
use crate::simulate::{self, Event, Observer, Options, Outcome};
use crate::span::{Diagnostic, Span};
use crate::value::Value;
use crate::wellformed::{admits_size, check_at_size, SizeRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    ProtocolMismatch,
    RefinementViolation,
    ValDisagreement,
    ResidualNotSkip,
    RuntimeError,
    /// The scheduler stalled without an earlier finding.
    Deadlock,
    BudgetExhausted,
}

impl ViolationKind {
    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::ProtocolMismatch => "ProtocolMismatch",
            ViolationKind::RefinementViolation => "RefinementViolation",
            ViolationKind::ValDisagreement => "ValDisagreement",
            ViolationKind::ResidualNotSkip => "ResidualNotSkip",
            ViolationKind::RuntimeError => "RuntimeError",
            ViolationKind::Deadlock => "Deadlock",
            ViolationKind::BudgetExhausted => "BudgetExhausted",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The first finding of a failed check.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rank: i64,
    pub kind: ViolationKind,
    /// Program statement involved; a dummy span when the rank had finished.
    pub span: Span,
    /// Protocol item the rank was expected to perform, when known.
    pub protocol_span: Option<Span>,
    pub expected: Option<String>,
    pub offered: Option<String>,
    pub message: String,
}

fn span_json(s: &Span) -> serde_json::Value {
    json!({ "line": s.start_line, "column": s.start_col, "endLine": s.end_line, "endColumn": s.end_col })
}

impl Violation {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "rank": self.rank,
            "kind": self.kind.name(),
            "span": span_json(&self.span),
            "protocolSpan": self.protocol_span.as_ref().map(span_json),
            "expected": self.expected,
            "offered": self.offered,
            "message": self.message,
        })
    }
}

/// A completed collective as seen by the checker.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveRecord {
    pub step: u64,
    pub offer: Offer,
    /// Protocol variable bound by the collective, if any.
    pub var: Option<String>,
    /// Value bound to `var`.
    pub value: Option<Value>,
}

impl CollectiveRecord {
    fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "step": self.step, "kind": self.offer.kind() });
        let m = v.as_object_mut().expect("object literal");
        if let Some(r) = self.offer.root() {
            m.insert("root".into(), json!(r));
        }
        if let Offer::Reduce { op, .. } | Offer::Allreduce { op } = self.offer {
            m.insert("op".into(), json!(op.name()));
        }
        if let Some(var) = &self.var {
            m.insert("var".into(), json!(var));
        }
        if let Some(value) = &self.value {
            m.insert("value".into(), value.to_json());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Fail(Violation),
    /// The protocol header rules out this size.
    Excluded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceReport {
    pub size: i64,
    pub verdict: Verdict,
    pub collective_log: Vec<CollectiveRecord>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn violation(&self) -> Option<&Violation> {
        match &self.verdict {
            Verdict::Fail(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let verdict = match self.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail(_) => "fail",
            Verdict::Excluded => "excluded",
        };
        json!({
            "size": self.size,
            "verdict": verdict,
            "violation": self.violation().map(Violation::to_json),
            "collectiveLog": self.collective_log.iter().map(CollectiveRecord::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn to_text(&self) -> String {
        match &self.verdict {
            Verdict::Pass => format!("size {}: pass ({} collectives)\n", self.size, self.collective_log.len()),
            Verdict::Excluded => format!("size {}: excluded by precondition\n", self.size),
            Verdict::Fail(v) => {
                let mut out = format!("size {}: fail at rank {}", self.size, v.rank);
                if !v.span.is_dummy() {
                    out.push_str(&format!(", line {}", v.span));
                }
                out.push_str(&format!(": {}: {}\n", v.kind, v.message));
                if let Some(e) = &v.expected {
                    out.push_str(&format!("  expected: {e}\n"));
                }
                if let Some(o) = &v.offered {
                    out.push_str(&format!("  offered:  {o}\n"));
                }
                out
            }
        }
    }
}

/// Reasons a check cannot start.
#[derive(Debug, Clone, Error)]
pub enum ConformError {
    #[error("size {size} is excluded by the protocol header")]
    Excluded { size: i64 },
    #[error("protocol is not well-formed at size {size}: {}", first_message(.diagnostics))]
    IllFormed { size: i64, diagnostics: Vec<Diagnostic> },
    #[error("cannot evaluate the protocol header at size {size}: {message}")]
    Header { size: i64, message: String },
    #[error(transparent)]
    Binding(#[from] BindingError),
}

fn first_message(d: &[Diagnostic]) -> String {
    d.first().map(|d| d.to_string()).unwrap_or_default()
}

/// Checks `prog` against `proto` at `b.size` ranks.
pub fn check_conformance(
    prog: &Program,
    proto: &GlobalProtocol,
    b: &Bindings,
) -> Result<ConformanceReport, ConformError> {
    check_conformance_with(prog, proto, b, simulate::DEFAULT_MAX_STEPS)
}

pub fn check_conformance_with(
    prog: &Program,
    proto: &GlobalProtocol,
    b: &Bindings,
    max_steps: u64,
) -> Result<ConformanceReport, ConformError> {
    let size = b.size;
    match admits_size(proto, size) {
        Ok(true) => {}
        Ok(false) => return Err(ConformError::Excluded { size }),
        Err(e) => return Err(ConformError::Header { size, message: e.to_string() }),
    }
    let diagnostics = check_at_size(proto, size);
    if !diagnostics.is_empty() {
        return Err(ConformError::IllFormed { size, diagnostics });
    }
    b.inputs_for(prog)?;
    let mut obs = Checker {
        states: (0..size).map(|r| LocalState::new(proto, size, r)).collect(),
        expected: vec![None; size as usize],
        finding: None,
        log: Vec::new(),
    };
    let opts = Options { max_steps, apply_rendezvous: true, ..Options::default() };
    let run = simulate::run_with(prog, b, &opts, &mut obs)?;
    let verdict = match (obs.finding, run.outcome) {
        (Some(v), _) => Verdict::Fail(v),
        (None, Outcome::Completed) => Verdict::Pass,
        (None, Outcome::Deadlocked) => {
            let first = run.wait_for_cycle.first();
            let chain: Vec<String> = run.wait_for_cycle.iter().map(ToString::to_string).collect();
            Verdict::Fail(Violation {
                rank: first.map_or(0, |w| w.rank),
                kind: ViolationKind::Deadlock,
                span: first.map_or_else(Span::default, |w| w.span),
                protocol_span: None,
                expected: None,
                offered: None,
                message: format!("ranks stalled: {}", chain.join(" -> ")),
            })
        }
        (None, outcome) => Verdict::Fail(Violation {
            rank: 0,
            kind: ViolationKind::BudgetExhausted,
            span: Span::default(),
            protocol_span: None,
            expected: None,
            offered: None,
            message: match outcome {
                Outcome::BudgetExhausted => format!("step budget of {max_steps} exhausted"),
                _ => "run stopped".into(),
            },
        }),
    };
    Ok(ConformanceReport { size, verdict, collective_log: obs.log })
}

/// One report per size in `r`, ascending. Sizes the header rules out are
/// reported as excluded; any other precondition failure stops the check.
pub fn check_all_sizes(
    prog: &Program,
    proto: &GlobalProtocol,
    bindings_for: impl Fn(i64) -> Bindings,
    r: SizeRange,
) -> Result<Vec<ConformanceReport>, ConformError> {
    r.sizes()
        .map(|size| match check_conformance(prog, proto, &bindings_for(size)) {
            Err(ConformError::Excluded { size }) => {
                Ok(ConformanceReport { size, verdict: Verdict::Excluded, collective_log: Vec::new() })
            }
            other => other,
        })
        .collect()
}

struct Checker {
    states: Vec<LocalState>,
    /// Action each blocked rank has been matched against.
    expected: Vec<Option<LocalAction>>,
    finding: Option<Violation>,
    log: Vec<CollectiveRecord>,
}

impl Checker {
    fn fail(&mut self, v: Violation) -> ControlFlow<()> {
        self.finding = Some(v);
        ControlFlow::Break(())
    }

    /// The rank's next action, consuming any collective choices first.
    fn head(&mut self, rank: i64) -> Result<Option<LocalAction>, ProjectError> {
        let r = rank as usize;
        loop {
            match project_head(&self.states[r])? {
                Head::AtSkip => return Ok(None),
                Head::Action(a @ LocalAction::EnterChoice { .. }, _) => {
                    self.states[r] = advance(&self.states[r], &a, None)?;
                }
                Head::Action(a, _) => return Ok(Some(a)),
                Head::NeedsValue => unreachable!("eager projection never needs a value"),
            }
        }
    }

    fn check_offer(&mut self, rank: i64, req: &Request) -> Result<(), Violation> {
        let r = rank as usize;
        let offered = req.offer.to_string();
        let mismatch = |expected: String, protocol_span: Option<Span>| Violation {
            rank,
            kind: ViolationKind::ProtocolMismatch,
            span: req.span,
            protocol_span,
            message: format!("expected {expected}, offered {offered}"),
            expected: Some(expected),
            offered: Some(offered.clone()),
        };
        let a = match self.head(rank) {
            Ok(Some(a)) => a,
            Ok(None) => return Err(mismatch("end of protocol".into(), None)),
            Err(e) => return Err(project_violation(rank, req.span, e, Some(offered.clone()))),
        };
        let protocol_span = match project_head(&self.states[r]) {
            Ok(Head::Action(_, next)) => Some(next.head_span()),
            _ => None,
        };
        if !a.matches(&req.offer) {
            return Err(mismatch(a.to_string(), protocol_span));
        }
        let state = &self.states[r];
        let refine = |e: ProjectError| project_violation(rank, req.span, e, Some(offered.clone()));
        let payload = a.payload().expect("communication actions carry a payload");
        let checked_here = match &a {
            LocalAction::Send { .. }
            | LocalAction::Reduce { .. }
            | LocalAction::Allreduce { .. }
            | LocalAction::Apply { .. } => true,
            LocalAction::Broadcast { root, .. } | LocalAction::Scatter { root, .. } => *root == rank,
            _ => false,
        };
        if let (true, Some(v)) = (checked_here, &req.value) {
            if let LocalAction::Scatter { .. } = a {
                let size = state.size();
                match v.as_array() {
                    Some(items) if items.len() as i64 % size == 0 => {}
                    _ => {
                        return Err(Violation {
                            rank,
                            kind: ViolationKind::RefinementViolation,
                            span: req.span,
                            protocol_span,
                            expected: Some(payload.spelled_out()),
                            offered: Some(offered.clone()),
                            message: format!(
                                "scattered value {} does not split evenly across {size} ranks of `{}`",
                                v.describe(),
                                payload.spelled_out()
                            ),
                        })
                    }
                }
            }
            check_payload(state, payload, v, protocol_span.unwrap_or_default()).map_err(refine)?;
        }
        self.expected[r] = Some(a);
        Ok(())
    }

    /// Consumes `rank`'s pending action, checking and binding `v` if given.
    fn consume(&mut self, rank: i64, v: Option<&Value>, span: Span) -> Result<(), Violation> {
        let r = rank as usize;
        let a = self.expected[r].take().expect("committed rank was matched at its offer");
        self.states[r] = advance(&self.states[r], &a, v).map_err(|e| project_violation(rank, span, e, None))?;
        Ok(())
    }

    fn committed_inner(&mut self, step: u64, event: &Event) -> Result<(), Violation> {
        match event {
            Event::PointToPoint { from, to, value, send_span, recv_span } => {
                self.consume(*from, None, *send_span)?;
                self.consume(*to, Some(value), *recv_span)?;
            }
            Event::Collective { offer, contributions, results, spans } => {
                let action = self.expected[0].clone().expect("collective was matched at its offer");
                if *offer == Offer::Apply {
                    let first = contributions[0].as_ref().expect("apply carries a value");
                    if let Some(r) = contributions.iter().position(|c| !c.as_ref().is_some_and(|c| c.bit_eq(first))) {
                        let other = contributions[r].as_ref().expect("apply carries a value");
                        return Err(Violation {
                            rank: r as i64,
                            kind: ViolationKind::ValDisagreement,
                            span: spans[r],
                            protocol_span: None,
                            expected: Some(first.to_string()),
                            offered: Some(other.to_string()),
                            message: format!(
                                "rank {r} applies {} where rank 0 applies {}",
                                other.describe(),
                                first.describe()
                            ),
                        });
                    }
                }
                for r in 0..results.len() {
                    let v = match offer {
                        Offer::Apply => contributions[r].as_ref(),
                        Offer::Broadcast { .. } | Offer::Allgather | Offer::Allreduce { .. } => results[r].as_ref(),
                        Offer::Gather { root } if *root == r as i64 => results[r].as_ref(),
                        _ => None,
                    };
                    self.consume(r as i64, v, spans[r])?;
                }
                let var = action.binder().map(str::to_owned);
                let value = var.as_ref().and_then(|v| self.states[0].env.get(v).cloned());
                self.log.push(CollectiveRecord { step, offer: *offer, var, value });
            }
        }
        Ok(())
    }
}

fn project_violation(rank: i64, span: Span, e: ProjectError, offered: Option<String>) -> Violation {
    let kind = match e {
        ProjectError::Refinement { .. } => ViolationKind::RefinementViolation,
        _ => ViolationKind::ProtocolMismatch,
    };
    let (expected, protocol_span) = match &e {
        ProjectError::Refinement { payload, span, .. } => (Some(payload.spelled_out()), Some(*span)),
        ProjectError::Mismatch { expected, span, .. } => (Some(expected.clone()), Some(*span)),
        other => (None, Some(other.span())),
    };
    Violation { rank, kind, span, protocol_span, expected, offered, message: e.to_string() }
}

impl Observer for Checker {
    fn offered(&mut self, rank: i64, req: &Request) -> ControlFlow<()> {
        match self.check_offer(rank, req) {
            Ok(()) => ControlFlow::Continue(()),
            Err(v) => self.fail(v),
        }
    }

    fn committed(&mut self, step: u64, event: &Event) -> ControlFlow<()> {
        match self.committed_inner(step, event) {
            Ok(()) => ControlFlow::Continue(()),
            Err(v) => self.fail(v),
        }
    }

    fn finished(&mut self, rank: i64) -> ControlFlow<()> {
        match self.head(rank) {
            Ok(None) => ControlFlow::Continue(()),
            Ok(Some(a)) => {
                let protocol_span = match project_head(&self.states[rank as usize]) {
                    Ok(Head::Action(_, next)) => Some(next.head_span()),
                    _ => None,
                };
                self.fail(Violation {
                    rank,
                    kind: ViolationKind::ResidualNotSkip,
                    span: Span::default(),
                    protocol_span,
                    message: format!("rank {rank} finished but the protocol still expects {a}"),
                    expected: Some(a.to_string()),
                    offered: Some("end of program".into()),
                })
            }
            Err(e) => self.fail(project_violation(rank, Span::default(), e, None)),
        }
    }

    fn faulted(&mut self, rank: i64, error: &RuntimeError) -> ControlFlow<()> {
        self.fail(Violation {
            rank,
            kind: ViolationKind::RuntimeError,
            span: error.span,
            protocol_span: None,
            expected: None,
            offered: None,
            message: error.message.clone(),
        })
    }
}
