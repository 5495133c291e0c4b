//! Synchronous message-passing scheduler and deadlock detection.
//!
//! Sends and receives complete together; collectives complete once every
//! rank is pending on the same collective. Nothing is buffered, so a run
//! that finishes here finishes under any buffering.

use std::fmt;
use std::ops::ControlFlow;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use serde_json::json;

use crate::bindings::{BindingError, Bindings};
use crate::eval::reduce_values;
use crate::interp::{RankMachine, Request, RuntimeError, Step};
use crate::program::{CommCall, Expr, Program, Stmt, StmtKind};
use crate::project::{expand_rank, LocalAction, Offer, ProjectError};
use crate::protocol::GlobalProtocol;
use crate::span::Span;
use crate::value::{Env, Value};

/// Default budget in work units (executed statements plus rendezvous).
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Which enabled rendezvous to commit next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Policy {
    /// The one whose smallest participating rank is smallest.
    #[default]
    MinRank,
    /// Uniformly at random, from a seeded generator.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub policy: Policy,
    pub max_steps: u64,
    /// Treat `apply` as a rendezvous of all ranks. When false it completes
    /// locally without synchronising.
    pub apply_rendezvous: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { policy: Policy::MinRank, max_steps: DEFAULT_MAX_STEPS, apply_rendezvous: false }
    }
}

/// A completed rendezvous.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    PointToPoint {
        from: i64,
        to: i64,
        value: Value,
        send_span: Span,
        recv_span: Span,
    },
    /// `contributions[r]` is what rank `r` supplied and `results[r]` what it
    /// received.
    Collective {
        offer: Offer,
        contributions: Vec<Option<Value>>,
        results: Vec<Option<Value>>,
        spans: Vec<Span>,
    },
}

impl Event {
    /// One trace line, without the step prefix.
    pub fn describe(&self) -> String {
        match self {
            Event::PointToPoint { from, to, value, .. } => format!("{from} -> {to} : {}", value.describe()),
            Event::Collective { offer, .. } => format!("collective {offer}"),
        }
    }
}

/// Hooks called while the scheduler runs. Returning `Break` stops the run.
pub trait Observer {
    /// `rank` blocked on a communication.
    fn offered(&mut self, _rank: i64, _req: &Request) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    /// A rendezvous committed; `step` counts from 1.
    fn committed(&mut self, _step: u64, _event: &Event) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    fn finished(&mut self, _rank: i64) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    fn faulted(&mut self, _rank: i64, _error: &RuntimeError) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl Observer for () {}

/// Collects `step k: ...` lines.
#[derive(Debug, Default)]
pub struct Trace {
    pub lines: Vec<String>,
}

impl Observer for Trace {
    fn committed(&mut self, step: u64, event: &Event) -> ControlFlow<()> {
        self.lines.push(format!("step {step}: {}", event.describe()));
        ControlFlow::Continue(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankStatus {
    Running,
    Blocked(Request),
    Terminated,
    Faulted(RuntimeError),
}

/// A blocked rank and what it waits for.
#[derive(Debug, Clone, PartialEq)]
pub struct Waiting {
    pub rank: i64,
    pub offer: Offer,
    pub span: Span,
}

impl Waiting {
    /// The rank this one waits on, for point-to-point operations.
    pub fn peer(&self) -> Option<i64> {
        match self.offer {
            Offer::Send { to } => Some(to),
            Offer::Recv { from } => Some(from),
            _ => None,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "rank": self.rank, "action": self.offer.kind(), "line": self.span.start_line, "column": self.span.start_col });
        let m = v.as_object_mut().expect("object literal");
        if let Some(p) = self.peer() {
            m.insert("peer".into(), json!(p));
        }
        if let Some(r) = self.offer.root() {
            m.insert("root".into(), json!(r));
        }
        if let Offer::Reduce { op, .. } | Offer::Allreduce { op } = self.offer {
            m.insert("op".into(), json!(op.name()));
        }
        v
    }
}

impl fmt::Display for Waiting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.offer {
            Offer::Send { to } => write!(f, "({}, send -> {to})", self.rank),
            Offer::Recv { from } => write!(f, "({}, recv <- {from})", self.rank),
            other => write!(f, "({}, {other})", self.rank),
        }
    }
}

/// Why a stalled run could not continue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StallCause {
    /// Point-to-point operations waiting on each other in a cycle.
    Cycle,
    /// Ranks pending on collectives that do not agree, or mixed with
    /// point-to-point operations.
    UnmatchedCollective,
    /// A rank waits on one that already terminated or faulted.
    PeerFinished,
}

impl StallCause {
    pub fn name(self) -> &'static str {
        match self {
            StallCause::Cycle => "wait-for-cycle",
            StallCause::UnmatchedCollective => "unmatched-collective",
            StallCause::PeerFinished => "peer-finished",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Every rank terminated or faulted.
    Completed,
    Deadlocked,
    BudgetExhausted,
    /// An observer stopped the run.
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadlockReport {
    pub size: i64,
    pub outcome: Outcome,
    /// The wait-for chain ending in a cycle, or the stuck ranks for other causes.
    pub wait_for_cycle: Vec<Waiting>,
    pub cause: Option<StallCause>,
    pub steps_executed: u64,
    pub faults: Vec<(i64, RuntimeError)>,
    /// Final status of every rank.
    pub ranks: Vec<RankStatus>,
}

impl DeadlockReport {
    pub fn deadlocked(&self) -> bool {
        self.outcome == Outcome::Deadlocked
    }

    pub fn budget_exhausted(&self) -> bool {
        self.outcome == Outcome::BudgetExhausted
    }

    /// Completed without faults.
    pub fn is_ok(&self) -> bool {
        self.outcome == Outcome::Completed && self.faults.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "size": self.size,
            "deadlocked": self.deadlocked(),
            "budgetExhausted": self.budget_exhausted(),
            "stepsExecuted": self.steps_executed,
            "cause": self.cause.map(StallCause::name),
            "waitForCycle": self.wait_for_cycle.iter().map(Waiting::to_json).collect::<Vec<_>>(),
            "faults": self.faults.iter().map(|(rank, e)| json!({
                "rank": rank,
                "message": e.message,
                "line": e.span.start_line,
                "column": e.span.start_col,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let head = match self.outcome {
            Outcome::Completed => format!("size {}: completed after {} steps", self.size, self.steps_executed),
            Outcome::Deadlocked => format!("size {}: deadlocked after {} steps", self.size, self.steps_executed),
            Outcome::BudgetExhausted => {
                format!("size {}: step budget exhausted after {} steps", self.size, self.steps_executed)
            }
            Outcome::Stopped => format!("size {}: stopped after {} steps", self.size, self.steps_executed),
        };
        out.push_str(&head);
        out.push('\n');
        if let Some(cause) = self.cause {
            let chain: Vec<String> = self.wait_for_cycle.iter().map(ToString::to_string).collect();
            let label = match cause {
                StallCause::Cycle => "wait-for cycle",
                StallCause::UnmatchedCollective => "unmatched collective",
                StallCause::PeerFinished => "waiting on finished rank",
            };
            out.push_str(&format!("{label}: {}\n", chain.join(" -> ")));
        }
        for (rank, e) in &self.faults {
            out.push_str(&format!("rank {rank} faulted at {}: {}\n", e.span, e.message));
        }
        out
    }
}

/// The maximum-steps override from `PARTYPES_MAX_STEPS`, if set and valid.
pub fn max_steps_from_env() -> Option<u64> {
    std::env::var("PARTYPES_MAX_STEPS").ok()?.trim().parse().ok()
}

/// Runs `prog` at `b.size` ranks with the default options.
pub fn run(prog: &Program, b: &Bindings) -> Result<DeadlockReport, BindingError> {
    run_with(prog, b, &Options::default(), &mut ())
}

pub fn run_with(
    prog: &Program,
    b: &Bindings,
    opts: &Options,
    obs: &mut dyn Observer,
) -> Result<DeadlockReport, BindingError> {
    let inputs = b.inputs_for(prog)?;
    Ok(Scheduler::new(prog, b.size, &inputs, opts).run(obs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rendezvous {
    Pair { from: i64, to: i64 },
    All,
}

struct Scheduler<'p> {
    machines: Vec<RankMachine<'p>>,
    status: Vec<RankStatus>,
    opts: Options,
    rng: Option<StdRng>,
    budget: u64,
    steps: u64,
    faults: Vec<(i64, RuntimeError)>,
}

type Flow = ControlFlow<Outcome>;

fn stop(c: ControlFlow<()>) -> Flow {
    match c {
        ControlFlow::Continue(()) => ControlFlow::Continue(()),
        ControlFlow::Break(()) => ControlFlow::Break(Outcome::Stopped),
    }
}

impl<'p> Scheduler<'p> {
    fn new(prog: &'p Program, size: i64, inputs: &[(String, Value)], opts: &Options) -> Self {
        Scheduler {
            machines: (0..size).map(|r| RankMachine::new(prog, r, size, inputs)).collect(),
            status: vec![RankStatus::Running; size.max(0) as usize],
            opts: opts.clone(),
            rng: match opts.policy {
                Policy::MinRank => None,
                Policy::Random(seed) => Some(StdRng::seed_from_u64(seed)),
            },
            budget: opts.max_steps,
            steps: 0,
            faults: Vec::new(),
        }
    }

    fn size(&self) -> i64 {
        self.machines.len() as i64
    }

    fn report(self, outcome: Outcome, cause: Option<(StallCause, Vec<Waiting>)>) -> DeadlockReport {
        let (cause, chain) = match cause {
            Some((c, chain)) => (Some(c), chain),
            None => (None, Vec::new()),
        };
        DeadlockReport {
            size: self.size(),
            outcome,
            wait_for_cycle: chain,
            cause,
            steps_executed: self.steps,
            faults: self.faults,
            ranks: self.status,
        }
    }

    fn run(mut self, obs: &mut dyn Observer) -> DeadlockReport {
        loop {
            if let ControlFlow::Break(outcome) = self.run_ranks(obs) {
                return self.report(outcome, None);
            }
            if self.status.iter().all(|s| matches!(s, RankStatus::Terminated | RankStatus::Faulted(_))) {
                return self.report(Outcome::Completed, None);
            }
            let Some(rv) = self.choose() else {
                let cause = self.stall_cause();
                return self.report(Outcome::Deadlocked, Some(cause));
            };
            if self.budget == 0 {
                return self.report(Outcome::BudgetExhausted, None);
            }
            self.budget -= 1;
            if let ControlFlow::Break(outcome) = self.commit(rv, obs) {
                return self.report(outcome, None);
            }
        }
    }

    /// Runs every running rank until it blocks, terminates or faults.
    fn run_ranks(&mut self, obs: &mut dyn Observer) -> Flow {
        for r in 0..self.machines.len() {
            while self.status[r] == RankStatus::Running {
                match self.machines[r].run(&mut self.budget) {
                    Step::Ran => return ControlFlow::Break(Outcome::BudgetExhausted),
                    Step::Blocked(req) => {
                        stop(obs.offered(r as i64, &req))?;
                        if req.offer == Offer::Apply && !self.opts.apply_rendezvous {
                            self.machines[r].complete(None);
                        } else {
                            self.status[r] = RankStatus::Blocked(req);
                        }
                    }
                    Step::Done => {
                        self.status[r] = RankStatus::Terminated;
                        stop(obs.finished(r as i64))?;
                    }
                    Step::Fault(e) => self.fault(r as i64, e, obs)?,
                }
            }
        }
        ControlFlow::Continue(())
    }

    fn fault(&mut self, rank: i64, e: RuntimeError, obs: &mut dyn Observer) -> Flow {
        self.status[rank as usize] = RankStatus::Faulted(e.clone());
        self.faults.push((rank, e.clone()));
        stop(obs.faulted(rank, &e))
    }

    fn pending(&self, rank: i64) -> Option<&Request> {
        match self.status.get(usize::try_from(rank).ok()?) {
            Some(RankStatus::Blocked(req)) => Some(req),
            _ => None,
        }
    }

    fn enabled(&self) -> Vec<Rendezvous> {
        let mut out = Vec::new();
        let first = self.pending(0).map(|r| r.offer);
        if let Some(offer) = first.filter(|o| o.is_collective()) {
            if (0..self.size()).all(|r| self.pending(r).is_some_and(|q| q.offer == offer)) {
                out.push(Rendezvous::All);
            }
        }
        for r in 0..self.size() {
            if let Some(Request { offer: Offer::Send { to }, .. }) = self.pending(r) {
                if self.pending(*to).is_some_and(|q| q.offer == Offer::Recv { from: r }) {
                    out.push(Rendezvous::Pair { from: r, to: *to });
                }
            }
        }
        out
    }

    fn choose(&mut self) -> Option<Rendezvous> {
        let mut enabled = self.enabled();
        if enabled.is_empty() {
            return None;
        }
        Some(match &mut self.rng {
            Some(rng) => {
                let i = rng.random_range(0..enabled.len());
                enabled.swap_remove(i)
            }
            None => enabled
                .into_iter()
                .min_by_key(|rv| match *rv {
                    Rendezvous::Pair { from, to } => from.min(to),
                    Rendezvous::All => 0,
                })
                .expect("non-empty"),
        })
    }

    fn commit(&mut self, rv: Rendezvous, obs: &mut dyn Observer) -> Flow {
        self.steps += 1;
        match rv {
            Rendezvous::Pair { from, to } => {
                let send = self.pending(from).cloned().expect("sender is blocked");
                let recv = self.pending(to).cloned().expect("receiver is blocked");
                let value = send.value.clone().expect("send carries a value");
                let event =
                    Event::PointToPoint { from, to, value: value.clone(), send_span: send.span, recv_span: recv.span };
                stop(obs.committed(self.steps, &event))?;
                self.resume(from, None);
                self.resume(to, Some(value));
            }
            Rendezvous::All => {
                let reqs: Vec<Request> = (0..self.size()).map(|r| self.pending(r).cloned().expect("blocked")).collect();
                let offer = reqs[0].offer;
                let contributions: Vec<Option<Value>> = reqs.iter().map(|q| q.value.clone()).collect();
                match collective_results(offer, &contributions) {
                    Ok(results) => {
                        let event = Event::Collective {
                            offer,
                            contributions,
                            results: results.clone(),
                            spans: reqs.iter().map(|q| q.span).collect(),
                        };
                        stop(obs.committed(self.steps, &event))?;
                        for (r, v) in results.into_iter().enumerate() {
                            self.resume(r as i64, v);
                        }
                    }
                    Err((rank, message)) => {
                        let span = reqs[rank as usize].span;
                        self.fault(rank, RuntimeError { message, span }, obs)?;
                    }
                }
            }
        }
        ControlFlow::Continue(())
    }

    fn resume(&mut self, rank: i64, v: Option<Value>) {
        self.machines[rank as usize].complete(v);
        self.status[rank as usize] = RankStatus::Running;
    }

    /// Follows wait-for edges from the smallest blocked rank.
    fn stall_cause(&self) -> (StallCause, Vec<Waiting>) {
        let waiting = |r: i64| self.pending(r).map(|q| Waiting { rank: r, offer: q.offer, span: q.span });
        let blocked: Vec<Waiting> = (0..self.size()).filter_map(waiting).collect();
        let Some(start) = blocked.first() else {
            return (StallCause::UnmatchedCollective, blocked);
        };
        let mut chain: Vec<Waiting> = Vec::new();
        let mut cur = start.clone();
        loop {
            if let Some(pos) = chain.iter().position(|w| w.rank == cur.rank) {
                return (StallCause::Cycle, chain.split_off(pos));
            }
            let Some(peer) = cur.peer() else {
                let collective: Vec<Waiting> = blocked.into_iter().filter(|w| w.offer.is_collective()).collect();
                let finished = (0..self.size()).any(|r| self.pending(r).is_none());
                let cause = if finished { StallCause::PeerFinished } else { StallCause::UnmatchedCollective };
                return (cause, collective);
            };
            chain.push(cur.clone());
            match waiting(peer) {
                Some(next) => cur = next,
                None => return (StallCause::PeerFinished, chain),
            }
        }
    }
}

fn concat(values: &[Value]) -> Result<Value, String> {
    if values.iter().all(|v| matches!(v, Value::Array(_))) {
        let items: Vec<Value> = values.iter().flat_map(|v| v.as_array().expect("checked").iter().cloned()).collect();
        let out = Value::Array(items);
        return if out.is_homogeneous() { Ok(out) } else { Err("gathered arrays have different element types".into()) };
    }
    let out = Value::Array(values.to_vec());
    if out.is_homogeneous() {
        Ok(out)
    } else {
        Err("gathered values have different types".into())
    }
}

/// What each rank receives from a collective. Errors name the rank to blame.
fn collective_results(offer: Offer, contributions: &[Option<Value>]) -> Result<Vec<Option<Value>>, (i64, String)> {
    let size = contributions.len();
    let all = || -> Vec<Value> { contributions.iter().map(|c| c.clone().expect("contributing collective")).collect() };
    let own = || contributions.to_vec();
    Ok(match offer {
        Offer::Broadcast { root } => vec![contributions[root as usize].clone(); size],
        Offer::Scatter { root } => {
            let v = contributions[root as usize].clone().expect("root supplies the array");
            let items = v.as_array().ok_or_else(|| (root, format!("scatter of a non-array {}", v.kind_name())))?;
            if items.len() % size != 0 {
                return Err((root, format!("cannot scatter {} elements evenly across {size} ranks", items.len())));
            }
            let chunk = items.len() / size;
            (0..size).map(|r| Some(Value::Array(items[r * chunk..(r + 1) * chunk].to_vec()))).collect()
        }
        Offer::Gather { root } => {
            let gathered = concat(&all()).map_err(|m| (root, m))?;
            let mut out = own();
            out[root as usize] = Some(gathered);
            out
        }
        Offer::Allgather => vec![Some(concat(&all()).map_err(|m| (0, m))?); size],
        Offer::Reduce { root, op } => {
            let folded = reduce_values(op, &all()).map_err(|e| (root, e.to_string()))?;
            let mut out = own();
            out[root as usize] = Some(folded);
            out
        }
        Offer::Allreduce { op } => vec![Some(reduce_values(op, &all()).map_err(|e| (0, e.to_string()))?); size],
        Offer::Apply => vec![None; size],
        Offer::Send { .. } | Offer::Recv { .. } => unreachable!("point-to-point offers are paired"),
    })
}

/// An SPMD program performing exactly the projected actions of every rank,
/// with canonical witness values. `env` fixes `size` and may supply values
/// for `val` binders.
pub fn synthesize(proto: &GlobalProtocol, size: i64, env: &Env) -> Result<Program, ProjectError> {
    let mut vals = env.clone();
    vals.insert("size", Value::Int(size));
    let mut segments = Vec::with_capacity(size.max(0) as usize);
    for rank in 0..size {
        let mut body = Vec::new();
        for (k, (a, w)) in expand_rank(proto, &vals, rank)?.into_iter().enumerate() {
            if let Some(stmt) = action_stmt(&a, w.as_ref(), rank, size, k) {
                body.push(stmt);
            }
        }
        segments.push(body);
    }
    let body = match segments.len() {
        0 => Vec::new(),
        _ if segments.iter().all(Vec::is_empty) => Vec::new(),
        _ => {
            let mut rest = segments.pop().expect("non-empty");
            for (rank, seg) in segments.into_iter().enumerate().rev() {
                let cond = Expr::bin(crate::program::BinOp::Eq, Expr::var("rank"), Expr::Int(rank as i64));
                rest = vec![StmtKind::If { cond, then: seg, otherwise: rest }.into()];
            }
            rest
        }
    };
    Ok(Program { externs: Vec::new(), body })
}

fn chunk_of(w: &Value, rank: i64, size: i64) -> Value {
    let items = w.as_array().unwrap_or_default();
    let n = items.len() / size as usize;
    Value::Array(items[rank as usize * n..(rank as usize + 1) * n].to_vec())
}

fn action_stmt(a: &LocalAction, w: Option<&Value>, rank: i64, size: i64, k: usize) -> Option<Stmt> {
    let lit = |v: &Value| Expr::literal(v);
    let w = || w.expect("value-carrying action has a witness");
    let var = format!("v{k}");
    let call = match a {
        LocalAction::EnterChoice { .. } => return None,
        LocalAction::Send { to, .. } => return Some(StmtKind::Send { to: Expr::Int(*to), value: lit(w()) }.into()),
        LocalAction::Apply { .. } => return Some(StmtKind::Apply(lit(w())).into()),
        LocalAction::Recv { from, .. } => CommCall::Recv { from: Expr::Int(*from) },
        LocalAction::Broadcast { root, .. } => CommCall::Broadcast { root: Expr::Int(*root), value: lit(w()) },
        LocalAction::Scatter { root, .. } => CommCall::Scatter { root: Expr::Int(*root), value: lit(w()) },
        LocalAction::Gather { root, .. } => {
            CommCall::Gather { root: Expr::Int(*root), value: lit(&chunk_of(w(), rank, size)) }
        }
        LocalAction::Reduce { root, op, .. } => CommCall::Reduce { root: Expr::Int(*root), op: *op, value: lit(w()) },
        LocalAction::Allgather { .. } => CommCall::Allgather { value: lit(&chunk_of(w(), rank, size)) },
        LocalAction::Allreduce { op, .. } => CommCall::Allreduce { op: *op, value: lit(w()) },
    };
    Some(StmtKind::Comm { var, call }.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program, parse_protocol};

    fn sim(src: &str, size: i64) -> DeadlockReport {
        run(&parse_program(src).unwrap(), &Bindings::new(size)).unwrap()
    }

    #[test]
    fn empty_program() {
        for size in 1..5 {
            let r = sim("", size);
            assert!(r.is_ok());
            assert!(!r.deadlocked());
            assert_eq!(r.steps_executed, 0);
        }
    }

    #[test]
    fn ring_of_sends_deadlocks() {
        let r = sim("send((rank - 1 + size) % size, 0)\nlet x = recv((rank + 1) % size)", 3);
        assert!(r.deadlocked());
        assert_eq!(r.cause, Some(StallCause::Cycle));
        let cycle: Vec<(i64, Offer)> = r.wait_for_cycle.iter().map(|w| (w.rank, w.offer)).collect();
        assert_eq!(cycle, vec![(0, Offer::Send { to: 2 }), (2, Offer::Send { to: 1 }), (1, Offer::Send { to: 0 })]);
        for w in &r.wait_for_cycle {
            assert_eq!(
                r.ranks[w.rank as usize],
                RankStatus::Blocked(Request { offer: w.offer, value: Some(Value::Int(0)), span: w.span })
            );
        }
        assert!(r.to_text().contains("(0, send -> 2) -> (2, send -> 1) -> (1, send -> 0)"), "{}", r.to_text());
    }

    #[test]
    fn exchange_completes_with_trace() {
        let prog =
            parse_program("if (rank = 0) { send(1, 5) let y = recv(1) } else { let x = recv(0) send(0, x + 1) }")
                .unwrap();
        let mut trace = Trace::default();
        let r = run_with(&prog, &Bindings::new(2), &Options::default(), &mut trace).unwrap();
        assert!(r.is_ok());
        assert_eq!(r.steps_executed, 2);
        assert_eq!(trace.lines, vec!["step 1: 0 -> 1 : int(5)", "step 2: 1 -> 0 : int(6)"]);
    }

    #[test]
    fn collectives_deliver_values() {
        let src = "let n = broadcast(0, 7)\n\
                   let part = scatter(0, [1, 2, 3, 4, 5, 6])\n\
                   let all = allgather(part)\n\
                   let s = allreduce(sum, rank)\n\
                   let m = reduce(0, max, rank * n)\n\
                   let g = gather(1, rank)";
        let prog = parse_program(src).unwrap();
        let mut trace = Trace::default();
        let r = run_with(&prog, &Bindings::new(3), &Options::default(), &mut trace).unwrap();
        assert!(r.is_ok(), "{}", r.to_text());
        assert_eq!(r.steps_executed, 6);
        assert_eq!(trace.lines[0], "step 1: collective broadcast root 0");
        assert_eq!(trace.lines[4], "step 5: collective reduce root 0 max");
    }

    #[test]
    fn collective_disagreement_stalls() {
        let r = sim("let x = broadcast(rank % 2, 1)", 2);
        assert!(r.deadlocked());
        assert_eq!(r.cause, Some(StallCause::UnmatchedCollective));
        assert_eq!(r.wait_for_cycle.len(), 2);
    }

    #[test]
    fn waiting_on_finished_rank() {
        let r = sim("if (rank = 1) { let x = recv(0) }", 2);
        assert!(r.deadlocked());
        assert_eq!(r.cause, Some(StallCause::PeerFinished));
        assert_eq!(r.wait_for_cycle[0].rank, 1);
    }

    #[test]
    fn ragged_scatter_faults_root() {
        let r = sim("let x = scatter(0, [1, 2, 3])", 2);
        assert_eq!(r.faults.len(), 1);
        assert_eq!(r.faults[0].0, 0);
        assert!(r.deadlocked());
    }

    #[test]
    fn faults_count_as_terminated() {
        let r = sim("let x = 1 / (rank - 1)", 3);
        assert_eq!(r.outcome, Outcome::Completed);
        assert_eq!(r.faults.len(), 1);
        assert!(!r.is_ok());
    }

    #[test]
    fn budget_is_distinct_from_deadlock() {
        let prog = parse_program("for i in 1 .. 1000 { let x = i }").unwrap();
        let opts = Options { max_steps: 100, ..Options::default() };
        let r = run_with(&prog, &Bindings::new(2), &opts, &mut ()).unwrap();
        assert!(r.budget_exhausted());
        assert!(!r.deadlocked());
    }

    #[test]
    fn apply_is_local_by_default() {
        let r = sim("if (rank = 0) { apply(1) }", 2);
        assert!(r.is_ok());
        assert_eq!(r.steps_executed, 0);
    }

    #[test]
    fn observer_can_stop() {
        struct StopAtFirst;
        impl Observer for StopAtFirst {
            fn committed(&mut self, _: u64, _: &Event) -> ControlFlow<()> {
                ControlFlow::Break(())
            }
        }
        let prog = parse_program("let x = allreduce(sum, 1)\nlet y = allreduce(sum, 1)").unwrap();
        let r = run_with(&prog, &Bindings::new(2), &Options::default(), &mut StopAtFirst).unwrap();
        assert_eq!(r.outcome, Outcome::Stopped);
        assert_eq!(r.steps_executed, 1);
    }

    #[test]
    fn synthesized_single_message() {
        let p = parse_protocol("protocol P (size >= 2) { message 0, 1 integer }").unwrap();
        let prog = synthesize(&p, 2, &Env::new(2)).unwrap();
        let expected = parse_program("if (rank = 0) { send(1, 0) } else { let v0 = recv(0) }").unwrap();
        assert_eq!(prog, expected);
        assert!(run(&prog, &Bindings::new(2)).unwrap().is_ok());
    }

    #[test]
    fn synthesized_skip_is_empty() {
        let p = parse_protocol("protocol P (true) { }").unwrap();
        assert_eq!(synthesize(&p, 3, &Env::new(3)).unwrap(), Program::default());
    }
}
