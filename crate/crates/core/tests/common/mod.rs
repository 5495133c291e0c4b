//! Shared generators and helpers for the integration tests.
#![allow(dead_code)]

use partypes::bindings::Bindings;
use partypes::conform::check_conformance;
use partypes::program::{Program, Stmt, StmtKind};
use partypes::project::LocalAction;
use partypes::protocol::{
    CmpOp, Datatype, GlobalProtocol, IndexOp, IndexTerm, Proposition, ProtocolTerm, ReduceOp, TermKind,
};
use partypes::simulate::{self, synthesize};
use partypes::value::Env;
use partypes::wellformed::check_at_size;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

pub const OPS: [ReduceOp; 3] = [ReduceOp::Sum, ReduceOp::Max, ReduceOp::Min];

fn pick<'a, T>(rng: &mut StdRng, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

/// Arbitrary well-scoped protocol ASTs: every variable is bound where it is
/// used and binder names are never reused, so the parser accepts the
/// printed text. Nothing here is guaranteed to be well-formed.
pub struct AstGen {
    rng: StdRng,
    fresh: usize,
}

impl AstGen {
    pub fn new(seed: u64) -> Self {
        AstGen { rng: StdRng::seed_from_u64(seed), fresh: 0 }
    }

    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    pub fn protocol(&mut self, depth: u32) -> GlobalProtocol {
        let scope = vec!["size".to_string()];
        let header = self.prop(&scope, 2);
        let body = self.seq(&scope, depth);
        GlobalProtocol::new("P", header, body)
    }

    fn index(&mut self, scope: &[String], depth: u32) -> IndexTerm {
        let leaf = depth == 0 || self.rng.random_bool(0.4);
        if leaf {
            return match self.rng.random_range(0..3) {
                0 => IndexTerm::int(self.rng.random_range(0..50)),
                _ => IndexTerm::var(pick(&mut self.rng, scope).clone()),
            };
        }
        match self.rng.random_range(0..9) {
            0..=6 => {
                let op = *pick(
                    &mut self.rng,
                    &[IndexOp::Add, IndexOp::Sub, IndexOp::Mul, IndexOp::Div, IndexOp::Mod, IndexOp::Max, IndexOp::Min],
                );
                IndexTerm::bin(op, self.index(scope, depth - 1), self.index(scope, depth - 1))
            }
            7 => IndexTerm::length(IndexTerm::var(pick(&mut self.rng, scope).clone())),
            _ => IndexTerm::index(IndexTerm::var(pick(&mut self.rng, scope).clone()), self.index(scope, depth - 1)),
        }
    }

    fn prop(&mut self, scope: &[String], depth: u32) -> Proposition {
        let leaf = depth == 0 || self.rng.random_bool(0.5);
        if leaf {
            if self.rng.random_bool(0.1) {
                return Proposition::True;
            }
            let op = *pick(&mut self.rng, &[CmpOp::Le, CmpOp::Lt, CmpOp::Eq, CmpOp::Ge, CmpOp::Gt, CmpOp::Ne]);
            return Proposition::cmp(op, self.index(scope, 2), self.index(scope, 2));
        }
        match self.rng.random_range(0..3) {
            0 => Proposition::and(self.prop(scope, depth - 1), self.prop(scope, depth - 1)),
            1 => Proposition::or(self.prop(scope, depth - 1), self.prop(scope, depth - 1)),
            _ => Proposition::not(self.prop(scope, depth - 1)),
        }
    }

    fn datatype(&mut self, scope: &[String], depth: u32) -> Datatype {
        let leaf = depth == 0 || self.rng.random_bool(0.4);
        if leaf {
            return match self.rng.random_range(0..4) {
                0 => Datatype::Integer,
                1 => Datatype::Float,
                2 => Datatype::natural(),
                _ => Datatype::positive(),
            };
        }
        match self.rng.random_range(0..3) {
            0 => Datatype::array(self.datatype(scope, depth - 1)),
            1 => {
                let len = self.index(scope, 1);
                Datatype::sized_array(self.datatype(scope, depth - 1), len)
            }
            _ => {
                let var = self.name("r");
                let base = self.datatype(scope, depth - 1);
                let mut inner = scope.to_vec();
                inner.push(var.clone());
                let prop = self.prop(&inner, 1);
                Datatype::refinement(var, base, prop)
            }
        }
    }

    fn seq(&mut self, scope: &[String], depth: u32) -> ProtocolTerm {
        let mut scope = scope.to_vec();
        let n = self.rng.random_range(0..4);
        let items = (0..n).map(|_| self.item(&mut scope, depth)).collect();
        ProtocolTerm::seq(items)
    }

    fn item(&mut self, scope: &mut Vec<String>, depth: u32) -> ProtocolTerm {
        let max = if depth == 0 { 9 } else { 12 };
        let kind = match self.rng.random_range(0..max) {
            0 | 1 => TermKind::Message {
                from: self.index(scope, 2),
                to: self.index(scope, 2),
                payload: self.datatype(scope, 2),
            },
            2 => TermKind::Scatter { root: self.index(scope, 1), payload: self.datatype(scope, 2) },
            3 => TermKind::Gather { root: self.index(scope, 1), payload: self.datatype(scope, 2) },
            4 => TermKind::Reduce {
                root: self.index(scope, 1),
                op: *pick(&mut self.rng, &OPS),
                payload: self.datatype(scope, 2),
            },
            5..=8 => {
                let payload = self.datatype(scope, 2);
                let root = self.index(scope, 1);
                let op = *pick(&mut self.rng, &OPS);
                let var = self.name("v");
                let kind = match self.rng.random_range(0..4) {
                    0 => TermKind::Val { var: var.clone(), payload },
                    1 => TermKind::Broadcast { root, var: var.clone(), payload },
                    2 => TermKind::Allgather { var: var.clone(), payload },
                    _ => TermKind::Allreduce { op, var: var.clone(), payload },
                };
                scope.push(var);
                kind
            }
            9 => {
                let var = self.name("i");
                let (lo, hi) = (self.index(scope, 1), self.index(scope, 2));
                let mut inner = scope.clone();
                inner.push(var.clone());
                let body = self.seq(&inner, depth - 1);
                TermKind::Foreach { var, lo, hi, body: Box::new(body) }
            }
            10 => {
                let cond = self.prop(scope, 2);
                let then = self.seq(scope, depth - 1);
                let otherwise = self.seq(scope, depth - 1);
                TermKind::Choice { cond, then: Box::new(then), otherwise: Box::new(otherwise) }
            }
            _ => return self.seq(scope, depth - 1),
        };
        kind.into()
    }
}

/// Protocols built from a vocabulary of size-generic patterns, kept only if
/// they are well-formed at the requested size.
pub struct WfGen {
    rng: StdRng,
    fresh: usize,
    size: i64,
    /// Nesting of `0 .. size - 1` loops, bounded to keep expansions small.
    wide_loops: u32,
}

/// A binder usable in later index terms.
#[derive(Clone)]
struct Known {
    name: String,
    /// Small non-negative integer with no array structure.
    small_int: bool,
}

impl WfGen {
    pub fn new(seed: u64, size: i64) -> Self {
        WfGen { rng: StdRng::seed_from_u64(seed), fresh: 0, size, wide_loops: 0 }
    }

    /// Draws candidates until one is well-formed at the generator's size.
    /// Returns the protocol and the number of rejected drafts.
    pub fn protocol(&mut self, depth: u32) -> (GlobalProtocol, usize) {
        let header = Proposition::cmp(CmpOp::Ge, IndexTerm::var("size"), IndexTerm::int(2));
        for rejected in 0.. {
            self.fresh = 0;
            self.wide_loops = 0;
            let body = self.seq(&[], &mut Vec::new(), depth);
            let p = GlobalProtocol::new("Random", header.clone(), body).normalize();
            if check_at_size(&p, self.size).is_empty() {
                return (p, rejected);
            }
        }
        unreachable!()
    }

    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    /// A term denoting a rank in `0..size`.
    fn rank(&mut self, loops: &[String]) -> IndexTerm {
        let size = IndexTerm::var("size");
        let choices = if loops.is_empty() { 3 } else { 6 };
        match self.rng.random_range(0..choices) {
            0 => IndexTerm::int(0),
            1 => IndexTerm::sub(size, IndexTerm::int(1)),
            2 => IndexTerm::bin(IndexOp::Mod, IndexTerm::int(self.rng.random_range(1..4)), size),
            3 => IndexTerm::var(pick(&mut self.rng, loops).clone()),
            4 => IndexTerm::bin(
                IndexOp::Mod,
                IndexTerm::add(IndexTerm::var(pick(&mut self.rng, loops).clone()), IndexTerm::int(1)),
                size,
            ),
            _ => IndexTerm::bin(
                IndexOp::Mod,
                IndexTerm::add(
                    IndexTerm::sub(IndexTerm::var(pick(&mut self.rng, loops).clone()), IndexTerm::int(1)),
                    size.clone(),
                ),
                size,
            ),
        }
    }

    fn scalar(&mut self, known: &[Known]) -> Datatype {
        let ints: Vec<&Known> = known.iter().filter(|k| k.small_int).collect();
        match self.rng.random_range(0..6) {
            0 => Datatype::Integer,
            1 => Datatype::Float,
            2 => Datatype::natural(),
            3 => Datatype::positive(),
            4 if !ints.is_empty() => {
                let k = pick(&mut self.rng, &ints).name.clone();
                Datatype::refinement(
                    "x",
                    Datatype::Integer,
                    Proposition::cmp(CmpOp::Ge, IndexTerm::var("x"), IndexTerm::var(k)),
                )
            }
            _ => Datatype::refinement(
                "x",
                Datatype::Integer,
                Proposition::and(
                    Proposition::cmp(CmpOp::Ge, IndexTerm::var("x"), IndexTerm::int(2)),
                    Proposition::cmp(CmpOp::Le, IndexTerm::var("x"), IndexTerm::int(9)),
                ),
            ),
        }
    }

    /// A length that is a multiple of `size`.
    fn divisible_len(&mut self) -> IndexTerm {
        let size = IndexTerm::var("size");
        match self.rng.random_range(0..3) {
            0 => size,
            1 => IndexTerm::bin(IndexOp::Mul, IndexTerm::int(2), size),
            _ => IndexTerm::bin(IndexOp::Mul, size, IndexTerm::int(3)),
        }
    }

    fn payload(&mut self, known: &[Known]) -> Datatype {
        match self.rng.random_range(0..4) {
            0 => Datatype::sized_array(Datatype::Float, IndexTerm::int(self.rng.random_range(0..4))),
            1 => Datatype::array(Datatype::Integer),
            _ => self.scalar(known),
        }
    }

    fn seq(&mut self, known: &[Known], loops: &mut Vec<String>, depth: u32) -> ProtocolTerm {
        let n = self.rng.random_range(1..5);
        let mut items = Vec::new();
        let mut scope = known.to_vec();
        for _ in 0..n {
            items.push(self.item(&mut scope, loops, depth));
        }
        ProtocolTerm::seq(items)
    }

    fn item(&mut self, known: &mut Vec<Known>, loops: &mut Vec<String>, depth: u32) -> ProtocolTerm {
        let max = if depth == 0 { 10 } else { 13 };
        match self.rng.random_range(0..max) {
            0..=3 => {
                let from = self.rank(loops);
                let to = match self.rng.random_range(0..2) {
                    0 => IndexTerm::bin(
                        IndexOp::Mod,
                        IndexTerm::add(from.clone(), IndexTerm::int(1)),
                        IndexTerm::var("size"),
                    ),
                    _ => self.rank(loops),
                };
                ProtocolTerm::message(from, to, self.payload(known))
            }
            4 => {
                let var = self.name("v");
                let payload = self.scalar(known);
                let small = matches!(payload, Datatype::Refinement { .. });
                known.push(Known { name: var.clone(), small_int: small });
                ProtocolTerm::val(var, payload)
            }
            5 => {
                let var = self.name("b");
                let payload = self.scalar(known);
                let small = matches!(payload, Datatype::Refinement { .. });
                let root = self.rank(loops);
                known.push(Known { name: var.clone(), small_int: small });
                ProtocolTerm::broadcast(root, var, payload)
            }
            6 => {
                let root = self.rank(loops);
                let len = self.divisible_len();
                TermKind::Scatter { root, payload: Datatype::sized_array(Datatype::Float, len) }.into()
            }
            7 => {
                let root = self.rank(loops);
                let len = self.divisible_len();
                let elem = pick(&mut self.rng, &[Datatype::Float, Datatype::Integer]).clone();
                let payload = Datatype::sized_array(elem, len);
                match self.rng.random_range(0..2) {
                    0 => TermKind::Gather { root, payload }.into(),
                    _ => {
                        let var = self.name("g");
                        known.push(Known { name: var.clone(), small_int: false });
                        TermKind::Allgather { var, payload }.into()
                    }
                }
            }
            8 => {
                let root = self.rank(loops);
                let op = *pick(&mut self.rng, &OPS);
                let payload = pick(&mut self.rng, &[Datatype::Float, Datatype::Integer]).clone();
                TermKind::Reduce { root, op, payload }.into()
            }
            9 => {
                let op = *pick(&mut self.rng, &OPS);
                let var = self.name("a");
                let payload = pick(&mut self.rng, &[Datatype::Float, Datatype::Integer, Datatype::natural()]).clone();
                known.push(Known { name: var.clone(), small_int: false });
                TermKind::Allreduce { op, var, payload }.into()
            }
            10 | 11 => {
                let var = self.name("i");
                let ints: Vec<String> = known.iter().filter(|k| k.small_int).map(|k| k.name.clone()).collect();
                let (lo, hi, wide) = match self.rng.random_range(0..3) {
                    0 if self.wide_loops < 2 => {
                        (IndexTerm::int(0), IndexTerm::sub(IndexTerm::var("size"), IndexTerm::int(1)), true)
                    }
                    1 if !ints.is_empty() => {
                        let k = pick(&mut self.rng, &ints).clone();
                        (IndexTerm::int(1), IndexTerm::bin(IndexOp::Min, IndexTerm::var(k), IndexTerm::int(3)), false)
                    }
                    _ => (IndexTerm::int(0), IndexTerm::int(self.rng.random_range(0..3)), false),
                };
                if wide {
                    self.wide_loops += 1;
                }
                loops.push(var.clone());
                let mut inner = known.clone();
                inner.push(Known { name: var.clone(), small_int: true });
                let body = self.seq(&inner, loops, depth - 1);
                loops.pop();
                if wide {
                    self.wide_loops -= 1;
                }
                ProtocolTerm::foreach(var, lo, hi, body)
            }
            _ => {
                let ints: Vec<String> = known.iter().filter(|k| k.small_int).map(|k| k.name.clone()).collect();
                let lhs = if ints.is_empty() || self.rng.random_bool(0.3) {
                    IndexTerm::var("size")
                } else {
                    IndexTerm::var(pick(&mut self.rng, &ints).clone())
                };
                let cond = Proposition::cmp(CmpOp::Gt, lhs, IndexTerm::int(self.rng.random_range(0..5)));
                let then = self.seq(known, loops, depth - 1);
                let otherwise = self.seq(known, loops, depth - 1);
                ProtocolTerm::choice(cond, then, otherwise)
            }
        }
    }
}

/// The per-rank statement lists of a synthesized program.
pub fn segments_mut(prog: &mut Program, size: i64) -> Vec<&mut Vec<Stmt>> {
    let mut out = Vec::new();
    let mut cur = &mut prog.body;
    for _ in 0..size - 1 {
        if cur.is_empty() {
            return out;
        }
        let Some(StmtKind::If { then, otherwise, .. }) = cur.first_mut().map(|s| &mut s.kind) else {
            panic!("synthesized programs dispatch on rank");
        };
        out.push(then);
        cur = otherwise;
    }
    out.push(cur);
    out
}

fn is_p2p(s: &Stmt) -> bool {
    matches!(&s.kind, StmtKind::Send { .. } | StmtKind::Comm { call: partypes::program::CommCall::Recv { .. }, .. })
}

/// Swaps one adjacent statement pair involving a send or receive in one rank's
/// code. Returns false when the program has no such pair.
pub fn swap_p2p(prog: &mut Program, size: i64, seed: u64) -> bool {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut segs = segments_mut(prog, size);
    let mut sites = Vec::new();
    for (r, seg) in segs.iter().enumerate() {
        for k in 0..seg.len().saturating_sub(1) {
            if is_p2p(&seg[k]) || is_p2p(&seg[k + 1]) {
                sites.push((r, k));
            }
        }
    }
    if sites.is_empty() {
        return false;
    }
    let (r, k) = sites[rng.random_range(0..sites.len())];
    segs[r].swap(k, k + 1);
    true
}

/// Result of running a synthesized (or mutated) program both ways.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub conforms: bool,
    pub deadlock_free: bool,
}

pub fn judge(prog: &Program, proto: &GlobalProtocol, size: i64) -> Outcome {
    let b = Bindings::new(size);
    let report = check_conformance(prog, proto, &b).expect("preconditions hold for generated protocols");
    let sim = simulate::run(prog, &b).expect("synthesized programs declare no externs");
    Outcome { conforms: report.passed(), deadlock_free: sim.is_ok() }
}

pub fn synth(proto: &GlobalProtocol, size: i64) -> Program {
    synthesize(proto, size, &Env::new(size)).expect("well-formed protocols project")
}

/// Every send from `a` to `b` is matched, in order, by a receive at `b`
/// from `a` with the same payload type.
pub fn assert_duality(table: &[Vec<LocalAction>], what: &str) {
    let n = table.len() as i64;
    for a in 0..n {
        for b in 0..n {
            let sends: Vec<_> = table[a as usize]
                .iter()
                .filter_map(|x| match x {
                    LocalAction::Send { to, payload } if *to == b => Some(payload),
                    _ => None,
                })
                .collect();
            let recvs: Vec<_> = table[b as usize]
                .iter()
                .filter_map(|x| match x {
                    LocalAction::Recv { from, payload } if *from == a => Some(payload),
                    _ => None,
                })
                .collect();
            assert_eq!(sends.len(), recvs.len(), "{what}: {a} -> {b} send/recv counts differ");
            for (s, r) in sends.iter().zip(&recvs) {
                assert!(s.alpha_eq(r), "{what}: {a} -> {b} payloads {s} vs {r}");
            }
        }
    }
}

/// Each rank sees the same collectives, and the same branch decisions, in
/// the same order.
pub fn assert_collectives_complete(table: &[Vec<LocalAction>], what: &str) {
    let shared = |row: &Vec<LocalAction>| -> Vec<LocalAction> {
        row.iter().filter(|a| a.is_collective() || matches!(a, LocalAction::EnterChoice { .. })).cloned().collect()
    };
    let first = shared(&table[0]);
    for (r, row) in table.iter().enumerate().skip(1) {
        let mine = shared(row);
        assert_eq!(mine.len(), first.len(), "{what}: rank {r} has a different number of collectives");
        for (k, (x, y)) in first.iter().zip(&mine).enumerate() {
            assert!(x.equivalent(y), "{what}: collective {k} differs between rank 0 ({x}) and rank {r} ({y})");
        }
    }
}
