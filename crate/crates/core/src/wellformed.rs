//! Bounded well-formedness checking.
//!
//! A protocol is checked independently at every size in a [`SizeRange`].
//! Loops are enumerated; variables bound by `val` and the binding
//! collectives are tried with the boundary witnesses of their datatype
//! (see [`crate::witness::boundary`]). This is a bounded test, not a proof:
//! a protocol can be well formed for the witnesses and still fail for some
//! other value.

use std::fmt;
use std::str::FromStr;

use serde_json::json;

use crate::eval::{eval_int, eval_prop, EvalError};
use crate::project::MAX_FOREACH_ITERATIONS;
use crate::protocol::{Datatype, GlobalProtocol, IndexTerm, ProtocolTerm, TermKind};
use crate::span::{Diagnostic, Span};
use crate::value::{Env, Value};
use crate::witness::{self, WitnessError};

/// Path count above which a binder is only tried with its first witness.
const MAX_WITNESS_PATHS: usize = 4096;
/// Distinct findings reported per size before the rest are dropped.
const MAX_FINDINGS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeRange {
    pub min: i64,
    pub max: i64,
}

impl Default for SizeRange {
    fn default() -> Self {
        SizeRange { min: 1, max: 16 }
    }
}

impl SizeRange {
    pub fn new(min: i64, max: i64) -> Result<Self, String> {
        if min < 1 {
            return Err(format!("sizes start at 1, got {min}"));
        }
        if min > max {
            return Err(format!("empty size range {min}..{max}"));
        }
        Ok(SizeRange { min, max })
    }

    pub fn sizes(&self) -> std::ops::RangeInclusive<i64> {
        self.min..=self.max
    }
}

impl FromStr for SizeRange {
    type Err = String;

    /// `A..B` (inclusive) or a single size `N`.
    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<i64>().map_err(|_| format!("invalid size `{}`", t.trim()));
        match s.split_once("..") {
            Some((a, b)) => SizeRange::new(parse(a)?, parse(b)?),
            None => {
                let n = parse(s)?;
                SizeRange::new(n, n)
            }
        }
    }
}

impl fmt::Display for SizeRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

#[derive(Debug, Clone)]
pub enum SizeVerdict {
    Ok,
    /// The header proposition is false at this size.
    Excluded,
    Errors(Vec<Diagnostic>),
}

#[derive(Debug, Clone)]
pub struct SizeResult {
    pub size: i64,
    pub verdict: SizeVerdict,
}

#[derive(Debug, Clone)]
pub struct WellformednessReport {
    pub protocol: String,
    pub results: Vec<SizeResult>,
    pub inferred_min_size: Option<i64>,
}

impl WellformednessReport {
    pub fn checked_sizes(&self) -> Vec<i64> {
        self.results.iter().map(|r| r.size).collect()
    }

    /// True when no admissible size has errors.
    pub fn is_ok(&self) -> bool {
        !self.results.iter().any(|r| matches!(r.verdict, SizeVerdict::Errors(_)))
    }

    pub fn verdict(&self, size: i64) -> Option<&SizeVerdict> {
        self.results.iter().find(|r| r.size == size).map(|r| &r.verdict)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let results: Vec<_> = self
            .results
            .iter()
            .map(|r| match &r.verdict {
                SizeVerdict::Ok => json!({ "size": r.size, "verdict": "ok" }),
                SizeVerdict::Excluded => json!({ "size": r.size, "verdict": "excluded-by-precondition" }),
                SizeVerdict::Errors(diags) => json!({
                    "size": r.size,
                    "verdict": "errors",
                    "diagnostics": diags,
                }),
            })
            .collect();
        json!({
            "protocol": self.protocol,
            "ok": self.is_ok(),
            "inferredMinSize": self.inferred_min_size,
            "results": results,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("protocol {}\n", self.protocol);
        for r in &self.results {
            match &r.verdict {
                SizeVerdict::Ok => out.push_str(&format!("size {}: ok\n", r.size)),
                SizeVerdict::Excluded => out.push_str(&format!("size {}: excluded by precondition\n", r.size)),
                SizeVerdict::Errors(diags) => {
                    out.push_str(&format!("size {}: {} error(s)\n", r.size, diags.len()));
                    for d in diags {
                        out.push_str(&format!("  {d}\n"));
                    }
                }
            }
        }
        match self.inferred_min_size {
            Some(n) => out.push_str(&format!("inferred minimum size: {n}\n")),
            None => out.push_str("inferred minimum size: none in range\n"),
        }
        out
    }
}

/// Checks `p` at every size of `r`.
pub fn check_protocol(p: &GlobalProtocol, r: SizeRange) -> WellformednessReport {
    let per_size: Vec<(i64, Vec<Diagnostic>)> = r.sizes().map(|s| (s, check_at_size(p, s))).collect();
    let results = per_size
        .iter()
        .map(|(size, diags)| {
            let verdict = match eval_prop(&p.size_prop, &Env::new(*size)) {
                Ok(false) => SizeVerdict::Excluded,
                Ok(true) if diags.is_empty() => SizeVerdict::Ok,
                Ok(true) => SizeVerdict::Errors(diags.clone()),
                Err(e) => SizeVerdict::Errors(vec![Diagnostic::error(
                    "wf.eval-error",
                    format!("cannot evaluate the size proposition: {e}"),
                    p.span,
                )]),
            };
            SizeResult { size: *size, verdict }
        })
        .collect();
    WellformednessReport { protocol: p.name.clone(), results, inferred_min_size: min_clean_suffix(&per_size) }
}

fn min_clean_suffix(per_size: &[(i64, Vec<Diagnostic>)]) -> Option<i64> {
    let mut min = None;
    for (size, diags) in per_size.iter().rev() {
        if !diags.is_empty() {
            break;
        }
        min = Some(*size);
    }
    min
}

/// Smallest size from which the body (ignoring the header) is well formed
/// up to `r.max`.
pub fn infer_min_size(p: &GlobalProtocol, r: SizeRange) -> Option<i64> {
    let mut min = None;
    for size in r.sizes().rev() {
        if !check_at_size(p, size).is_empty() {
            break;
        }
        min = Some(size);
    }
    min
}

/// Findings for the body at one size, regardless of the header.
pub fn check_at_size(p: &GlobalProtocol, size: i64) -> Vec<Diagnostic> {
    let mut cx = Checker { diags: Vec::new() };
    cx.term(&p.body, &Env::new(size), 1);
    cx.diags
}

struct Checker {
    diags: Vec<Diagnostic>,
}

fn context(env: &Env) -> String {
    let bound: Vec<String> = env
        .iter()
        .filter(|(k, _)| *k != "size")
        .map(|(k, v)| match v {
            Value::Array(_) => format!("{k} = {}", v.describe()),
            _ => format!("{k} = {v}"),
        })
        .collect();
    if bound.is_empty() {
        format!(" (size = {})", env.size())
    } else {
        format!(" (size = {}, {})", env.size(), bound.join(", "))
    }
}

impl Checker {
    fn report(&mut self, code: &'static str, message: String, span: Span, env: &Env) {
        if self.diags.len() >= MAX_FINDINGS || self.diags.iter().any(|d| d.code == code && d.span.same_location(&span))
        {
            return;
        }
        self.diags.push(Diagnostic::error(code, format!("{message}{}", context(env)), span));
    }

    fn eval_error(&mut self, what: &str, e: EvalError, span: Span, env: &Env) {
        self.report("wf.eval-error", format!("cannot evaluate {what}: {e}"), span, env);
    }

    fn rank(&mut self, t: &IndexTerm, role: &str, span: Span, env: &Env) -> Option<i64> {
        match eval_int(t, env) {
            Ok(v) if (0..env.size()).contains(&v) => Some(v),
            Ok(v) => {
                let code = if role == "root" { "wf.root-out-of-range" } else { "wf.rank-out-of-range" };
                self.report(code, format!("{role} `{t}` = {v} is outside 0..{}", env.size() - 1), span, env);
                None
            }
            Err(e) => {
                self.eval_error(&format!("{role} `{t}`"), e, span, env);
                None
            }
        }
    }

    fn witness_error(&mut self, d: &Datatype, e: WitnessError, span: Span, env: &Env) {
        match e {
            WitnessError::Uninhabited(_) => self.report("wf.empty-type", format!("no value inhabits `{d}`"), span, env),
            WitnessError::Eval(e) => self.eval_error(&format!("datatype `{d}`"), e, span, env),
        }
    }

    /// The payload must have at least one inhabitant in this environment.
    fn payload(&mut self, d: &Datatype, span: Span, env: &Env) {
        if let Err(e) = witness::canonical(d, env) {
            self.witness_error(d, e, span, env);
        }
    }

    /// Scattered and gathered payloads describe the whole array, which must
    /// split into equal chunks.
    fn chunked_payload(&mut self, kind: &str, d: &Datatype, span: Span, env: &Env) {
        if !d.is_array() {
            self.report("wf.collective-non-array", format!("{kind} payload `{d}` must be an array type"), span, env);
            return;
        }
        match witness::canonical_divisible(d, env, env.size()) {
            Ok(_) => {}
            Err(WitnessError::Uninhabited(_)) if witness::canonical(d, env).is_ok() => self.report(
                "wf.indivisible-array",
                format!("no value of `{d}` splits evenly across {} ranks", env.size()),
                span,
                env,
            ),
            Err(e) => self.witness_error(d, e, span, env),
        }
    }

    /// Values a binder is checked with.
    fn binder_values(&mut self, t: &ProtocolTerm, env: &Env) -> Vec<Value> {
        let span = t.span;
        let r = match &t.kind {
            TermKind::Allgather { payload, .. } => {
                let size = env.size();
                witness::boundary(payload, env).map(|vs| {
                    let even: Vec<_> =
                        vs.into_iter().filter(|v| v.as_array().is_some_and(|a| a.len() as i64 % size == 0)).collect();
                    if even.is_empty() {
                        witness::canonical_divisible(payload, env, size).into_iter().collect()
                    } else {
                        even
                    }
                })
            }
            TermKind::Broadcast { payload, .. }
            | TermKind::Allreduce { payload, .. }
            | TermKind::Val { payload, .. } => witness::boundary(payload, env),
            _ => return Vec::new(),
        };
        match r {
            Ok(vs) => vs,
            Err(e) => {
                let payload = match &t.kind {
                    TermKind::Broadcast { payload, .. }
                    | TermKind::Allgather { payload, .. }
                    | TermKind::Allreduce { payload, .. }
                    | TermKind::Val { payload, .. } => payload,
                    _ => unreachable!(),
                };
                self.witness_error(payload, e, span, env);
                Vec::new()
            }
        }
    }

    fn term(&mut self, t: &ProtocolTerm, env: &Env, paths: usize) {
        match &t.kind {
            TermKind::Seq(items) => self.seq(items, env, paths),
            _ => self.seq(std::slice::from_ref(t), env, paths),
        }
    }

    fn seq(&mut self, items: &[ProtocolTerm], env: &Env, paths: usize) {
        for (i, item) in items.iter().enumerate() {
            self.item(item, env, paths);
            if let Some(var) = item.binder() {
                let rest = &items[i + 1..];
                if rest.is_empty() {
                    return;
                }
                let mut values = self.binder_values(item, env);
                if paths.saturating_mul(values.len()) > MAX_WITNESS_PATHS {
                    values.truncate(1);
                }
                let fan = paths * values.len().max(1);
                for v in values {
                    self.seq(rest, &env.with(var, v), fan);
                }
                return;
            }
        }
    }

    fn item(&mut self, t: &ProtocolTerm, env: &Env, paths: usize) {
        let span = t.span;
        match &t.kind {
            TermKind::Skip => {}
            TermKind::Seq(items) => self.seq(items, env, paths),
            TermKind::Message { from, to, payload } => {
                let f = self.rank(from, "sender", span, env);
                let r = self.rank(to, "receiver", span, env);
                if let (Some(f), Some(r)) = (f, r) {
                    if f == r {
                        self.report(
                            "wf.self-message",
                            format!("message from rank {f} to itself (`{from}` and `{to}` coincide)"),
                            span,
                            env,
                        );
                    }
                }
                self.payload(payload, span, env);
            }
            TermKind::Broadcast { root, payload, .. } => {
                self.rank(root, "root", span, env);
                self.payload(payload, span, env);
            }
            TermKind::Reduce { root, payload, .. } => {
                self.rank(root, "root", span, env);
                self.payload(payload, span, env);
            }
            TermKind::Scatter { root, payload } => {
                self.rank(root, "root", span, env);
                self.chunked_payload("scatter", payload, span, env);
            }
            TermKind::Gather { root, payload } => {
                self.rank(root, "root", span, env);
                self.chunked_payload("gather", payload, span, env);
            }
            TermKind::Allgather { payload, .. } => self.chunked_payload("allgather", payload, span, env),
            TermKind::Allreduce { payload, .. } | TermKind::Val { payload, .. } => self.payload(payload, span, env),
            TermKind::Foreach { var, lo, hi, body } => {
                let bounds = (eval_int(lo, env), eval_int(hi, env));
                let (lo, hi) = match bounds {
                    (Ok(l), Ok(h)) => (l, h),
                    (Err(e), _) | (_, Err(e)) => {
                        self.eval_error("foreach range", e, span, env);
                        return;
                    }
                };
                let count = (hi as i128 - lo as i128 + 1).max(0);
                if count > MAX_FOREACH_ITERATIONS as i128 {
                    self.report(
                        "wf.range-too-large",
                        format!(
                            "range {lo} .. {hi} is too large for bounded checking (limit {MAX_FOREACH_ITERATIONS})"
                        ),
                        span,
                        env,
                    );
                    return;
                }
                if count == 0 {
                    return;
                }
                if !body.free_vars().contains(var) {
                    // every iteration is identical
                    self.term(body, &env.with(var.clone(), Value::Int(lo)), paths);
                    return;
                }
                for i in lo..=hi {
                    self.term(body, &env.with(var.clone(), Value::Int(i)), paths);
                    if self.diags.len() >= MAX_FINDINGS {
                        return;
                    }
                }
            }
            TermKind::Choice { cond, then, otherwise } => match eval_prop(cond, env) {
                Ok(true) => self.term(then, env, paths),
                Ok(false) => self.term(otherwise, env, paths),
                Err(e) => self.eval_error(&format!("condition `{cond}`"), e, span, env),
            },
        }
    }
}

/// Convenience for callers that need the header verdict at one size.
pub fn admits_size(p: &GlobalProtocol, size: i64) -> Result<bool, EvalError> {
    eval_prop(&p.size_prop, &Env::new(size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_protocol;

    fn proto(src: &str) -> GlobalProtocol {
        parse_protocol(src).unwrap()
    }

    fn codes_at(p: &GlobalProtocol, size: i64) -> Vec<&'static str> {
        check_at_size(p, size).iter().map(|d| d.code).collect()
    }

    #[test]
    fn size_range_parsing() {
        assert_eq!("2..8".parse::<SizeRange>(), Ok(SizeRange { min: 2, max: 8 }));
        assert_eq!("5".parse::<SizeRange>(), Ok(SizeRange { min: 5, max: 5 }));
        assert!("0..3".parse::<SizeRange>().is_err());
        assert!("4..3".parse::<SizeRange>().is_err());
        assert!("a..3".parse::<SizeRange>().is_err());
    }

    #[test]
    fn self_message_everywhere() {
        let p = proto("protocol P (true) { message 0, 0 float }");
        let report = check_protocol(&p, SizeRange::default());
        assert!(report.results.iter().all(|r| matches!(r.verdict, SizeVerdict::Errors(_))));
        assert_eq!(codes_at(&p, 3), vec!["wf.self-message"]);
    }

    #[test]
    fn last_rank_message_fails_only_at_one() {
        let p = proto("protocol P (true) { message 0, size - 1 float }");
        let report = check_protocol(&p, SizeRange::default());
        for r in &report.results {
            assert_eq!(matches!(r.verdict, SizeVerdict::Errors(_)), r.size == 1, "size {}", r.size);
        }
        assert_eq!(report.inferred_min_size, Some(2));
    }

    #[test]
    fn excluded_sizes_are_not_errors() {
        let p = proto("protocol P (size >= 2) { message 0, size - 1 float }");
        let report = check_protocol(&p, SizeRange::new(1, 4).unwrap());
        assert!(matches!(report.verdict(1), Some(SizeVerdict::Excluded)));
        assert!(report.is_ok());
        assert_eq!(report.checked_sizes(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn inferred_minimum_sizes() {
        let r = SizeRange::default();
        assert_eq!(infer_min_size(&proto("protocol P (true) { }"), r), Some(1));
        assert_eq!(infer_min_size(&proto("protocol P (true) { message 2, 0 integer }"), r), Some(3));
        assert_eq!(infer_min_size(&proto("protocol P (true) { message 0, 0 integer }"), r), None);
    }

    #[test]
    fn empty_ranges_are_no_ops() {
        let p = proto("protocol P (true) { foreach i: 1 .. 0 { message 0, 0 float } }");
        assert!(check_at_size(&p, 2).is_empty());
    }

    #[test]
    fn loop_indices_are_checked() {
        let p = proto("protocol P (true) { foreach i: 0 .. size - 1 { message i, i + 1 float } }");
        let diags = check_at_size(&p, 3);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "wf.rank-out-of-range");
        assert!(diags[0].message.contains("i = 2"), "{}", diags[0].message);
    }

    #[test]
    fn binders_use_boundary_witnesses() {
        // n = 1 is the smallest positive value; it makes the message a self-message
        let p = proto("protocol P (true) { val n: positive message 1, n % size float }");
        assert_eq!(codes_at(&p, 4), vec!["wf.self-message"]);
        let p = proto("protocol P (true) { val n: {x: integer | x >= 2} message 1, n % size float }");
        assert!(codes_at(&p, 4).is_empty());
    }

    #[test]
    fn roots_and_conditions() {
        let p = proto("protocol P (true) { broadcast size x: integer }");
        assert_eq!(codes_at(&p, 2), vec!["wf.root-out-of-range"]);
        let p = proto("protocol P (true) { val a: integer[] if (a[0] = 1) { } }");
        assert_eq!(codes_at(&p, 2), vec!["wf.eval-error"]);
    }

    #[test]
    fn collective_array_payloads() {
        let p = proto("protocol P (true) { scatter 0 float }");
        assert_eq!(codes_at(&p, 2), vec!["wf.collective-non-array"]);
        let p = proto("protocol P (true) { scatter 0 float[3] }");
        assert_eq!(codes_at(&p, 2), vec!["wf.indivisible-array"]);
        assert!(codes_at(&p, 3).is_empty());
        let p = proto("protocol P (true) { val n: {x: natural | x % size = 0} gather 0 float[n] }");
        assert!(codes_at(&p, 4).is_empty());
    }

    #[test]
    fn range_guard() {
        let p = proto("protocol P (true) { foreach i: 0 .. 100000 { } }");
        assert_eq!(codes_at(&p, 2), vec!["wf.range-too-large"]);
    }

    #[test]
    fn uninhabited_payload() {
        let p = proto("protocol P (true) { val n: {x: integer | x > 0 and x < 0} }");
        assert_eq!(codes_at(&p, 2), vec!["wf.empty-type"]);
    }

    #[test]
    fn report_json_shape() {
        let p = proto("protocol P (size >= 2) { message 0, 1 float }");
        let j = check_protocol(&p, SizeRange::new(1, 2).unwrap()).to_json();
        assert_eq!(j["results"][0]["verdict"], "excluded-by-precondition");
        assert_eq!(j["results"][1]["verdict"], "ok");
        assert_eq!(j["inferredMinSize"], 2);
    }
}
