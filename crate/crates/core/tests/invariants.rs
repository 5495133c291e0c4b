mod common;

use common::{assert_collectives_complete, assert_duality, judge, synth, WfGen};
use partypes::bindings::Bindings;
use partypes::conform::check_conformance;
use partypes::corpus::{protocols, EXAMPLES};
use partypes::parser::{parse_program, parse_protocol};
use partypes::project::expansion_table;
use partypes::protocol::GlobalProtocol;
use partypes::simulate::{self, Event, Observer, Options, Policy, RankStatus};
use partypes::value::{Env, Value};
use proptest::prelude::*;
use std::ops::ControlFlow;

#[test]
fn duality_and_completeness_over_corpus() {
    for (file, text) in protocols() {
        let p = parse_protocol(text).unwrap();
        for size in 2..=16 {
            let table = expansion_table(&p, size, &Env::new(size)).unwrap();
            let what = format!("{file} at {size}");
            assert_duality(&table, &what);
            assert_collectives_complete(&table, &what);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn duality_and_completeness_over_random_protocols(seed in any::<u64>(), size in 2i64..=6, depth in 0u32..=4) {
        let (p, _) = WfGen::new(seed, size).protocol(depth);
        let table = expansion_table(&p, size, &Env::new(size)).unwrap();
        assert_duality(&table, "random");
        assert_collectives_complete(&table, "random");
    }

    #[test]
    fn trailing_pure_statement_keeps_the_verdict(seed in any::<u64>(), size in 2i64..=6, rank in 0i64..6) {
        let (p, _) = WfGen::new(seed, size).protocol(3);
        let mut prog = synth(&p, size);
        let before = judge(&prog, &p, size);
        prog.body.extend(frame_stmt(rank % size));
        prop_assert_eq!(judge(&prog, &p, size), before);
    }
}

fn frame_stmt(rank: i64) -> Vec<partypes::program::Stmt> {
    parse_program(&format!("if (rank = {rank}) {{ let frameExtra = 3 * 4 + rank }}")).unwrap().body
}

#[test]
fn trailing_pure_statement_keeps_corpus_verdicts() {
    for e in &EXAMPLES {
        let proto = e.parse_protocol().unwrap();
        let file = e.parse_bindings().unwrap();
        for size in [2, 3, 5] {
            let b = file.for_size(size);
            let plain = e.parse_program().unwrap();
            let mut framed = plain.clone();
            framed.body.extend(frame_stmt(size - 1));
            let verdict = |prog| {
                let c = check_conformance(prog, &proto, &b).unwrap().passed();
                let s = simulate::run(prog, &b).unwrap().is_ok();
                (c, s)
            };
            assert_eq!(verdict(&framed), verdict(&plain), "{} at {size}", e.name);
        }
    }
}

#[test]
fn reports_are_deterministic() {
    for e in &EXAMPLES {
        let proto = e.parse_protocol().unwrap();
        let prog = e.parse_program().unwrap();
        let file = e.parse_bindings().unwrap();
        for size in [2, 4] {
            let b = file.for_size(size);
            let c1 = check_conformance(&prog, &proto, &b).unwrap().to_json().to_string();
            let c2 = check_conformance(&prog, &proto, &b).unwrap().to_json().to_string();
            assert_eq!(c1, c2, "{}", e.name);
            assert_eq!(simulate::run(&prog, &b).unwrap(), simulate::run(&prog, &b).unwrap(), "{}", e.name);
        }
    }
}

#[test]
fn random_schedules_agree_with_min_rank() {
    for e in &EXAMPLES {
        let prog = e.parse_program().unwrap();
        let file = e.parse_bindings().unwrap();
        for size in [3, 4] {
            let b = file.for_size(size);
            let reference = simulate::run(&prog, &b).unwrap();
            for seed in 0..100 {
                let opts = Options { policy: Policy::Random(seed), ..Options::default() };
                let r = simulate::run_with(&prog, &b, &opts, &mut ()).unwrap();
                assert_eq!(r.outcome, reference.outcome, "{} at {size}, seed {seed}", e.name);
            }
        }
    }
}

#[test]
fn deadlock_cycles_are_backed_by_rank_states() {
    let e = EXAMPLES.iter().find(|e| e.name == "fdiff-naive").unwrap();
    let prog = e.parse_program().unwrap();
    let file = e.parse_bindings().unwrap();
    for size in 2..=8 {
        let r = simulate::run(&prog, &file.for_size(size)).unwrap();
        assert!(r.deadlocked(), "size {size}");
        let cycle = &r.wait_for_cycle;
        assert!(!cycle.is_empty());
        for w in cycle {
            assert!(matches!(r.ranks[w.rank as usize], RankStatus::Blocked(_)), "rank {} is not blocked", w.rank);
        }
        for pair in cycle.windows(2) {
            assert_eq!(pair[0].peer(), Some(pair[1].rank));
        }
        assert_eq!(cycle.last().unwrap().peer(), Some(cycle[0].rank));
    }
}

type PerRank = Vec<Option<Value>>;

/// Collects (contributions, results) of each collective.
#[derive(Default)]
struct Collectives(Vec<(PerRank, PerRank)>);

impl Observer for Collectives {
    fn committed(&mut self, _step: u64, event: &Event) -> ControlFlow<()> {
        if let Event::Collective { contributions, results, .. } = event {
            self.0.push((contributions.clone(), results.clone()));
        }
        ControlFlow::Continue(())
    }
}

fn bits(v: &Value) -> u64 {
    match v {
        Value::Float(x) => x.to_bits(),
        other => panic!("expected a float, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn broadcast_delivers_the_root_value_bit_for_bit(
        x in any::<f64>().prop_filter("finite", |x| x.is_finite()),
        size in 2i64..=6,
        root in 0i64..6,
    ) {
        let root = root % size;
        let prog = parse_program(&format!("extern v: float\nlet b = broadcast({root}, v * float(rank + 1))")).unwrap();
        let b = Bindings::new(size).with("v", Value::Float(x));
        let mut obs = Collectives::default();
        let report = simulate::run_with(&prog, &b, &Options::default(), &mut obs).unwrap();
        prop_assert!(report.is_ok());
        let expected = (x * (root + 1) as f64).to_bits();
        prop_assert_eq!(obs.0.len(), 1);
        for r in obs.0[0].1.iter() {
            prop_assert_eq!(bits(r.as_ref().unwrap()), expected);
        }

        let proto: GlobalProtocol = parse_protocol(&format!("protocol B (size >= 1) {{ broadcast {root} b: float }}")).unwrap();
        let report = check_conformance(&prog, &proto, &b).unwrap();
        prop_assert!(report.passed());
        prop_assert_eq!(bits(report.collective_log[0].value.as_ref().unwrap()), expected);
    }
}
