use std::collections::BTreeSet;

use super::*;
use crate::frontend::ast::{Expr, Stmt, StmtKind};
use crate::gc::Selector;
use crate::heaps::Value;
use crate::heaps::Loc;

const FIG1: &str = include_str!("../../../../corpus/figures/fig1.lua");
const FIG1_BOUNDED: &str = include_str!("../../../../corpus/figures/fig1_bounded.lua");
const FIG2: &str = include_str!("../../../../corpus/figures/fig2.lua");
const FIG3: &str = include_str!("../../../../corpus/figures/fig3.lua");
const FIG3_SWAPPED: &str = include_str!("../../../../corpus/figures/fig3_swapped.lua");

fn cfg(src: &str) -> Configuration {
    Configuration::from_source(src).unwrap()
}

fn run_with(src: &str, p: Policy, mode: GcMode) -> Run {
    run(cfg(src), &Schedule::new(p, mode), 10_000).unwrap()
}

#[test]
fn policy_specs_round_trip() {
    for s in ["never", "eager", "periodic=3", "random=7,0.25", "scripted=1,4"] {
        assert_eq!(s.parse::<Policy>().unwrap().to_string(), s);
    }
    for s in ["sometimes", "periodic=0", "random=1,2", "eager=1"] {
        assert!(s.parse::<Policy>().is_err(), "{s}");
    }
    assert_eq!("fin-weak".parse::<GcMode>().unwrap(), GcMode::FinWeak);
    assert_eq!("seeded=4".parse::<SelectorSpec>().unwrap(), SelectorSpec::Seeded(4));
}

#[test]
fn fig3_finalizers_run_most_recent_first() {
    for p in [Policy::Never, Policy::Eager, Policy::Periodic(2)] {
        let r = run_with(FIG3, p, GcMode::Fin);
        assert_eq!(r.output, vec![
            "table: 0x00000001\ttable: 0x00000002",
            "bye\ttable: 0x00000002",
            "bye\ttable: 0x00000001"
        ]);
    }
    let r = run_with(FIG3_SWAPPED, Policy::Never, GcMode::Fin);
    assert_eq!(&r.output[1..], ["bye\ttable: 0x00000001", "bye\ttable: 0x00000002"]);
}

#[test]
fn fig2_marks_only_with_gc_field_present() {
    for p in [Policy::Never, Policy::Eager] {
        let r = run_with(FIG2, p, GcMode::FinWeak);
        assert_eq!(r.output, vec!["goodbye"]);
        assert_eq!(r.result.kind, ResultKind::Empty);
        assert!(r.last.theta.tables.len() <= 1, "only the metatable b may remain");
    }
}

#[test]
fn fig1_depends_on_schedule() {
    let never = run_with(FIG1, Policy::Never, GcMode::FinWeak);
    assert_eq!(never.result.kind, ResultKind::Divergent);
    assert_eq!(never.observation().result, "⊥(fuel)");
    let eager = run_with(FIG1, Policy::Eager, GcMode::FinWeak);
    assert_eq!(eager.result.summary(), "return 1");
}

#[test]
fn deterministic_program_agrees_across_schedules() {
    let src = "local t = {1, {2}}\nlocal u = {}\nu = nil\nlocal f = function() return t[2] end\nreturn f()";
    let mut scheds = correctness_schedules(GcMode::Simple, &[1, 2, 3]);
    scheds.push(Schedule::new(Policy::Random { seed: 9, p: 0.7 }, GcMode::Simple).with_selector(SelectorSpec::Seeded(9)));
    let obs = observations(&cfg(src), &Explorer::Sample(scheds), 1000).unwrap();
    assert_eq!(obs.len(), 1);
    let o = obs.iter().next().unwrap();
    assert_eq!(o.result, "return tid1");
}

#[test]
fn seeded_runs_reproduce_traces() {
    let s = Schedule::new(Policy::Random { seed: 5, p: 0.5 }, GcMode::FinWeak).with_selector(SelectorSpec::Seeded(5));
    let a = run(cfg(FIG3), &s, 1000).unwrap();
    let b = run(cfg(FIG3), &s, 1000).unwrap();
    let lines = |r: &Run| r.trace.iter().map(TraceEntry::to_json_line).collect::<Vec<_>>();
    assert_eq!(lines(&a), lines(&b));
}

#[test]
fn result_restricts_stores_to_reachable() {
    let r = run_with("local g = {}\nreturn 5", Policy::Never, GcMode::Simple);
    assert!(r.result.heap.tables.is_empty() && r.result.heap.refs.is_empty());
    let r = run_with("local x = 1\nlocal t = {f = function() return x end}\nreturn t", Policy::Never, GcMode::Simple);
    assert_eq!(r.result.heap.tables.len(), 1);
    assert_eq!(r.result.heap.closures.len(), 1);
    assert_eq!(r.result.heap.refs.len(), 1);
    let r = run_with("", Policy::Eager, GcMode::FinWeak);
    assert_eq!(r.result.summary(), ";");
}

#[test]
fn exhaustive_witnesses_nondeterminism() {
    let e = explore(&cfg(FIG1_BOUNDED), &Explorer::Exhaustive(Bounds::new(GcMode::FinWeak)), 1000).unwrap();
    let results: BTreeSet<_> = e.observations.iter().map(|o| o.result.clone()).collect();
    assert!(results.len() >= 2, "{results:?}");
    assert_eq!(e.stats.refinalizations, 0);
    assert!(!e.stats.truncated);
    let e = explore(&cfg(""), &Explorer::Exhaustive(Bounds::new(GcMode::FinWeak)), 10).unwrap();
    assert_eq!(e.observations.len(), 1);
    assert_eq!(e.observations.iter().next().unwrap().kind, ResultKind::Empty);
}

#[test]
fn exhaustive_deterministic_program_is_singleton() {
    let src = "local a = {}\na = {}\nlocal b = {a}\nreturn b[1]";
    let b = Bounds { subsets: Some(1), ..Bounds::new(GcMode::FinWeak) };
    let obs = observations(&cfg(src), &Explorer::Exhaustive(b), 100).unwrap();
    assert_eq!(obs.len(), 1);
}

#[test]
fn postponement_holds_on_small_programs() {
    let r = check_postponement(&cfg("local a = {}\na = {1}\nlocal b = {a}\nb = nil\nreturn a[1]"), 40, 1).unwrap();
    assert!(r.checked > 0);
    assert!(r.holds(), "{:?}", r.counterexamples);
    let r = check_postponement(&cfg("return 1"), 10, 1).unwrap();
    assert_eq!(r.checked, 0);
    assert!(r.holds());
}

#[test]
fn postponement_swap_of_handbuilt_configuration() {
    // collect the unreachable r_garbage, then dereference r_live
    let mut c = cfg("return 0");
    let live = c.sigma.alloc(Value::Num(1.0));
    let junk = c.sigma.alloc(Value::Num(2.0));
    c.term = Stmt::new(StmtKind::Return(vec![Expr::new(crate::frontend::ast::ExprKind::Ref(live))]));
    let o = crate::gc::gc_simple(&c, &Selector::Maximal);
    assert_eq!(o.discarded, vec![Loc::Ref(junk)]);
    let mut c3 = c.clone();
    apply_outcome(&mut c3, o);
    step_in_place(&mut c3, false).unwrap();
    let mut c4 = c.clone();
    step_in_place(&mut c4, false).unwrap();
    c4.sigma.map.remove(&junk);
    assert_eq!(canonical_config(&c3), canonical_config(&c4));
}

#[test]
fn garbage_checks() {
    let mut c = cfg("local t = {1}\nreturn t[1]");
    let junk = c.theta.alloc_table(Default::default());
    let sample = Explorer::Sample(vec![Schedule::new(Policy::Never, GcMode::Simple)]);
    assert!(is_garbage(&c, Loc::Table(junk), &sample, 100));

    // The table is reached once `local t` runs and is read afterwards.
    let mut c = cfg("local t = {1}\nreturn t[1]");
    for _ in 0..3 {
        step_in_place(&mut c, false).unwrap();
    }
    let tid = *c.theta.tables.keys().next().unwrap();
    assert!(!is_garbage(&c, Loc::Table(tid), &sample, 100));

    // Reachable but never dereferenced again.
    let mut c = cfg("local t = {}\nlocal u = t\nreturn 1");
    for _ in 0..4 {
        step_in_place(&mut c, false).unwrap();
    }
    let tid = *c.theta.tables.keys().next().unwrap();
    let ex = Explorer::Exhaustive(Bounds::new(GcMode::Simple));
    assert!(is_garbage(&c, Loc::Table(tid), &ex, 100));
}

#[test]
fn close_phase_reports_finalizer_errors() {
    let src = "local t = setmetatable({}, {__gc = function(o) error('in gc') end})\nreturn 1";
    let r = run_with(src, Policy::Never, GcMode::Fin);
    assert_eq!(r.result.summary(), "return 1");
    let closes: Vec<_> = r.trace.iter().filter(|e| matches!(e, TraceEntry::CloseFinalize { .. })).collect();
    assert_eq!(closes.len(), 1);
    assert!(matches!(closes[0], TraceEntry::CloseFinalize { error: Some(e), .. } if e == "in gc"));
}

#[test]
fn trace_text_format() {
    let r = run_with("return 1 + 1", Policy::Never, GcMode::Simple);
    assert_eq!(r.trace[0].to_text(), "0\tbinop\t1 + 1");
}
