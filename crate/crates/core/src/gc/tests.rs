use super::*;
use crate::frontend::ast::{Expr, Stmt};
use crate::heaps::{alloc_table, FinalizationMark, Loc, TableObject, Value, ValueStore};
use crate::interpreter::Configuration;

fn ret(vs: Vec<Value>) -> Stmt {
    Stmt::new(crate::frontend::ast::StmtKind::Return(vs.into_iter().map(Expr::val).collect()))
}

fn cfg(term: Stmt, sigma: ValueStore, theta: ObjectStore) -> Configuration {
    Configuration { sigma, theta, term, output: Vec::new() }
}

fn with_meta(theta: &mut ObjectStore, fields: Vec<(Value, Value)>) -> (TableId, TableId) {
    let m = alloc_table(theta, fields).unwrap();
    let t = theta.alloc_table(TableObject::new());
    theta.table_mut(t).unwrap().meta = Some(m);
    (t, m)
}

#[test]
fn set_fin_cases() {
    let mut th = ObjectStore::default();
    let with_gc = alloc_table(&mut th, [(Value::str("__gc"), Value::Bool(true))]).unwrap();
    let without = alloc_table(&mut th, []).unwrap();
    let t = th.alloc_table(TableObject::new());
    assert_eq!(set_fin(t, Some(with_gc), &th), FinalizationMark::Priority(1));
    assert_eq!(set_fin(t, Some(without), &th), FinalizationMark::Unmarked);
    assert_eq!(set_fin(t, None, &th), FinalizationMark::Unmarked);
    th.table_mut(t).unwrap().meta = Some(with_gc);
    th.table_mut(t).unwrap().pos = FinalizationMark::Priority(4);
    assert_eq!(set_fin(t, Some(with_gc), &th), FinalizationMark::Priority(4));
    let u = th.alloc_table(TableObject::new());
    assert_eq!(set_fin(u, Some(with_gc), &th), FinalizationMark::Priority(5));
    th.table_mut(t).unwrap().pos = FinalizationMark::Finalized;
    assert_eq!(set_fin(t, None, &th), FinalizationMark::Finalized);
    assert_eq!(set_fin(t, Some(without), &th), FinalizationMark::Finalized);
}

#[test]
fn reach_examples() {
    let mut th = ObjectStore::default();
    let (t1, t2) = with_meta(&mut th, vec![]);
    let term = ret(vec![Value::Table(t1)]);
    let s = ValueStore::default();
    assert!(reach(Loc::Table(t2), &term, &s, &th));
    assert!(reach_recursive(Loc::Table(t2), &term, &s, &th));
    assert!(reach_oracle(Loc::Table(t2), &term, &s, &th));
    let mut s = ValueStore::default();
    let r = s.alloc(Value::Num(5.0));
    assert!(!reach(Loc::Ref(r), &term, &s, &th));
    assert!(!reach_oracle(Loc::Ref(r), &term, &s, &th));
}

#[test]
fn cyclic_tables_are_reachable() {
    let mut th = ObjectStore::default();
    let a = th.alloc_table(TableObject::new());
    let b = th.alloc_table(TableObject::new());
    th.table_mut(a).unwrap().set(Value::Num(1.0), Value::Table(b)).unwrap();
    th.table_mut(b).unwrap().set(Value::Num(1.0), Value::Table(a)).unwrap();
    let term = ret(vec![Value::Table(a)]);
    let s = ValueStore::default();
    for l in [Loc::Table(a), Loc::Table(b)] {
        assert!(reach(l, &term, &s, &th));
        assert!(reach_recursive(l, &term, &s, &th));
        assert!(reach_oracle(l, &term, &s, &th));
    }
}

#[test]
fn strong_occurrence_cases() {
    let mut th = ObjectStore::default();
    let k = th.alloc_table(TableObject::new());
    let v = th.alloc_table(TableObject::new());
    let a = th.alloc_table(TableObject::new());
    let strong = alloc_table(&mut th, [(Value::Num(1.0), Value::Table(a))]).unwrap();
    assert_eq!(strong_occurrences(strong, &th).strong, vec![Loc::Table(a)]);
    let (wv, _) = with_meta(&mut th, vec![(Value::str("__mode"), Value::str("v"))]);
    th.table_mut(wv).unwrap().set(Value::Table(k), Value::Table(v)).unwrap();
    assert_eq!(strong_occurrences(wv, &th).strong, vec![Loc::Table(k)]);
    let (wk, _) = with_meta(&mut th, vec![(Value::str("__mode"), Value::str("k"))]);
    th.table_mut(wk).unwrap().set(Value::Table(k), Value::Table(v)).unwrap();
    let so = strong_occurrences(wk, &th);
    assert!(so.strong.is_empty());
    assert_eq!(so.ephemerons, vec![(Value::Table(k), Loc::Table(v))]);
    let (wkv, _) = with_meta(&mut th, vec![(Value::str("__mode"), Value::str("kv"))]);
    th.table_mut(wkv).unwrap().set(Value::Table(k), Value::Table(v)).unwrap();
    assert_eq!(strong_occurrences(wkv, &th), StrongOccurrences::default());
}

#[test]
fn ephemeron_value_referring_to_own_key() {
    let mut th = ObjectStore::default();
    let (e, _) = with_meta(&mut th, vec![(Value::str("__mode"), Value::str("k"))]);
    let k = th.alloc_table(TableObject::new());
    let v = alloc_table(&mut th, [(Value::Num(1.0), Value::Table(k))]).unwrap();
    th.table_mut(e).unwrap().set(Value::Table(k), Value::Table(v)).unwrap();
    let term = ret(vec![Value::Table(e)]);
    let s = ValueStore::default();
    for l in [Loc::Table(k), Loc::Table(v)] {
        assert!(!reach_cte(l, &term, &s, &th, &term));
        assert!(!reach_cte_recursive(l, &term, &s, &th, &term));
        assert!(!reach_cte_oracle(l, &term, &s, &th, &term));
    }
    let c = cfg(term.clone(), s.clone(), th.clone());
    let o = gc_fin_weak(&c, &Selector::Maximal);
    assert_eq!(o.cleared.len(), 1);
    assert!(o.theta.table(e).unwrap().fields.is_empty());

    let term2 = ret(vec![Value::Table(e), Value::Table(k)]);
    assert!(reach_cte(Loc::Table(v), &term2, &s, &th, &term2));
    let o = gc_fin_weak(&cfg(term2, s, th), &Selector::Maximal);
    assert!(o.cleared.is_empty());
}

#[test]
fn simple_cycle_drops_only_garbage() {
    let mut s = ValueStore::default();
    let live = s.alloc(Value::Num(1.0));
    let dead = s.alloc(Value::Num(2.0));
    let term = Stmt::new(crate::frontend::ast::StmtKind::Return(vec![Expr::new(
        crate::frontend::ast::ExprKind::Ref(live),
    )]));
    let c = cfg(term, s, ObjectStore::default());
    let o = gc_simple(&c, &Selector::Maximal);
    assert_eq!(o.discarded, vec![Loc::Ref(dead)]);
    assert!(o.sigma.contains(live));
    let again = cfg(c.term.clone(), o.sigma, o.theta);
    assert!(!gc_simple(&again, &Selector::Maximal).changed());
}

#[test]
fn partial_discard_keeps_kept_part_closed() {
    let mut th = ObjectStore::default();
    let inner = th.alloc_table(TableObject::new());
    let outer = alloc_table(&mut th, [(Value::Num(1.0), Value::Table(inner))]).unwrap();
    let c = cfg(ret(vec![]), ValueStore::default(), th);
    let choice = Choice { retain: [Loc::Table(outer)].into(), ..Choice::default() };
    let o = gc_simple(&c, &Selector::Choose(choice));
    assert!(o.discarded.is_empty());
    let choice = Choice { retain: [Loc::Table(inner)].into(), ..Choice::default() };
    let o = gc_simple(&c, &Selector::Choose(choice));
    assert_eq!(o.discarded, vec![Loc::Table(outer)]);
    crate::heaps::validate(&c.term, &o.sigma, &o.theta).unwrap();
}

#[test]
fn enumeration_counts() {
    let c = cfg(ret(vec![]), ValueStore::default(), ObjectStore::default());
    assert!(enumerate_gc_steps(&c, GcMode::Simple, Granularity::SubsetsUpTo(2)).is_empty());
    let mut s = ValueStore::default();
    s.alloc(Value::Num(1.0));
    let c1 = cfg(ret(vec![]), s.clone(), ObjectStore::default());
    assert_eq!(enumerate_gc_steps(&c1, GcMode::Simple, Granularity::MaximalOnly).len(), 1);
    s.alloc(Value::Num(2.0));
    let c2 = cfg(ret(vec![]), s, ObjectStore::default());
    assert_eq!(enumerate_gc_steps(&c2, GcMode::Simple, Granularity::SubsetsUpTo(2)).len(), 3);
}

#[test]
fn finalization_picks_latest_mark_and_never_discards_marked() {
    let mut th = ObjectStore::default();
    let m = alloc_table(&mut th, [(Value::str("__gc"), Value::Builtin(crate::heaps::Builtin::Print))]).unwrap();
    let a = th.alloc_table(TableObject::new());
    let b = th.alloc_table(TableObject::new());
    for (t, p) in [(a, 1), (b, 2)] {
        let tb = th.table_mut(t).unwrap();
        tb.meta = Some(m);
        tb.pos = FinalizationMark::Priority(p);
    }
    let c = cfg(ret(vec![]), ValueStore::default(), th);
    let o = gc_fin(&c, &Selector::Maximal);
    assert_eq!(o.finalized, Some(b));
    assert!(o.discarded.is_empty());
    assert_eq!(o.theta.table(b).unwrap().pos, FinalizationMark::Finalized);
    let c2 = cfg(ret(vec![]), o.sigma, o.theta);
    let o2 = gc_fin(&c2, &Selector::Maximal);
    assert_eq!(o2.finalized, Some(a));
    assert_eq!(o2.discarded, vec![Loc::Table(b)]);
}

#[test]
fn non_function_gc_is_skipped_silently() {
    let mut th = ObjectStore::default();
    let m = alloc_table(&mut th, [(Value::str("__gc"), Value::str("not a function"))]).unwrap();
    let t = th.alloc_table(TableObject::new());
    let tb = th.table_mut(t).unwrap();
    tb.meta = Some(m);
    tb.pos = FinalizationMark::Priority(1);
    let o = gc_fin(&cfg(ret(vec![]), ValueStore::default(), th), &Selector::Maximal);
    assert_eq!(o.finalized, Some(t));
    assert!(o.finalizer.is_none());
}

#[test]
fn weak_value_of_weak_table_cleared_then_collected() {
    let mut th = ObjectStore::default();
    let (w, _) = with_meta(&mut th, vec![(Value::str("__mode"), Value::str("v"))]);
    let x = th.alloc_table(TableObject::new());
    th.table_mut(w).unwrap().set(Value::Num(1.0), Value::Table(x)).unwrap();
    let c = cfg(ret(vec![Value::Table(w)]), ValueStore::default(), th);
    let o = gc_fin_weak(&c, &Selector::Maximal);
    assert_eq!(o.cleared.len(), 1);
    assert!(o.discarded.is_empty());
    let o2 = gc_fin_weak(&cfg(c.term.clone(), o.sigma, o.theta), &Selector::Maximal);
    assert_eq!(o2.discarded, vec![Loc::Table(x)]);
}

#[test]
fn marked_weak_key_survives_until_finalized() {
    let mut th = ObjectStore::default();
    let gcm = alloc_table(&mut th, [(Value::str("__gc"), Value::Builtin(crate::heaps::Builtin::Print))]).unwrap();
    let (w, _) = with_meta(&mut th, vec![(Value::str("__mode"), Value::str("k"))]);
    let k = th.alloc_table(TableObject::new());
    let tb = th.table_mut(k).unwrap();
    tb.meta = Some(gcm);
    tb.pos = FinalizationMark::Priority(1);
    th.table_mut(w).unwrap().set(Value::Table(k), Value::Num(1.0)).unwrap();
    let c = cfg(ret(vec![Value::Table(w)]), ValueStore::default(), th);
    let o = gc_fin_weak(&c, &Selector::Maximal);
    assert!(o.cleared.is_empty());
    assert_eq!(o.finalized, Some(k));
    let o2 = gc_fin_weak(&cfg(c.term.clone(), o.sigma, o.theta), &Selector::Maximal);
    assert_eq!(o2.cleared.len(), 1);
}

#[test]
fn events_serialize_as_json_lines() {
    let mut s = ValueStore::default();
    s.alloc(Value::Num(1.0));
    let o = gc_simple(&cfg(ret(vec![]), s, ObjectStore::default()), &Selector::Maximal);
    let ev = GcEvent::from_outcome(3, &o);
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].to_json_line(), r#"{"step":3,"kind":"collect","details":{"discarded":["r1"]}}"#);
}
