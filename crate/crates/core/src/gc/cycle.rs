//! Collection cycles.
//!
//! A cycle keeps everything reachable from the roots and, with finalizers,
//! every table marked for finalization together with what it reaches. The
//! kept part is always closed under successors, so no kept binding refers to
//! a discarded one. With weak tables, fields whose weak key or value is not
//! strongly reachable are cleared; liveness is judged on the stores as they
//! were before the cycle.

use std::collections::BTreeSet;

use serde::Serialize;

use super::reach::{reachable_set, roots};
use super::weak::strong_set;
use crate::frontend::ast::Term;
use crate::heaps::{
    index_metatable, weakness, FinalizationMark, Key, Loc, ObjectStore, TableId, Value, ValueStore,
};
use crate::interpreter::Configuration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GcMode {
    Simple,
    Fin,
    FinWeak,
}

/// Which admissible partition a cycle produces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selector {
    /// Discard all garbage, clear every clearable field, run a finalizer if
    /// one is due.
    Maximal,
    /// A specific choice; see [`Choice`].
    Choose(Choice),
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Choice {
    /// Garbage kept anyway, with everything it reaches.
    pub retain: BTreeSet<Loc>,
    /// Clearable fields to leave in place.
    pub spare: BTreeSet<(TableId, Key)>,
    /// Skip finalization this cycle.
    pub no_finalizer: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PendingFinalizer {
    pub table: TableId,
    pub function: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClearedField {
    pub table: TableId,
    pub key: Value,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GcOutcome {
    pub sigma: ValueStore,
    pub theta: ObjectStore,
    /// Table whose mark became `⊘` this cycle.
    pub finalized: Option<TableId>,
    /// Call to splice into the program; `None` when the `__gc` field of the
    /// finalized table is not a function.
    pub finalizer: Option<PendingFinalizer>,
    pub cleared: Vec<ClearedField>,
    pub discarded: Vec<Loc>,
}

impl GcOutcome {
    /// The progress guard: the stores changed.
    pub fn changed(&self) -> bool {
        !self.discarded.is_empty() || !self.cleared.is_empty() || self.finalized.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Granularity {
    MaximalOnly,
    /// All choices discarding or clearing at most `k` items, plus the
    /// maximal one.
    SubsetsUpTo(usize),
}

/// Facts about a configuration shared by every choice of partition.
struct Analysis {
    bound: BTreeSet<Loc>,
    /// Kept under every choice.
    must_keep: BTreeSet<Loc>,
    /// Fields eligible for clearing, in table and insertion order.
    clearable: Vec<(TableId, Key)>,
    due: Option<TableId>,
}

fn bound_locations(sigma: &ValueStore, theta: &ObjectStore) -> BTreeSet<Loc> {
    sigma
        .map
        .keys()
        .map(|r| Loc::Ref(*r))
        .chain(theta.tables.keys().map(|t| Loc::Table(*t)))
        .chain(theta.closures.keys().map(|c| Loc::Closure(*c)))
        .collect()
}

fn marked(l: Loc, theta: &ObjectStore) -> bool {
    match l {
        Loc::Table(t) => theta.table(t).is_some_and(|t| t.pos.is_marked()),
        _ => false,
    }
}

/// `not_fin_val`: `tid` is not a value of any weak table.
fn not_fin_val(tid: TableId, theta: &ObjectStore) -> bool {
    !theta.tables.iter().any(|(id, t)| {
        weakness(*id, theta) != crate::heaps::Weakness::Strong
            && t.fields.values().any(|v| *v == Value::Table(tid))
    })
}

fn analyze(term: &Term, sigma: &ValueStore, theta: &ObjectStore, mode: GcMode) -> Analysis {
    let roots = roots(term);
    let bound = bound_locations(sigma, theta);
    let mut seeds = roots.clone();
    if mode != GcMode::Simple {
        seeds.extend(theta.tables.iter().filter(|(_, t)| t.pos.is_marked()).map(|(id, _)| Loc::Table(*id)));
    }
    let must_keep: BTreeSet<Loc> = reachable_set(&seeds, sigma, theta).intersection(&bound).copied().collect();

    let (mut clearable, mut due) = (Vec::new(), None);
    if mode != GcMode::Simple {
        let live = match mode {
            GcMode::FinWeak => strong_set(&roots, sigma, theta),
            _ => reachable_set(&roots, sigma, theta),
        };
        due = theta
            .tables
            .iter()
            .filter(|(id, t)| t.pos.is_marked() && !live.contains(&Loc::Table(**id)))
            .filter(|(id, _)| mode != GcMode::FinWeak || not_fin_val(**id, theta))
            .max_by_key(|(_, t)| t.pos.priority())
            .map(|(id, _)| *id);
        if mode == GcMode::FinWeak {
            for (id, t) in &theta.tables {
                if !must_keep.contains(&Loc::Table(*id)) {
                    continue;
                }
                let w = weakness(*id, theta);
                for (k, v) in &t.fields {
                    let dead = |x: &Value| x.loc().is_some_and(|l| !live.contains(&l));
                    let by_key = w.weak_keys() && dead(k.value());
                    let by_value = w.weak_values() && dead(v);
                    let key_pending = w.weak_keys() && k.value().loc().is_some_and(|l| marked(l, theta));
                    if (by_key || by_value) && !key_pending {
                        clearable.push((*id, k.clone()));
                    }
                }
            }
        }
    }
    Analysis { bound, must_keep, clearable, due }
}

fn apply(
    a: &Analysis,
    sigma: &ValueStore,
    theta: &ObjectStore,
    mode: GcMode,
    choice: &Choice,
) -> GcOutcome {
    let kept: BTreeSet<Loc> = if choice.retain.is_empty() {
        a.must_keep.clone()
    } else {
        let mut seeds: Vec<Loc> = a.must_keep.iter().copied().collect();
        seeds.extend(choice.retain.iter().copied());
        reachable_set(&seeds, sigma, theta).intersection(&a.bound).copied().collect()
    };
    let discarded: Vec<Loc> = a.bound.difference(&kept).copied().collect();
    let mut s1 = sigma.clone();
    let mut t1 = theta.clone();
    for l in &discarded {
        match l {
            Loc::Ref(r) => {
                s1.map.remove(r);
            }
            Loc::Table(t) => {
                t1.tables.remove(t);
            }
            Loc::Closure(c) => {
                t1.closures.remove(c);
            }
        }
    }

    let mut cleared = Vec::new();
    for (tid, k) in &a.clearable {
        if choice.spare.contains(&(*tid, k.clone())) {
            continue;
        }
        if let Some(t) = t1.table_mut(*tid) {
            if let Some(v) = t.fields.shift_remove(k) {
                cleared.push(ClearedField { table: *tid, key: k.value().clone(), value: v });
            }
        }
    }

    let (mut finalized, mut finalizer) = (None, None);
    if mode != GcMode::Simple && !choice.no_finalizer {
        if let Some(tid) = a.due {
            let f = index_metatable(tid, "__gc", &t1);
            if matches!(f, Value::Closure(_) | Value::Builtin(_)) {
                finalizer = Some(PendingFinalizer { table: tid, function: f });
            }
            t1.table_mut(tid).expect("marked tables are kept").pos = FinalizationMark::Finalized;
            finalized = Some(tid);
        }
    }
    GcOutcome { sigma: s1, theta: t1, finalized, finalizer, cleared, discarded }
}

/// One cycle of the given mode.
pub fn gc_cycle(c: &Configuration, mode: GcMode, sel: &Selector) -> GcOutcome {
    let a = analyze(&c.term, &c.sigma, &c.theta, mode);
    let choice = match sel {
        Selector::Maximal => Choice::default(),
        Selector::Choose(ch) => ch.clone(),
    };
    apply(&a, &c.sigma, &c.theta, mode, &choice)
}

/// Cycle that discards only locations unreachable from the term.
pub fn gc_simple(c: &Configuration, sel: &Selector) -> GcOutcome {
    gc_cycle(c, GcMode::Simple, sel)
}

/// Cycle that keeps marked tables and may finalize the most recently marked
/// unreachable one.
pub fn gc_fin(c: &Configuration, sel: &Selector) -> GcOutcome {
    gc_cycle(c, GcMode::Fin, sel)
}

/// Finalization cycle using strong reachability, also clearing weak fields.
pub fn gc_fin_weak(c: &Configuration, sel: &Selector) -> GcOutcome {
    gc_cycle(c, GcMode::FinWeak, sel)
}

fn subsets<T: Clone + Ord>(items: &[T], k: usize) -> Vec<BTreeSet<T>> {
    let mut out = vec![BTreeSet::new()];
    for size in 1..=k.min(items.len()) {
        combos(items, size, 0, &mut Vec::new(), &mut out);
    }
    if items.len() > k {
        out.push(items.iter().cloned().collect());
    }
    out
}

fn combos<T: Clone + Ord>(items: &[T], size: usize, from: usize, cur: &mut Vec<T>, out: &mut Vec<BTreeSet<T>>) {
    if cur.len() == size {
        out.push(cur.iter().cloned().collect());
        return;
    }
    for i in from..items.len() {
        cur.push(items[i].clone());
        combos(items, size, i + 1, cur, out);
        cur.pop();
    }
}

/// Every distinct cycle outcome that passes the progress guard.
pub fn enumerate_gc_steps(c: &Configuration, mode: GcMode, g: Granularity) -> Vec<GcOutcome> {
    let a = analyze(&c.term, &c.sigma, &c.theta, mode);
    let k = match g {
        Granularity::MaximalOnly => {
            let o = apply(&a, &c.sigma, &c.theta, mode, &Choice::default());
            return if o.changed() { vec![o] } else { Vec::new() };
        }
        Granularity::SubsetsUpTo(k) => k,
    };
    let garbage: Vec<Loc> = a.bound.difference(&a.must_keep).copied().collect();
    let discard_sets = subsets(&garbage, k);
    let clear_sets = subsets(&a.clearable, k);
    let fin_options: &[bool] = if a.due.is_some() { &[false, true] } else { &[false] };
    let mut out: Vec<GcOutcome> = Vec::new();
    for d in &discard_sets {
        let retain: BTreeSet<Loc> = garbage.iter().filter(|l| !d.contains(l)).copied().collect();
        for cl in &clear_sets {
            let spare: BTreeSet<(TableId, Key)> = a.clearable.iter().filter(|f| !cl.contains(f)).cloned().collect();
            for &fin in fin_options {
                let choice = Choice { retain: retain.clone(), spare: spare.clone(), no_finalizer: !fin };
                let o = apply(&a, &c.sigma, &c.theta, mode, &choice);
                if o.changed() && !out.iter().any(|p| p.sigma == o.sigma && p.theta == o.theta) {
                    out.push(o);
                }
            }
        }
    }
    out
}
