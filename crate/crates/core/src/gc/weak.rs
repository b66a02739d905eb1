//! Strong reachability in the presence of weak tables and ephemerons.
//!
//! Only collectible values (tables and closures) are ever held weakly. In a
//! weak-keys table each field is an ephemeron: its value is held strongly
//! only while its key is strongly reachable without going through that
//! field.

use std::collections::BTreeSet;

use crate::frontend::ast::HasLocations;
use crate::heaps::{index_metatable, weakness, Key, Loc, ObjectStore, TableId, Value, ValueStore, Weakness};

/// `SO(tid, θ)`: collectible elements a table holds strongly, plus its
/// ephemeron pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StrongOccurrences {
    pub strong: Vec<Loc>,
    /// `(key, value)` with a collectible value, for weak-keys tables only.
    pub ephemerons: Vec<(Value, Loc)>,
}

pub fn strong_occurrences(tid: TableId, theta: &ObjectStore) -> StrongOccurrences {
    let mut so = StrongOccurrences::default();
    let Some(t) = theta.table(tid) else { return so };
    let w = weakness(tid, theta);
    for (k, v) in &t.fields {
        match w {
            Weakness::Strong => {
                so.strong.extend(k.value().loc());
                so.strong.extend(v.loc());
            }
            Weakness::WeakValues => so.strong.extend(k.value().loc()),
            Weakness::WeakKeys => {
                if let Some(l) = v.loc() {
                    so.ephemerons.push((k.value().clone(), l));
                }
            }
            Weakness::WeakBoth => {}
        }
    }
    so
}

fn strong_successors(l: Loc, sigma: &ValueStore, theta: &ObjectStore) -> Option<(Vec<Loc>, Vec<(Value, Loc)>)> {
    match l {
        Loc::Ref(r) => Some((sigma.get(r)?.location_list(), Vec::new())),
        Loc::Table(t) => {
            let tb = theta.table(t)?;
            let so = strong_occurrences(t, theta);
            let mut strong = so.strong;
            strong.extend(tb.meta.map(Loc::Table));
            Some((strong, so.ephemerons))
        }
        Loc::Closure(c) => Some((theta.closure(c)?.env(), Vec::new())),
    }
}

/// Least set containing `roots` and closed under strong edges, where an
/// ephemeron's value is followed once its key is in `live_keys` (or, when
/// `live_keys` is `None`, in the set being computed).
fn closure(
    roots: &[Loc],
    sigma: &ValueStore,
    theta: &ObjectStore,
    live_keys: Option<&BTreeSet<Loc>>,
) -> BTreeSet<Loc> {
    let mut seen = BTreeSet::new();
    let mut work: Vec<Loc> = roots.to_vec();
    let mut pending: Vec<(Loc, Loc)> = Vec::new();
    loop {
        while let Some(l) = work.pop() {
            if !seen.insert(l) {
                continue;
            }
            let Some((strong, ephs)) = strong_successors(l, sigma, theta) else { continue };
            work.extend(strong);
            for (k, v) in ephs {
                match k.loc() {
                    None => work.push(v),
                    Some(kl) => {
                        let live = match live_keys {
                            Some(s) => s.contains(&kl),
                            None => seen.contains(&kl),
                        };
                        if live {
                            work.push(v);
                        } else if live_keys.is_none() {
                            pending.push((kl, v));
                        }
                    }
                }
            }
        }
        let (ready, rest): (Vec<_>, Vec<_>) = pending.into_iter().partition(|(k, _)| seen.contains(k));
        pending = rest;
        if ready.is_empty() {
            return seen;
        }
        work.extend(ready.into_iter().map(|(_, v)| v));
    }
}

/// Every location strongly reachable from `roots`.
pub fn strong_set(roots: &[Loc], sigma: &ValueStore, theta: &ObjectStore) -> BTreeSet<Loc> {
    closure(roots, sigma, theta, None)
}

/// `reachCte(id, t, σ, θ, rt)`: strong reachability of `id` from `t`, with
/// ephemeron keys judged from the root term `rt`.
pub fn reach_cte<T, R>(id: Loc, t: &T, sigma: &ValueStore, theta: &ObjectStore, rt: &R) -> bool
where
    T: HasLocations + ?Sized,
    R: HasLocations + ?Sized,
{
    let from_rt = strong_set(&rt.location_list(), sigma, theta);
    closure(&t.location_list(), sigma, theta, Some(&from_rt)).contains(&id)
}

/// Reference formulation: recursion with bindings removed once expanded;
/// an ephemeron key is checked by a fresh search from `rt` in the original
/// stores with that field removed.
pub fn reach_cte_recursive<T, R>(id: Loc, t: &T, sigma: &ValueStore, theta: &ObjectStore, rt: &R) -> bool
where
    T: HasLocations + ?Sized,
    R: HasLocations + ?Sized,
{
    let rt = rt.location_list();
    let base = Base { sigma, theta, rt: &rt };
    let mut removed = Vec::new();
    cte_rec(id, &t.location_list(), &base, &mut removed, &mut BTreeSet::new())
}

struct Base<'a> {
    sigma: &'a ValueStore,
    theta: &'a ObjectStore,
    rt: &'a [Loc],
}

fn cte_rec(
    id: Loc,
    lits: &[Loc],
    base: &Base<'_>,
    removed: &mut Vec<(TableId, Key)>,
    visited: &mut BTreeSet<Loc>,
) -> bool {
    if lits.contains(&id) {
        return true;
    }
    for &x in lits {
        if !visited.insert(x) {
            continue;
        }
        let mut inner: Vec<Loc> = Vec::new();
        match x {
            Loc::Ref(r) => match base.sigma.get(r) {
                Some(v) => inner.extend(v.loc()),
                None => continue,
            },
            Loc::Closure(c) => match base.theta.closure(c) {
                Some(clo) => inner = clo.env(),
                None => continue,
            },
            Loc::Table(t) => {
                let Some(tb) = base.theta.table(t) else { continue };
                inner.extend(tb.meta.map(Loc::Table));
                let w = weakness(t, base.theta);
                for (k, v) in &tb.fields {
                    if removed.iter().any(|(rt, rk)| *rt == t && rk == k) {
                        continue;
                    }
                    match w {
                        Weakness::Strong => {
                            inner.extend(k.value().loc());
                            inner.extend(v.loc());
                        }
                        Weakness::WeakValues => inner.extend(k.value().loc()),
                        Weakness::WeakBoth => {}
                        Weakness::WeakKeys => {
                            let Some(vl) = v.loc() else { continue };
                            let key_live = match k.value().loc() {
                                None => true,
                                Some(kl) => {
                                    removed.push((t, k.clone()));
                                    let live = cte_rec(kl, base.rt, base, removed, &mut BTreeSet::new());
                                    removed.pop();
                                    live
                                }
                            };
                            if key_live {
                                inner.push(vl);
                            }
                        }
                    }
                }
            }
        }
        if cte_rec(id, &inner, base, removed, visited) {
            return true;
        }
    }
    false
}

/// Naive Kleene iteration of the one-step strong-successor function, with
/// weakness read directly from `__mode`.
pub fn reach_cte_oracle<T, R>(id: Loc, t: &T, sigma: &ValueStore, theta: &ObjectStore, rt: &R) -> bool
where
    T: HasLocations + ?Sized,
    R: HasLocations + ?Sized,
{
    let from_rt = kleene(&rt.location_list(), sigma, theta, None);
    kleene(&t.location_list(), sigma, theta, Some(&from_rt)).contains(&id)
}

fn kleene(roots: &[Loc], sigma: &ValueStore, theta: &ObjectStore, keys: Option<&BTreeSet<Loc>>) -> BTreeSet<Loc> {
    let mut s: BTreeSet<Loc> = roots.iter().copied().collect();
    loop {
        let mut next = s.clone();
        for &l in &s {
            match l {
                Loc::Ref(r) => {
                    if let Some(v) = sigma.map.get(&r) {
                        next.extend(v.loc());
                    }
                }
                Loc::Closure(c) => {
                    if let Some(clo) = theta.closures.get(&c) {
                        let mut env = Vec::new();
                        clo.body.locations(&mut env);
                        next.extend(env);
                    }
                }
                Loc::Table(t) => {
                    let Some(tb) = theta.tables.get(&t) else { continue };
                    next.extend(tb.meta.map(Loc::Table));
                    let mode = match index_metatable(t, "__mode", theta) {
                        Value::Str(m) => m,
                        _ => String::new(),
                    };
                    let (wk, wv) = (mode.contains('k'), mode.contains('v'));
                    for (k, v) in &tb.fields {
                        let (k, v) = (k.value().loc(), v.loc());
                        if !wk {
                            next.extend(k);
                        }
                        let value_strong = match (wk, wv) {
                            (_, true) => false,
                            (false, false) => true,
                            (true, false) => match k {
                                None => true,
                                Some(k) => keys.unwrap_or(&s).contains(&k),
                            },
                        };
                        if value_strong {
                            next.extend(v);
                        }
                    }
                }
            }
        }
        if next == s {
            return s;
        }
        s = next;
    }
}
