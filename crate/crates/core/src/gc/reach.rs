//! Plain reachability: from the locations occurring in a term through
//! reference bindings, table keys, values and metatables, and closure
//! environments. A location that is not bound is reachable only where it
//! occurs literally.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::visit::Bfs;

use crate::frontend::ast::HasLocations;
use crate::heaps::{successors, Loc, ObjectStore, Value, ValueStore};

/// The root set: locations occurring literally in `t`, without duplicates.
pub fn roots<T: HasLocations + ?Sized>(t: &T) -> Vec<Loc> {
    let mut seen = BTreeSet::new();
    t.location_list().into_iter().filter(|l| seen.insert(*l)).collect()
}

/// Every location reachable from `roots`, the roots included.
pub fn reachable_set(roots: &[Loc], sigma: &ValueStore, theta: &ObjectStore) -> BTreeSet<Loc> {
    let mut seen = BTreeSet::new();
    let mut work: Vec<Loc> = roots.to_vec();
    while let Some(l) = work.pop() {
        if seen.insert(l) {
            if let Some(next) = successors(l, sigma, theta) {
                work.extend(next.into_iter().filter(|n| !seen.contains(n)));
            }
        }
    }
    seen
}

/// `reach(l, t, σ, θ)`.
pub fn reach<T: HasLocations + ?Sized>(l: Loc, t: &T, sigma: &ValueStore, theta: &ObjectStore) -> bool {
    reachable_set(&roots(t), sigma, theta).contains(&l)
}

/// Reference formulation: recursion over the term's literals, removing each
/// binding from the stores once it has been expanded.
pub fn reach_recursive<T: HasLocations + ?Sized>(l: Loc, t: &T, sigma: &ValueStore, theta: &ObjectStore) -> bool {
    let (mut s, mut o) = (sigma.clone(), theta.clone());
    rec(l, &t.location_list(), &mut s, &mut o)
}

fn rec(l: Loc, lits: &[Loc], sigma: &mut ValueStore, theta: &mut ObjectStore) -> bool {
    if lits.contains(&l) {
        return true;
    }
    for &x in lits {
        let inner = match x {
            Loc::Ref(r) => match sigma.map.remove(&r) {
                Some(v) => v.location_list(),
                None => continue,
            },
            Loc::Table(t) => match theta.tables.remove(&t) {
                Some(tb) => {
                    let mut v = Vec::new();
                    for (k, val) in &tb.fields {
                        k.value().push_locations(&mut v);
                        val.push_locations(&mut v);
                    }
                    v.extend(tb.meta.map(Loc::Table));
                    v
                }
                None => continue,
            },
            Loc::Closure(c) => match theta.closures.remove(&c) {
                Some(clo) => clo.env(),
                None => continue,
            },
        };
        if rec(l, &inner, sigma, theta) {
            return true;
        }
    }
    false
}

/// Breadth-first search over an explicit graph of the heap, built without
/// the store helpers used by [`reach`].
pub fn reach_oracle<T: HasLocations + ?Sized>(l: Loc, t: &T, sigma: &ValueStore, theta: &ObjectStore) -> bool {
    let mut g: DiGraph<Option<Loc>, ()> = DiGraph::new();
    let mut ix: BTreeMap<Loc, NodeIndex> = BTreeMap::new();
    let mut node = |g: &mut DiGraph<Option<Loc>, ()>, l: Loc| *ix.entry(l).or_insert_with(|| g.add_node(Some(l)));
    let root = g.add_node(None);
    let lits = t.location_list();
    for x in lits {
        let n = node(&mut g, x);
        g.add_edge(root, n, ());
    }
    let val_loc = |v: &Value| match v {
        Value::Table(t) => Some(Loc::Table(*t)),
        Value::Closure(c) => Some(Loc::Closure(*c)),
        _ => None,
    };
    for (r, v) in &sigma.map {
        let a = node(&mut g, Loc::Ref(*r));
        if let Some(b) = val_loc(v) {
            let b = node(&mut g, b);
            g.add_edge(a, b, ());
        }
    }
    for (tid, tb) in &theta.tables {
        let a = node(&mut g, Loc::Table(*tid));
        let mut targets: Vec<Loc> = tb.fields.iter().flat_map(|(k, v)| [val_loc(k.value()), val_loc(v)]).flatten().collect();
        targets.extend(tb.meta.map(Loc::Table));
        for b in targets {
            let b = node(&mut g, b);
            g.add_edge(a, b, ());
        }
    }
    for (cid, clo) in &theta.closures {
        let a = node(&mut g, Loc::Closure(*cid));
        let mut env = Vec::new();
        clo.body.locations(&mut env);
        for b in env {
            let b = node(&mut g, b);
            g.add_edge(a, b, ());
        }
    }
    let Some(&target) = ix.get(&l) else { return false };
    let mut bfs = Bfs::new(&g, root);
    while let Some(n) = bfs.next(&g) {
        if n == target {
            return true;
        }
    }
    false
}
