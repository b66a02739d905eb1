//! Program results in canonical form, and observations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::HasLocations;
use crate::frontend::print::print_stmt_with;
use crate::heaps::{snapshot_with, HeapSnapshot, ObjectStore, Renaming, Value, ValueStore};
use crate::interpreter::{Configuration, FinalKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultKind {
    Returned,
    Errored,
    Empty,
    /// Fuel ran out; stands in for divergence.
    Divergent,
}

/// `result(σ:θ:s)`: the terminal values with the stores restricted to what
/// they reach, locations renamed in DFS order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProgramResult {
    pub kind: ResultKind,
    pub values: Vec<String>,
    pub heap: HeapSnapshot,
}

impl ProgramResult {
    pub fn divergent() -> ProgramResult {
        ProgramResult { kind: ResultKind::Divergent, values: Vec::new(), heap: empty_heap() }
    }

    pub fn of_final(kind: &FinalKind, sigma: &ValueStore, theta: &ObjectStore) -> ProgramResult {
        let (k, vals): (ResultKind, &[Value]) = match kind {
            FinalKind::Returned(vs) => (ResultKind::Returned, vs),
            FinalKind::Error(v) => (ResultKind::Errored, std::slice::from_ref(v)),
            FinalKind::Empty => (ResultKind::Empty, &[]),
        };
        let ren = Renaming::from_roots(&vals.location_list(), sigma, theta);
        let mut heap = snapshot_with(&ren, sigma, theta);
        rank_priorities(&mut heap);
        ProgramResult { kind: k, values: vals.iter().map(|v| ren.value(v)).collect(), heap }
    }

    /// Short human-readable form: `return 1, tid1`, `error "x"`, `;`, `⊥(fuel)`.
    pub fn summary(&self) -> String {
        match self.kind {
            ResultKind::Returned if self.values.is_empty() => "return".into(),
            ResultKind::Returned => format!("return {}", self.values.join(", ")),
            ResultKind::Errored => format!("error {}", self.values.join(", ")),
            ResultKind::Empty => ";".into(),
            ResultKind::Divergent => "⊥(fuel)".into(),
        }
    }
}

fn empty_heap() -> HeapSnapshot {
    HeapSnapshot { refs: Vec::new(), tables: Vec::new(), closures: Vec::new() }
}

// Raw priorities depend on which marked tables were already collected; only
// their relative order is observable.
fn rank_priorities(h: &mut HeapSnapshot) {
    let mut ps: Vec<u64> = h.tables.iter().filter_map(|t| t.pos.parse().ok()).collect();
    ps.sort_unstable();
    let rank: BTreeMap<u64, usize> = ps.iter().enumerate().map(|(i, p)| (*p, i + 1)).collect();
    for t in &mut h.tables {
        if let Ok(p) = t.pos.parse::<u64>() {
            t.pos = rank[&p].to_string();
        }
    }
}

/// One element of an observation set: the canonical result and the lines
/// printed on the way.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub kind: ResultKind,
    pub result: String,
    /// Canonical JSON of the residual heap; embedded as JSON when serialized.
    #[serde(with = "embedded_json")]
    pub heap: String,
    pub output: Vec<String>,
}

impl Observation {
    pub fn new(r: &ProgramResult, output: &[String]) -> Observation {
        let output = if r.kind == ResultKind::Divergent { Vec::new() } else { output.to_vec() };
        Observation {
            kind: r.kind,
            result: r.summary(),
            heap: serde_json::to_string(&r.heap).expect("snapshots serialize"),
            output,
        }
    }
}

mod embedded_json {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: &str, ser: S) -> Result<S::Ok, S::Error> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(serde::ser::Error::custom)?;
        v.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
        Ok(serde_json::Value::deserialize(d)?.to_string())
    }
}

/// Canonical text of a whole configuration: the term and the part of the
/// stores it reaches, ids renamed in DFS order from the term. Two
/// configurations are reach-equivalent iff their canonical forms agree.
pub fn canonical_config(c: &Configuration) -> String {
    let ren = Renaming::from_roots(&c.term.location_list(), &c.sigma, &c.theta);
    let term = print_stmt_with(&c.term, &|l| ren.name(l));
    let heap = snapshot_with(&ren, &c.sigma, &c.theta);
    format!("{term}\n{}", serde_json::to_string(&heap).expect("snapshots serialize"))
}
