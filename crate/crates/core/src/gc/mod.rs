//! Reachability, collection cycles and finalization marks.
//!
//! Three notions of a collection cycle are provided, selected by
//! [`GcMode`]: plain reachability ([`GcMode::Simple`]), with finalizers
//! ([`GcMode::Fin`]) and with finalizers plus weak tables
//! ([`GcMode::FinWeak`]). Each cycle partitions the stores into kept and
//! discarded parts; a [`Choice`] picks one of the admissible partitions.

mod cycle;
mod reach;
mod weak;

use serde::Serialize;

use crate::heaps::{FinalizationMark, ObjectStore, TableId};

pub use cycle::{
    enumerate_gc_steps, gc_cycle, gc_fin, gc_fin_weak, gc_simple, Choice, ClearedField, GcMode, GcOutcome,
    Granularity, PendingFinalizer, Selector,
};
pub use reach::{reach, reach_oracle, reach_recursive, reachable_set, roots};
pub use weak::{
    reach_cte, reach_cte_oracle, reach_cte_recursive, strong_occurrences, strong_set, StrongOccurrences,
};

/// New `pos` of `tid` when its metatable is set to `meta`.
pub fn set_fin(tid: TableId, meta: Option<TableId>, theta: &ObjectStore) -> FinalizationMark {
    let Some(t) = theta.table(tid) else { return FinalizationMark::Unmarked };
    if t.pos == FinalizationMark::Finalized {
        return FinalizationMark::Finalized;
    }
    let Some(m) = meta else { return FinalizationMark::Unmarked };
    if t.meta == Some(m) {
        return t.pos;
    }
    match theta.table(m) {
        Some(mt) if mt.get_str("__gc").is_some() => FinalizationMark::Priority(theta.max_priority() + 1),
        _ => FinalizationMark::Unmarked,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GcEventKind {
    Collect,
    Finalize,
    ClearWeakField,
}

/// One record of the collection trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GcEvent {
    pub step: usize,
    pub kind: GcEventKind,
    pub details: serde_json::Value,
}

impl GcEvent {
    /// Events describing one cycle, in a fixed order: clearing, collection,
    /// finalization.
    pub fn from_outcome(step: usize, o: &GcOutcome) -> Vec<GcEvent> {
        let mut out = Vec::new();
        for f in &o.cleared {
            out.push(GcEvent {
                step,
                kind: GcEventKind::ClearWeakField,
                details: serde_json::json!({
                    "table": f.table.0,
                    "key": f.key.to_string(),
                    "value": f.value.to_string(),
                }),
            });
        }
        if !o.discarded.is_empty() {
            let locs: Vec<String> = o.discarded.iter().map(|l| l.to_string()).collect();
            out.push(GcEvent { step, kind: GcEventKind::Collect, details: serde_json::json!({ "discarded": locs }) });
        }
        if let Some(tid) = o.finalized {
            let call = o.finalizer.as_ref().map(|p| p.function.to_string());
            out.push(GcEvent {
                step,
                kind: GcEventKind::Finalize,
                details: serde_json::json!({ "table": tid.0, "call": call }),
            });
        }
        out
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

#[cfg(test)]
mod tests;
