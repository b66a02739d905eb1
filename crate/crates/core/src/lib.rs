//! An executable model of Lua's garbage collector.
//!
//! The crate provides an interpreter for a Lua subset whose configurations
//! expose the value store, the object store and the term being reduced;
//! reachability-based collection with finalizers and weak/ephemeron tables
//! that can be interleaved with program steps under explicit schedules; and
//! a static checker that flags weak-table reads whose result may depend on
//! when collection happens.

pub mod frontend;
pub mod heaps;
pub mod gc;
pub mod interpreter;
pub mod executor;
pub mod luasafe;
