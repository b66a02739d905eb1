//! Interleaving program steps with collection cycles.
//!
//! A [`Schedule`] decides when a cycle runs between two program steps, how
//! its partition is chosen and which kind of cycle it is. Whatever the
//! schedule, a `collectgarbage()` call runs maximal cycles until one splices
//! a finalizer (which then runs first) or nothing changes. Scheduled cycles
//! do not start a finalizer while another one is still running. When the
//! program ends, tables still marked for finalization are finalized in protected
//! mode, most recently marked first.

mod explore;
mod experiment;
mod props;
mod result;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::frontend::ast::{Expr, Stmt, StmtKind};
use crate::gc::{enumerate_gc_steps, gc_cycle, Choice, GcEvent, GcMode, GcOutcome, Granularity, Selector};
use crate::heaps::{index_metatable, Builtin, FinalizationMark, TableId, Value};
use crate::interpreter::{
    complete_gc_request, decompose, finalizer_running, interleave_finalizer, Decomposition, step_in_place, Configuration, FinalKind, Step, StuckTerm,
};

pub use explore::{explore, observations, Bounds, Exploration, ExploreStats, Explorer, ObservationSet};
pub use experiment::{
    check_property, correctness_schedules, run_experiment, CorpusEntry, Expected, Experiment, ExperimentError,
    ProgramClass, Property, PropertyVerdict, Report, ScheduledRun,
};
pub use props::{check_postponement, is_garbage, PostponementReport, SwapCounterexample};
pub use result::{canonical_config, Observation, ProgramResult, ResultKind};

/// When cycles run, relative to program steps.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// Only on `collectgarbage()`.
    Never,
    /// Before every program step.
    Eager,
    /// Before every `k`-th program step.
    Periodic(usize),
    /// Before each program step with probability `p`.
    Random { seed: u64, p: f64 },
    /// Before the program steps with these indices (0-based).
    Scripted(Vec<usize>),
}

/// How a non-forced cycle picks its partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectorSpec {
    Maximal,
    /// Uniformly among the outcomes discarding or clearing at most two items.
    Seeded(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub policy: Policy,
    pub selector: SelectorSpec,
    pub mode: GcMode,
}

impl Schedule {
    pub fn new(policy: Policy, mode: GcMode) -> Schedule {
        Schedule { policy, selector: SelectorSpec::Maximal, mode }
    }

    pub fn with_selector(mut self, s: SelectorSpec) -> Schedule {
        self.selector = s;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid {what}: {text}")]
pub struct ParseSpecError {
    pub what: &'static str,
    pub text: String,
}

fn bad(what: &'static str, text: &str) -> ParseSpecError {
    ParseSpecError { what, text: text.to_string() }
}

impl FromStr for Policy {
    type Err = ParseSpecError;

    /// `never`, `eager`, `periodic=K`, `random=SEED,P`, `scripted=I,J,...`.
    fn from_str(s: &str) -> Result<Policy, ParseSpecError> {
        let (head, arg) = s.split_once('=').unwrap_or((s, ""));
        let nums = |a: &str| -> Result<Vec<usize>, ParseSpecError> {
            a.split(',').filter(|x| !x.is_empty()).map(|x| x.trim().parse().map_err(|_| bad("schedule", s))).collect()
        };
        match (head, arg) {
            ("never", "") => Ok(Policy::Never),
            ("eager", "") => Ok(Policy::Eager),
            ("periodic", k) => match k.parse() {
                Ok(k) if k > 0 => Ok(Policy::Periodic(k)),
                _ => Err(bad("schedule", s)),
            },
            ("random", a) => {
                let (seed, p) = a.split_once(',').unwrap_or((a, "0.5"));
                let seed = seed.trim().parse().map_err(|_| bad("schedule", s))?;
                let p: f64 = p.trim().parse().map_err(|_| bad("schedule", s))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad("schedule", s));
                }
                Ok(Policy::Random { seed, p })
            }
            ("scripted", a) => Ok(Policy::Scripted(nums(a)?)),
            _ => Err(bad("schedule", s)),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Never => write!(f, "never"),
            Policy::Eager => write!(f, "eager"),
            Policy::Periodic(k) => write!(f, "periodic={k}"),
            Policy::Random { seed, p } => write!(f, "random={seed},{p}"),
            Policy::Scripted(is) => {
                let is: Vec<String> = is.iter().map(|i| i.to_string()).collect();
                write!(f, "scripted={}", is.join(","))
            }
        }
    }
}

impl FromStr for GcMode {
    type Err = ParseSpecError;

    fn from_str(s: &str) -> Result<GcMode, ParseSpecError> {
        match s {
            "simple" => Ok(GcMode::Simple),
            "fin" => Ok(GcMode::Fin),
            "fin-weak" | "fin_weak" => Ok(GcMode::FinWeak),
            _ => Err(bad("mode", s)),
        }
    }
}

impl FromStr for SelectorSpec {
    type Err = ParseSpecError;

    /// `maximal` or `seeded=SEED`.
    fn from_str(s: &str) -> Result<SelectorSpec, ParseSpecError> {
        match s.split_once('=') {
            None if s == "maximal" => Ok(SelectorSpec::Maximal),
            Some(("seeded", n)) => n.parse().map(SelectorSpec::Seeded).map_err(|_| bad("selector", s)),
            _ => Err(bad("selector", s)),
        }
    }
}

/// One record of an execution trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEntry {
    /// A program step; `step` counts program steps from 0.
    Step { step: usize, rule: String, redex: String },
    Gc(GcEvent),
    /// A finalizer run after the program ended.
    CloseFinalize { table: u64, called: bool, error: Option<String> },
}

impl TraceEntry {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace entries serialize")
    }

    /// Tab-separated `step rule redex` for program steps; JSON otherwise.
    pub fn to_text(&self) -> String {
        match self {
            TraceEntry::Step { step, rule, redex } => format!("{step}\t{rule}\t{redex}"),
            other => other.to_json_line(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Run {
    pub result: ProgramResult,
    pub trace: Vec<TraceEntry>,
    pub output: Vec<String>,
    /// Program steps taken.
    pub steps: usize,
    pub last: Configuration,
}

impl Run {
    pub fn observation(&self) -> Observation {
        Observation::new(&self.result, &self.output)
    }

    /// Tables in finalization order, one entry per finalize event.
    pub fn finalized_tables(&self) -> Vec<TableId> {
        self.trace
            .iter()
            .filter_map(|e| match e {
                TraceEntry::Gc(ev) if ev.kind == crate::gc::GcEventKind::Finalize => {
                    ev.details["table"].as_u64().map(TableId)
                }
                TraceEntry::CloseFinalize { table, .. } => Some(TableId(*table)),
                _ => None,
            })
            .collect()
    }
}

/// Installs a cycle outcome, splicing its finalizer call before the redex.
pub fn apply_outcome(c: &mut Configuration, o: GcOutcome) {
    c.sigma = o.sigma;
    c.theta = o.theta;
    if let Some(f) = o.finalizer {
        interleave_finalizer(&mut c.term, f.function, f.table);
    }
}

struct Driver<'a> {
    sched: &'a Schedule,
    policy_rng: ChaCha8Rng,
    select_rng: Option<ChaCha8Rng>,
    trace: Vec<TraceEntry>,
}

impl Driver<'_> {
    fn wants_gc(&mut self, step: usize) -> bool {
        match &self.sched.policy {
            Policy::Never => false,
            Policy::Eager => true,
            Policy::Periodic(k) => step % k == 0 && step > 0,
            Policy::Random { p, .. } => self.policy_rng.gen_bool(*p),
            Policy::Scripted(is) => is.contains(&step),
        }
    }

    fn record(&mut self, step: usize, o: &GcOutcome) {
        self.trace.extend(GcEvent::from_outcome(step, o).into_iter().map(TraceEntry::Gc));
    }

    /// One scheduled cycle; false when it would change nothing.
    fn scheduled_cycle(&mut self, c: &mut Configuration, step: usize) -> bool {
        // Finalizers run to completion before another one starts.
        let busy = finalizer_running(&c.term);
        let o = match self.select_rng.as_mut() {
            None if busy => {
                gc_cycle(c, self.sched.mode, &Selector::Choose(Choice { no_finalizer: true, ..Choice::default() }))
            }
            None => gc_cycle(c, self.sched.mode, &Selector::Maximal),
            Some(rng) => {
                let mut all = enumerate_gc_steps(c, self.sched.mode, Granularity::SubsetsUpTo(2));
                all.retain(|o| !busy || o.finalized.is_none());
                if all.is_empty() {
                    return false;
                }
                let i = rng.gen_range(0..all.len());
                all.swap_remove(i)
            }
        };
        if !o.changed() {
            return false;
        }
        self.record(step, &o);
        apply_outcome(c, o);
        true
    }

    /// `collectgarbage()`: maximal cycles until a finalizer is spliced in or
    /// nothing changes; in the latter case the call returns.
    fn forced_collection(&mut self, c: &mut Configuration, step: usize) {
        loop {
            let o = gc_cycle(c, self.sched.mode, &Selector::Maximal);
            if !o.changed() {
                complete_gc_request(c);
                return;
            }
            self.record(step, &o);
            let spliced = o.finalizer.is_some();
            apply_outcome(c, o);
            if spliced {
                return;
            }
        }
    }
}

/// Runs `c` under `sched` for at most `fuel` program steps.
pub fn run(c: Configuration, sched: &Schedule, fuel: usize) -> Result<Run, StuckTerm> {
    let seed = match sched.policy {
        Policy::Random { seed, .. } => seed,
        _ => 0,
    };
    let mut d = Driver {
        sched,
        policy_rng: ChaCha8Rng::seed_from_u64(seed),
        select_rng: match sched.selector {
            SelectorSpec::Maximal => None,
            SelectorSpec::Seeded(s) => Some(ChaCha8Rng::seed_from_u64(s)),
        },
        trace: Vec::new(),
    };
    let mut c = c;
    let mut steps = 0;
    let kind = loop {
        if steps >= fuel {
            break match decompose(&c.term) {
                Decomposition::Final(k) => Some(k),
                Decomposition::Redex(_) => None,
            };
        }
        if !is_final(&c) && d.wants_gc(steps) {
            d.scheduled_cycle(&mut c, steps);
        }
        match step_in_place(&mut c, true)? {
            Step::Final(k) => break Some(k),
            Step::GcRequest => d.forced_collection(&mut c, steps),
            Step::Stepped(info) => {
                d.trace.push(TraceEntry::Step { step: steps, rule: info.rule.to_string(), redex: info.redex });
                steps += 1;
            }
        }
    };
    let result = match &kind {
        Some(k) => {
            close_phase(&mut c, sched.mode, fuel, &mut d.trace)?;
            ProgramResult::of_final(k, &c.sigma, &c.theta)
        }
        None => ProgramResult::divergent(),
    };
    Ok(Run { result, trace: d.trace, output: c.output.clone(), steps, last: c })
}

fn is_final(c: &Configuration) -> bool {
    matches!(decompose(&c.term), Decomposition::Final(_))
}

/// Finalizes every table still marked, most recent mark first, each call
/// protected; errors are recorded, not propagated.
pub fn close_phase(
    c: &mut Configuration,
    mode: GcMode,
    fuel: usize,
    trace: &mut Vec<TraceEntry>,
) -> Result<(), StuckTerm> {
    if mode == GcMode::Simple {
        return Ok(());
    }
    loop {
        let next = c
            .theta
            .tables
            .iter()
            .filter(|(_, t)| t.pos.is_marked())
            .max_by_key(|(_, t)| t.pos.priority())
            .map(|(id, _)| *id);
        let Some(tid) = next else { return Ok(()) };
        c.theta.table_mut(tid).expect("marked table").pos = FinalizationMark::Finalized;
        let f = index_metatable(tid, "__gc", &c.theta);
        if !matches!(f, Value::Closure(_) | Value::Builtin(_)) {
            trace.push(TraceEntry::CloseFinalize { table: tid.0, called: false, error: None });
            continue;
        }
        let call = Expr::call(
            Expr::val(Value::Builtin(Builtin::Pcall)),
            vec![Expr::val(f), Expr::table(tid)],
        );
        let mut fc = Configuration {
            sigma: std::mem::take(&mut c.sigma),
            theta: std::mem::take(&mut c.theta),
            term: Stmt::new(StmtKind::Return(vec![call])),
            output: std::mem::take(&mut c.output),
        };
        let mut error = None;
        let mut budget = fuel;
        loop {
            match step_in_place(&mut fc, false)? {
                Step::Final(FinalKind::Returned(vs)) => {
                    if vs.first() == Some(&Value::Bool(false)) {
                        error = Some(vs.get(1).cloned().unwrap_or(Value::Nil).to_string());
                    }
                    break;
                }
                Step::Final(k) => {
                    error = Some(format!("{k:?}"));
                    break;
                }
                _ if budget == 0 => {
                    error = Some("finalizer exhausted fuel".into());
                    break;
                }
                _ => budget -= 1,
            }
        }
        c.sigma = fc.sigma;
        c.theta = fc.theta;
        c.output = fc.output;
        trace.push(TraceEntry::CloseFinalize { table: tid.0, called: true, error });
    }
}

#[cfg(test)]
mod tests;
