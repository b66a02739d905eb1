//! Observation sets: the results a program can produce over the explored
//! interleavings of program steps and collection cycles.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use super::{apply_outcome, close_phase, run, Observation, ProgramResult, Schedule};
use crate::gc::{enumerate_gc_steps, gc_cycle, GcMode, GcOutcome, Granularity, Selector};
use crate::heaps::{FinalizationMark, ObjectStore};
use crate::interpreter::{complete_gc_request, finalizer_running, step_in_place, Configuration, FinalKind, Step, StuckTerm};

pub type ObservationSet = BTreeSet<Observation>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub mode: GcMode,
    /// Program steps per trace; deeper states count as divergent.
    pub max_steps: usize,
    /// Cycle outcomes per state: `None` for the maximal cycle only,
    /// `Some(k)` for every choice discarding or clearing at most `k` items.
    pub subsets: Option<usize>,
    /// Distinct states visited before giving up.
    pub max_states: usize,
}

impl Bounds {
    pub fn new(mode: GcMode) -> Bounds {
        Bounds { mode, max_steps: 200, subsets: None, max_states: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Explorer {
    /// One trace per schedule.
    Sample(Vec<Schedule>),
    /// Every interleaving within the bounds.
    Exhaustive(Bounds),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExploreStats {
    pub traces: usize,
    pub states: usize,
    pub transitions: usize,
    pub finalize_events: usize,
    /// Transitions in which a finalized (`⊘`) table got another mark, or a
    /// sampled trace that finalized one table twice.
    pub refinalizations: usize,
    /// The state budget ran out; the set may be incomplete.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exploration {
    pub observations: ObservationSet,
    pub stats: ExploreStats,
}

/// Observation set of `c` under `explorer`; `fuel` bounds sampled traces.
pub fn observations(c: &Configuration, explorer: &Explorer, fuel: usize) -> Result<ObservationSet, StuckTerm> {
    explore(c, explorer, fuel).map(|e| e.observations)
}

pub fn explore(c: &Configuration, explorer: &Explorer, fuel: usize) -> Result<Exploration, StuckTerm> {
    match explorer {
        Explorer::Sample(scheds) => {
            let runs: Vec<_> = scheds.par_iter().map(|s| run(c.clone(), s, fuel)).collect::<Result<_, _>>()?;
            let mut stats = ExploreStats { traces: runs.len(), ..Default::default() };
            let mut observations = BTreeSet::new();
            for r in &runs {
                let fin = r.finalized_tables();
                let distinct: BTreeSet<_> = fin.iter().collect();
                stats.finalize_events += fin.len();
                stats.refinalizations += fin.len() - distinct.len();
                stats.transitions += r.trace.len();
                observations.insert(r.observation());
            }
            Ok(Exploration { observations, stats })
        }
        Explorer::Exhaustive(b) => {
            let mut x = Exhaustive { b: *b, fuel, seen: HashMap::new(), obs: BTreeSet::new(), stats: ExploreStats::default() };
            x.visit(c.clone())?;
            x.stats.states = x.seen.len();
            Ok(Exploration { observations: x.obs, stats: x.stats })
        }
    }
}

struct Exhaustive {
    b: Bounds,
    fuel: usize,
    /// Least program-step depth at which each state was expanded.
    seen: HashMap<Configuration, usize>,
    obs: ObservationSet,
    stats: ExploreStats,
}

/// True when some table finalized in `before` is marked again in `after`.
fn unfinalized(before: &ObjectStore, after: &ObjectStore) -> bool {
    before.tables.iter().any(|(id, t)| {
        t.pos == FinalizationMark::Finalized && after.table(*id).is_some_and(|u| u.pos != FinalizationMark::Finalized)
    })
}

impl Exhaustive {
    fn finish(&mut self, kind: &FinalKind, mut c: Configuration) -> Result<(), StuckTerm> {
        let mut trace = Vec::new();
        close_phase(&mut c, self.b.mode, self.fuel, &mut trace)?;
        self.stats.traces += 1;
        self.stats.finalize_events += trace.len();
        let r = ProgramResult::of_final(kind, &c.sigma, &c.theta);
        self.obs.insert(Observation::new(&r, &c.output));
        Ok(())
    }

    fn gc_edge(&mut self, c: &Configuration, o: GcOutcome, depth: usize, work: &mut Vec<(Configuration, usize)>) {
        self.stats.transitions += 1;
        if o.finalized.is_some() {
            self.stats.finalize_events += 1;
        }
        if unfinalized(&c.theta, &o.theta) {
            self.stats.refinalizations += 1;
        }
        let mut next = c.clone();
        apply_outcome(&mut next, o);
        work.push((next, depth));
    }

    /// Depth-first over an explicit stack; traces can be long.
    fn visit(&mut self, start: Configuration) -> Result<(), StuckTerm> {
        let mut work = vec![(start, 0)];
        while let Some((c, depth)) = work.pop() {
            match self.seen.get(&c) {
                Some(&d) if d <= depth => continue,
                _ => {}
            }
            if self.seen.len() >= self.b.max_states {
                self.stats.truncated = true;
                continue;
            }
            self.seen.insert(c.clone(), depth);

            let mut stepped = c.clone();
            match step_in_place(&mut stepped, true)? {
                Step::Final(k) => {
                    self.finish(&k, c)?;
                    continue;
                }
                Step::GcRequest => {
                    let o = gc_cycle(&c, self.b.mode, &Selector::Maximal);
                    if o.changed() {
                        self.gc_edge(&c, o, depth, &mut work);
                    } else {
                        let mut next = c;
                        complete_gc_request(&mut next);
                        self.stats.transitions += 1;
                        work.push((next, depth));
                    }
                    continue;
                }
                Step::Stepped(_) if depth >= self.b.max_steps => {
                    self.stats.traces += 1;
                    self.obs.insert(Observation::new(&ProgramResult::divergent(), &[]));
                    continue;
                }
                Step::Stepped(_) => {
                    if unfinalized(&c.theta, &stepped.theta) {
                        self.stats.refinalizations += 1;
                    }
                    self.stats.transitions += 1;
                    work.push((stepped, depth + 1));
                }
            }
            let g = match self.b.subsets {
                None => Granularity::MaximalOnly,
                Some(k) => Granularity::SubsetsUpTo(k),
            };
            // As in sampled runs, a finalizer runs to completion first.
            let busy = finalizer_running(&c.term);
            for o in enumerate_gc_steps(&c, self.b.mode, g) {
                if busy && o.finalized.is_some() {
                    continue;
                }
                self.gc_edge(&c, o, depth, &mut work);
            }
        }
        Ok(())
    }
}
