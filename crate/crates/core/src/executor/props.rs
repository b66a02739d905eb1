//! Executable checks of collection properties.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{canonical_config, explore, Explorer, ObservationSet};
use crate::gc::{enumerate_gc_steps, GcMode, Granularity};
use crate::heaps::Loc;
use crate::interpreter::{step_in_place, Configuration, Step, StuckTerm};

/// Both orders of one adjacent (collection, program step) pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SwapCounterexample {
    pub step: usize,
    pub discarded: Vec<String>,
    /// Collect, then step.
    pub collect_first: String,
    /// Step, then remove the same locations.
    pub step_first: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PostponementReport {
    /// Pairs compared.
    pub checked: usize,
    pub counterexamples: Vec<SwapCounterexample>,
}

impl PostponementReport {
    pub fn holds(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

fn remove(c: &mut Configuration, ds: &[Loc]) {
    for l in ds {
        match l {
            Loc::Ref(r) => {
                c.sigma.map.remove(r);
            }
            Loc::Table(t) => {
                c.theta.tables.remove(t);
            }
            Loc::Closure(k) => {
                c.theta.closures.remove(k);
            }
        }
    }
}

/// Walks the program and, at up to `trials` randomly chosen points, swaps a
/// simple collection with the following program step. The collect-first
/// endpoint must be reach-equivalent to stepping first and then removing
/// the same locations.
pub fn check_postponement(c: &Configuration, trials: usize, seed: u64) -> Result<PostponementReport, StuckTerm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PostponementReport::default();
    let mut cur = c.clone();
    let mut step = 0;
    // Each pass over the trace spends at most `trials` checks; restart from
    // the initial configuration until the budget is used or nothing applies.
    let mut found_any = false;
    while report.checked < trials {
        let mut after = cur.clone();
        let done = !matches!(step_in_place(&mut after, false)?, Step::Stepped(_));
        if !done {
            let mut outs = enumerate_gc_steps(&cur, GcMode::Simple, Granularity::SubsetsUpTo(2));
            outs.retain(|o| !o.discarded.is_empty());
            if let Some(o) = outs.choose(&mut rng).filter(|_| rng.gen_bool(0.5)) {
                let mut c2 = cur.clone();
                c2.sigma = o.sigma.clone();
                c2.theta = o.theta.clone();
                step_in_place(&mut c2, false)?;
                let mut c4 = after.clone();
                remove(&mut c4, &o.discarded);
                let (a, b) = (canonical_config(&c2), canonical_config(&c4));
                report.checked += 1;
                found_any = true;
                if a != b || c2.output != c4.output {
                    report.counterexamples.push(SwapCounterexample {
                        step,
                        discarded: o.discarded.iter().map(|l| l.to_string()).collect(),
                        collect_first: a,
                        step_first: b,
                    });
                }
            }
            cur = after;
            step += 1;
        } else {
            if !found_any {
                break;
            }
            cur = c.clone();
            step = 0;
        }
    }
    Ok(report)
}

/// Bounded check that removing `l` changes no observation. Unreachable
/// locations are always garbage; for reachable ones this approximates the
/// semantic notion within the explorer's budget. A removal that leaves the
/// program stuck counts as observable.
pub fn is_garbage(c: &Configuration, l: Loc, explorer: &Explorer, fuel: usize) -> bool {
    let with: ObservationSet = match explore(c, explorer, fuel) {
        Ok(e) => e.observations,
        Err(_) => return false,
    };
    let mut without = c.clone();
    remove(&mut without, &[l]);
    match explore(&without, explorer, fuel) {
        Ok(e) => e.observations == with,
        Err(_) => false,
    }
}
