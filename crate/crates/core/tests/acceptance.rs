//! One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use luagc::executor::{
    check_postponement, correctness_schedules, explore, run, Bounds, Explorer, Policy, ProgramClass, Run, Schedule,
};
use luagc::gc::{gc_cycle, reach, reach_cte, reach_cte_oracle, reach_cte_recursive, reach_oracle, reach_recursive, GcMode, Selector};
use luagc::heaps::{weakness, TableId, Weakness};
use luagc::interpreter::Configuration;
use luagc::luasafe::{check_str, Severity, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Finalize events seen while checking criteria 1 to 7.
#[derive(Default)]
struct FinalizeLog {
    traces: usize,
    events: usize,
    repeated: Vec<String>,
}

impl FinalizeLog {
    fn record(&mut self, what: &str, r: &Run) {
        let fin = r.finalized_tables();
        let distinct: BTreeSet<TableId> = fin.iter().copied().collect();
        self.traces += 1;
        self.events += fin.len();
        if distinct.len() != fin.len() {
            self.repeated.push(what.to_string());
        }
    }

    fn record_exploration(&mut self, what: &str, e: &luagc::executor::Exploration) {
        self.traces += e.stats.traces;
        self.events += e.stats.finalize_events;
        if e.stats.refinalizations > 0 {
            self.repeated.push(what.to_string());
        }
    }
}

fn cfg(src: &str) -> Configuration {
    Configuration::from_source(src).unwrap()
}

fn run_src(src: &str, p: Policy, mode: GcMode) -> Run {
    run(cfg(src), &Schedule::new(p, mode), 10_000).unwrap()
}

type Outcome = Result<String, String>;

fn check(ok: bool, pass: String, fail: String) -> Outcome {
    if ok {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn finalizer_order(log: &mut FinalizeLog) -> Outcome {
    let t = Instant::now();
    let (fig3, swapped) = (corpus_source("figures/fig3.lua"), corpus_source("figures/fig3_swapped.lua"));
    let expect = ["bye\ttable: 0x00000002", "bye\ttable: 0x00000001"];
    let mut bad = Vec::new();
    for mode in [GcMode::Fin, GcMode::FinWeak] {
        for p in [Policy::Never, Policy::Eager, Policy::Periodic(2), Policy::Random { seed: 3, p: 0.5 }] {
            let r = run_src(&fig3, p.clone(), mode);
            log.record("fig3", &r);
            if r.output.get(1..).map(|o| o.iter().map(String::as_str).collect::<Vec<_>>()) != Some(expect.to_vec()) {
                bad.push(format!("fig3 {p}: {:?}", r.output));
            }
            let r = run_src(&swapped, p.clone(), mode);
            log.record("fig3 swapped", &r);
            if r.output.get(1..).map(|o| o.iter().map(String::as_str).collect::<Vec<_>>()) != Some(vec![expect[1], expect[0]]) {
                bad.push(format!("swapped {p}: {:?}", r.output));
            }
        }
    }
    let took = t.elapsed() / 16;
    check(
        bad.is_empty() && took < Duration::from_secs(1),
        format!("b finalized before a, order swaps with the setmetatable lines; {took:?} per run"),
        format!("{bad:?}; {took:?} per run"),
    )
}

fn finalizer_marking(log: &mut FinalizeLog) -> Outcome {
    let src = corpus_source("figures/fig2.lua");
    let lines: Vec<&str> = src.lines().collect();
    let prefix = |n: usize| lines[..n].join("\n");
    let mut bad = Vec::new();
    for p in [Policy::Never, Policy::Eager] {
        for (upto, expect) in [(5, vec![]), (10, vec!["goodbye"]), (15, vec!["goodbye"])] {
            let r = run_src(&prefix(upto), p.clone(), GcMode::FinWeak);
            log.record("fig2", &r);
            if r.output != expect || r.result.summary() != ";" {
                bad.push(format!("{p} up to line {upto}: {:?} {}", r.output, r.result.summary()));
            }
        }
        // The table with a string `__gc` is gone; only the metatable is left.
        let r = run_src(&src, p.clone(), GcMode::FinWeak);
        if r.last.theta.tables.len() > 1 {
            bad.push(format!("{p}: {} tables survive", r.last.theta.tables.len()));
        }
    }
    check(bad.is_empty(), "nothing, then goodbye, then nothing; string __gc collected silently".into(), format!("{bad:?}"))
}

fn correctness_and_determinism(log: &mut FinalizeLog) -> Outcome {
    let t = Instant::now();
    let seeds: Vec<u64> = (1..=20).collect();
    let scheds = correctness_schedules(GcMode::Simple, &seeds);
    let (mut programs, mut mismatches) = (0, Vec::new());
    for e in manifest().iter().filter(|e| e.class == ProgramClass::Deterministic) {
        let c = cfg(&corpus_source(&e.path));
        let base = run(c.clone(), &scheds[0], 10_000).unwrap();
        if base.steps > 100 {
            return Err(format!("{} takes {} steps", e.path, base.steps));
        }
        programs += 1;
        let mut obs = BTreeSet::new();
        for s in &scheds {
            let r = run(c.clone(), s, 10_000).unwrap();
            log.record(&e.path, &r);
            obs.insert(r.observation());
        }
        if obs.len() != 1 {
            mismatches.push(e.path.clone());
        }
    }
    let took = t.elapsed();
    check(
        programs >= 20 && mismatches.is_empty() && took < Duration::from_secs(30),
        format!("{programs} programs x {} schedules, all singleton; {took:?}", scheds.len()),
        format!("{programs} programs, mismatches {mismatches:?}; {took:?}"),
    )
}

fn postponement() -> Outcome {
    let programs: Vec<Configuration> = manifest()
        .iter()
        .filter(|e| e.class == ProgramClass::Deterministic)
        .map(|e| cfg(&corpus_source(&e.path)))
        .collect();
    let (mut checked, mut failures, mut seed) = (0, 0, 0u64);
    while checked < 1000 {
        for c in &programs {
            let r = check_postponement(c, 25, seed).unwrap();
            checked += r.checked;
            failures += r.counterexamples.len();
        }
        seed += 1;
    }
    check(
        failures == 0,
        format!("{checked} collect/step swaps, all reach-equivalent"),
        format!("{failures} of {checked} swaps differ"),
    )
}

fn reachability_oracles() -> Outcome {
    let mut heaps = [0usize; 4];
    let mut disagree = Vec::new();
    for n in 1..=6 {
        enumerate_heaps(n, &PLAIN_PATTERN, false, |s| {
            heaps[0] += 1;
            let h = s.build();
            for l in &h.locs {
                let o = reach_oracle(*l, &h.roots[..], &h.sigma, &h.theta);
                if reach_recursive(*l, &h.roots[..], &h.sigma, &h.theta) != o || reach(*l, &h.roots[..], &h.sigma, &h.theta) != o {
                    disagree.push(format!("{s:?}"));
                }
            }
        });
        enumerate_heaps(n, &WEAK_PATTERN, true, |s| {
            heaps[1] += 1;
            let h = s.build();
            let rt = &h.roots[..];
            for l in &h.locs {
                let o = reach_cte_oracle(*l, rt, &h.sigma, &h.theta, rt);
                if reach_cte_recursive(*l, rt, &h.sigma, &h.theta, rt) != o || reach_cte(*l, rt, &h.sigma, &h.theta, rt) != o {
                    disagree.push(format!("{s:?}"));
                }
            }
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (i, weak) in [(2, false), (3, true)] {
        for _ in 0..1000 {
            heaps[i] += 1;
            let s = random_heap(&mut rng, 12, weak);
            let h = s.build();
            let rt = &h.roots[..];
            for l in &h.locs {
                let ok = if weak {
                    let o = reach_cte_oracle(*l, rt, &h.sigma, &h.theta, rt);
                    reach_cte_recursive(*l, rt, &h.sigma, &h.theta, rt) == o && reach_cte(*l, rt, &h.sigma, &h.theta, rt) == o
                } else {
                    let o = reach_oracle(*l, rt, &h.sigma, &h.theta);
                    reach_recursive(*l, rt, &h.sigma, &h.theta) == o && reach(*l, rt, &h.sigma, &h.theta) == o
                };
                if !ok {
                    disagree.push(format!("{s:?}"));
                }
            }
        }
    }
    check(
        disagree.is_empty(),
        format!(
            "reach: {} enumerated + {} random heaps; reach_cte: {} enumerated + {} random heaps; no disagreement",
            heaps[0], heaps[2], heaps[1], heaps[3]
        ),
        format!("{} disagreements, first {:?}", disagree.len(), disagree.first()),
    )
}

/// Fields left in the weak-keyed table after one maximal cycle.
fn ephemeron_fields_after_cycle(path: &str, log: &mut FinalizeLog) -> usize {
    let r = run_src(&corpus_source(path), Policy::Never, GcMode::FinWeak);
    log.record(path, &r);
    let o = gc_cycle(&r.last, GcMode::FinWeak, &Selector::Maximal);
    let (id, t) = o
        .theta
        .tables
        .iter()
        .find(|(id, _)| weakness(**id, &o.theta) == Weakness::WeakKeys)
        .expect("the weak-keyed table is returned, hence kept");
    let _ = id;
    t.fields.len()
}

fn ephemerons(log: &mut FinalizeLog) -> Outcome {
    let garbage = ephemeron_fields_after_cycle("weak/ephemeron_garbage_key.lua", log);
    let live = ephemeron_fields_after_cycle("weak/ephemeron_live_key.lua", log);
    check(
        garbage == 0 && live == 1,
        "self-referencing entry cleared without an outside key reference, kept with one".into(),
        format!("fields left: {garbage} without, {live} with an outside reference"),
    )
}

fn nondeterminism_witness(log: &mut FinalizeLog) -> Outcome {
    let e = explore(&cfg(&corpus_source("figures/fig1_bounded.lua")), &Explorer::Exhaustive(Bounds::new(GcMode::FinWeak)), 10_000)
        .unwrap();
    log.record_exploration("fig1 bounded", &e);
    let results: Vec<String> = e.observations.iter().map(|o| o.result.clone()).collect();
    check(
        e.observations.len() >= 2 && !e.stats.truncated,
        format!("{} observations ({}) over {} states", results.len(), results.join(", "), e.stats.states),
        format!("{} observations, truncated {}", results.len(), e.stats.truncated),
    )
}

fn analyzer_verdicts() -> Outcome {
    let mut bad = Vec::new();
    let unsafe_at = |src: &str| -> (Verdict, Vec<(u32, u32)>) {
        let r = check_str(src).unwrap();
        let at = r.diagnostics.iter().filter(|d| d.severity == Severity::Unsafe).map(|d| (d.line, d.col)).collect();
        (r.verdict, at)
    };
    let (v, _) = unsafe_at(&corpus_source("figures/fig1.lua"));
    if v != Verdict::Unsafe {
        bad.push(format!("fig1 {v}"));
    }
    let (v, at) = unsafe_at(&corpus_source("figures/fig8.lua"));
    let lines: Vec<u32> = at.iter().map(|(l, _)| *l).collect();
    if v != Verdict::Unsafe || lines != [9, 10] {
        bad.push(format!("fig8 {v} {at:?}"));
    }
    let (v, at) = unsafe_at(&corpus_source("figures/fig9.lua"));
    if v != Verdict::Unsafe || at != [(6, 1)] {
        bad.push(format!("fig9 {v} {at:?}"));
    }
    let safe: Vec<_> = manifest().into_iter().filter(|e| e.path.starts_with("safe/")).collect();
    for e in &safe {
        let (v, _) = unsafe_at(&corpus_source(&e.path));
        if v != Verdict::Safe {
            bad.push(format!("{} {v}", e.path));
        }
    }
    check(
        bad.is_empty() && safe.len() >= 10,
        format!("fig1 UNSAFE; fig8 lines 9,10; fig9 6:1 only; {} handwritten programs SAFE", safe.len()),
        format!("{bad:?}"),
    )
}

fn safe_implies_deterministic() -> Outcome {
    let (mut checked, mut skipped, mut violations) = (0, 0, Vec::new());
    for e in manifest() {
        let src = corpus_source(&e.path);
        if check_str(&src).unwrap().verdict != Verdict::Safe {
            continue;
        }
        for subsets in [None, Some(1)] {
            let b = Bounds { subsets, max_states: 50_000, ..Bounds::new(GcMode::FinWeak) };
            let x = explore(&cfg(&src), &Explorer::Exhaustive(b), 10_000).unwrap();
            if x.stats.truncated {
                skipped += 1;
            } else {
                checked += 1;
                if x.observations.len() != 1 {
                    violations.push(format!("{} ({} observations)", e.path, x.observations.len()));
                }
            }
        }
    }
    check(
        violations.is_empty() && checked > 0,
        format!("{checked} explorations of SAFE programs, all singleton ({skipped} beyond bounds)"),
        format!("violations: {violations:?}"),
    )
}

fn main() {
    let mut log = FinalizeLog::default();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        match o {
            Ok(m) => println!("criterion {n:>2} PASS {name}: {m}"),
            Err(m) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {name}: {m}");
            }
        }
    };
    report(1, "finalizer ordering", finalizer_order(&mut log));
    report(2, "finalizer marking", finalizer_marking(&mut log));
    report(3, "collection correctness and determinism", correctness_and_determinism(&mut log));
    report(4, "postponement", postponement());
    report(5, "reachability oracles", reachability_oracles());
    report(6, "ephemeron collection", ephemerons(&mut log));
    report(7, "nondeterminism witness", nondeterminism_witness(&mut log));
    report(8, "analyzer verdicts", analyzer_verdicts());
    report(9, "safe implies deterministic", safe_implies_deterministic());
    let fin = check(
        log.repeated.is_empty() && log.events > 0,
        format!("{} finalize events over {} traces, no table finalized twice", log.events, log.traces),
        format!("repeated finalization in {:?}", log.repeated),
    );
    report(10, "finalizer at most once", fin);
    if failed > 0 {
        std::process::exit(1);
    }
}
