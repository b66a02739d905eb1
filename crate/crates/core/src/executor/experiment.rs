//! Experiment manifests, corpus manifests and property reports.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{check_postponement, explore, Bounds, Explorer, Observation, Policy, Schedule, SelectorSpec};
use crate::gc::GcMode;
use crate::interpreter::{Configuration, StuckTerm};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Spec(#[from] super::ParseSpecError),
    #[error(transparent)]
    Stuck(#[from] StuckTerm),
}

/// JSON input describing one batch of runs of one program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub program: String,
    /// Policy specs such as `eager` or `random=3,0.5`.
    #[serde(default = "default_schedules")]
    pub schedules: Vec<String>,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_fuel")]
    pub fuel: usize,
    /// Each seed adds a `random=seed,0.5` schedule.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub traces: bool,
}

fn default_schedules() -> Vec<String> {
    vec!["never".into(), "eager".into()]
}

fn default_mode() -> String {
    "fin-weak".into()
}

fn default_fuel() -> usize {
    10_000
}

impl Experiment {
    pub fn schedules(&self) -> Result<Vec<Schedule>, super::ParseSpecError> {
        let mode: GcMode = self.mode.parse()?;
        let mut out = Vec::new();
        for s in &self.schedules {
            out.push(Schedule::new(s.parse()?, mode));
        }
        for &seed in &self.seeds {
            out.push(Schedule::new(Policy::Random { seed, p: 0.5 }, mode));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduledRun {
    pub schedule: String,
    pub observation: Observation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<super::TraceEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyVerdict {
    pub property: String,
    pub program: String,
    pub holds: bool,
    /// Expected not to hold, for programs nondeterministic by design.
    pub expected_fail: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub program: String,
    pub fuel: usize,
    pub observations: Vec<Observation>,
    pub runs: Vec<ScheduledRun>,
    pub verdicts: Vec<PropertyVerdict>,
}

/// Runs every schedule of `e` on `c`; the determinism verdict asks for a
/// single observation.
pub fn run_experiment(e: &Experiment, c: &Configuration) -> Result<Report, ExperimentError> {
    let scheds = e.schedules().map_err(ExperimentError::Spec)?;
    let mut runs = Vec::new();
    for s in &scheds {
        let r = super::run(c.clone(), s, e.fuel).map_err(ExperimentError::Stuck)?;
        runs.push(ScheduledRun {
            schedule: s.policy.to_string(),
            observation: r.observation(),
            trace: e.traces.then_some(r.trace),
        });
    }
    let observations: BTreeSet<Observation> = runs.iter().map(|r| r.observation.clone()).collect();
    let verdicts = vec![PropertyVerdict {
        property: "determinism".into(),
        program: e.program.clone(),
        holds: observations.len() == 1,
        expected_fail: false,
        detail: format!("{} distinct observation(s)", observations.len()),
    }];
    Ok(Report { program: e.program.clone(), fuel: e.fuel, observations: observations.into_iter().collect(), runs, verdicts })
}

/// Program classes in a corpus manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramClass {
    /// No finalizers, no weak tables.
    Deterministic,
    Finalizers,
    Weak,
    Both,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    /// Analyzer verdict: `SAFE`, `UNSAFE` or `UNKNOWN`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    /// Result summary under `never`, as printed by `run`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    /// The program is nondeterministic on purpose.
    #[serde(default)]
    pub nondeterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub path: String,
    pub class: ProgramClass,
    #[serde(default)]
    pub expected: Expected,
}

/// The schedules used for correctness checks: `eager`, `periodic=3` and
/// `random=s,0.5` for each seed, all against `never`.
pub fn correctness_schedules(mode: GcMode, seeds: &[u64]) -> Vec<Schedule> {
    let mut v = vec![
        Schedule::new(Policy::Never, mode),
        Schedule::new(Policy::Eager, mode),
        Schedule::new(Policy::Periodic(3), mode),
    ];
    v.extend(seeds.iter().map(|&seed| Schedule::new(Policy::Random { seed, p: 0.5 }, mode)));
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Correctness,
    Postponement,
    Determinism,
    FinalizerOnce,
}

impl std::str::FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Property, String> {
        match s {
            "correctness" => Ok(Property::Correctness),
            "postponement" => Ok(Property::Postponement),
            "determinism" => Ok(Property::Determinism),
            "finalizer-once" => Ok(Property::FinalizerOnce),
            _ => Err(format!("unknown property {s}")),
        }
    }
}

impl Property {
    pub fn name(self) -> &'static str {
        match self {
            Property::Correctness => "correctness",
            Property::Postponement => "postponement",
            Property::Determinism => "determinism",
            Property::FinalizerOnce => "finalizer-once",
        }
    }
}

/// Checks one property of one corpus program.
///
/// Correctness compares `never` with the other schedules in simple mode and
/// applies to deterministic programs only. Determinism asks for a singleton
/// observation set under the program's natural mode with seeded random
/// partitions as well. Finalizer-once inspects every sampled trace.
pub fn check_property(
    p: Property,
    entry: &CorpusEntry,
    c: &Configuration,
    seeds: &[u64],
    fuel: usize,
) -> Result<PropertyVerdict, StuckTerm> {
    let mode = match entry.class {
        ProgramClass::Deterministic => GcMode::Simple,
        _ => GcMode::FinWeak,
    };
    let verdict = |holds: bool, detail: String| PropertyVerdict {
        property: p.name().into(),
        program: entry.path.clone(),
        holds,
        expected_fail: !holds && entry.expected.nondeterministic,
        detail,
    };
    Ok(match p {
        Property::Correctness => {
            if entry.class != ProgramClass::Deterministic {
                return Ok(verdict(true, "skipped: program uses finalizers or weak tables".into()));
            }
            let scheds = correctness_schedules(mode, seeds);
            let base = super::run(c.clone(), &scheds[0], fuel)?.observation();
            let mut mismatches = Vec::new();
            for s in &scheds[1..] {
                if super::run(c.clone(), s, fuel)?.observation() != base {
                    mismatches.push(s.policy.to_string());
                }
            }
            let detail = if mismatches.is_empty() {
                format!("{} schedules agree with never", scheds.len() - 1)
            } else {
                format!("differs from never under {}", mismatches.join(" "))
            };
            verdict(mismatches.is_empty(), detail)
        }
        Property::Determinism => {
            let mut scheds = correctness_schedules(mode, seeds);
            scheds.extend(
                seeds.iter().map(|&s| Schedule::new(Policy::Random { seed: s, p: 0.5 }, mode).with_selector(SelectorSpec::Seeded(s))),
            );
            let e = explore(c, &Explorer::Sample(scheds), fuel)?;
            let n = e.observations.len();
            let summaries: Vec<String> = e.observations.iter().map(|o| o.result.clone()).collect();
            verdict(n == 1, format!("{n} observation(s): {}", summaries.join(" | ")))
        }
        Property::Postponement => {
            if entry.class != ProgramClass::Deterministic {
                return Ok(verdict(true, "skipped: program uses finalizers or weak tables".into()));
            }
            let r = check_postponement(c, 50, seeds.first().copied().unwrap_or(0))?;
            let detail = match r.counterexamples.first() {
                None => format!("{} swaps equivalent", r.checked),
                Some(cx) => serde_json::to_string(cx).expect("counterexamples serialize"),
            };
            verdict(r.holds(), detail)
        }
        Property::FinalizerOnce => {
            let scheds = correctness_schedules(GcMode::FinWeak, seeds);
            let sample = explore(c, &Explorer::Sample(scheds), fuel)?;
            let exhaustive = explore(c, &Explorer::Exhaustive(Bounds { max_states: 20_000, ..Bounds::new(GcMode::FinWeak) }), fuel)?;
            let n = sample.stats.refinalizations + exhaustive.stats.refinalizations;
            verdict(
                n == 0,
                format!("{} finalize events, {n} repeated", sample.stats.finalize_events + exhaustive.stats.finalize_events),
            )
        }
    })
}
