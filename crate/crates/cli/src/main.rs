//! `luagc`: run programs under collection schedules, dump traces, explore
//! observation sets, check corpus properties and analyze weak-table use.
//!
//! Standard output carries program output and the requested reports only;
//! diagnostics about the tool itself go to standard error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use luagc::executor::{
    check_property, explore, run, Bounds, CorpusEntry, Explorer, Policy, Property, PropertyVerdict, Schedule,
    SelectorSpec, TraceEntry,
};
use luagc::frontend::{dump_ast, load, parse, AstFormat, SourceProgram};
use luagc::gc::GcMode;
use luagc::interpreter::Configuration;
use luagc::luasafe::{check_program, AnalysisReport, Verdict};

#[derive(Parser)]
#[command(name = "luagc", version, about = "Executable model of Lua garbage collection")]
struct Cli {
    /// Default seed for `random` schedules, `seeded` selectors and property runs.
    #[arg(long, global = true, env = "LUAGC_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program and print its output and final result.
    Run(RunArgs),
    /// Print the step and collection trace of one run.
    Trace {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: TraceFormat,
    },
    /// Print the observation set of a program as JSON.
    Observe {
        file: PathBuf,
        /// `exhaustive[:subsets=K,steps=N,states=N]` or `sample:POLICY;POLICY;...`.
        #[arg(long, default_value = "exhaustive")]
        explorer: String,
        #[arg(long, default_value = "fin-weak")]
        mode: String,
        #[arg(long, default_value_t = 10_000)]
        fuel: usize,
    },
    /// Check collector properties over a corpus described by `manifest.json`.
    Properties {
        corpus: PathBuf,
        /// Properties to check; all of them when absent.
        #[arg(long = "property", value_enum)]
        properties: Vec<PropertyArg>,
        /// Seeds for random schedules; defaults to 1..=20, or the global seed alone.
        #[arg(long, num_args = 1..)]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 10_000)]
        fuel: usize,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Analyze programs for weak-table reads that depend on collection timing.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        /// Include explanations, reaching definitions and inferred types.
        #[arg(long)]
        explain: bool,
    },
    /// Print the syntax tree of a program.
    DumpAst {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "sexp")]
        format: AstArg,
        /// Print the desugared core term.
        #[arg(long)]
        core: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    /// `never`, `eager`, `periodic=K`, `random=SEED[,P]` or `scripted=I,J,...`;
    /// plain `random` takes the global seed.
    #[arg(long, default_value = "never")]
    gc: String,
    #[arg(long, default_value = "fin-weak")]
    mode: String,
    #[arg(long, default_value_t = 10_000)]
    fuel: usize,
    /// `maximal` or `seeded=N`; plain `seeded` takes the global seed.
    #[arg(long, default_value = "maximal")]
    selector: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum AstArg {
    Sexp,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    Correctness,
    Postponement,
    Determinism,
    FinalizerOnce,
}

impl From<PropertyArg> for Property {
    fn from(p: PropertyArg) -> Property {
        match p {
            PropertyArg::Correctness => Property::Correctness,
            PropertyArg::Postponement => Property::Postponement,
            PropertyArg::Determinism => Property::Determinism,
            PropertyArg::FinalizerOnce => Property::FinalizerOnce,
        }
    }
}

fn read_source(path: &Path) -> Result<SourceProgram> {
    SourceProgram::from_file(path).with_context(|| format!("cannot read {}", path.display()))
}

fn configuration(path: &Path) -> Result<Configuration> {
    let term = load(&read_source(path)?)?;
    Ok(Configuration::new(term))
}

fn need_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| anyhow!("{what} needs a seed: pass one explicitly, or use --seed or LUAGC_SEED"))
}

fn schedule(a: &RunArgs, seed: Option<u64>) -> Result<Schedule> {
    let policy: Policy = match a.gc.as_str() {
        "random" => Policy::Random { seed: need_seed(seed, "--gc random")?, p: 0.5 },
        s => s.parse()?,
    };
    let selector: SelectorSpec = match a.selector.as_str() {
        "seeded" => SelectorSpec::Seeded(need_seed(seed, "--selector seeded")?),
        s => s.parse()?,
    };
    Ok(Schedule::new(policy, a.mode.parse()?).with_selector(selector))
}

fn parse_explorer(spec: &str, mode: GcMode) -> Result<Explorer> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match head {
        "exhaustive" => {
            let mut b = Bounds::new(mode);
            for kv in rest.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("invalid explorer option {kv}"))?;
                let n: usize = v.parse().with_context(|| format!("invalid explorer option {kv}"))?;
                match k {
                    "subsets" => b.subsets = Some(n),
                    "steps" => b.max_steps = n,
                    "states" => b.max_states = n,
                    _ => bail!("unknown explorer option {k}"),
                }
            }
            Ok(Explorer::Exhaustive(b))
        }
        "sample" => {
            let scheds = rest
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|p| Ok(Schedule::new(p.parse()?, mode)))
                .collect::<Result<Vec<_>>>()?;
            if scheds.is_empty() {
                bail!("sample explorer needs at least one schedule");
            }
            Ok(Explorer::Sample(scheds))
        }
        _ => bail!("unknown explorer {spec}"),
    }
}

fn cmd_run(a: &RunArgs, seed: Option<u64>) -> Result<ExitCode> {
    let sched = schedule(a, seed)?;
    let r = run(configuration(&a.file)?, &sched, a.fuel)?;
    for line in &r.output {
        println!("{line}");
    }
    println!("{}", r.observation().result);
    eprintln!("steps: {}", r.steps);
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(a: &RunArgs, seed: Option<u64>, format: TraceFormat) -> Result<ExitCode> {
    let sched = schedule(a, seed)?;
    let r = run(configuration(&a.file)?, &sched, a.fuel)?;
    for e in &r.trace {
        println!("{}", match format {
            TraceFormat::Json => e.to_json_line(),
            TraceFormat::Text => e.to_text(),
        });
    }
    let finalized = r.trace.iter().filter(|e| matches!(e, TraceEntry::CloseFinalize { .. })).count();
    eprintln!("steps: {}, close-phase finalizers: {finalized}, result: {}", r.steps, r.observation().result);
    Ok(ExitCode::SUCCESS)
}

fn cmd_observe(file: &Path, explorer: &str, mode: &str, fuel: usize) -> Result<ExitCode> {
    let explorer = parse_explorer(explorer, mode.parse()?)?;
    let e = explore(&configuration(file)?, &explorer, fuel)?;
    let obs: Vec<_> = e.observations.iter().collect();
    println!("{}", serde_json::to_string_pretty(&obs)?);
    eprintln!("{}", serde_json::to_string(&e.stats)?);
    if e.stats.truncated {
        eprintln!("warning: state budget exhausted; the set may be incomplete");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_properties(
    corpus: &Path,
    props: &[PropertyArg],
    seeds: &[u64],
    seed: Option<u64>,
    fuel: usize,
    format: ReportFormat,
) -> Result<ExitCode> {
    let manifest = corpus.join("manifest.json");
    let entries: Vec<CorpusEntry> = if manifest.exists() {
        let text = std::fs::read_to_string(&manifest).with_context(|| format!("cannot read {}", manifest.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", manifest.display()))?
    } else {
        Vec::new()
    };
    if entries.is_empty() {
        eprintln!("warning: {} lists no programs; nothing to check", corpus.display());
    }
    let seeds: Vec<u64> = match (seeds.is_empty(), seed) {
        (false, _) => seeds.to_vec(),
        (true, Some(s)) => vec![s],
        (true, None) => (1..=20).collect(),
    };
    let props: Vec<Property> = if props.is_empty() {
        vec![Property::Correctness, Property::Postponement, Property::Determinism, Property::FinalizerOnce]
    } else {
        props.iter().map(|p| (*p).into()).collect()
    };
    let mut verdicts: Vec<PropertyVerdict> = Vec::new();
    for entry in &entries {
        let c = configuration(&corpus.join(&entry.path))?;
        for p in &props {
            let v = check_property(*p, entry, &c, &seeds, fuel)?;
            if format == ReportFormat::Text {
                let tag = match (v.holds, v.expected_fail) {
                    (true, _) => "PASS",
                    (false, true) => "XFAIL",
                    (false, false) => "FAIL",
                };
                println!("{tag} {} {}: {}", v.property, v.program, v.detail);
            }
            verdicts.push(v);
        }
    }
    if format == ReportFormat::Json {
        println!("{}", serde_json::to_string_pretty(&verdicts)?);
    }
    let failed = verdicts.iter().filter(|v| !v.holds && !v.expected_fail).count();
    eprintln!("{} checks, {failed} failed", verdicts.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_check(files: &[PathBuf], format: ReportFormat, explain: bool) -> Result<ExitCode> {
    let mut reports: Vec<AnalysisReport> = Vec::new();
    let mut code = 0;
    for f in files {
        let src = read_source(f)?;
        match check_program(&src) {
            Ok(r) => {
                code = code.max(r.verdict.exit_code());
                reports.push(r);
            }
            Err(e) => {
                eprintln!("{e}");
                code = code.max(Verdict::Unknown.exit_code());
            }
        }
    }
    match format {
        ReportFormat::Text => reports.iter().for_each(|r| print!("{}", r.to_text(explain))),
        ReportFormat::Json if files.len() == 1 => {
            if let Some(r) = reports.first() {
                println!("{}", r.to_json());
            }
        }
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&reports)?),
    }
    Ok(ExitCode::from(code as u8))
}

fn cmd_dump_ast(file: &Path, format: AstArg, core: bool) -> Result<ExitCode> {
    let src = read_source(file)?;
    let t = if core { load(&src)? } else { parse(&src)? };
    let format = match format {
        AstArg::Sexp => AstFormat::Sexp,
        AstArg::Json => AstFormat::Json,
    };
    println!("{}", dump_ast(&t, format));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a, cli.seed),
        Cmd::Trace { run, format } => cmd_trace(run, cli.seed, *format),
        Cmd::Observe { file, explorer, mode, fuel } => cmd_observe(file, explorer, mode, *fuel),
        Cmd::Properties { corpus, properties, seeds, fuel, format } => {
            cmd_properties(corpus, properties, seeds, cli.seed, *fuel, *format)
        }
        Cmd::Check { files, format, explain } => cmd_check(files, *format, *explain),
        Cmd::DumpAst { file, format, core } => cmd_dump_ast(file, *format, *core),
    };
    r.unwrap_or_else(|e| {
        eprintln!("luagc: {e:#}");
        ExitCode::from(2)
    })
}
