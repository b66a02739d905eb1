//! Static detection of weak-table reads whose result may depend on when the
//! collector runs.
//!
//! The pipeline is parse, desugar, [`infer`], [`build_cfg`] and
//! [`typecheck`]. A program is SAFE when no read is flagged `unsafe`, and
//! UNKNOWN when it falls outside the analyzed fragment (non-literal table
//! keys, several values or targets in one `local`, assignment or `return`,
//! global variables).

mod cfg;
mod check;
mod infer;
mod types;

#[cfg(test)]
mod tests;

use std::fmt::{self, Write as _};

use serde::Serialize;

pub use cfg::{build_cfg, ReachingDefs};
pub use check::{static_reach_cte, typecheck, Diagnostic, Reason, Severity, TypeEnv};
pub use infer::{infer, infer_with, Binding, BindingId, DefSite, InferenceError, Solver, TVar, TypedProgram};
pub use types::{subtype, Prim, StaticType, Weakness};

use crate::frontend::{load, SourceProgram, SyntaxError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Safe,
    Unsafe,
    Unknown,
}

impl Verdict {
    /// 0, 1 and 2 respectively.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Safe => 0,
            Verdict::Unsafe => 1,
            Verdict::Unknown => 2,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Safe => "SAFE",
            Verdict::Unsafe => "UNSAFE",
            Verdict::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub file: String,
    pub verdict: Verdict,
    pub diagnostics: Vec<Diagnostic>,
    /// Why the verdict is UNKNOWN.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// `name@line:col` and inferred type of every binding.
    #[serde(skip)]
    pub types: Vec<(String, StaticType)>,
}

impl AnalysisReport {
    /// Lines holding an `unsafe` diagnostic, ascending and deduplicated.
    pub fn unsafe_lines(&self) -> Vec<u32> {
        let mut v: Vec<u32> =
            self.diagnostics.iter().filter(|d| d.severity == Severity::Unsafe).map(|d| d.line).collect();
        v.dedup();
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One line per diagnostic then the verdict; `explain` adds the
    /// explanation, the reaching definitions and the inferred types.
    pub fn to_text(&self, explain: bool) -> String {
        let mut out = String::new();
        for d in &self.diagnostics {
            let sev = match d.severity {
                Severity::Unsafe => "unsafe",
                Severity::Warning => "warning",
                Severity::Info => "info",
            };
            let _ = write!(out, "{}:{}:{}: {sev}: {}", self.file, d.line, d.col, d.reason.as_str());
            if let Some(a) = &d.access {
                let _ = write!(out, " in {a}");
            }
            out.push('\n');
            if explain {
                let _ = writeln!(out, "    {}", d.explanation);
                if !d.witness.is_empty() {
                    let _ = writeln!(out, "    reaching definitions: {}", d.witness.join(", "));
                }
            }
        }
        if explain {
            for (b, t) in &self.types {
                let _ = writeln!(out, "{}: {b} : {t}", self.file);
            }
        }
        let _ = write!(out, "{}: {}", self.file, self.verdict);
        if let Some(n) = &self.note {
            let _ = write!(out, " ({n})");
        }
        out.push('\n');
        out
    }
}

/// Analyzes one program.
pub fn check_program(src: &SourceProgram) -> Result<AnalysisReport, SyntaxError> {
    let term = load(src)?;
    let mut report =
        AnalysisReport { file: src.origin.clone(), verdict: Verdict::Unknown, diagnostics: Vec::new(), note: None, types: Vec::new() };
    let tp = match infer(&term) {
        Ok(tp) => tp,
        Err(e @ InferenceError::OutOfScope { .. }) => {
            report.note = Some(e.to_string());
            return Ok(report);
        }
        Err(e @ InferenceError::Unsatisfiable { line, col, .. }) => {
            report.diagnostics.push(Diagnostic {
                line,
                col,
                severity: Severity::Warning,
                reason: Reason::TypeError,
                table: None,
                access: None,
                explanation: e.to_string(),
                witness: Vec::new(),
            });
            report.note = Some("type inference failed".into());
            return Ok(report);
        }
    };
    let defs = build_cfg(&tp);
    report.diagnostics = typecheck(&tp, &defs);
    report.types = tp.annotations();
    report.verdict = if report.diagnostics.iter().any(|d| d.severity == Severity::Unsafe) {
        Verdict::Unsafe
    } else {
        Verdict::Safe
    };
    Ok(report)
}

/// [`check_program`] on a string.
pub fn check_str(text: &str) -> Result<AnalysisReport, SyntaxError> {
    check_program(&SourceProgram::new(text, "<string>"))
}
