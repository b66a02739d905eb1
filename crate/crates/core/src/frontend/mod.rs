//! Lexing, parsing, desugaring and printing of the Lua subset.
//!
//! Supported: literals, `local` (block-scoped or with an explicit
//! `in ... end` body), multiple assignment, functions with multiple returns,
//! table constructors and indexing, `if`/`while`/`break`/`return`,
//! `and`/`or`/`not`, arithmetic, comparison, concatenation and `#`.
//! Rejected with a [`SyntaxError`]: `for`, `repeat`, `goto`, `do` blocks,
//! varargs, method calls and long strings.

pub mod ast;
pub mod desugar;
mod lexer;
mod parser;
pub mod print;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::Term;
pub use desugar::{desugar, is_core};
pub use print::{print_expr, print_stmt};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProgram {
    pub text: String,
    pub origin: String,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> SourceProgram {
        SourceProgram { text: text.into(), origin: origin.into() }
    }

    pub fn from_file(path: &std::path::Path) -> std::io::Result<SourceProgram> {
        Ok(SourceProgram::new(std::fs::read_to_string(path)?, path.display().to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{origin}:{line}:{col}: {message}")]
pub struct SyntaxError {
    pub origin: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

/// Parses to a surface term; see [`desugar`] for the core form.
pub fn parse(p: &SourceProgram) -> Result<Term, SyntaxError> {
    parser::parse_str(&p.text, &p.origin)
}

/// `parse` followed by `desugar`.
pub fn load(p: &SourceProgram) -> Result<Term, SyntaxError> {
    parse(p).map(|t| desugar(&t))
}

pub fn parse_str(text: &str) -> Result<Term, SyntaxError> {
    parse(&SourceProgram::new(text, "<string>"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AstFormat {
    Sexp,
    Json,
}

/// Deterministic AST dump.
pub fn dump_ast(t: &Term, format: AstFormat) -> String {
    let json = serde_json::to_value(t).expect("terms serialize");
    match format {
        AstFormat::Json => serde_json::to_string_pretty(&json).expect("json"),
        AstFormat::Sexp => {
            let mut out = String::new();
            sexp(&json, &mut out);
            out
        }
    }
}

fn sexp(v: &serde_json::Value, out: &mut String) {
    use serde_json::Value as J;
    match v {
        J::Null => out.push_str("nil"),
        J::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        J::Number(n) => out.push_str(&n.to_string()),
        J::String(s) => out.push_str(&format!("{s:?}")),
        J::Array(items) => {
            out.push('(');
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                sexp(it, out);
            }
            out.push(')');
        }
        J::Object(map) => {
            // `{"kind": x}` wrappers collapse to `x`; single-variant objects
            // become `(Variant payload...)`.
            if let Some(k) = map.get("kind").filter(|_| map.len() == 1) {
                return sexp(k, out);
            }
            for (i, (k, val)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push('(');
                out.push_str(k);
                match val {
                    J::Array(items) => {
                        for it in items {
                            out.push(' ');
                            sexp(it, out);
                        }
                    }
                    other => {
                        out.push(' ');
                        sexp(other, out);
                    }
                }
                out.push(')');
            }
        }
    }
}
