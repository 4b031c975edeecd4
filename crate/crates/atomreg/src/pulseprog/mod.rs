//! A small line-oriented pulse-program language and its compiler.
//!
//! Programs describe one register experiment: initialize, rotate individual
//! atoms through named pulse shapes, wait, and finally measure. The compiler
//! lays statements out on the time axis, resolves each target's carrier
//! detuning from its position in the gradient, and simulates every pulse's
//! effect on every spectator atom to produce a cumulative crosstalk phase
//! ledger.
//!
//! Grammar, one statement per line, `#` starts a comment, keywords are
//! case-insensitive, numbers carry unit suffixes:
//!
//! ```text
//! INIT
//! PI   ATOM <n> SHAPE <name>
//! PI2  ATOM <n> SHAPE <name>
//! ROT  ATOM <n> ANGLE <x>rad SHAPE <name>
//! WAIT <t>us
//! MEASURE
//! ```
//!
//! Exactly one `INIT` must come before any rotation; at most one `MEASURE`,
//! and it must be last.

mod compile;
mod execute;
mod parse;

pub use compile::{compile, CompileError, CompileOptions, PulseEvent, Schedule, Target};
pub use execute::{execute, ExecuteError, ExecuteOptions, ExecutionResult, ShotRecord};
pub use parse::{parse, ParseError, ParseErrorKind};

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Init,
    Rot {
        target: u32,
        angle_rad: f64,
        shape: String,
    },
    Pi {
        target: u32,
        shape: String,
    },
    Pi2 {
        target: u32,
        shape: String,
    },
    Wait {
        duration_us: f64,
    },
    Measure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spanned<T> {
    pub node: T,
    pub span: Span,
}

/// A structurally validated pulse program.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    statements: Vec<Spanned<Statement>>,
}

impl Program {
    pub fn statements(&self) -> &[Spanned<Statement>] {
        &self.statements
    }

    pub fn has_measure(&self) -> bool {
        self.statements
            .iter()
            .any(|s| matches!(s.node, Statement::Measure))
    }

    /// Canonical source form; parsing it yields statement-for-statement the
    /// same AST. Floats print in shortest round-trip notation.
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        for s in &self.statements {
            match &s.node {
                Statement::Init => out.push_str("INIT\n"),
                Statement::Rot {
                    target,
                    angle_rad,
                    shape,
                } => {
                    out.push_str(&format!(
                        "ROT ATOM {target} ANGLE {angle_rad}rad SHAPE {shape}\n"
                    ));
                }
                Statement::Pi { target, shape } => {
                    out.push_str(&format!("PI ATOM {target} SHAPE {shape}\n"));
                }
                Statement::Pi2 { target, shape } => {
                    out.push_str(&format!("PI2 ATOM {target} SHAPE {shape}\n"));
                }
                Statement::Wait { duration_us } => {
                    out.push_str(&format!("WAIT {duration_us}us\n"));
                }
                Statement::Measure => out.push_str("MEASURE\n"),
            }
        }
        out
    }
}
