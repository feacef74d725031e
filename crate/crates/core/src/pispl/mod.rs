//! The `.pispl` input language: templates or plain agents, followed by named
//! formulae.
//!
//! ```text
//! template Name {
//!   options { boundary = disable; unmatched = loop; }   # optional
//!   vars { p: 0..7; h: bool; c: {a, b}; }
//!   init { p = 0; h = false; c = a; }
//!   sync { tick }
//!   async { go }
//!   protocol { [!h] -> { go, tick }; }
//!   evolution { go: [p < 7] -> (p' = p + 1); }
//!   labels { far: p >= 5; }
//! }
//! formulae { F: forall {i, j}: AG(far_i -> K_i(far_i)); }
//! ```
//!
//! A template may list its states instead (`states { A, B } init A;` with
//! `protocol { A: {go}; }`, `evolution { go: A -> B; }` and
//! `labels { p: {B}; }`). `agent` blocks use the same listed form with an
//! `actions { .. }` section and describe a fixed heterogeneous system.

pub mod ast;
mod compile;
mod parser;
mod unparse;

use std::fmt;

pub use compile::{compile, CompileOptions, Model, NamedProperty, Program, Property, MAX_TEMPLATE_STATES};
pub use parser::{parse, parse_formula, parse_ground_formula};
pub use unparse::unparse;

use crate::error::{Error, Result};
use ast::Pos;

/// A positioned error or warning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub pos: Pos,
    pub message: String,
}

impl Diagnostic {
    pub fn new(pos: Pos, message: String) -> Self {
        Diagnostic { pos, message }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pos.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}:{}: {}", self.pos.line, self.pos.col, self.message)
        }
    }
}

/// Parses and compiles a source text.
pub fn load(src: &str, opts: &CompileOptions) -> Result<Program> {
    let file = parse(src).map_err(|d| Error::Source(vec![d]))?;
    compile(&file, opts).map_err(Error::Source)
}
