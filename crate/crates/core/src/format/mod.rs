//! The line-oriented text format for architectures, refinement scripts and
//! environment inputs. The grammar is documented in `docs/FORMAT.md`.

mod parse;
mod render;

use std::collections::BTreeMap;
use std::fmt;

use crate::behaviors::TableMachine;
use crate::system::System;

pub use parse::{parse_architecture, parse_architecture_unchecked, parse_env, parse_script};
pub use render::{render_architecture, render_env, render_runs, render_script};

/// A diagnostic with a one-based source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(
                f,
                "line {}, column {}: {}",
                self.line, self.col, self.message
            )
        }
    }
}

/// Every diagnostic found in one document.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseErrors(pub Vec<ParseError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// A parsed architecture file: the system (whose bounds carry the declared
/// alphabets) and the named machine tables it defines.
#[derive(Clone, Debug, PartialEq)]
pub struct Architecture {
    pub system: System,
    pub machines: BTreeMap<String, TableMachine>,
}

#[cfg(test)]
mod tests;
