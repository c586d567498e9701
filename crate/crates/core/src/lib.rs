//! Stepwise refinement of data flow architectures.
//!
//! Systems are networks of components exchanging timed streams over named
//! channels. Components are executable nondeterministic transducers. A
//! system is refined by applying rules whose premises are checked by
//! bounded exhaustive enumeration up to a horizon `H`, with at most `B`
//! messages per channel and time step.

pub mod behaviors;
pub mod case_study;
pub mod cli;
pub mod error;
pub mod format;
pub mod rules;
pub mod streams;
pub mod system;

pub use error::{Error, Result};
