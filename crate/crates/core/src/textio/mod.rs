//! Concrete syntax: `.gag` grammars, `.gagc` configurations, `.gagt` traces,
//! scripts, partitions and static reports, plus the built-in fixtures.

pub mod fixtures;
mod lexer;
pub mod minsky;
mod parse;
mod print;

use thiserror::Error;

pub use parse::{
    parse_bindings, parse_config, parse_gag, parse_partition, parse_script, parse_subst, parse_term, parse_trace,
    parse_verdict,
};
pub use print::{emit_config, emit_config_body, emit_partition, emit_report, emit_script, emit_trace, print_gag};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: String,
    pub found: String,
}
