//! Guarded attribute grammars: terms and unification, grammars and their
//! validation, configuration rewriting, strong-acyclicity analysis, a simulated
//! distributed runtime, and the text formats tying them together.

pub mod analysis;
pub mod checks;
pub mod distribution;
pub mod engine;
pub mod grammar;
pub mod terms;
pub mod textio;
