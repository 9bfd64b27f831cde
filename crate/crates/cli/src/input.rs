//! Loading grammars, cases, scripts and partitions from files.

use std::path::Path;

use anyhow::Context;
use gag_core::engine::{Case, NodeId, ScriptStep};
use gag_core::grammar::{validate, Gag, Violation};
use gag_core::textio::{parse_bindings, parse_gag, parse_script, parse_trace, ParseError};

use crate::CaseArgs;

pub fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub enum Loaded {
    Grammar(Gag),
    Unparsable(ParseError),
    Invalid(Vec<Violation>),
}

pub fn load_grammar(path: &Path) -> anyhow::Result<Loaded> {
    let src = read(path)?;
    Ok(match parse_gag(&src) {
        Err(e) => Loaded::Unparsable(e),
        Ok(g) => {
            let v = validate(&g);
            if v.is_empty() {
                Loaded::Grammar(g)
            } else {
                Loaded::Invalid(v)
            }
        }
    })
}

/// A valid grammar, or the message explaining why it is not.
pub fn valid_grammar(path: &Path) -> anyhow::Result<Result<Gag, String>> {
    Ok(match load_grammar(path)? {
        Loaded::Grammar(g) => Ok(g),
        Loaded::Unparsable(e) => Err(format!("{}:{e}", path.display())),
        Loaded::Invalid(v) => Err(v.iter().map(|v| format!("{}: {v}", path.display())).collect::<Vec<_>>().join("\n")),
    })
}

/// The case named on the command line, else `fallback`, else the first service.
pub fn case(g: &Gag, args: &CaseArgs, fallback: Option<&Case>) -> Result<Case, String> {
    let closing = match &args.closing {
        Some(src) => Some(parse_bindings(g, src).map_err(|e| format!("--closing: {e}"))?),
        None => None,
    };
    let service = match (&args.case, fallback) {
        (Some(s), _) => s.clone(),
        (None, Some(c)) => c.service.clone(),
        (None, None) => g.services.first().map(|s| s.name.clone()).ok_or("the grammar declares no service")?,
    };
    let closing = closing.or_else(|| fallback.filter(|c| c.service == service).map(|c| c.closing.clone()));
    Ok(Case::with_closing(service, closing.unwrap_or_default()))
}

/// Steps of a script file; a trace file also yields its case.
pub fn script(g: &Gag, path: &Path) -> anyhow::Result<Result<(Option<Case>, Vec<ScriptStep>), String>> {
    let src = read(path)?;
    if let Ok(t) = parse_trace(g, &src) {
        let mut steps = t.script();
        // A distributed trace names nodes by location; the central run does not.
        if t.partition.is_some() {
            for s in &mut steps {
                s.node = NodeId::central(s.node.name.clone());
            }
        }
        return Ok(Ok((Some(t.case), steps)));
    }
    Ok(parse_script(g, &src).map(|s| (None, s)).map_err(|e| format!("{}:{e}", path.display())))
}
