use std::path::Path;

use gag_core::analysis::strong_acyclicity;
use gag_core::textio::emit_report;
use serde_json::json;

use crate::input::{load_grammar, Loaded};
use crate::output::Out;
use crate::Status;

pub fn check(out: &Out, path: &Path, no_static: bool) -> anyhow::Result<Status> {
    let file = path.display().to_string();
    let g = match load_grammar(path)? {
        Loaded::Unparsable(e) => {
            out.line(format!("{file}:{e}"));
            out.line(out.mark("invalid", false));
            out.json(&json!({ "file": file, "valid": false, "parse_error": e.to_string() }));
            return Ok(Status::InvalidGrammar);
        }
        Loaded::Invalid(violations) => {
            for v in &violations {
                out.line(format!("{file}: {v}"));
            }
            out.line(out.mark("invalid", false));
            let list: Vec<_> = violations.iter().map(|v| json!({ "text": v.to_string(), "violation": v })).collect();
            out.json(&json!({ "file": file, "valid": false, "violations": list }));
            return Ok(Status::InvalidGrammar);
        }
        Loaded::Grammar(g) => g,
    };
    out.line(format!(
        "{file}: {} sorts, {} productions, {} services",
        g.sorts.len(),
        g.productions.len(),
        g.services.len()
    ));
    out.line(out.mark("valid", true));
    if no_static {
        out.json(&json!({ "file": file, "valid": true }));
        return Ok(Status::Ok);
    }
    let report = strong_acyclicity(&g);
    out.block(&emit_report(&report));
    out.json(&json!({ "file": file, "valid": true, "static": report }));
    Ok(if report.is_strongly_acyclic() { Status::Ok } else { Status::NotStronglyAcyclic })
}
