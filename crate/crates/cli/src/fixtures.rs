use std::path::Path;

use anyhow::Context;
use gag_core::textio::fixtures::{self, COROUTINE_GAMMAS, FLATTEN_GAMMAS, NAMES};
use gag_core::textio::minsky::looping_program;
use gag_core::textio::{emit_script, print_gag};
use serde_json::json;

use crate::output::Out;
use crate::Status;

/// Every built-in file, as `(name, contents)`.
fn files() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> =
        NAMES.iter().map(|n| (format!("{n}.gag"), fixtures::source(n).expect("built-in fixture"))).collect();
    out.push(("minsky_looping.gag".into(), print_gag(&fixtures::minsky(Some(&looping_program())))));
    for (name, script) in [
        ("flatten", fixtures::flatten_script()),
        ("coroutines", fixtures::coroutine_script()),
        ("editorial", fixtures::editorial_script()),
        ("occur_check", fixtures::occur_check_script()),
    ] {
        out.push((format!("{name}.gags"), emit_script(&script)));
    }
    for (k, src) in FLATTEN_GAMMAS.iter().enumerate() {
        out.push((format!("flatten_gamma{k}.gagc"), src.to_string()));
    }
    for (k, src) in COROUTINE_GAMMAS {
        out.push((format!("coroutines_gamma{k}.gagc"), src.to_string()));
    }
    out
}

pub fn write_all(out: &Out, dir: &Path) -> anyhow::Result<Status> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut written = Vec::new();
    for (name, contents) in files() {
        let path = dir.join(&name);
        std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        out.line(format!("wrote {}", path.display()));
        written.push(name);
    }
    out.json(&json!({ "dir": dir.display().to_string(), "files": written }));
    Ok(Status::Ok)
}
