use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use gag_core::engine::{
    apply_production, enabled_set, init_config, progress, Configuration, Event, Progress, ScriptStep, Status as Entry,
    Trace,
};
use gag_core::grammar::Gag;
use gag_core::terms::{Subst, Var};
use gag_core::textio::{emit_config, emit_config_body, emit_trace, parse_term};
use serde_json::{json, Value};

use crate::input;
use crate::output::Out;
use crate::{CaseArgs, Status};

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// `apply NODE PROD [with {x = t}]` lines, or a recorded trace.
    #[arg(long, conflicts_with = "interactive")]
    pub script: Option<PathBuf>,
    /// Prompt for each step on standard input.
    #[arg(long)]
    pub interactive: bool,
    /// Where to write the trace; defaults to the script path with a `.gagt` extension.
    #[arg(long, short = 'o')]
    pub trace_out: Option<PathBuf>,
}

fn progress_word(p: Progress) -> String {
    serde_json::to_value(p).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn default_trace_path(args: &RunArgs) -> Option<PathBuf> {
    if let Some(p) = &args.trace_out {
        return Some(p.clone());
    }
    let script = args.script.as_ref()?;
    let mut out = script.with_extension("gagt");
    if &out == script {
        out = script.with_extension("run.gagt");
    }
    Some(out)
}

struct Rejection {
    index: usize,
    step: ScriptStep,
    code: &'static str,
    message: String,
}

pub fn run(out: &Out, args: &RunArgs) -> anyhow::Result<Status> {
    let g = match input::valid_grammar(&args.case.grammar)? {
        Ok(g) => g,
        Err(msg) => {
            eprintln!("{msg}");
            return Ok(Status::InvalidGrammar);
        }
    };
    let (fallback, steps) = match &args.script {
        Some(path) => match input::script(&g, path)? {
            Ok(s) => s,
            Err(msg) => {
                eprintln!("{msg}");
                return Ok(Status::Rejected);
            }
        },
        None => (None, Vec::new()),
    };
    let case = match input::case(&g, &args.case, fallback.as_ref()) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return Ok(Status::Rejected);
        }
    };
    let mut cfg = match init_config(&g, &case) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("case {}: {e}", case.service);
            return Ok(Status::Rejected);
        }
    };
    let mut trace = Trace::new(case);
    let rejection = if args.interactive {
        let stdin = std::io::stdin();
        interact(&g, &mut cfg, &mut trace, &mut stdin.lock(), &mut std::io::stdout())?;
        None
    } else {
        scripted(out, &g, &mut cfg, &mut trace, &steps)
    };
    finish(out, &g, &cfg, &trace, rejection, default_trace_path(args).as_deref())
}

fn record(trace: &mut Trace, step: &ScriptStep, s: gag_core::engine::Step) {
    trace.events.push(Event::Applied {
        node: step.node.clone(),
        production: step.production.clone(),
        bindings: step.bindings.clone(),
        sigma_in: Some(s.matched.sigma_in),
        sigma_out: Some(s.matched.sigma_out),
        emitted: Vec::new(),
    });
}

fn scripted(out: &Out, g: &Gag, cfg: &mut Configuration, trace: &mut Trace, steps: &[ScriptStep]) -> Option<Rejection> {
    for (index, step) in steps.iter().enumerate() {
        match apply_production(cfg, g, &step.production, &step.node, &step.bindings) {
            Ok(s) => {
                out.line(format!("applied {} at {}", step.production, step.node));
                record(trace, step, s);
            }
            Err(e) => {
                return Some(Rejection { index, step: step.clone(), code: e.code(), message: e.to_string() });
            }
        }
    }
    None
}

/// Line prompt: pick an enabled step by number, then give each parameter a term.
fn interact(
    g: &Gag,
    cfg: &mut Configuration,
    trace: &mut Trace,
    input: &mut impl BufRead,
    output: &mut impl Write,
) -> anyhow::Result<()> {
    let mut line = String::new();
    let mut ask = |output: &mut dyn Write, prompt: &str| -> anyhow::Result<Option<String>> {
        write!(output, "{prompt}")?;
        output.flush()?;
        line.clear();
        Ok((input.read_line(&mut line)? > 0).then(|| line.trim().to_string()))
    };
    loop {
        let entries = enabled_set(cfg, g);
        if !entries.iter().any(|e| e.is_enabled()) {
            writeln!(output, "no step is enabled")?;
            return Ok(());
        }
        writeln!(output, "{}", emit_config_body(cfg).trim_end())?;
        for (k, e) in entries.iter().enumerate() {
            let note = match &e.status {
                Entry::Enabled => String::new(),
                Entry::TriggeredOnly { cycle } => format!("  (triggered only: {cycle})"),
            };
            writeln!(output, "[{}] {} at {}{note}", k + 1, e.production, e.node)?;
        }
        let Some(answer) = ask(output, "step (number, q to stop)> ")? else { return Ok(()) };
        if answer == "q" {
            return Ok(());
        }
        let Some(e) = answer.parse::<usize>().ok().and_then(|k| entries.get(k.wrapping_sub(1))) else {
            writeln!(output, "no step numbered `{answer}`")?;
            continue;
        };
        let mut bindings = Subst::new();
        for x in &e.parameters {
            loop {
                let Some(src) = ask(output, &format!("{x} = "))? else { return Ok(()) };
                match parse_term(g, &src) {
                    Ok(t) => {
                        bindings.insert(Var::new(x.as_str()), t);
                        break;
                    }
                    Err(err) => writeln!(output, "{err}")?,
                }
            }
        }
        let step = ScriptStep { node: e.node.clone(), production: e.production.clone(), bindings };
        match apply_production(cfg, g, &step.production, &step.node, &step.bindings) {
            Ok(s) => {
                writeln!(output, "applied {} at {}", step.production, step.node)?;
                record(trace, &step, s);
            }
            Err(err) => writeln!(output, "{}: {err}", err.code())?,
        }
    }
}

fn finish(
    out: &Out,
    g: &Gag,
    cfg: &Configuration,
    trace: &Trace,
    rejection: Option<Rejection>,
    trace_path: Option<&Path>,
) -> anyhow::Result<Status> {
    let p = progress(cfg, g);
    if let Some(r) = &rejection {
        out.line(format!(
            "rejected step {} ({} at {}): {}: {}",
            r.index + 1,
            r.step.production,
            r.step.node,
            r.code,
            r.message
        ));
    }
    out.line("configuration");
    out.block(&emit_config_body(cfg));
    out.line(format!("progress {}", out.mark(&progress_word(p), p == Progress::Closed)));
    if let Some(path) = trace_path {
        std::fs::write(path, emit_trace(trace)).with_context(|| format!("cannot write {}", path.display()))?;
        out.line(format!("trace written to {}", path.display()));
    }
    let rejected = rejection.as_ref().map(|r| {
        json!({
            "index": r.index,
            "node": r.step.node,
            "production": r.step.production,
            "code": r.code,
            "message": r.message,
        })
    });
    out.json(&json!({
        "case": trace.case,
        "steps": trace.events.len(),
        "rejected": rejected.unwrap_or(Value::Null),
        "progress": p,
        "config": emit_config(cfg),
        "trace_file": trace_path.map(|p| p.display().to_string()),
    }));
    Ok(match (rejection, p) {
        (Some(_), _) => Status::Rejected,
        (None, Progress::Closed) => Status::Ok,
        (None, Progress::TerminalOpen) => Status::TerminalOpen,
        (None, Progress::Incomplete) => Status::Unsettled,
    })
}
