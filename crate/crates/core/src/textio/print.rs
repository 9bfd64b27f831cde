use std::fmt::Write;

use indexmap::IndexMap;

use crate::analysis::{StaticReport, Verdict};
use crate::distribution::Partition;
use crate::engine::{Configuration, Event, NodeEq, ScriptStep, Trace};
use crate::grammar::{Gag, Sort};

fn attr_spec(n: usize, names: &[String]) -> String {
    if names.is_empty() {
        n.to_string()
    } else {
        format!("[{}]", names.join(", "))
    }
}

fn sort_decl(s: &Sort) -> String {
    format!(
        "sort {}(inh={}, syn={});",
        s.name,
        attr_spec(s.n_inherited, &s.inherited_names),
        attr_spec(s.n_synthesized, &s.synthesized_names)
    )
}

fn partition_lines(out: &mut String, locations: &IndexMap<String, Vec<String>>) {
    for (loc, sorts) in locations {
        let _ = writeln!(out, "partition {loc} = {{{}}};", sorts.join(", "));
    }
}

/// Print a grammar in `.gag` syntax; sections are separated by blank lines.
pub fn print_gag(g: &Gag) -> String {
    let mut sections: Vec<String> = vec!["format 1\n".into()];
    let mut push = |lines: Vec<String>| {
        if !lines.is_empty() {
            sections.push(lines.iter().map(|l| format!("{l}\n")).collect());
        }
    };
    push(g.sorts.values().map(sort_decl).collect());
    push(g.symbols.values().map(|s| format!("ctor {}/{};", s.name, s.arity)).collect());
    push(g.productions.iter().map(|p| format!("prod {p};")).collect());
    push(
        g.services
            .iter()
            .map(|s| {
                let forms: Vec<String> = s.forms.iter().map(|f| f.to_string()).collect();
                format!("service {}: {};", s.name, forms.join(", "))
            })
            .collect(),
    );
    let mut part = String::new();
    partition_lines(&mut part, &g.partition);
    if !part.is_empty() {
        sections.push(part);
    }
    sections.join("\n")
}

fn node_rhs(eq: &NodeEq) -> String {
    match eq {
        NodeEq::Open(f) => f.to_string(),
        NodeEq::Closed { production, children } if children.is_empty() => production.clone(),
        NodeEq::Closed { production, children } => {
            let cs: Vec<String> = children.iter().map(|c| c.to_string()).collect();
            format!("{production}({})", cs.join(", "))
        }
    }
}

/// Root lines then node equations in key order, without header or generator.
pub fn emit_config_body(cfg: &Configuration) -> String {
    let mut out = String::new();
    for r in &cfg.roots {
        let _ = writeln!(out, "root {r}");
    }
    for (id, eq) in &cfg.nodes {
        let _ = writeln!(out, "{id} = {}", node_rhs(eq));
    }
    out
}

/// Full `.gagc` text.
pub fn emit_config(cfg: &Configuration) -> String {
    format!("format 1\nconfig\ngen {} {}\n{}", cfg.gen.ns, cfg.gen.next, emit_config_body(cfg))
}

fn apply_line(out: &mut String, node: &impl std::fmt::Display, production: &str, bindings: &crate::terms::Subst) {
    let _ = write!(out, "apply {node} {production}");
    if !bindings.is_empty() {
        let _ = write!(out, " with {bindings}");
    }
    out.push('\n');
}

/// `.gagt` text; recorded substitutions and emitted messages go on indented lines.
pub fn emit_trace(t: &Trace) -> String {
    let mut out = String::from("format 1\ntrace\n");
    let _ = writeln!(out, "case {}", t.case.service);
    if !t.case.closing.is_empty() {
        let _ = writeln!(out, "closing {}", t.case.closing);
    }
    if let Some(p) = &t.partition {
        partition_lines(&mut out, &p.locations);
    }
    for e in &t.events {
        match e {
            Event::Applied { node, production, bindings, sigma_in, sigma_out, emitted } => {
                apply_line(&mut out, node, production, bindings);
                if let Some(s) = sigma_in {
                    let _ = writeln!(out, "  in {s}");
                }
                if let Some(s) = sigma_out {
                    let _ = writeln!(out, "  out {s}");
                }
                for m in emitted {
                    let _ = writeln!(out, "  emit {m}");
                }
            }
            Event::Delivered { message, emitted } => {
                let _ = writeln!(out, "deliver {message}");
                for m in emitted {
                    let _ = writeln!(out, "  emit {m}");
                }
            }
        }
    }
    out
}

pub fn emit_script(steps: &[ScriptStep]) -> String {
    let mut out = String::new();
    for s in steps {
        apply_line(&mut out, &s.node, &s.production, &s.bindings);
    }
    out
}

pub fn emit_partition(p: &Partition) -> String {
    let mut out = String::new();
    partition_lines(&mut out, &p.locations);
    out
}

fn pairs(set: &std::collections::BTreeSet<(usize, usize)>) -> String {
    let items: Vec<String> = set.iter().map(|(a, b)| format!("({}, {})", a + 1, b + 1)).collect();
    format!("{{{}}}", items.join(", "))
}

/// Static report text; `parse_verdict` reads the verdict and witnesses back.
pub fn emit_report(r: &StaticReport) -> String {
    let mut out = String::new();
    match &r.verdict {
        Verdict::StronglyAcyclic => out.push_str("verdict strongly_acyclic\n"),
        Verdict::NotStronglyAcyclic { witnesses } => {
            out.push_str("verdict not_strongly_acyclic\n");
            for w in witnesses {
                let cyc: Vec<String> = w.cycle.iter().map(|a| a.to_string()).collect();
                let _ = writeln!(out, "witness {} {}: {}", w.sort, w.production, cyc.join(" "));
            }
        }
    }
    let _ = writeln!(out, "iterations {} bound {}", r.iterations, r.bound);
    for (sort, rel) in &r.relations {
        let _ = writeln!(out, "si {sort} = {}", pairs(&rel.si));
        let _ = writeln!(out, "is {sort} = {}", pairs(&rel.is));
    }
    out
}
