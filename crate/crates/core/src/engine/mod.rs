//! Configurations and their rewriting by productions.

mod canon;
mod config;
mod trace;

pub use canon::{canonical_text, canonicalize};
pub use config::{ConfigError, Configuration, NodeEq, NodeId};
pub use trace::{replay, run_script, run_script_from, Event, ReplayError, RunError, ScriptError, ScriptStep, Trace};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{instantiate_parameters, Form, Gag, InstantiateError};
use crate::terms::{
    compose, fresh_rename, match_into, solve, CyclicError, MatchError, NameGen, SolveError, Subst, Term, Var, CENTRAL,
};

/// A service invocation with values for its inherited variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub service: String,
    #[serde(default)]
    pub closing: Subst,
}

impl Case {
    pub fn new(service: impl Into<String>) -> Self {
        Case { service: service.into(), closing: Subst::new() }
    }

    pub fn with_closing(service: impl Into<String>, closing: Subst) -> Self {
        Case { service: service.into(), closing }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("case leaves `{0}` unbound in an inherited position")]
    CaseNotClosed(Var),
    #[error("closing binds `{0}`, which is a synthesized variable of the service")]
    ClosingBindsOutput(Var),
}

/// Names of the roots of a multi-form case.
pub fn root_name(i: usize) -> String {
    match i {
        0 => "X0".into(),
        1 => "Y0".into(),
        2 => "Z0".into(),
        _ => format!("R{i}"),
    }
}

/// `Γ0` of a case: one open root per service form.
pub fn init_config(g: &Gag, case: &Case) -> Result<Configuration, EngineError> {
    let svc = g.service(&case.service).ok_or_else(|| EngineError::UnknownService(case.service.clone()))?;
    let outputs: BTreeSet<Var> =
        svc.forms.iter().flat_map(|f| f.synthesized.iter().filter_map(Term::as_var).cloned()).collect();
    if let Some(x) = case.closing.domain().into_iter().find(|x| outputs.contains(x)) {
        return Err(EngineError::ClosingBindsOutput(x));
    }
    let mut cfg = Configuration::new(CENTRAL);
    for (i, form) in svc.forms.iter().enumerate() {
        let f = form.apply(&case.closing);
        for t in &f.inherited {
            if let Some(x) = t.vars().into_iter().find(|v| !outputs.contains(v)) {
                return Err(EngineError::CaseNotClosed(x));
            }
        }
        let id = NodeId::central(root_name(i));
        cfg.nodes.insert(id.clone(), NodeEq::Open(f));
        cfg.roots.push(id);
    }
    cfg.reserve_names(g);
    Ok(cfg)
}

/// Substitutions computed when a left-hand side matches a definition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matched {
    pub sigma_in: Subst,
    pub sigma_out: Subst,
    pub sigma: Subst,
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "reason")]
pub enum MatchFailure {
    #[error("sort mismatch: production for `{production}`, node of sort `{node}`")]
    SortMismatch { production: String, node: String },
    #[error("not triggered: {error}")]
    NotTriggered { error: MatchError },
    #[error("triggered but not enabled: {cycle}")]
    TriggeredButCyclic { sigma_in: Subst, cycle: CyclicError },
    #[error("node definition is not a service call")]
    NotAServiceCall,
}

/// Match a (freshened) left-hand side against an open node definition.
pub fn form_match(lhs: &Form, def: &Form) -> Result<Matched, MatchFailure> {
    if lhs.sort != def.sort {
        return Err(MatchFailure::SortMismatch { production: lhs.sort.clone(), node: def.sort.clone() });
    }
    let ys = def.synthesized_vars().ok_or(MatchFailure::NotAServiceCall)?;
    if lhs.inherited.len() != def.inherited.len() || lhs.synthesized.len() != ys.len() {
        return Err(MatchFailure::SortMismatch { production: lhs.sort.clone(), node: def.sort.clone() });
    }
    let mut sigma_in = Subst::new();
    for (p, d) in lhs.inherited.iter().zip(&def.inherited) {
        match_into(p, d, &mut sigma_in).map_err(|error| MatchFailure::NotTriggered { error })?;
    }
    let eqs: Vec<(Var, Term)> =
        ys.iter().zip(&lhs.synthesized).map(|(y, u)| ((*y).clone(), u.apply(&sigma_in))).collect();
    let sigma_out = match solve(&eqs) {
        Ok(s) => s,
        Err(SolveError::Cyclic(cycle)) => return Err(MatchFailure::TriggeredButCyclic { sigma_in, cycle }),
        Err(SolveError::DuplicateLhs(_)) => return Err(MatchFailure::NotAServiceCall),
    };
    let sigma = match compose(&sigma_in, &sigma_out) {
        Ok(s) => s,
        Err(cycle) => return Err(MatchFailure::TriggeredButCyclic { sigma_in, cycle }),
    };
    Ok(Matched { sigma_in, sigma_out, sigma })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("node `{0}` is closed")]
    NodeClosed(NodeId),
    #[error("unknown production `{0}`")]
    UnknownProduction(String),
    #[error("production `{production}` is not enabled at `{node}`: {failure}")]
    NotEnabled { node: NodeId, production: String, failure: MatchFailure },
    #[error("bad bindings: {0}")]
    Binding(#[from] InstantiateError),
    #[error("binding image uses `{0}`, which already occurs in the configuration")]
    BindingNotFresh(Var),
}

impl ApplyError {
    pub fn code(&self) -> &'static str {
        match self {
            ApplyError::UnknownNode(_) => "UnknownNode",
            ApplyError::NodeClosed(_) => "NodeClosed",
            ApplyError::UnknownProduction(_) => "UnknownProduction",
            ApplyError::NotEnabled { failure: MatchFailure::TriggeredButCyclic { .. }, .. } => "TriggeredButCyclic",
            ApplyError::NotEnabled { .. } => "NotEnabled",
            ApplyError::Binding(_) | ApplyError::BindingNotFresh(_) => "BadBinding",
        }
    }
}

/// Record of one production application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub node: NodeId,
    pub production: String,
    /// Production variables to their fresh copies.
    pub renaming: Subst,
    pub matched: Matched,
    pub created: Vec<NodeId>,
}

/// Freshen production `name` with `gen` and instantiate bindings given on its original variables.
pub fn freshen_production(
    g: &Gag,
    name: &str,
    bindings: &Subst,
    gen: &mut NameGen,
) -> Result<(crate::grammar::Production, Subst), ApplyError> {
    let p = g.production(name).ok_or_else(|| ApplyError::UnknownProduction(name.to_string()))?;
    let params = p.parameters();
    for x in bindings.domain() {
        if !params.contains(&x) {
            return Err(InstantiateError::NotAParameter(x).into());
        }
    }
    let renaming = fresh_rename(&p.vars(), gen);
    let fresh = p.apply(&renaming);
    let moved: Subst = bindings
        .iter()
        .map(|(x, t)| (renaming.get(x).and_then(Term::as_var).cloned().unwrap_or_else(|| x.clone()), t.clone()))
        .collect();
    Ok((instantiate_parameters(&fresh, &moved)?, renaming))
}

/// `Γ -P/X-> Γ′`, applied in place; `cfg` is untouched on error.
pub fn apply_production(
    cfg: &mut Configuration,
    g: &Gag,
    production: &str,
    node: &NodeId,
    bindings: &Subst,
) -> Result<Step, ApplyError> {
    let def = match cfg.nodes.get(node) {
        None => return Err(ApplyError::UnknownNode(node.clone())),
        Some(NodeEq::Closed { .. }) => return Err(ApplyError::NodeClosed(node.clone())),
        Some(NodeEq::Open(f)) => f.clone(),
    };
    if !bindings.is_empty() {
        let used = cfg.vars();
        if let Some(v) = bindings.range_vars().into_iter().find(|v| used.contains(v)) {
            return Err(ApplyError::BindingNotFresh(v));
        }
    }
    let mut gen = cfg.gen.clone();
    let (p, renaming) = freshen_production(g, production, bindings, &mut gen)?;
    let matched = form_match(&p.lhs, &def).map_err(|failure| ApplyError::NotEnabled {
        node: node.clone(),
        production: production.to_string(),
        failure,
    })?;

    let mut created = Vec::with_capacity(p.rhs.len());
    for i in 0..p.rhs.len() {
        let id = cfg.child_id(node, i, &created);
        created.push(id);
    }
    for nd in cfg.nodes.values_mut() {
        if let NodeEq::Open(f) = nd {
            *f = f.apply(&matched.sigma_out);
        }
    }
    for (id, f) in created.iter().zip(&p.rhs) {
        cfg.nodes.insert(id.clone(), NodeEq::Open(f.apply(&matched.sigma)));
    }
    cfg.nodes.insert(node.clone(), NodeEq::Closed { production: production.to_string(), children: created.clone() });
    cfg.gen = gen;
    Ok(Step { node: node.clone(), production: production.to_string(), renaming, matched, created })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Status {
    Enabled,
    TriggeredOnly { cycle: CyclicError },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnabledEntry {
    pub node: NodeId,
    pub production: String,
    #[serde(flatten)]
    pub status: Status,
    /// Parameters of the production, by their declared names.
    pub parameters: Vec<String>,
}

impl EnabledEntry {
    pub fn is_enabled(&self) -> bool {
        self.status == Status::Enabled
    }
}

/// Triggered productions at open nodes, ordered by node then production declaration.
pub fn enabled_set(cfg: &Configuration, g: &Gag) -> Vec<EnabledEntry> {
    enabled_in(cfg.nodes.iter(), &cfg.gen, g)
}

pub(crate) fn enabled_in<'a>(
    nodes: impl Iterator<Item = (&'a NodeId, &'a NodeEq)>,
    gen: &NameGen,
    g: &Gag,
) -> Vec<EnabledEntry> {
    let mut out = Vec::new();
    for (id, nd) in nodes {
        let NodeEq::Open(def) = nd else { continue };
        for p in g.productions_of_sort(&def.sort) {
            let mut gen = gen.clone();
            let renaming = fresh_rename(&p.vars(), &mut gen);
            let lhs = p.lhs.apply(&renaming);
            let status = match form_match(&lhs, def) {
                Ok(_) => Status::Enabled,
                Err(MatchFailure::TriggeredButCyclic { cycle, .. }) => Status::TriggeredOnly { cycle },
                Err(_) => continue,
            };
            out.push(EnabledEntry {
                node: id.clone(),
                production: p.name.clone(),
                status,
                parameters: p.parameters().into_iter().map(|v| v.name).collect(),
            });
        }
    }
    out
}

pub fn is_closed(cfg: &Configuration) -> bool {
    cfg.nodes.values().all(|n| matches!(n, NodeEq::Closed { .. }))
}

pub fn is_terminal(cfg: &Configuration, g: &Gag) -> bool {
    !enabled_set(cfg, g).iter().any(EnabledEntry::is_enabled)
}

/// Outcome class of a configuration, shared by the CLI exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Progress {
    Closed,
    TerminalOpen,
    Incomplete,
}

pub fn progress(cfg: &Configuration, g: &Gag) -> Progress {
    if is_closed(cfg) {
        Progress::Closed
    } else if is_terminal(cfg, g) {
        Progress::TerminalOpen
    } else {
        Progress::Incomplete
    }
}
