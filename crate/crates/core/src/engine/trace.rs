use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{apply_production, init_config, ApplyError, Case, Configuration, EngineError, NodeId};
use crate::distribution::Partition;
use crate::grammar::Gag;
use crate::terms::Subst;

/// One requested step of a script.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub node: NodeId,
    pub production: String,
    #[serde(default)]
    pub bindings: Subst,
}

impl ScriptStep {
    pub fn new(node: NodeId, production: impl Into<String>) -> Self {
        ScriptStep { node, production: production.into(), bindings: Subst::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Applied {
        node: NodeId,
        production: String,
        #[serde(default)]
        bindings: Subst,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_in: Option<Subst>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_out: Option<Subst>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        emitted: Vec<String>,
    },
    Delivered {
        message: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        emitted: Vec<String>,
    },
}

impl Event {
    pub fn applied(node: NodeId, production: impl Into<String>, bindings: Subst) -> Self {
        Event::Applied {
            node,
            production: production.into(),
            bindings,
            sigma_in: None,
            sigma_out: None,
            emitted: Vec::new(),
        }
    }
}

/// Ordered record of a run; a partition marks it as distributed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub case: Case,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Partition>,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(case: Case) -> Self {
        Trace { case, partition: None, events: Vec::new() }
    }

    /// The application steps, dropping recorded substitutions.
    pub fn script(&self) -> Vec<ScriptStep> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Applied { node, production, bindings, .. } => {
                    Some(ScriptStep { node: node.clone(), production: production.clone(), bindings: bindings.clone() })
                }
                Event::Delivered { .. } => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("step {} ({} at {}): {error}", .index + 1, .step.production, .step.node)]
pub struct ScriptError {
    pub index: usize,
    pub step: ScriptStep,
    pub error: ApplyError,
    /// State reached before the rejected step.
    pub config: Configuration,
    pub trace: Trace,
}

/// Run a script from the case's initial configuration.
pub fn run_script(g: &Gag, case: &Case, steps: &[ScriptStep]) -> Result<(Configuration, Trace), RunError> {
    let cfg = init_config(g, case)?;
    run_script_from(g, cfg, Trace::new(case.clone()), steps).map_err(|e| RunError::Step(Box::new(e)))
}

pub fn run_script_from(
    g: &Gag,
    mut cfg: Configuration,
    mut trace: Trace,
    steps: &[ScriptStep],
) -> Result<(Configuration, Trace), ScriptError> {
    for (index, step) in steps.iter().enumerate() {
        match apply_production(&mut cfg, g, &step.production, &step.node, &step.bindings) {
            Ok(s) => trace.events.push(Event::Applied {
                node: step.node.clone(),
                production: step.production.clone(),
                bindings: step.bindings.clone(),
                sigma_in: Some(s.matched.sigma_in),
                sigma_out: Some(s.matched.sigma_out),
                emitted: Vec::new(),
            }),
            Err(error) => return Err(ScriptError { index, step: step.clone(), error, config: cfg, trace }),
        }
    }
    Ok((cfg, trace))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Step(Box<ScriptError>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("event {}: {error}", .index + 1)]
    Apply { index: usize, error: ApplyError },
    #[error("event {}: recorded {field} differs from the replayed one", .index + 1)]
    Mismatch { index: usize, field: &'static str },
    #[error("event {}: message deliveries need a distributed replay", .index + 1)]
    Distributed { index: usize },
}

/// Rebuild the final configuration of a central trace, checking recorded substitutions.
pub fn replay(g: &Gag, trace: &Trace) -> Result<Configuration, ReplayError> {
    let mut cfg = init_config(g, &trace.case)?;
    for (index, e) in trace.events.iter().enumerate() {
        match e {
            Event::Applied { node, production, bindings, sigma_in, sigma_out, .. } => {
                let s = apply_production(&mut cfg, g, production, node, bindings)
                    .map_err(|error| ReplayError::Apply { index, error })?;
                if sigma_in.as_ref().is_some_and(|r| *r != s.matched.sigma_in) {
                    return Err(ReplayError::Mismatch { index, field: "sigma_in" });
                }
                if sigma_out.as_ref().is_some_and(|r| *r != s.matched.sigma_out) {
                    return Err(ReplayError::Mismatch { index, field: "sigma_out" });
                }
            }
            Event::Delivered { .. } => return Err(ReplayError::Distributed { index }),
        }
    }
    Ok(cfg)
}
