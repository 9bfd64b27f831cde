//! One distributed run driven over HTTP. Everything here is synchronous; the
//! router wraps each session in a mutex so mutations are totally ordered.

use std::collections::{BTreeMap, BTreeSet};

use gag_core::distribution::{
    apply_recorded, deliver_recorded, deploy, replay_distributed, DistributedState, Message, Partition,
};
use gag_core::engine::{
    canonical_text, init_config, progress, Case, EnabledEntry, Event, NodeEq, NodeId, Progress, Trace,
};
use gag_core::grammar::{validate, Gag};
use gag_core::terms::{Subst, Term, Var};
use gag_core::textio::{emit_config, emit_trace, fixtures, parse_gag, parse_partition, parse_term, parse_trace};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Upper bound on deliveries triggered by one request in auto mode.
const AUTO_DRAIN_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeliveryMode {
    /// Messages wait until a client delivers them.
    #[default]
    Manual,
    /// Every apply is followed by delivering all messages.
    Auto,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PartitionInput {
    /// `partition L = {sorts};` lines.
    Text(String),
    Map(Partition),
}

#[derive(Clone, Debug, Deserialize)]
pub struct CaseInput {
    pub service: String,
    /// Inherited variable to term text.
    #[serde(default)]
    pub closing: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct CreateSession {
    /// `.gag` source.
    #[serde(default)]
    pub grammar: Option<String>,
    /// Built-in fixture, used when `grammar` is absent.
    #[serde(default)]
    pub fixture: Option<String>,
    /// Defaults to the grammar's own partition, then to a single location.
    #[serde(default)]
    pub partition: Option<PartitionInput>,
    /// Defaults to the fixture's usual case, then to the first service.
    #[serde(default)]
    pub case: Option<CaseInput>,
    #[serde(default)]
    pub mode: DeliveryMode,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ApplyRequest {
    /// `X0_1`, or `X0_1@location`.
    pub node: String,
    pub production: String,
    /// Parameter name to ground term text.
    #[serde(default)]
    pub bindings: BTreeMap<String, String>,
    /// Refuse with 409 unless the session is still at this sequence number.
    #[serde(default)]
    pub expect_seq: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct DeliverRequest {
    #[serde(default)]
    pub expect_seq: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Change {
    Created,
    Applied { location: String, node: NodeId, production: String, emitted: Vec<String> },
    Delivered { message: String, to: String, emitted: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub seq: u64,
    #[serde(flatten)]
    pub change: Change,
}

#[derive(Clone, Debug, Serialize)]
pub struct TermView {
    pub text: String,
    pub term: Term,
}

impl From<&Term> for TermView {
    fn from(t: &Term) -> Self {
        TermView { text: t.to_string(), term: t.clone() }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum NodeView {
    Open { id: NodeId, root: bool, sort: String, inherited: Vec<TermView>, synthesized: Vec<TermView> },
    Closed { id: NodeId, root: bool, production: String, children: Vec<NodeId> },
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfigView {
    pub location: String,
    pub nodes: Vec<NodeView>,
    pub aliases: BTreeMap<NodeId, NodeId>,
    pub subscriptions: BTreeMap<Var, Var>,
    pub placeholders: BTreeSet<Var>,
    pub text: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocationView {
    pub name: String,
    pub sorts: Vec<String>,
    pub open_nodes: usize,
    pub closed_nodes: usize,
    /// Messages in flight addressed here.
    pub inbox: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MessageView {
    #[serde(flatten)]
    pub message: Message,
    pub text: String,
}

impl From<&Message> for MessageView {
    fn from(m: &Message) -> Self {
        MessageView { message: m.clone(), text: m.to_string() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeliveryView {
    pub message: String,
    pub emitted: Vec<MessageView>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApplyResponse {
    pub seq: u64,
    pub created: Vec<NodeId>,
    pub emitted: Vec<MessageView>,
    /// Deliveries made on the caller's behalf in auto mode.
    pub delivered: Vec<DeliveryView>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeliverResponse {
    pub seq: u64,
    pub message: String,
    pub emitted: Vec<MessageView>,
    /// The message had already been delivered; nothing changed.
    pub repeated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MergedView {
    pub canonical: String,
    pub config: String,
    pub progress: Progress,
    pub in_flight: usize,
    pub quiescent: bool,
}

/// Inputs plus trace; enough to rebuild the session by replay.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub grammar: String,
    pub mode: DeliveryMode,
    /// `.gagt` text, carrying the case and the partition.
    pub trace: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub id: String,
    pub seq: u64,
    pub mode: DeliveryMode,
    pub locations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub source: String,
    pub grammar: Gag,
    pub state: DistributedState,
    pub trace: Trace,
    pub mode: DeliveryMode,
    pub events: Vec<Notification>,
    /// Delivered message ids with what their delivery emitted.
    delivered: BTreeMap<String, Vec<String>>,
    /// Every message sent so far, for views of delivered ones.
    sent: BTreeMap<String, Message>,
}

fn parse_input<T>(what: &str, r: Result<T, gag_core::textio::ParseError>) -> Result<T, ServiceError> {
    r.map_err(|e| ServiceError::invalid("ParseError", format!("{what}: {e}")))
}

fn load_grammar(source: &str) -> Result<Gag, ServiceError> {
    let g = parse_input("grammar", parse_gag(source))?;
    let violations = validate(&g);
    if !violations.is_empty() {
        return Err(ServiceError::Invalid {
            code: "InvalidGrammar",
            message: format!("grammar has {} violations", violations.len()),
            violations,
        });
    }
    Ok(g)
}

fn parse_bindings(g: &Gag, raw: &BTreeMap<String, String>) -> Result<Subst, ServiceError> {
    raw.iter()
        .map(|(x, t)| Ok((Var::new(x.as_str()), parse_input(&format!("binding for {x}"), parse_term(g, t))?)))
        .collect()
}

impl Session {
    pub fn create(id: String, req: CreateSession) -> Result<Session, ServiceError> {
        let source = match (&req.grammar, &req.fixture) {
            (Some(src), _) => src.clone(),
            (None, Some(name)) => fixtures::source(name)
                .ok_or_else(|| ServiceError::invalid("UnknownFixture", format!("no fixture named `{name}`")))?,
            (None, None) => return Err(ServiceError::invalid("MissingGrammar", "give `grammar` or `fixture`")),
        };
        let g = load_grammar(&source)?;
        let partition = match req.partition {
            Some(PartitionInput::Text(src)) => parse_input("partition", parse_partition(&src))?,
            Some(PartitionInput::Map(p)) => p,
            None => Partition::from_gag(&g).unwrap_or_else(|| Partition::single(&g, "local")),
        };
        let case = match (req.case, &req.fixture) {
            (Some(c), _) => Case::with_closing(c.service, parse_bindings(&g, &c.closing)?),
            (None, Some(name)) if req.grammar.is_none() => fixtures::default_case(name).expect("known fixture"),
            (None, _) => {
                let svc =
                    g.services.first().ok_or_else(|| ServiceError::invalid("MissingCase", "grammar has no service"))?;
                Case::new(svc.name.clone())
            }
        };
        let cfg = init_config(&g, &case).map_err(|e| ServiceError::invalid("BadCase", e.to_string()))?;
        let state = deploy(&g, &cfg, &partition)?;
        let mut trace = Trace::new(case);
        trace.partition = Some(partition);
        Ok(Session {
            id,
            source,
            grammar: g,
            state,
            trace,
            mode: req.mode,
            events: vec![Notification { seq: 1, change: Change::Created }],
            delivered: BTreeMap::new(),
            sent: BTreeMap::new(),
        })
    }

    /// Rebuild a session from a snapshot by replaying its trace.
    pub fn restore(id: String, snap: &Snapshot) -> Result<Session, ServiceError> {
        let g = load_grammar(&snap.grammar)?;
        let trace = parse_input("trace", parse_trace(&g, &snap.trace))?;
        let state = replay_distributed(&g, &trace).map_err(|e| ServiceError::invalid("ReplayFailed", e.to_string()))?;
        let mut s = Session {
            id,
            source: snap.grammar.clone(),
            grammar: g,
            state,
            trace: Trace::new(trace.case.clone()),
            mode: snap.mode,
            events: vec![Notification { seq: 1, change: Change::Created }],
            delivered: BTreeMap::new(),
            sent: BTreeMap::new(),
        };
        // A second replay, through the recording paths, rebuilds the views and the event log.
        let partition =
            trace.partition.clone().ok_or_else(|| ServiceError::invalid("ReplayFailed", "trace has no partition"))?;
        let cfg = init_config(&s.grammar, &trace.case).map_err(|e| ServiceError::invalid("BadCase", e.to_string()))?;
        s.state = deploy(&s.grammar, &cfg, &partition)?;
        s.trace.partition = Some(partition);
        for e in &trace.events {
            match e {
                Event::Applied { node, production, bindings, .. } => {
                    s.apply_step(&node.ns.clone(), node.clone(), production, bindings)?;
                }
                Event::Delivered { message, .. } => {
                    s.deliver_one(message)?;
                }
            }
        }
        Ok(s)
    }

    pub fn seq(&self) -> u64 {
        self.events.last().map_or(0, |n| n.seq)
    }

    fn check_seq(&self, expect: Option<u64>) -> Result<(), ServiceError> {
        match expect {
            Some(s) if s != self.seq() => {
                Err(ServiceError::conflict("Stale", format!("session is at {}, request expected {s}", self.seq())))
            }
            _ => Ok(()),
        }
    }

    fn notify(&mut self, change: Change) {
        let seq = self.seq() + 1;
        self.events.push(Notification { seq, change });
    }

    fn location(&self, l: &str) -> Result<&gag_core::distribution::LocalConfiguration, ServiceError> {
        self.state.locals.get(l).ok_or_else(|| ServiceError::not_found("UnknownLocation", format!("no location `{l}`")))
    }

    fn views(&self, ids: &[String]) -> Vec<MessageView> {
        ids.iter().filter_map(|id| self.sent.get(id)).map(MessageView::from).collect()
    }

    fn remember_sent(&mut self, ids: &[String]) {
        for id in ids {
            if let Some(m) = self.state.in_flight.get(id) {
                self.sent.insert(id.clone(), m.clone());
            }
        }
    }

    pub fn summary(&self) -> Summary {
        Summary {
            id: self.id.clone(),
            seq: self.seq(),
            mode: self.mode,
            locations: self.state.locals.keys().cloned().collect(),
        }
    }

    pub fn locations(&self) -> Vec<LocationView> {
        self.state
            .locals
            .iter()
            .map(|(name, local)| {
                let open = local.config.open_nodes().count();
                LocationView {
                    name: name.clone(),
                    sorts: self.state.partition.locations.get(name).cloned().unwrap_or_default(),
                    open_nodes: open,
                    closed_nodes: local.config.nodes.len() - open,
                    inbox: self.state.in_flight.values().filter(|m| &m.to == name).count(),
                }
            })
            .collect()
    }

    pub fn config(&self, l: &str) -> Result<ConfigView, ServiceError> {
        let local = self.location(l)?;
        let roots: BTreeSet<&NodeId> = local.config.roots.iter().collect();
        let nodes = local
            .config
            .nodes
            .iter()
            .map(|(id, nd)| match nd {
                NodeEq::Open(f) => NodeView::Open {
                    id: id.clone(),
                    root: roots.contains(id),
                    sort: f.sort.clone(),
                    inherited: f.inherited.iter().map(TermView::from).collect(),
                    synthesized: f.synthesized.iter().map(TermView::from).collect(),
                },
                NodeEq::Closed { production, children } => NodeView::Closed {
                    id: id.clone(),
                    root: roots.contains(id),
                    production: production.clone(),
                    children: children.clone(),
                },
            })
            .collect();
        Ok(ConfigView {
            location: l.to_string(),
            nodes,
            aliases: local.node_aliases.clone(),
            subscriptions: local.subscriptions.clone(),
            placeholders: local.placeholders.clone(),
            text: local.describe(),
        })
    }

    pub fn enabled(&self, l: &str) -> Result<Vec<EnabledEntry>, ServiceError> {
        self.location(l)?;
        Ok(self.state.enabled(&self.grammar, l)?)
    }

    pub fn messages(&self) -> Vec<MessageView> {
        self.state.in_flight.values().map(MessageView::from).collect()
    }

    pub fn merged(&self) -> Result<MergedView, ServiceError> {
        let cfg = self.state.merge()?;
        Ok(MergedView {
            canonical: canonical_text(&cfg),
            config: emit_config(&cfg),
            progress: progress(&cfg, &self.grammar),
            in_flight: self.state.in_flight.len(),
            quiescent: self.state.is_quiescent(&self.grammar),
        })
    }

    pub fn trace_text(&self) -> String {
        emit_trace(&self.trace)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { grammar: self.source.clone(), mode: self.mode, trace: self.trace_text() }
    }

    pub fn events_after(&self, after: u64) -> Vec<Notification> {
        self.events.iter().filter(|n| n.seq > after).cloned().collect()
    }

    fn apply_step(
        &mut self,
        location: &str,
        node: NodeId,
        production: &str,
        bindings: &Subst,
    ) -> Result<(Vec<NodeId>, Vec<String>), ServiceError> {
        let step =
            apply_recorded(&self.grammar, &mut self.state, &mut self.trace, location, production, &node, bindings)?;
        self.remember_sent(&step.emitted);
        self.notify(Change::Applied {
            location: location.to_string(),
            node,
            production: production.to_string(),
            emitted: step.emitted.clone(),
        });
        Ok((step.created, step.emitted))
    }

    fn deliver_one(&mut self, id: &str) -> Result<Vec<String>, ServiceError> {
        let to = self.state.in_flight.get(id).map(|m| m.to.clone());
        let emitted = deliver_recorded(&mut self.state, &mut self.trace, id)?;
        self.remember_sent(&emitted);
        self.delivered.insert(id.to_string(), emitted.clone());
        self.notify(Change::Delivered {
            message: id.to_string(),
            to: to.unwrap_or_default(),
            emitted: emitted.clone(),
        });
        Ok(emitted)
    }

    pub fn apply(&mut self, l: &str, req: &ApplyRequest) -> Result<ApplyResponse, ServiceError> {
        self.check_seq(req.expect_seq)?;
        self.location(l)?;
        let node = if req.node.contains('@') {
            req.node.parse().map_err(|e: String| ServiceError::invalid("BadNode", e))?
        } else {
            NodeId::in_ns(req.node.clone(), l)
        };
        let bindings = parse_bindings(&self.grammar, &req.bindings)?;
        let (created, emitted) = self.apply_step(l, node, &req.production, &bindings)?;
        let mut delivered = Vec::new();
        if self.mode == DeliveryMode::Auto {
            while delivered.len() < AUTO_DRAIN_CAP {
                let Some(id) = self.state.in_flight.keys().next().cloned() else { break };
                let out = self.deliver_one(&id)?;
                delivered.push(DeliveryView { message: id, emitted: self.views(&out) });
            }
        }
        Ok(ApplyResponse { seq: self.seq(), created, emitted: self.views(&emitted), delivered })
    }

    /// Idempotent: a repeated delivery answers with the first one's emissions.
    pub fn deliver(&mut self, id: &str, req: &DeliverRequest) -> Result<DeliverResponse, ServiceError> {
        if let Some(emitted) = self.delivered.get(id) {
            return Ok(DeliverResponse {
                seq: self.seq(),
                message: id.to_string(),
                emitted: self.views(emitted),
                repeated: true,
            });
        }
        self.check_seq(req.expect_seq)?;
        let emitted = self.deliver_one(id)?;
        Ok(DeliverResponse { seq: self.seq(), message: id.to_string(), emitted: self.views(&emitted), repeated: false })
    }
}
