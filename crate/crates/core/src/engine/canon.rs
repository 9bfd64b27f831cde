use std::collections::BTreeMap;

use super::{Configuration, NodeEq, NodeId};
use crate::terms::{NameGen, Term, Var, CENTRAL};

/// Relabel nodes by tree position and variables by first occurrence.
///
/// Roots become `N0, N1, …` and the `j`-th child of `N` becomes `N_j`; nodes not
/// reachable from a root are appended as `U0, U1, …` in id order. Variables become
/// `v0, v1, …` in depth-first order, inherited terms before synthesized ones.
/// Everything lands in the central namespace.
pub fn canonicalize(cfg: &Configuration) -> Configuration {
    let mut node_names: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut order: Vec<NodeId> = Vec::new();

    fn visit(
        cfg: &Configuration,
        id: &NodeId,
        name: String,
        node_names: &mut BTreeMap<NodeId, NodeId>,
        order: &mut Vec<NodeId>,
    ) {
        if node_names.contains_key(id) {
            return;
        }
        node_names.insert(id.clone(), NodeId::central(name.clone()));
        order.push(id.clone());
        if let Some(NodeEq::Closed { children, .. }) = cfg.nodes.get(id) {
            for (j, c) in children.iter().enumerate() {
                visit(cfg, c, format!("{name}_{}", j + 1), node_names, order);
            }
        }
    }

    for (i, r) in cfg.roots.iter().enumerate() {
        visit(cfg, r, format!("N{i}"), &mut node_names, &mut order);
    }
    let mut extra = 0;
    for id in cfg.nodes.keys() {
        if !node_names.contains_key(id) {
            visit(cfg, id, format!("U{extra}"), &mut node_names, &mut order);
            extra += 1;
        }
    }

    let mut var_names: BTreeMap<Var, Var> = BTreeMap::new();
    let mut gen = NameGen::new(CENTRAL);
    for id in &order {
        if let Some(NodeEq::Open(f)) = cfg.nodes.get(id) {
            let mut seen = Vec::new();
            for t in f.inherited.iter().chain(&f.synthesized) {
                t.vars_in_order(&mut seen);
            }
            for v in seen {
                var_names.entry(v).or_insert_with(|| gen.fresh());
            }
        }
    }

    let rename_node = |id: &NodeId| node_names.get(id).cloned().unwrap_or_else(|| id.clone());
    let mut nodes = BTreeMap::new();
    for id in &order {
        let Some(nd) = cfg.nodes.get(id) else {
            // Dangling child: keep its slot visible without an equation.
            continue;
        };
        let new = match nd {
            NodeEq::Closed { production, children } => {
                NodeEq::Closed { production: production.clone(), children: children.iter().map(rename_node).collect() }
            }
            NodeEq::Open(f) => NodeEq::Open(f.map_vars(&mut |v| Term::from_var(var_names[v].clone()))),
        };
        nodes.insert(rename_node(id), new);
    }
    let roots = cfg.roots.iter().map(rename_node).collect();
    Configuration { nodes, roots, gen }
}

/// Canonical text of a configuration, without the generator line.
pub fn canonical_text(cfg: &Configuration) -> String {
    crate::textio::emit_config_body(&canonicalize(cfg))
}
