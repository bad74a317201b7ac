use std::sync::Arc;

use crate::backend::{default_backend, Backend, SolverParams};
use crate::grid::PowerNetwork;
use crate::scenario::{DisruptionEvent, NodeId, ScenarioTree};

pub(crate) fn toy3() -> PowerNetwork {
    PowerNetwork::from_json_str(include_str!("../data/toy3.json")).unwrap()
}

pub(crate) fn backend() -> Arc<dyn Backend> {
    default_backend().unwrap()
}

pub(crate) fn exact() -> SolverParams {
    SolverParams::with_gap(1e-9)
}

/// Fault at `onset` on `key`, spreading to `spread` (which gets `key` added).
pub(crate) fn fault(onset: usize, key: &str, spread: &[&str]) -> DisruptionEvent {
    let mut ev = DisruptionEvent { onset, ..Default::default() };
    ev.fault_flags.insert(key.to_string(), 1);
    let mut set: std::collections::BTreeSet<String> = spread.iter().map(|s| s.to_string()).collect();
    set.insert(key.to_string());
    ev.spread_sets.insert(key.to_string(), set);
    ev
}

pub(crate) fn exogenous(onset: usize, key: &str) -> DisruptionEvent {
    let mut ev = DisruptionEvent { onset, ..Default::default() };
    ev.exogenous_flags.insert(key.to_string(), 1);
    ev
}

/// Root with one disruption child of probability `p` and a nominal sibling.
pub(crate) fn one_event_tree(horizon: usize, event: DisruptionEvent, p: f64) -> (ScenarioTree, NodeId) {
    let mut tree = ScenarioTree::with_root(horizon, 2);
    let root = tree.root;
    let child = tree.push_child(root, Some(event), p);
    if p < 1.0 {
        tree.push_child(root, None, 1.0 - p);
    }
    tree.validate().unwrap();
    (tree, child)
}

/// Two disruption levels on toy3: a spreading fault at period 2 and, below
/// it, an exogenous line loss at period 3; plus a sibling fault at period 3.
pub(crate) fn two_level_tree() -> ScenarioTree {
    let mut tree = ScenarioTree::with_root(4, 2);
    let root = tree.root;
    let a = tree.push_child(root, Some(fault(2, "line:l12", &["bus:2"])), 0.3);
    tree.push_child(root, Some(fault(3, "line:l13", &["gen:g1"])), 0.2);
    tree.push_child(root, None, 0.5);
    tree.push_child(a, Some(exogenous(3, "line:l13")), 0.5);
    tree.push_child(a, None, 0.5);
    tree.validate().unwrap();
    tree
}
