use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::PowerNetwork;

/// Tolerance for sibling probabilities summing to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// One wildfire disruption: when it is revealed and what it touches.
///
/// Flags are keyed by component key (`bus:1`, `line:l12`, ...); absent keys
/// read as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DisruptionEvent {
    pub onset: usize,
    #[serde(default)]
    pub fault_flags: BTreeMap<String, u8>,
    #[serde(default)]
    pub exogenous_flags: BTreeMap<String, u8>,
    #[serde(default)]
    pub spread_sets: BTreeMap<String, BTreeSet<String>>,
}

impl DisruptionEvent {
    pub fn faults(&self) -> impl Iterator<Item = &str> {
        self.fault_flags.iter().filter(|(_, v)| **v != 0).map(|(k, _)| k.as_str())
    }

    pub fn exogenous(&self) -> impl Iterator<Item = &str> {
        self.exogenous_flags.iter().filter(|(_, v)| **v != 0).map(|(k, _)| k.as_str())
    }

    pub(crate) fn is_quiet(&self) -> bool {
        self.faults().next().is_none() && self.exogenous().next().is_none()
    }
}

/// A chronologically ordered list of disruptions; empty means nominal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePath {
    pub events: Vec<DisruptionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionRealization {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub onset: usize,
    pub probability: f64,
    #[serde(default)]
    pub fault_flags: BTreeMap<String, u8>,
    #[serde(default)]
    pub exogenous_flags: BTreeMap<String, u8>,
    #[serde(default)]
    pub spread_sets: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub children: Vec<NodeId>,
}

impl DisruptionRealization {
    pub fn event(&self) -> DisruptionEvent {
        DisruptionEvent {
            onset: self.onset,
            fault_flags: self.fault_flags.clone(),
            exogenous_flags: self.exogenous_flags.clone(),
            spread_sets: self.spread_sets.clone(),
        }
    }
}

/// A child branch of a stage as seen by the stage problem. `child` is `None`
/// for an implicit nominal continuation of a childless disruption node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub child: Option<NodeId>,
    pub probability: f64,
    pub onset: usize,
    pub nominal: bool,
}

/// Disruption data of one node mapped onto flat component indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolvedDisruption {
    pub faults: Vec<usize>,
    pub exogenous: Vec<usize>,
    /// (faulted component, affected components)
    pub spread: Vec<(usize, Vec<usize>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree {
    #[serde(rename = "horizon_T")]
    pub horizon: usize,
    pub depth_limit: usize,
    pub root: NodeId,
    pub nodes: BTreeMap<NodeId, DisruptionRealization>,
}

impl ScenarioTree {
    /// A tree holding only the root, ready for [`ScenarioTree::push_child`].
    pub fn with_root(horizon: usize, depth_limit: usize) -> Self {
        let root = NodeId(0);
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root,
            DisruptionRealization {
                id: root,
                parent: None,
                onset: 1,
                probability: 1.0,
                fault_flags: BTreeMap::new(),
                exogenous_flags: BTreeMap::new(),
                spread_sets: BTreeMap::new(),
                children: Vec::new(),
            },
        );
        ScenarioTree { horizon, depth_limit, root, nodes }
    }

    /// Root with a single nominal child: the deterministic problem.
    pub fn nominal_only(horizon: usize) -> Self {
        let mut tree = Self::with_root(horizon, 1);
        tree.push_child(tree.root, None, 1.0);
        tree
    }

    /// Appends a child; `None` adds the nominal child (onset T+1). Does not
    /// validate; call [`ScenarioTree::validate`] when done.
    pub fn push_child(
        &mut self,
        parent: NodeId,
        event: Option<DisruptionEvent>,
        probability: f64,
    ) -> NodeId {
        let id = NodeId(self.nodes.keys().next_back().map_or(0, |k| k.0 + 1));
        let event = event.unwrap_or(DisruptionEvent { onset: self.horizon + 1, ..Default::default() });
        self.nodes.insert(
            id,
            DisruptionRealization {
                id,
                parent: Some(parent),
                onset: event.onset,
                probability,
                fault_flags: event.fault_flags,
                exogenous_flags: event.exogenous_flags,
                spread_sets: event.spread_sets,
                children: Vec::new(),
            },
        );
        self.nodes.get_mut(&parent).expect("parent exists").children.push(id);
        id
    }

    pub fn node(&self, id: NodeId) -> &DisruptionRealization {
        &self.nodes[&id]
    }

    pub fn nominal_onset(&self) -> usize {
        self.horizon + 1
    }

    pub fn is_nominal(&self, id: NodeId) -> bool {
        id != self.root && self.nodes[&id].onset == self.nominal_onset()
    }

    /// Number of disruptions on the path from the root to `id`.
    pub fn depth(&self, id: NodeId) -> usize {
        let mut depth = 0;
        let mut cur = self.nodes[&id].parent;
        while let Some(p) = cur {
            depth += 1;
            cur = self.nodes[&p].parent;
        }
        depth
    }

    /// Product of branch probabilities from the root down to `id`.
    pub fn path_probability(&self, id: NodeId) -> f64 {
        let mut p = 1.0;
        let mut cur = Some(id);
        while let Some(n) = cur {
            if n == self.root {
                break;
            }
            let node = &self.nodes[&n];
            p *= node.probability;
            cur = node.parent;
        }
        p
    }

    /// Stage branches of a non-nominal node in node-id order.
    pub fn branches(&self, id: NodeId) -> Vec<Branch> {
        let node = &self.nodes[&id];
        if node.children.is_empty() {
            return vec![Branch {
                child: None,
                probability: 1.0,
                onset: self.nominal_onset(),
                nominal: true,
            }];
        }
        let mut kids = node.children.clone();
        kids.sort();
        kids.into_iter()
            .map(|c| Branch {
                child: Some(c),
                probability: self.nodes[&c].probability,
                onset: self.nodes[&c].onset,
                nominal: self.is_nominal(c),
            })
            .collect()
    }

    /// Non-nominal children of `id`, sorted.
    pub fn disruption_children(&self, id: NodeId) -> Vec<NodeId> {
        self.branches(id)
            .into_iter()
            .filter(|b| !b.nominal)
            .filter_map(|b| b.child)
            .collect()
    }

    /// Every non-root, non-nominal node in node-id order.
    pub fn disruption_nodes(&self) -> Vec<NodeId> {
        self.nodes
            .keys()
            .copied()
            .filter(|&n| n != self.root && !self.is_nominal(n))
            .collect()
    }

    /// Nodes of the subtree rooted at `id` (inclusive), depth-first, siblings
    /// in node-id order.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        for c in self.disruption_children(id) {
            out.extend(self.subtree(c));
        }
        out
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.keys().map(|&n| self.depth(n)).max().unwrap_or(0)
    }

    /// Largest number of disruptions on one path.
    pub fn disruption_depth(&self) -> usize {
        self.disruption_nodes().into_iter().map(|n| self.depth(n)).max().unwrap_or(0)
    }

    /// Maps the node's flags and spread sets onto flat component indices.
    pub fn resolve(&self, network: &PowerNetwork, id: NodeId) -> Result<ResolvedDisruption> {
        let node = &self.nodes[&id];
        let event = node.event();
        let mut out = ResolvedDisruption::default();
        for key in event.faults() {
            let c = network.resolve_key(key)?;
            out.faults.push(c);
            let mut affected = vec![c];
            if let Some(set) = node.spread_sets.get(key) {
                for k in set {
                    let k = network.resolve_key(k)?;
                    if !affected.contains(&k) {
                        affected.push(k);
                    }
                }
            }
            affected.sort_unstable();
            out.spread.push((c, affected));
        }
        for key in event.exogenous() {
            out.exogenous.push(network.resolve_key(key)?);
        }
        out.faults.sort_unstable();
        out.exogenous.sort_unstable();
        out.spread.sort();
        Ok(out)
    }

    /// Checks the structural invariants of the tree.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.nodes.is_empty() {
            return fail("scenario tree has no nodes".into());
        }
        if self.horizon == 0 {
            return fail("horizon_T must be at least 1".into());
        }
        let Some(root) = self.nodes.get(&self.root) else {
            return fail(format!("root {} missing", self.root));
        };
        if root.parent.is_some() {
            return fail("root has a parent".into());
        }
        let nominal = self.nominal_onset();
        let mut seen = BTreeSet::new();
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            if !seen.insert(id) {
                return fail(format!("node {id} reachable twice"));
            }
            let node = &self.nodes[&id];
            if node.id != id {
                return fail(format!("node keyed {id} carries id {}", node.id));
            }
            if node.onset > nominal {
                return Err(Error::InconsistentTree(format!(
                    "node {id} onset {} beyond T+1",
                    node.onset
                )));
            }
            let is_nominal = id != self.root && node.onset == nominal;
            if id != self.root {
                if !(node.probability > 0.0 && node.probability <= 1.0 + PROBABILITY_TOLERANCE) {
                    return fail(format!("node {id} has probability {}", node.probability));
                }
                let parent = &self.nodes[&node.parent.expect("non-root")];
                if !is_nominal {
                    if node.onset < 2 || node.onset > self.horizon {
                        return fail(format!("node {id} onset {} outside 2..={}", node.onset, self.horizon));
                    }
                    if node.onset < parent.onset + 1 {
                        return fail(format!(
                            "node {id} onset {} does not follow parent onset {}",
                            node.onset, parent.onset
                        ));
                    }
                    if depth > self.depth_limit {
                        return fail(format!("node {id} exceeds depth limit {}", self.depth_limit));
                    }
                }
            }
            if is_nominal {
                if !node.children.is_empty() {
                    return fail(format!("nominal node {id} has children"));
                }
                if !node.event().is_quiet() {
                    return fail(format!("nominal node {id} carries disruption flags"));
                }
            }
            for (c, set) in &node.spread_sets {
                if !set.contains(c) {
                    return fail(format!("spread set of {c} at node {id} does not contain it"));
                }
            }
            if !node.children.is_empty() {
                let mut total = 0.0;
                for c in &node.children {
                    let Some(child) = self.nodes.get(c) else {
                        return fail(format!("node {id} lists missing child {c}"));
                    };
                    if child.parent != Some(id) {
                        return fail(format!("child {c} does not point back to {id}"));
                    }
                    total += child.probability;
                    stack.push((*c, depth + 1));
                }
                if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                    return fail(format!("children of {id} have total probability {total}"));
                }
            }
        }
        if seen.len() != self.nodes.len() {
            return fail(format!(
                "{} nodes are not reachable from the root",
                self.nodes.len() - seen.len()
            ));
        }
        Ok(())
    }

    /// Validation plus a check that every component key exists in `network`.
    pub fn validate_against(&self, network: &PowerNetwork) -> Result<()> {
        self.validate()?;
        if network.horizon != self.horizon {
            return Err(Error::Validation(format!(
                "tree horizon {} differs from network horizon {}",
                self.horizon, network.horizon
            )));
        }
        for id in self.nodes.keys() {
            self.resolve(network, *id)?;
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let tree: ScenarioTree =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        tree.validate()?;
        Ok(tree)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn stats(&self) -> TreeStats {
        let disruptions = self.disruption_nodes();
        TreeStats {
            nodes: self.nodes.len(),
            disruption_nodes: disruptions.len(),
            max_depth: self.max_depth(),
            disruption_depth: self.disruption_depth(),
            nominal_probability: self
                .branches(self.root)
                .iter()
                .filter(|b| b.nominal)
                .map(|b| b.probability)
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub disruption_nodes: usize,
    pub max_depth: usize,
    pub disruption_depth: usize,
    pub nominal_probability: f64,
}

pub fn save_tree(tree: &ScenarioTree, path: impl AsRef<Path>) -> Result<()> {
    tree.save(path)
}

pub fn load_tree(path: impl AsRef<Path>) -> Result<ScenarioTree> {
    ScenarioTree::load(path)
}

/// Folds equally weighted sample paths into a scenario tree.
///
/// Identical leading events are merged and weighted by multiplicity; paths
/// that end at a node feed its nominal child, which is dropped when it would
/// get zero mass. Events beyond `depth_limit` are discarded.
pub fn build_tree(paths: &[SamplePath], horizon: usize, depth_limit: usize) -> Result<ScenarioTree> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("no sample paths".into()));
    }
    for (k, path) in paths.iter().enumerate() {
        let mut last = 1;
        for ev in &path.events {
            if ev.onset <= last || ev.onset > horizon {
                return Err(Error::Validation(format!(
                    "path {k}: onset {} must increase and lie in 2..={horizon}",
                    ev.onset
                )));
            }
            last = ev.onset;
        }
    }
    let mut tree = ScenarioTree::with_root(horizon, depth_limit);
    let suffixes: Vec<&[DisruptionEvent]> = paths.iter().map(|p| p.events.as_slice()).collect();
    let root = tree.root;
    grow(&mut tree, root, &suffixes, 0);
    tree.validate()?;
    Ok(tree)
}

fn grow(tree: &mut ScenarioTree, parent: NodeId, suffixes: &[&[DisruptionEvent]], depth: usize) {
    let n = suffixes.len() as f64;
    if depth >= tree.depth_limit {
        tree.push_child(parent, None, 1.0);
        return;
    }
    let mut ended = 0usize;
    let mut groups: BTreeMap<&DisruptionEvent, Vec<&[DisruptionEvent]>> = BTreeMap::new();
    for s in suffixes {
        match s.split_first() {
            None => ended += 1,
            Some((first, rest)) => groups.entry(first).or_default().push(rest),
        }
    }
    if ended > 0 {
        tree.push_child(parent, None, ended as f64 / n);
    }
    let created: Vec<(NodeId, Vec<&[DisruptionEvent]>)> = groups
        .into_iter()
        .map(|(ev, rest)| {
            let id = tree.push_child(parent, Some(ev.clone()), rest.len() as f64 / n);
            (id, rest)
        })
        .collect();
    for (id, rest) in created {
        grow(tree, id, &rest, depth + 1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(onset: usize, fault: &str) -> DisruptionEvent {
        let mut ev = DisruptionEvent { onset, ..Default::default() };
        ev.fault_flags.insert(fault.to_string(), 1);
        ev.spread_sets.insert(fault.to_string(), [fault.to_string()].into());
        ev
    }

    fn path(events: Vec<DisruptionEvent>) -> SamplePath {
        SamplePath { events }
    }

    fn four_path_tree() -> ScenarioTree {
        let e = event(2, "line:l12");
        let paths = vec![path(vec![]), path(vec![]), path(vec![e.clone()]), path(vec![e])];
        build_tree(&paths, 4, 2).unwrap()
    }

    #[test]
    fn counting_two_children() {
        let tree = four_path_tree();
        let b = tree.branches(tree.root);
        assert_eq!(b.len(), 2);
        let nominal: Vec<_> = b.iter().filter(|x| x.nominal).collect();
        assert_eq!(nominal.len(), 1);
        assert!((nominal[0].probability - 0.5).abs() < 1e-15);
        let ev: Vec<_> = b.iter().filter(|x| !x.nominal).collect();
        assert!((ev[0].probability - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shared_first_event_prunes_zero_nominal() {
        let first = event(2, "bus:1");
        let paths = vec![
            path(vec![first.clone(), event(3, "bus:2")]),
            path(vec![first, event(4, "bus:3")]),
        ];
        let tree = build_tree(&paths, 5, 2).unwrap();
        let root_b = tree.branches(tree.root);
        assert_eq!(root_b.len(), 1);
        assert!(!root_b[0].nominal);
        assert!((root_b[0].probability - 1.0).abs() < 1e-15);
        let mid = root_b[0].child.unwrap();
        let mid_b = tree.branches(mid);
        assert_eq!(mid_b.len(), 2);
        assert!(mid_b.iter().all(|b| !b.nominal && (b.probability - 0.5).abs() < 1e-15));
        for b in mid_b {
            let leaf = b.child.unwrap();
            let leaf_b = tree.branches(leaf);
            assert_eq!(leaf_b.len(), 1);
            assert!(leaf_b[0].nominal && leaf_b[0].probability == 1.0);
        }
    }

    #[test]
    fn truncates_at_depth_limit() {
        let paths = vec![path(vec![event(2, "bus:1"), event(3, "bus:2"), event(4, "bus:3")])];
        let tree = build_tree(&paths, 5, 1).unwrap();
        assert_eq!(tree.max_depth(), 2); // disruption + its nominal leaf
        assert_eq!(tree.disruption_depth(), 1);
        assert_eq!(tree.disruption_nodes().len(), 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(build_tree(&[], 4, 2), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let tree = four_path_tree();
        let text = tree.to_json_string().unwrap();
        let back = ScenarioTree::from_json_str(&text).unwrap();
        assert_eq!(tree, back);

        let mut bad = tree.clone();
        let kid = bad.nodes[&bad.root].children[0];
        bad.nodes.get_mut(&kid).unwrap().probability = 0.4;
        let text = serde_json::to_string(&bad).unwrap();
        assert!(matches!(ScenarioTree::from_json_str(&text), Err(Error::Validation(_))));

        let empty = r#"{"horizon_T": 4, "depth_limit": 2, "root": 0, "nodes": {}}"#;
        assert!(matches!(ScenarioTree::from_json_str(empty), Err(Error::Validation(_))));
    }

    #[test]
    fn onset_must_follow_parent() {
        let mut tree = ScenarioTree::with_root(5, 2);
        let a = tree.push_child(tree.root, Some(event(3, "bus:1")), 1.0);
        tree.push_child(a, Some(event(3, "bus:2")), 1.0);
        assert!(tree.validate().is_err());
    }

    #[test]
    fn path_mass_is_one() {
        let tree = four_path_tree();
        let leaves: f64 = tree
            .nodes
            .keys()
            .filter(|n| tree.nodes[n].children.is_empty())
            .map(|&n| tree.path_probability(n))
            .sum();
        assert!((leaves - 1.0).abs() < 1e-12);
    }
}
