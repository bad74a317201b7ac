//! Instances shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use psps_core::backend::SolverParams;
use psps_core::cuts::{CutFamily, DualSolverParams};
use psps_core::engine::EngineConfig;
use psps_core::grid::{load_network, PowerNetwork};
use psps_core::scenario::{CaParams, DisruptionEvent, NodeId, ScenarioTree, Wind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

pub fn fixture(name: &str) -> PowerNetwork {
    load_network(data_path(name)).expect("fixture network")
}

pub fn exact() -> SolverParams {
    SolverParams::with_gap(1e-9)
}

/// Exact solves everywhere, binary-domain duals with tolerance 1e-6 and no
/// square-minimization slack.
pub fn exact_config(family: CutFamily, epsilon: f64) -> EngineConfig {
    EngineConfig {
        family,
        epsilon,
        max_iterations: 100,
        forward: exact(),
        dual: DualSolverParams { solver: exact(), tolerance: 1e-6, delta: 0.0, ..Default::default() },
        threads: 1,
        ..Default::default()
    }
}

/// Event with `(fault, spread set)` pairs and exogenous keys. Each spread set
/// gets its own fault added.
pub fn event(onset: usize, faults: &[(&str, &[&str])], exogenous: &[&str]) -> DisruptionEvent {
    let mut ev = DisruptionEvent { onset, ..Default::default() };
    for (key, spread) in faults {
        ev.fault_flags.insert(key.to_string(), 1);
        let mut set: BTreeSet<String> = spread.iter().map(|s| s.to_string()).collect();
        set.insert(key.to_string());
        ev.spread_sets.insert(key.to_string(), set);
    }
    for key in exogenous {
        ev.exogenous_flags.insert(key.to_string(), 1);
    }
    ev
}

pub struct GapInstance {
    pub network: PowerNetwork,
    pub tree: ScenarioTree,
    /// Middle stage whose LP relaxation is fractional.
    pub middle: NodeId,
    /// Leaf below `middle` that carries the risk.
    pub leaf: NodeId,
}

/// Three buses, T = 4. The middle stage can avoid a costly ignition at the
/// leaf by de-energizing `l12`; its LP relaxation keeps the line at
/// `z = demand / limit` and pays almost none of that risk.
pub fn gap_instance() -> GapInstance {
    let network = fixture("gap3.json");
    let mut tree = ScenarioTree::with_root(4, 2);
    let root = tree.root;
    let middle = tree.push_child(root, Some(event(2, &[], &["line:l13"])), 0.5);
    let leaf = tree.push_child(middle, Some(event(3, &[("line:l12", &["gen:g1"])], &[])), 0.5);
    tree.push_child(middle, None, 0.5);
    tree.push_child(root, None, 0.5);
    tree.validate().expect("gap tree");
    GapInstance { network, tree, middle, leaf }
}

/// Two buses with risk only at the first onset: shutting `l12` off in
/// period 1 and restoring it afterwards beats keeping it off.
pub fn restoration_instance(p_fire: f64) -> (PowerNetwork, ScenarioTree) {
    let network = fixture("resto2.json");
    let mut tree = ScenarioTree::with_root(4, 1);
    let root = tree.root;
    tree.push_child(root, Some(event(2, &[("line:l12", &["gen:g1", "bus:1"])], &[])), p_fire);
    tree.push_child(root, None, 1.0 - p_fire);
    tree.validate().expect("restoration tree");
    (network, tree)
}

#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub buses: usize,
    /// Total generation over peak demand.
    pub capacity_factor: f64,
    /// Forces every disruption onto this onset (depth 1 trees).
    pub fixed_onset: Option<usize>,
}

impl RandomSpec {
    pub fn new(buses: usize) -> Self {
        RandomSpec { buses, capacity_factor: 1.1, fixed_onset: None }
    }
}

pub struct Instance {
    pub label: String,
    pub network: PowerNetwork,
    pub tree: ScenarioTree,
}

/// Small random network with a random tree of 3 to 9 nodes and depth at
/// most 2.
pub fn random_instance(seed: u64, spec: RandomSpec) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let network = random_network(&mut rng, spec);
    let tree = random_tree(&mut rng, &network, spec);
    Instance { label: format!("seed{seed}-b{}", spec.buses), network, tree }
}

fn random_network(rng: &mut ChaCha8Rng, spec: RandomSpec) -> PowerNetwork {
    let horizon = rng.gen_range(3..=5);
    let n = spec.buses;
    let mut edges: Vec<(usize, usize)> = (1..n).map(|b| (rng.gen_range(0..b), b)).collect();
    if n >= 4 && rng.gen_bool(0.5) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    let mut loads = Vec::new();
    let mut peak = 0.0;
    for b in 0..n {
        if loads.len() < 2 || rng.gen_bool(0.6) {
            let base: f64 = rng.gen_range(5.0..30.0);
            let profile: Vec<f64> = (0..horizon).map(|_| (base * rng.gen_range(0.8..1.2) * 10.0).round() / 10.0).collect();
            peak += profile.iter().cloned().fold(0.0, f64::max);
            let priority = *[50.0, 100.0, 200.0, 500.0].choose(rng).unwrap();
            loads.push(json!({"id": format!("d{}", b + 1), "bus": (b + 1).to_string(),
                              "demand_by_period": profile, "priority": priority}));
        }
    }
    let n_gens = if rng.gen_bool(0.5) { 1 } else { 2 };
    let capacity = peak * spec.capacity_factor;
    let gens: Vec<_> = (0..n_gens)
        .map(|g| {
            let fuel = *["thermal", "wind", "nuclear", "hydro"].choose(rng).unwrap();
            json!({"id": format!("g{}", g + 1), "bus": rng.gen_range(1..=n).to_string(),
                   "p_max": (capacity / n_gens as f64 * 10.0).round() / 10.0, "fuel": fuel})
        })
        .collect();
    let lines: Vec<_> = edges
        .iter()
        .map(|&(a, b)| {
            json!({"id": format!("l{}-{}", a + 1, b + 1), "from_bus": (a + 1).to_string(),
                   "to_bus": (b + 1).to_string(), "susceptance_mag": rng.gen_range(5..=20) as f64,
                   "thermal_limit": (peak * rng.gen_range(0.4..1.2)).round().max(5.0),
                   "length": rng.gen_range(10..=120) as f64})
        })
        .collect();
    let buses: Vec<_> = (1..=n).map(|b| json!({"id": b.to_string(), "is_reference": b == 1})).collect();
    let doc = json!({"horizon_T": horizon, "buses": buses, "generators": gens, "lines": lines, "loads": loads});
    PowerNetwork::from_json_str(&doc.to_string()).expect("random network")
}

fn random_event(rng: &mut ChaCha8Rng, keys: &[String], onset: usize) -> DisruptionEvent {
    let mut ev = DisruptionEvent { onset, ..Default::default() };
    let n_faults = rng.gen_range(1..=2);
    for key in keys.choose_multiple(rng, n_faults) {
        let mut set: BTreeSet<String> = keys.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
        set.insert(key.clone());
        ev.fault_flags.insert(key.clone(), 1);
        ev.spread_sets.insert(key.clone(), set);
    }
    if rng.gen_bool(0.3) {
        ev.exogenous_flags.insert(keys.choose(rng).unwrap().clone(), 1);
    }
    ev
}

fn split(rng: &mut ChaCha8Rng, parts: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..parts).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

fn random_tree(rng: &mut ChaCha8Rng, network: &PowerNetwork, spec: RandomSpec) -> ScenarioTree {
    let horizon = network.horizon;
    let keys: Vec<String> = network.components().map(|c| network.component_key(c)).collect();
    let depth = if spec.fixed_onset.is_some() { 1 } else { 2 };
    let mut tree = ScenarioTree::with_root(horizon, depth);
    let root = tree.root;
    let k1 = rng.gen_range(1..=2);
    let probs = split(rng, k1 + 1);
    let mut onsets: Vec<usize> = (0..k1).map(|_| spec.fixed_onset.unwrap_or_else(|| rng.gen_range(2..=horizon))).collect();
    onsets.sort();
    let mut seen = BTreeSet::new();
    for (k, onset) in onsets.into_iter().enumerate() {
        let mut ev = random_event(rng, &keys, onset);
        while !seen.insert(ev.clone()) {
            ev = random_event(rng, &keys, onset);
        }
        let child = tree.push_child(root, Some(ev), probs[k]);
        if depth == 2 && onset < horizon && rng.gen_bool(0.6) {
            let inner = split(rng, 2);
            let onset2 = rng.gen_range(onset + 1..=horizon);
            let ev2 = random_event(rng, &keys, onset2);
            tree.push_child(child, Some(ev2), inner[0]);
            tree.push_child(child, None, inner[1]);
        }
    }
    tree.push_child(root, None, probs[k1]);
    tree.validate_against(network).expect("random tree");
    tree
}

/// Test tree with the same events and freshly drawn probabilities.
pub fn reweighted(tree: &ScenarioTree, seed: u64) -> ScenarioTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = tree.clone();
    let parents: Vec<NodeId> = out.nodes.keys().copied().collect();
    for id in parents {
        let children = out.nodes[&id].children.clone();
        if children.is_empty() {
            continue;
        }
        let probs = split(&mut rng, children.len());
        for (c, p) in children.iter().zip(probs) {
            out.nodes.get_mut(c).unwrap().probability = p;
        }
    }
    out.validate().expect("reweighted tree");
    out
}

/// The four-bus layout of the textbook spread example: bus `i` with
/// generator `g2`, lines to `j1`, `j2`, `j3`, and `g1` at `j2`. One period of
/// certain isotropic spread from `i` reaches exactly the 3x3 block around it.
pub fn fig1() -> (PowerNetwork, CaParams) {
    let doc = json!({
        "horizon_T": 3,
        "buses": [{"id": "i"}, {"id": "j1"}, {"id": "j2", "is_reference": true}, {"id": "j3"}],
        "generators": [{"id": "g1", "bus": "j2", "p_max": 100}, {"id": "g2", "bus": "i", "p_max": 30}],
        "lines": [
            {"id": "i-j1", "from_bus": "i", "to_bus": "j1", "susceptance_mag": 10, "thermal_limit": 100, "length": 20},
            {"id": "i-j2", "from_bus": "i", "to_bus": "j2", "susceptance_mag": 10, "thermal_limit": 100, "length": 20},
            {"id": "i-j3", "from_bus": "i", "to_bus": "j3", "susceptance_mag": 10, "thermal_limit": 100, "length": 20}
        ],
        "loads": [
            {"id": "d1", "bus": "j1", "demand_by_period": [10, 10, 10]},
            {"id": "d3", "bus": "j3", "demand_by_period": [10, 10, 10]}
        ]
    });
    let network = PowerNetwork::from_json_str(&doc.to_string()).unwrap();
    let cells: BTreeMap<String, (usize, usize)> = [
        ("bus:i", (2, 2)),
        ("gen:g2", (2, 2)),
        ("line:i-j1", (1, 2)),
        ("line:i-j3", (3, 2)),
        ("bus:j3", (3, 3)),
        ("bus:j1", (0, 2)),
        ("line:i-j2", (3, 4)),
        ("bus:j2", (4, 4)),
        ("gen:g1", (4, 4)),
    ]
    .into_iter()
    .map(|(k, c)| (k.to_string(), c))
    .collect();
    let params = CaParams {
        grid_cells: (5, 5),
        cell_km: 1.0,
        ignition_rate: 0.0,
        spread_prob: 1.0,
        wind: Wind { direction_deg: 0.0, bias: 0.0 },
        fault_rate: 0.0,
        component_cells: cells,
    };
    params.validate(&network).unwrap();
    (network, params)
}

pub fn fig1_expected() -> BTreeSet<String> {
    ["bus:i", "gen:g2", "line:i-j1", "line:i-j3", "bus:j3"].iter().map(|s| s.to_string()).collect()
}
