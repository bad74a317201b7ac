use std::collections::BTreeMap;

use crate::backend::{solve_mip, Backend, LinearModel, SolveOutcome, SolverParams};
use crate::error::{Error, Result};
use crate::formulation::{add_stage_block, round_binary, BlockKind, FormulationOptions, StageVars};
use crate::grid::PowerNetwork;
use crate::scenario::{NodeId, ScenarioTree};

/// Largest instance accepted by [`extensive_form_solve`].
pub const EF_MAX_NODES: usize = 50;
pub const EF_MAX_COMPONENTS: usize = 60;

/// Every stage of a (sub)tree in one model.
#[derive(Debug, Clone)]
pub struct ExtensiveForm {
    pub model: LinearModel,
    pub blocks: BTreeMap<NodeId, StageVars>,
    pub top: NodeId,
}

pub(crate) enum Start<'a> {
    Root(&'a FormulationOptions),
    Node(NodeId, &'a [f64]),
}

pub(crate) fn build(network: &PowerNetwork, tree: &ScenarioTree, start: Start<'_>) -> Result<ExtensiveForm> {
    let mut model = LinearModel::new();
    let mut blocks = BTreeMap::new();
    let top = match start {
        Start::Root(options) => {
            options.validate()?;
            let vars = add_stage_block(&mut model, network, tree, tree.root, 1.0, BlockKind::Root(options))?;
            blocks.insert(tree.root, vars);
            tree.root
        }
        Start::Node(node, anchor) => {
            if anchor.len() != network.n_components() {
                return Err(Error::DimensionMismatch { expected: network.n_components(), got: anchor.len() });
            }
            let vars = add_stage_block(&mut model, network, tree, node, 1.0, BlockKind::Node)?;
            for (c, (&col, &a)) in vars.copy.as_ref().expect("disruption block").iter().zip(anchor).enumerate() {
                model.add_eq(format!("{node}.anchor[{c}]"), vec![(col, 1.0)], a);
            }
            blocks.insert(node, vars);
            node
        }
    };
    let base = tree.path_probability(top);
    let mut stack = tree.disruption_children(top);
    while let Some(n) = stack.pop() {
        let parent = tree.node(n).parent.expect("disruption node has a parent");
        let weight = tree.path_probability(n) / base;
        let vars = add_stage_block(&mut model, network, tree, n, weight, BlockKind::Node)?;
        let inherited = vars.first_period - 1;
        for (c, &col) in vars.copy.as_ref().expect("disruption block").iter().enumerate() {
            let src = blocks[&parent].state(c, inherited);
            model.add_eq(format!("{n}.link[{c}]"), vec![(col, 1.0), (src, -1.0)], 0.0);
        }
        blocks.insert(n, vars);
        stack.extend(tree.disruption_children(n));
    }
    Ok(ExtensiveForm { model, blocks, top })
}

/// Objective split of a solved extensive form.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct CostSplit {
    pub shed: f64,
    pub damage: f64,
}

impl ExtensiveForm {
    pub fn split(&self, out: &SolveOutcome) -> CostSplit {
        let mut split = CostSplit::default();
        for vars in self.blocks.values() {
            split.shed += vars.s.iter().flatten().map(|&c| self.model.col(c).cost * out.value(c)).sum::<f64>();
            split.damage += vars
                .nu
                .iter()
                .flatten()
                .map(|&c| self.model.col(c).cost * round_binary(out.value(c)))
                .sum::<f64>();
        }
        split
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensiveSolution {
    pub objective: f64,
    pub dual_bound: f64,
    /// Root status `z[c][t-1]`.
    pub root_status: Vec<Vec<f64>>,
    pub split: CostSplit,
}

/// Solves the whole tree as one MIP. Limited to small instances.
pub fn extensive_form_solve(
    network: &PowerNetwork,
    tree: &ScenarioTree,
    options: &FormulationOptions,
    backend: &dyn Backend,
    params: &SolverParams,
) -> Result<ExtensiveSolution> {
    if tree.nodes.len() > EF_MAX_NODES || network.n_components() > EF_MAX_COMPONENTS {
        return Err(Error::SizeGuard(format!(
            "{} nodes and {} components (limits {EF_MAX_NODES} and {EF_MAX_COMPONENTS})",
            tree.nodes.len(),
            network.n_components()
        )));
    }
    tree.validate_against(network)?;
    let ef = build(network, tree, Start::Root(options))?;
    let out = solve_mip(backend, &ef.model, params)?.require_optimal("extensive form")?;
    let root = &ef.blocks[&tree.root];
    Ok(ExtensiveSolution {
        objective: out.objective,
        dual_bound: out.dual_bound,
        root_status: root.z.iter().map(|row| row.iter().map(|&c| out.value(c)).collect()).collect(),
        split: ef.split(&out),
    })
}

/// Value of the subtree rooted at disruption node `node` given the inherited
/// state, with its shed/damage split.
pub fn subtree_value(
    network: &PowerNetwork,
    tree: &ScenarioTree,
    node: NodeId,
    anchor: &[f64],
    backend: &dyn Backend,
    params: &SolverParams,
) -> Result<(f64, CostSplit)> {
    if node == tree.root || tree.is_nominal(node) {
        return Err(Error::InvalidParams(format!("{node} is not a disruption node")));
    }
    let ef = build(network, tree, Start::Node(node, anchor))?;
    let out = solve_mip(backend, &ef.model, params)?.require_optimal(&format!("subtree {node}"))?;
    Ok((out.objective, ef.split(&out)))
}
