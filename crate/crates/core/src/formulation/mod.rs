//! Stage problems of the shut-off planning model.
//!
//! The root stage covers periods `1..=T` and carries the restoration and
//! fairness logic. A disruption stage covers `onset..=T`, inherits the status
//! vector at `onset - 1` through copy variables fixed by equality rows, and
//! prices component damage. Every non-nominal child of a stage contributes a
//! continuation variable `V >= 0` bounded from below by attached cuts.

mod block;

use serde::{Deserialize, Serialize};

pub use block::{StageVars, PAIRWISE_FAIRNESS_LIMIT};
pub(crate) use block::{add_stage_block, BlockKind};

use crate::backend::{Col, LinearModel, RowId, SolveOutcome};
use crate::cuts::CutRecord;
use crate::error::{Error, Result};
use crate::grid::PowerNetwork;
use crate::scenario::{NodeId, ScenarioTree};

/// Tolerance used when reading binaries back from a solution.
pub const BINARY_TOLERANCE: f64 = 1e-6;

/// Cut coefficients below this magnitude are folded into the right-hand side.
pub const CUT_COEFF_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormulationOptions {
    /// Largest allowed gap in average shed fraction between two loads.
    /// Infinite disables the fairness rows.
    pub beta: f64,
    /// Allow de-energized components to be switched back on once.
    pub restoration: bool,
    pub fairness_enabled: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        FormulationOptions { beta: 0.4, restoration: true, fairness_enabled: true }
    }
}

impl FormulationOptions {
    pub fn validate(&self) -> Result<()> {
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(Error::InvalidParams(format!("beta {} must be >= 0", self.beta)));
        }
        Ok(())
    }
}

/// Continuation term of one non-nominal child.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildTerm {
    pub node: NodeId,
    pub probability: f64,
    pub onset: usize,
    pub value_var: Col,
    /// Status columns at `onset - 1`, in flat component order.
    pub state_cols: Vec<Col>,
    pub cut_rows: Vec<RowId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageModel {
    pub node: NodeId,
    pub model: LinearModel,
    pub vars: StageVars,
    pub children: Vec<ChildTerm>,
    /// Rows fixing the copy variables to the anchor; empty at the root.
    pub copy_rows: Vec<RowId>,
    pub anchor: Option<Vec<f64>>,
}

/// Values read back from a solved stage model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSolution {
    pub node: NodeId,
    pub first_period: usize,
    /// `z[c][t - first_period]`
    pub z: Vec<Vec<f64>>,
    pub r: Option<Vec<Vec<f64>>>,
    pub s: Vec<Vec<f64>>,
    pub pg: Vec<Vec<f64>>,
    pub pl: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub objective: f64,
    pub dual_bound: f64,
    /// Objective minus the weighted continuation estimates.
    pub stage_cost: f64,
    pub shed_cost: f64,
    pub damage_cost: f64,
    pub value_estimates: Vec<(NodeId, f64)>,
}

impl StageSolution {
    /// Rounded status vector at period `t` (within this stage's horizon).
    pub fn state_at(&self, t: usize) -> Vec<f64> {
        self.z.iter().map(|row| round_binary(row[t - self.first_period])).collect()
    }
}

pub(crate) fn round_binary(v: f64) -> f64 {
    if v > 0.5 {
        1.0
    } else {
        0.0
    }
}

fn check_anchor(network: &PowerNetwork, anchor: &[f64]) -> Result<()> {
    if anchor.len() != network.n_components() {
        return Err(Error::DimensionMismatch { expected: network.n_components(), got: anchor.len() });
    }
    if let Some(v) = anchor.iter().find(|v| v.is_nan() || **v < -BINARY_TOLERANCE || **v > 1.0 + BINARY_TOLERANCE) {
        return Err(Error::InvalidAnchor(format!("entry {v} outside [0, 1]")));
    }
    Ok(())
}

impl StageModel {
    /// Root stage with every cut of `cuts` owned by a root child attached.
    pub fn build_root<'a>(
        network: &PowerNetwork,
        tree: &ScenarioTree,
        options: &FormulationOptions,
        cuts: impl IntoIterator<Item = &'a CutRecord>,
    ) -> Result<StageModel> {
        options.validate()?;
        tree.validate()?;
        let mut model = LinearModel::new();
        let vars = add_stage_block(&mut model, network, tree, tree.root, 1.0, BlockKind::Root(options))?;
        let mut stage =
            StageModel { node: tree.root, model, vars, children: Vec::new(), copy_rows: Vec::new(), anchor: None };
        stage.add_children(network, tree);
        for cut in cuts {
            if stage.children.iter().any(|c| c.node == cut.owner) {
                stage.attach_cut(cut)?;
            }
        }
        Ok(stage)
    }

    /// Disruption stage of `node` with its inherited state fixed to `anchor`.
    pub fn build_node<'a>(
        network: &PowerNetwork,
        tree: &ScenarioTree,
        node: NodeId,
        anchor: &[f64],
        cuts: impl IntoIterator<Item = &'a CutRecord>,
    ) -> Result<StageModel> {
        if !tree.nodes.contains_key(&node) || node == tree.root || tree.is_nominal(node) {
            return Err(Error::InvalidParams(format!("{node} is not a disruption node")));
        }
        check_anchor(network, anchor)?;
        let mut model = LinearModel::new();
        let vars = add_stage_block(&mut model, network, tree, node, 1.0, BlockKind::Node)?;
        let copy = vars.copy.clone().expect("disruption stage has copies");
        let copy_rows = copy
            .iter()
            .zip(anchor)
            .enumerate()
            .map(|(c, (&col, &a))| model.add_eq(format!("{node}.anchor[{c}]"), vec![(col, 1.0)], a))
            .collect();
        let mut stage =
            StageModel { node, model, vars, children: Vec::new(), copy_rows, anchor: Some(anchor.to_vec()) };
        stage.add_children(network, tree);
        for cut in cuts {
            if stage.children.iter().any(|c| c.node == cut.owner) {
                stage.attach_cut(cut)?;
            }
        }
        Ok(stage)
    }

    fn add_children(&mut self, network: &PowerNetwork, tree: &ScenarioTree) {
        for b in tree.branches(self.node) {
            let Some(child) = b.child.filter(|_| !b.nominal) else { continue };
            let value_var = self.model.add_col(format!("V[{child}]"), 0.0, f64::INFINITY, b.probability);
            let state_cols = (0..network.n_components()).map(|c| self.vars.state(c, b.onset - 1)).collect();
            self.children.push(ChildTerm {
                node: child,
                probability: b.probability,
                onset: b.onset,
                value_var,
                state_cols,
                cut_rows: Vec::new(),
            });
        }
    }

    pub fn is_root(&self) -> bool {
        self.copy_rows.is_empty()
    }

    /// Re-fixes the inherited state without rebuilding the model.
    pub fn set_anchor(&mut self, anchor: &[f64]) -> Result<()> {
        if self.is_root() {
            return Err(Error::InvalidAnchor("the root stage has no inherited state".into()));
        }
        if anchor.len() != self.copy_rows.len() {
            return Err(Error::DimensionMismatch { expected: self.copy_rows.len(), got: anchor.len() });
        }
        if let Some(v) = anchor.iter().find(|v| v.is_nan() || **v < -BINARY_TOLERANCE || **v > 1.0 + BINARY_TOLERANCE) {
            return Err(Error::InvalidAnchor(format!("entry {v} outside [0, 1]")));
        }
        for (&r, &a) in self.copy_rows.iter().zip(anchor) {
            self.model.set_row_bounds(r, a, a);
        }
        self.anchor = Some(anchor.to_vec());
        Ok(())
    }

    /// Copy with every integrality restriction dropped.
    pub fn relax_binaries(&self) -> StageModel {
        let mut out = self.clone();
        out.model.relax_integrality();
        out
    }

    /// Adds `V_child >= slope'(z - anchor) + intercept` for the cut's owner.
    pub fn attach_cut(&mut self, cut: &CutRecord) -> Result<RowId> {
        let child = self
            .children
            .iter_mut()
            .find(|c| c.node == cut.owner)
            .ok_or(Error::NotAChild(cut.owner))?;
        let n = child.state_cols.len();
        if cut.slope.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cut.slope.len() });
        }
        if cut.anchor.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cut.anchor.len() });
        }
        let mut coeffs = vec![(child.value_var, 1.0)];
        let mut rhs = cut.intercept;
        for ((&col, &g), &a) in child.state_cols.iter().zip(&cut.slope).zip(&cut.anchor) {
            if g.abs() >= CUT_COEFF_FLOOR {
                coeffs.push((col, -g));
                rhs -= g * a;
            } else {
                // states lie in [0, 1], so dropping the term moves the cut by at most |g|
                rhs -= g.abs();
            }
        }
        let name = format!("cut[{},{}]", cut.owner, child.cut_rows.len());
        let row = self.model.add_ge(name, coeffs, rhs);
        child.cut_rows.push(row);
        Ok(row)
    }

    pub fn n_cuts(&self) -> usize {
        self.children.iter().map(|c| c.cut_rows.len()).sum()
    }

    /// Reads primal values and the cost split out of a solve of this model.
    pub fn solution(&self, out: &SolveOutcome) -> StageSolution {
        let read = |cols: &Vec<Vec<Col>>| -> Vec<Vec<f64>> {
            cols.iter().map(|row| row.iter().map(|&c| out.value(c)).collect()).collect()
        };
        let value_estimates: Vec<(NodeId, f64)> =
            self.children.iter().map(|c| (c.node, out.value(c.value_var))).collect();
        let continuation: f64 = self
            .children
            .iter()
            .map(|c| self.model.col(c.value_var).cost * out.value(c.value_var))
            .sum();
        let shed_cost: f64 = self
            .vars
            .s
            .iter()
            .flatten()
            .map(|&c| self.model.col(c).cost * out.value(c))
            .sum();
        let damage_cost: f64 = self
            .vars
            .nu
            .iter()
            .flatten()
            .map(|&c| self.model.col(c).cost * round_binary(out.value(c)))
            .sum();
        StageSolution {
            node: self.node,
            first_period: self.vars.first_period,
            z: read(&self.vars.z),
            r: self.vars.r.as_ref().map(read),
            s: read(&self.vars.s),
            pg: read(&self.vars.pg),
            pl: read(&self.vars.pl),
            theta: read(&self.vars.theta),
            nu: self.vars.nu.as_ref().map(|nu| nu.iter().map(|&c| out.value(c)).collect()),
            objective: out.objective,
            dual_bound: out.dual_bound,
            stage_cost: out.objective - continuation,
            shed_cost,
            damage_cost,
            value_estimates,
        }
    }
}

#[cfg(test)]
mod tests;
