//! Plans, out-of-sample costs, fairness metrics and report files.

mod extensive;
mod report;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use extensive::{
    extensive_form_solve, subtree_value, CostSplit, ExtensiveForm, ExtensiveSolution, EF_MAX_COMPONENTS,
    EF_MAX_NODES,
};
pub use report::{emit_reports, write_breakdown, write_comparison, write_fairness, ReportPaths};

use crate::backend::{solve_mip, Backend, SolveStatus, SolverParams};
use crate::engine::{Engine, EngineConfig, SolveReport};
use crate::error::{Error, Result};
use crate::formulation::{round_binary, FormulationOptions, StageModel, StageSolution};
use crate::grid::PowerNetwork;
use crate::scenario::ScenarioTree;

/// First-stage shut-off plan for the nominal weather path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalPlan {
    #[serde(rename = "horizon_T")]
    pub horizon: usize,
    pub options: FormulationOptions,
    /// Component key to on/off status per period.
    pub status: BTreeMap<String, Vec<u8>>,
    /// Load id to shed fraction per period.
    pub shed: BTreeMap<String, Vec<f64>>,
    pub generation: BTreeMap<String, Vec<f64>>,
    pub flows: BTreeMap<String, Vec<f64>>,
}

impl NominalPlan {
    pub fn from_solution(network: &PowerNetwork, root: &StageSolution, options: &FormulationOptions) -> Self {
        let status = network
            .components()
            .enumerate()
            .map(|(c, comp)| (network.component_key(comp), root.z[c].iter().map(|&v| round_binary(v) as u8).collect()))
            .collect();
        let clip = |row: &Vec<f64>| row.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        NominalPlan {
            horizon: network.horizon,
            options: options.clone(),
            status,
            shed: network.loads.iter().zip(&root.s).map(|(d, row)| (d.id.clone(), clip(row))).collect(),
            generation: network.generators.iter().zip(&root.pg).map(|(g, row)| (g.id.clone(), row.clone())).collect(),
            flows: network.lines.iter().zip(&root.pl).map(|(l, row)| (l.id.clone(), row.clone())).collect(),
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// `z[c][t-1]` in flat component order.
    pub fn status_matrix(&self, network: &PowerNetwork) -> Result<Vec<Vec<f64>>> {
        network
            .components()
            .map(|comp| {
                let key = network.component_key(comp);
                let row = self
                    .status
                    .get(&key)
                    .ok_or_else(|| Error::InfeasiblePlan(format!("no status for {key}")))?;
                if row.len() != network.horizon {
                    return Err(Error::InfeasiblePlan(format!("{key} has {} periods", row.len())));
                }
                if row.iter().any(|&v| v > 1) {
                    return Err(Error::InfeasiblePlan(format!("{key} has a non-binary status")));
                }
                Ok(row.iter().map(|&v| v as f64).collect())
            })
            .collect()
    }

    /// `s[d][t-1]` in load order.
    pub fn shed_matrix(&self, network: &PowerNetwork) -> Result<Vec<Vec<f64>>> {
        network
            .loads
            .iter()
            .map(|d| {
                let row = self
                    .shed
                    .get(&d.id)
                    .ok_or_else(|| Error::InfeasiblePlan(format!("no shed for load {}", d.id)))?;
                if row.len() != network.horizon || row.iter().any(|v| !(-1e-9..=1.0 + 1e-9).contains(v)) {
                    return Err(Error::InfeasiblePlan(format!("shed of load {} is malformed", d.id)));
                }
                Ok(row.clone())
            })
            .collect()
    }

    /// Confirms the statuses and shed fractions admit a feasible dispatch.
    pub fn check_feasible(&self, network: &PowerNetwork, backend: &dyn Backend, params: &SolverParams) -> Result<()> {
        if self.horizon != network.horizon {
            return Err(Error::InfeasiblePlan(format!(
                "plan horizon {} differs from network horizon {}",
                self.horizon, network.horizon
            )));
        }
        let z = self.status_matrix(network)?;
        let s = self.shed_matrix(network)?;
        let tree = ScenarioTree::nominal_only(network.horizon);
        let mut stage = StageModel::build_root(network, &tree, &self.options, [])?;
        for (c, row) in z.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                let col = stage.model.col_mut(stage.vars.z[c][k]);
                col.lower = v;
                col.upper = v;
            }
        }
        for (d, row) in s.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                let col = stage.model.col_mut(stage.vars.s[d][k]);
                col.lower = (v - 1e-6).max(0.0);
                col.upper = (v + 1e-6).min(1.0);
            }
        }
        let out = solve_mip(backend, &stage.model, params)?;
        match out.status {
            SolveStatus::Optimal => Ok(()),
            SolveStatus::Infeasible => Err(Error::InfeasiblePlan("statuses and shed admit no feasible dispatch".into())),
            other => Err(Error::SolveStatus { status: format!("{other:?}"), context: "plan check".into() }),
        }
    }

    /// Priority-weighted shed over periods `1..until`.
    fn shed_cost_before(&self, network: &PowerNetwork, shed: &[Vec<f64>], until: usize) -> f64 {
        shed.iter()
            .enumerate()
            .map(|(d, row)| network.priority(d) * row[..until - 1].iter().sum::<f64>())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCost {
    pub child: Option<String>,
    pub probability: f64,
    pub onset: usize,
    pub pre_disruption_shed: f64,
    pub recourse_shed: f64,
    pub damage: f64,
}

/// Expected cost of a plan on a test tree, split three ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Shed incurred while the nominal plan is followed.
    pub nominal_cost: f64,
    /// Shed after a disruption, under optimal recourse.
    pub disruption_cost: f64,
    pub damage_cost: f64,
    pub total: f64,
    pub branches: Vec<BranchCost>,
}

/// Follows `plan` until each first disruption of `test_tree`, then charges
/// the optimal recourse of the remaining subtree.
pub fn evaluate_out_of_sample(
    network: &PowerNetwork,
    plan: &NominalPlan,
    test_tree: &ScenarioTree,
    backend: &dyn Backend,
    params: &SolverParams,
) -> Result<Evaluation> {
    plan.check_feasible(network, backend, params)?;
    test_tree.validate_against(network)?;
    let z = plan.status_matrix(network)?;
    let shed = plan.shed_matrix(network)?;
    let branches: Vec<BranchCost> = test_tree
        .branches(test_tree.root)
        .par_iter()
        .map(|b| {
            let pre = plan.shed_cost_before(network, &shed, b.onset);
            let (recourse_shed, damage) = match b.child.filter(|_| !b.nominal) {
                Some(child) => {
                    let anchor: Vec<f64> = z.iter().map(|row| row[b.onset - 2]).collect();
                    let (_, split) = subtree_value(network, test_tree, child, &anchor, backend, params)?;
                    (split.shed, split.damage)
                }
                None => (0.0, 0.0),
            };
            Ok(BranchCost {
                child: b.child.map(|c| c.to_string()),
                probability: b.probability,
                onset: b.onset,
                pre_disruption_shed: pre,
                recourse_shed,
                damage,
            })
        })
        .collect::<Result<_>>()?;
    let sum = |f: fn(&BranchCost) -> f64| branches.iter().map(|b| b.probability * f(b)).sum::<f64>();
    let nominal_cost = sum(|b| b.pre_disruption_shed);
    let disruption_cost = sum(|b| b.recourse_shed);
    let damage_cost = sum(|b| b.damage);
    Ok(Evaluation {
        nominal_cost,
        disruption_cost,
        damage_cost,
        total: nominal_cost + disruption_cost + damage_cost,
        branches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadFairness {
    pub load: String,
    pub priority: f64,
    /// Average shed fraction over the horizon.
    pub cum_shed_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessMetrics {
    pub beta: f64,
    pub loads: Vec<LoadFairness>,
    pub max_pairwise_gap: f64,
    pub mean_shed_frac: f64,
}

pub fn fairness_metrics(network: &PowerNetwork, plan: &NominalPlan) -> Result<FairnessMetrics> {
    let shed = plan.shed_matrix(network)?;
    let horizon = network.horizon as f64;
    let loads: Vec<LoadFairness> = network
        .loads
        .iter()
        .zip(&shed)
        .enumerate()
        .map(|(d, (load, row))| LoadFairness {
            load: load.id.clone(),
            priority: network.priority(d),
            cum_shed_frac: row.iter().sum::<f64>() / horizon,
        })
        .collect();
    let fracs = loads.iter().map(|l| l.cum_shed_frac);
    let hi = fracs.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = fracs.clone().fold(f64::INFINITY, f64::min);
    let n = loads.len().max(1) as f64;
    Ok(FairnessMetrics {
        beta: plan.options.beta,
        max_pairwise_gap: if loads.is_empty() { 0.0 } else { hi - lo },
        mean_shed_frac: fracs.sum::<f64>() / n,
        loads,
    })
}

/// One planning variant evaluated out of sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub restoration: bool,
    pub beta: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub nominal_cost: f64,
    pub disruption_cost: f64,
    pub damage_cost: f64,
    pub total: f64,
}

/// Solves on `train`, evaluates on `test`.
pub fn plan_and_evaluate(
    network: &PowerNetwork,
    train: &ScenarioTree,
    test: &ScenarioTree,
    options: &FormulationOptions,
    config: &EngineConfig,
    backend: std::sync::Arc<dyn Backend>,
    label: impl Into<String>,
) -> Result<(SolveReport, NominalPlan, ComparisonRow)> {
    let report = Engine::new(network, train, options.clone(), config.clone(), backend.clone())?.run()?;
    let plan = NominalPlan::from_solution(network, &report.incumbent, options);
    let eval = evaluate_out_of_sample(network, &plan, test, &*backend, &config.forward)?;
    let row = ComparisonRow {
        label: label.into(),
        restoration: options.restoration,
        beta: options.beta,
        lower_bound: report.lower_bound,
        upper_bound: report.upper_bound,
        nominal_cost: eval.nominal_cost,
        disruption_cost: eval.disruption_cost,
        damage_cost: eval.damage_cost,
        total: eval.total,
    };
    Ok((report, plan, row))
}

/// Plans with and without restoration and evaluates both on `test`.
pub fn compare_restoration(
    network: &PowerNetwork,
    train: &ScenarioTree,
    test: &ScenarioTree,
    options: &FormulationOptions,
    config: &EngineConfig,
    backend: std::sync::Arc<dyn Backend>,
) -> Result<Vec<ComparisonRow>> {
    [true, false]
        .into_iter()
        .map(|restoration| {
            let opts = FormulationOptions { restoration, ..options.clone() };
            let label = if restoration { "restoration" } else { "no_restoration" };
            plan_and_evaluate(network, train, test, &opts, config, backend.clone(), label).map(|r| r.2)
        })
        .collect()
}
