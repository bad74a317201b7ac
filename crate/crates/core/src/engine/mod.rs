//! Nested cutting-plane decomposition.
//!
//! Each iteration solves the root, walks the disruption nodes forward with
//! inherited states fixed to the parent's decisions, and then generates one
//! cut per node from the deepest level up. The root dual bound is a valid
//! lower bound; the forward policy's expected cost is an upper bound.

mod pool;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use pool::CutPool;

use crate::backend::{solve_mip, Backend, SolverParams};
use crate::cuts::{generate_cut, CutContext, CutFamily, CutRecord, DualSolverParams};
use crate::error::{Error, Result};
use crate::formulation::{FormulationOptions, StageModel, StageSolution};
use crate::grid::PowerNetwork;
use crate::scenario::{NodeId, ScenarioTree};

/// Gaps below this are treated as closed whatever epsilon asks for.
pub const GAP_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub family: CutFamily,
    /// Relative optimality gap at which the loop stops.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Seconds.
    pub max_wall_time: f64,
    /// Iterations without bound progress before declaring a stall.
    pub stall_iterations: usize,
    pub forward: SolverParams,
    /// Cut generation settings; `dual.solver` drives the backward solves.
    pub dual: DualSolverParams,
    /// Worker threads for the backward pass; 0 uses all cores.
    pub threads: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            family: CutFamily::SquareMinimization,
            epsilon: 0.01,
            max_iterations: 100,
            max_wall_time: 3600.0,
            stall_iterations: 5,
            forward: SolverParams::with_gap(1e-4),
            dual: DualSolverParams { solver: SolverParams::with_gap(1e-6), ..Default::default() },
            threads: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParams(format!("epsilon {} must be >= 0", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParams("max_iterations must be positive".into()));
        }
        if !(self.max_wall_time > 0.0) {
            return Err(Error::InvalidParams("max_wall_time must be positive".into()));
        }
        self.forward.validate()?;
        self.dual.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    Converged,
    IterationLimit,
    TimeLimit,
    GapStall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Expected cost of this iteration's forward policy.
    pub policy_cost: f64,
    pub gap: f64,
    pub cuts_added: usize,
    pub elapsed: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub family: CutFamily,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub iterations: usize,
    pub termination: TerminationReason,
    pub wall_time: f64,
    pub history: Vec<IterationLog>,
    /// Root solution of the forward pass that set the upper bound.
    pub incumbent: StageSolution,
    #[serde(skip)]
    pub cuts: CutPool,
}

/// Relative gap, falling back to the absolute gap when `upper` is near zero.
pub fn relative_gap(lower: f64, upper: f64) -> f64 {
    if !upper.is_finite() || !lower.is_finite() {
        return f64::INFINITY;
    }
    let diff = (upper - lower).max(0.0);
    if upper.abs() < 1e-9 {
        diff
    } else {
        diff / upper.abs()
    }
}

pub fn lower_bound_is_monotone(history: &[IterationLog]) -> bool {
    history.windows(2).all(|w| w[1].lower_bound >= w[0].lower_bound)
}

pub struct Engine<'a> {
    network: &'a PowerNetwork,
    tree: &'a ScenarioTree,
    options: FormulationOptions,
    config: EngineConfig,
    backend: Arc<dyn Backend>,
}

struct ForwardPass {
    root: StageSolution,
    lower_bound: f64,
    policy_cost: f64,
    anchors: BTreeMap<NodeId, Vec<f64>>,
}

impl<'a> Engine<'a> {
    pub fn new(
        network: &'a PowerNetwork,
        tree: &'a ScenarioTree,
        options: FormulationOptions,
        config: EngineConfig,
        backend: Arc<dyn Backend>,
    ) -> Result<Self> {
        config.validate()?;
        options.validate()?;
        tree.validate_against(network)?;
        Ok(Engine { network, tree, options, config, backend })
    }

    pub fn run(&self) -> Result<SolveReport> {
        let pool = match self.config.threads {
            0 => rayon::ThreadPoolBuilder::new(),
            n => rayon::ThreadPoolBuilder::new().num_threads(n),
        }
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
        pool.install(|| self.run_inner())
    }

    fn run_inner(&self) -> Result<SolveReport> {
        let start = Instant::now();
        let mut cuts = CutPool::new();
        let mut root = StageModel::build_root(self.network, self.tree, &self.options, [])?;
        let mut nodes: BTreeMap<NodeId, StageModel> = BTreeMap::new();
        let mut history = Vec::new();
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        let mut incumbent: Option<StageSolution> = None;
        let mut since_progress = 0;
        let by_depth = self.levels();

        for iteration in 1.. {
            let fwd = self.forward_pass(&root, &mut nodes, &cuts)?;
            let lb_moved = fwd.lower_bound > lower + 1e-9 * lower.abs().max(1.0);
            lower = lower.max(fwd.lower_bound);
            let ub_improved = fwd.policy_cost < upper;
            if ub_improved {
                upper = fwd.policy_cost;
                incumbent = Some(fwd.root);
            }
            since_progress = if lb_moved || ub_improved { 0 } else { since_progress + 1 };
            let gap = relative_gap(lower, upper);
            let mut log = IterationLog {
                iteration,
                lower_bound: lower,
                upper_bound: upper,
                policy_cost: fwd.policy_cost,
                gap,
                cuts_added: 0,
                elapsed: start.elapsed().as_secs_f64(),
            };
            log::info!("iter {iteration}: LB {lower:.6} UB {upper:.6} gap {gap:.3e}");

            let reason = if gap <= self.config.epsilon.max(GAP_FLOOR) {
                Some(TerminationReason::Converged)
            } else if iteration >= self.config.max_iterations {
                Some(TerminationReason::IterationLimit)
            } else if log.elapsed >= self.config.max_wall_time {
                Some(TerminationReason::TimeLimit)
            } else if since_progress >= self.config.stall_iterations {
                Some(TerminationReason::GapStall)
            } else {
                None
            };
            if reason.is_none() {
                log.cuts_added = self.backward_pass(iteration, &by_depth, &fwd.anchors, &mut root, &mut nodes, &mut cuts)?;
            }
            history.push(log);
            let reason = match reason {
                Some(r) => r,
                None if history.last().map_or(0, |l| l.cuts_added) == 0 => TerminationReason::GapStall,
                None => continue,
            };
            return Ok(SolveReport {
                family: self.config.family,
                lower_bound: lower,
                upper_bound: upper,
                gap,
                iterations: iteration,
                termination: reason,
                wall_time: start.elapsed().as_secs_f64(),
                history,
                incumbent: incumbent.expect("first iteration sets the incumbent"),
                cuts,
            });
        }
        unreachable!("the iteration loop only exits by returning")
    }

    /// Disruption nodes grouped by depth, deepest level first.
    fn levels(&self) -> Vec<Vec<NodeId>> {
        let mut by_depth: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
        for n in self.tree.disruption_nodes() {
            by_depth.entry(self.tree.depth(n)).or_default().push(n);
        }
        by_depth.into_values().rev().collect()
    }

    fn forward_pass(
        &self,
        root: &StageModel,
        nodes: &mut BTreeMap<NodeId, StageModel>,
        cuts: &CutPool,
    ) -> Result<ForwardPass> {
        let backend = &*self.backend;
        let out = solve_mip(backend, &root.model, &self.config.forward)?.require_optimal("root stage")?;
        let root_sol = root.solution(&out);
        let mut policy_cost = root_sol.stage_cost;
        let mut anchors = BTreeMap::new();
        let mut solutions: BTreeMap<NodeId, StageSolution> = BTreeMap::new();
        solutions.insert(self.tree.root, root_sol.clone());
        // parents precede children in a depth-first walk
        let mut stack: Vec<NodeId> = self.tree.disruption_children(self.tree.root).into_iter().rev().collect();
        while let Some(n) = stack.pop() {
            let node = self.tree.node(n);
            let parent = &solutions[&node.parent.expect("disruption node has a parent")];
            let anchor = parent.state_at(node.onset - 1);
            let stage = match nodes.entry(n) {
                std::collections::btree_map::Entry::Occupied(e) => {
                    let stage = e.into_mut();
                    stage.set_anchor(&anchor)?;
                    stage
                }
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(StageModel::build_node(self.network, self.tree, n, &anchor, cuts.iter())?)
                }
            };
            let out = solve_mip(backend, &stage.model, &self.config.forward)?.require_optimal(&format!("stage {n}"))?;
            let sol = stage.solution(&out);
            policy_cost += self.tree.path_probability(n) * sol.stage_cost;
            anchors.insert(n, anchor);
            solutions.insert(n, sol);
            stack.extend(self.tree.disruption_children(n).into_iter().rev());
        }
        Ok(ForwardPass { root: root_sol, lower_bound: out.dual_bound, policy_cost, anchors })
    }

    fn backward_pass(
        &self,
        iteration: usize,
        levels: &[Vec<NodeId>],
        anchors: &BTreeMap<NodeId, Vec<f64>>,
        root: &mut StageModel,
        nodes: &mut BTreeMap<NodeId, StageModel>,
        cuts: &mut CutPool,
    ) -> Result<usize> {
        let mut added = 0;
        for level in levels {
            for n in level {
                nodes.get_mut(n).expect("built in the forward pass").set_anchor(&anchors[n])?;
            }
            let stages: Vec<&StageModel> = level.iter().map(|n| &nodes[n]).collect();
            let fresh: Vec<CutRecord> = stages
                .par_iter()
                .map(|stage| {
                    let ctx = CutContext {
                        stage,
                        backend: &*self.backend,
                        params: &self.config.dual,
                        iteration,
                    };
                    generate_cut(self.config.family, &ctx)
                })
                .collect::<Result<_>>()?;
            for cut in fresh {
                if !cuts.insert(cut.clone()) {
                    continue;
                }
                added += 1;
                let parent = self.tree.node(cut.owner).parent.expect("disruption node has a parent");
                if parent == self.tree.root {
                    root.attach_cut(&cut)?;
                } else if let Some(model) = nodes.get_mut(&parent) {
                    model.attach_cut(&cut)?;
                }
            }
        }
        Ok(added)
    }
}

/// Runs the decomposition with the default backend.
pub fn solve(
    network: &PowerNetwork,
    tree: &ScenarioTree,
    options: &FormulationOptions,
    config: &EngineConfig,
) -> Result<SolveReport> {
    let backend = crate::backend::default_backend()?;
    Engine::new(network, tree, options.clone(), config.clone(), backend)?.run()
}
