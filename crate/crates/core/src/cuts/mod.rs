//! Cutting planes for the value functions of disruption stages.
//!
//! A cut for node `w` is `V_w >= slope'(z - anchor) + intercept`, where `z` is
//! the parent's status vector at `onset(w) - 1`. All families start from the
//! stage model of `w` with its inherited state fixed at the anchor.

mod dual;
mod relaxation;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use relaxation::{LagrangianRelaxation, OracleValue};

use crate::backend::{solve_lp, solve_mip, Backend, SolverParams};
use crate::error::{Error, Result};
use crate::formulation::StageModel;
use crate::scenario::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CutFamily {
    #[serde(rename = "BC", alias = "bc")]
    Benders,
    #[serde(rename = "SBC", alias = "sbc")]
    StrengthenedBenders,
    #[serde(rename = "LC", alias = "lc")]
    Lagrangian,
    #[serde(rename = "SMC", alias = "smc")]
    SquareMinimization,
}

impl CutFamily {
    pub const ALL: [CutFamily; 4] = [
        CutFamily::Benders,
        CutFamily::StrengthenedBenders,
        CutFamily::Lagrangian,
        CutFamily::SquareMinimization,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            CutFamily::Benders => "BC",
            CutFamily::StrengthenedBenders => "SBC",
            CutFamily::Lagrangian => "LC",
            CutFamily::SquareMinimization => "SMC",
        }
    }
}

impl std::fmt::Display for CutFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for CutFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "BC" => Ok(CutFamily::Benders),
            "SBC" => Ok(CutFamily::StrengthenedBenders),
            "LC" => Ok(CutFamily::Lagrangian),
            "SMC" => Ok(CutFamily::SquareMinimization),
            _ => Err(Error::InvalidParams(format!("unknown cut family {s:?}"))),
        }
    }
}

/// Domain of the relaxed copy variables in the Lagrangian subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZDomain {
    #[default]
    Binary,
    Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub owner: NodeId,
    pub slope: Vec<f64>,
    pub intercept: f64,
    pub anchor: Vec<f64>,
    pub family: CutFamily,
    pub z_domain: ZDomain,
    pub iteration: usize,
    pub oracle_calls: usize,
    pub wall_time: f64,
    /// Whether the cut reaches the stage value at its anchor.
    pub tight: bool,
}

impl CutRecord {
    /// Cut value at a state vector.
    pub fn value_at(&self, z: &[f64]) -> f64 {
        self.intercept + self.slope.iter().zip(z).zip(&self.anchor).map(|((g, z), a)| g * (z - a)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DualSolverParams {
    pub max_oracle_calls: usize,
    /// Relative tolerance for reaching the anchor value and for bundle stops.
    pub tolerance: f64,
    pub bundle_weight: f64,
    pub min_bundle_weight: f64,
    /// Fraction of the predicted ascent a step must realize to move the center.
    pub serious_step: f64,
    /// Relative slack `delta` in the square-minimization target.
    pub delta: f64,
    pub z_domain: ZDomain,
    pub solver: SolverParams,
}

impl Default for DualSolverParams {
    fn default() -> Self {
        DualSolverParams {
            max_oracle_calls: 100,
            tolerance: 1e-6,
            bundle_weight: 10.0,
            min_bundle_weight: 1e-6,
            serious_step: 0.1,
            delta: 1e-4,
            z_domain: ZDomain::Binary,
            solver: SolverParams::default(),
        }
    }
}

impl DualSolverParams {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.max_oracle_calls == 0 {
            return Err(Error::InvalidParams("max_oracle_calls must be positive".into()));
        }
        if !(self.tolerance >= 0.0) || !(self.delta >= 0.0) || !(self.delta < 1.0) {
            return Err(Error::InvalidParams("tolerance and delta must be in [0, 1)".into()));
        }
        if !(self.bundle_weight > 0.0) || !(self.serious_step > 0.0 && self.serious_step < 1.0) {
            return Err(Error::InvalidParams("bundle weight must be > 0 and serious step in (0, 1)".into()));
        }
        Ok(())
    }

    fn reached(&self, value: f64, target: f64) -> bool {
        value >= target - self.tolerance * target.abs().max(1.0)
    }
}

/// Everything needed to cut at one node and anchor.
pub struct CutContext<'a> {
    pub stage: &'a StageModel,
    pub backend: &'a dyn Backend,
    pub params: &'a DualSolverParams,
    pub iteration: usize,
}

impl CutContext<'_> {
    fn anchor(&self) -> Result<&[f64]> {
        self.stage
            .anchor
            .as_deref()
            .ok_or_else(|| Error::CutGeneration("stage model has no anchor".into()))
    }

    /// Optimal value of the stage MIP at the anchor.
    pub fn anchor_value(&self) -> Result<f64> {
        let out = solve_mip(self.backend, &self.stage.model, &self.params.solver)?;
        Ok(out.require_optimal("stage value at anchor")?.objective)
    }

    fn record(&self, family: CutFamily, slope: Vec<f64>, intercept: f64, calls: usize, start: Instant) -> Result<CutRecord> {
        if slope.iter().any(|v| !v.is_finite()) || !intercept.is_finite() {
            return Err(Error::CutGeneration(format!("{family} produced non-finite coefficients")));
        }
        Ok(CutRecord {
            owner: self.stage.node,
            slope,
            intercept,
            anchor: self.anchor()?.to_vec(),
            family,
            z_domain: self.params.z_domain,
            iteration: self.iteration,
            oracle_calls: calls,
            wall_time: start.elapsed().as_secs_f64(),
            tight: false,
        })
    }

    /// Slope and value from the LP relaxation at the anchor.
    fn lp_dual(&self) -> Result<(Vec<f64>, f64)> {
        let mut relaxed = self.stage.relax_binaries();
        for &c in relaxed.vars.copy.as_ref().expect("disruption stage") {
            let col = relaxed.model.col_mut(c);
            col.lower = f64::NEG_INFINITY;
            col.upper = f64::INFINITY;
        }
        let out = solve_lp(self.backend, &relaxed.model, &self.params.solver)?.require_optimal("LP relaxation")?;
        let slope = self.stage.copy_rows.iter().map(|&r| out.dual(r).unwrap_or(0.0)).collect();
        Ok((slope, out.objective))
    }
}

/// Builds one cut of `family` for the context's node.
pub fn generate_cut(family: CutFamily, ctx: &CutContext<'_>) -> Result<CutRecord> {
    ctx.params.validate()?;
    if ctx.stage.is_root() {
        return Err(Error::CutGeneration("cuts are generated for disruption stages only".into()));
    }
    let start = Instant::now();
    match family {
        CutFamily::Benders => {
            let (slope, value) = ctx.lp_dual()?;
            ctx.record(family, slope, value, 1, start)
        }
        CutFamily::StrengthenedBenders => {
            let (slope, _) = ctx.lp_dual()?;
            let oracle = LagrangianRelaxation::new(ctx.stage, ctx.params.z_domain, ctx.backend, &ctx.params.solver)?;
            let value = oracle.evaluate(&slope)?.value;
            ctx.record(family, slope, value, 2, start)
        }
        CutFamily::Lagrangian => {
            let target = ctx.anchor_value()?;
            let oracle = LagrangianRelaxation::new(ctx.stage, ctx.params.z_domain, ctx.backend, &ctx.params.solver)?;
            let (warm, _) = ctx.lp_dual()?;
            let best = dual::maximize(&oracle, warm, target, ctx.params, ctx.backend)?;
            let mut cut = ctx.record(family, best.lambda, best.value, best.calls + 2, start)?;
            cut.tight = ctx.params.reached(cut.intercept, target);
            Ok(cut)
        }
        CutFamily::SquareMinimization => {
            let target = ctx.anchor_value()?;
            let oracle = LagrangianRelaxation::new(ctx.stage, ctx.params.z_domain, ctx.backend, &ctx.params.solver)?;
            let (warm, _) = ctx.lp_dual()?;
            let level = target - ctx.params.delta * target.abs();
            let found = match dual::min_norm(&oracle, &warm, level, ctx.params, ctx.backend)? {
                Some(found) => found,
                None => {
                    log::debug!("{}: square-minimization master failed, using the bundle method", ctx.stage.node);
                    dual::maximize(&oracle, warm, target, ctx.params, ctx.backend)?
                }
            };
            let mut cut = ctx.record(family, found.lambda, found.value, found.calls + 2, start)?;
            cut.tight = ctx.params.reached(cut.intercept, level);
            Ok(cut)
        }
    }
}
