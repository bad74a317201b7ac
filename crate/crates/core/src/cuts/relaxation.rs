use crate::backend::{solve_mip, Backend, Col, LinearModel, SolverParams};
use crate::error::{Error, Result};
use crate::formulation::StageModel;

use super::ZDomain;

/// `R(lambda) = min F(x) + lambda'(anchor - z_copy)` over the stage
/// feasible set with the copy rows dropped.
pub struct LagrangianRelaxation<'a> {
    base: LinearModel,
    copy: Vec<Col>,
    anchor: Vec<f64>,
    backend: &'a dyn Backend,
    params: &'a SolverParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleValue {
    /// Proven lower bound on `R(lambda)`.
    pub value: f64,
    /// `anchor - z_copy*`
    pub supergradient: Vec<f64>,
}

impl<'a> LagrangianRelaxation<'a> {
    pub fn new(stage: &StageModel, domain: ZDomain, backend: &'a dyn Backend, params: &'a SolverParams) -> Result<Self> {
        let anchor = stage
            .anchor
            .clone()
            .ok_or_else(|| Error::CutGeneration("stage model has no anchor".into()))?;
        let copy = stage.vars.copy.clone().ok_or_else(|| Error::CutGeneration("root stage has no copies".into()))?;
        let mut base = stage.model.clone();
        for &r in &stage.copy_rows {
            base.set_row_bounds(r, f64::NEG_INFINITY, f64::INFINITY);
        }
        for &c in &copy {
            let col = base.col_mut(c);
            col.lower = 0.0;
            col.upper = 1.0;
            col.integer = domain == ZDomain::Binary;
        }
        Ok(LagrangianRelaxation { base, copy, anchor, backend, params })
    }

    pub fn dim(&self) -> usize {
        self.copy.len()
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn evaluate(&self, lambda: &[f64]) -> Result<OracleValue> {
        if lambda.len() != self.copy.len() {
            return Err(Error::DimensionMismatch { expected: self.copy.len(), got: lambda.len() });
        }
        let mut model = self.base.clone();
        for (&c, &l) in self.copy.iter().zip(lambda) {
            model.col_mut(c).cost -= l;
        }
        model.offset += lambda.iter().zip(&self.anchor).map(|(l, a)| l * a).sum::<f64>();
        let out = solve_mip(self.backend, &model, self.params)?.require_optimal("Lagrangian subproblem")?;
        let supergradient = self.copy.iter().zip(&self.anchor).map(|(&c, a)| a - snap(out.value(c))).collect();
        Ok(OracleValue { value: out.dual_bound, supergradient })
    }
}

/// Removes solver noise around integral values.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}
