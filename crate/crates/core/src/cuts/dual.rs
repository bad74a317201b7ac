//! Dual searches over the Lagrangian relaxation.

use crate::backend::{Backend, LinearModel, SolveStatus, SolverParams};
use crate::error::Result;

use super::{DualSolverParams, LagrangianRelaxation};

#[derive(Debug, Clone, PartialEq)]
pub(super) struct DualPoint {
    pub lambda: Vec<f64>,
    pub value: f64,
    pub calls: usize,
}

struct Piece {
    lambda: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

impl Piece {
    /// Constant of the linearization `value + grad'(x - lambda)`.
    fn constant(&self) -> f64 {
        self.value - dot(&self.grad, &self.lambda)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn master_params(params: &DualSolverParams) -> SolverParams {
    SolverParams { dump_dir: None, ..params.solver.clone() }
}

/// Proximal bundle ascent on `R`, started at `warm`, stopping once `target`
/// (an upper bound on `sup R`) is reached or the model predicts no ascent.
pub(super) fn maximize(
    oracle: &LagrangianRelaxation<'_>,
    warm: Vec<f64>,
    target: f64,
    params: &DualSolverParams,
    backend: &dyn Backend,
) -> Result<DualPoint> {
    let n = oracle.dim();
    let first = oracle.evaluate(&warm)?;
    let mut calls = 1;
    let mut bundle = vec![Piece { lambda: warm.clone(), value: first.value, grad: first.supergradient }];
    let mut center = (warm, first.value);
    let mut best = DualPoint { lambda: center.0.clone(), value: center.1, calls };
    let mut weight = params.bundle_weight;

    while !params.reached(best.value, target) && calls < params.max_oracle_calls {
        let mut master = LinearModel::new();
        let lambda: Vec<_> = (0..n)
            .map(|i| master.add_col(format!("lambda[{i}]"), f64::NEG_INFINITY, f64::INFINITY, -weight * center.0[i]))
            .collect();
        let t = master.add_col("t", f64::NEG_INFINITY, f64::INFINITY, -1.0);
        master.diag_quadratic = lambda.iter().map(|&c| (c, weight)).collect();
        master.offset = 0.5 * weight * dot(&center.0, &center.0);
        for (k, piece) in bundle.iter().enumerate() {
            let mut coeffs = vec![(t, 1.0)];
            coeffs.extend(lambda.iter().zip(&piece.grad).map(|(&c, &g)| (c, -g)));
            master.add_le(format!("piece[{k}]"), coeffs, piece.constant());
        }
        let out = backend.solve(&master, &master_params(params))?;
        if out.status != SolveStatus::Optimal {
            log::debug!("bundle master returned {:?}", out.status);
            break;
        }
        let candidate: Vec<f64> = lambda.iter().map(|&c| out.value(c)).collect();
        let predicted = out.value(t) - center.1;
        if predicted <= params.tolerance * center.1.abs().max(1.0) {
            break;
        }
        let eval = oracle.evaluate(&candidate)?;
        calls += 1;
        if eval.value > best.value {
            best = DualPoint { lambda: candidate.clone(), value: eval.value, calls };
        }
        if eval.value - center.1 >= params.serious_step * predicted {
            center = (candidate.clone(), eval.value);
            weight = (weight * 0.5).max(params.min_bundle_weight);
        }
        bundle.push(Piece { lambda: candidate, value: eval.value, grad: eval.supergradient });
    }
    best.calls = calls;
    Ok(best)
}

/// Smallest-norm multiplier with `R(lambda) >= level`, by outer
/// approximation of the superlevel set. `None` when the approximation
/// becomes empty or the oracle budget runs out.
pub(super) fn min_norm(
    oracle: &LagrangianRelaxation<'_>,
    warm: &[f64],
    level: f64,
    params: &DualSolverParams,
    backend: &dyn Backend,
) -> Result<Option<DualPoint>> {
    let n = oracle.dim();
    let zero = vec![0.0; n];
    let mut pieces = Vec::new();
    let mut calls = 0;
    for start in [zero, warm.to_vec()] {
        let eval = oracle.evaluate(&start)?;
        calls += 1;
        if pieces.is_empty() && params.reached(eval.value, level) {
            return Ok(Some(DualPoint { lambda: start, value: eval.value, calls }));
        }
        pieces.push(Piece { lambda: start, value: eval.value, grad: eval.supergradient });
    }
    while calls < params.max_oracle_calls {
        let mut master = LinearModel::new();
        let lambda: Vec<_> = (0..n)
            .map(|i| master.add_col(format!("lambda[{i}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
            .collect();
        master.diag_quadratic = lambda.iter().map(|&c| (c, 2.0)).collect();
        for (k, piece) in pieces.iter().enumerate() {
            let coeffs = lambda.iter().zip(&piece.grad).map(|(&c, &g)| (c, g)).collect();
            master.add_ge(format!("level[{k}]"), coeffs, level - piece.constant());
        }
        let out = backend.solve(&master, &master_params(params))?;
        if out.status != SolveStatus::Optimal {
            return Ok(None);
        }
        let candidate: Vec<f64> = lambda.iter().map(|&c| out.value(c)).collect();
        let eval = oracle.evaluate(&candidate)?;
        calls += 1;
        if params.reached(eval.value, level) {
            return Ok(Some(DualPoint { lambda: candidate, value: eval.value, calls }));
        }
        pieces.push(Piece { lambda: candidate, value: eval.value, grad: eval.supergradient });
    }
    Ok(None)
}
