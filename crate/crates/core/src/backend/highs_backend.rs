use std::time::Instant;

use highs::{HessianFormat, HighsModelStatus, HighsOptionValue, RowProblem, Sense};

use super::{maybe_dump, Backend, LinearModel, SolveOutcome, SolveStatus, SolverParams};
use crate::error::{Error, Result};

/// HiGHS through the `highs` crate.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl Backend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &LinearModel, params: &SolverParams) -> Result<SolveOutcome> {
        params.validate()?;
        maybe_dump(model, params);
        let start = Instant::now();
        if model.cols.is_empty() {
            return Ok(empty_outcome(model, start));
        }
        let is_mip = model.is_mip();
        let mut pb = RowProblem::default();
        let cols: Vec<highs::Col> = model
            .cols
            .iter()
            .map(|c| {
                if c.integer {
                    pb.add_integer_column(c.cost, c.lower..=c.upper)
                } else {
                    pb.add_column(c.cost, c.lower..=c.upper)
                }
            })
            .collect();
        for row in &model.rows {
            pb.add_row(row.lower..=row.upper, row.coeffs.iter().map(|(c, a)| (cols[c.0], *a)));
        }
        let mut hm = pb.try_optimise(Sense::Minimise).map_err(|s| Error::Backend(format!("{s:?}")))?;
        hm.make_quiet();
        set_option(&mut hm, "mip_rel_gap", params.mip_gap)?;
        set_option(&mut hm, "primal_feasibility_tolerance", params.feasibility_tol)?;
        set_option(&mut hm, "mip_feasibility_tolerance", params.feasibility_tol)?;
        set_option(&mut hm, "random_seed", (params.seed % (i32::MAX as u64)) as i32)?;
        if params.time_limit.is_finite() {
            set_option(&mut hm, "time_limit", params.time_limit)?;
        }
        if !model.diag_quadratic.is_empty() {
            if is_mip {
                return Err(Error::Backend("quadratic objectives need continuous columns".into()));
            }
            let mut hessian: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.cols.len()];
            for (c, q) in &model.diag_quadratic {
                hessian[c.0].push((c.0, *q));
            }
            hm.try_pass_hessian(HessianFormat::Triangular, hessian)
                .map_err(|e| Error::Backend(format!("hessian: {e}")))?;
        } else if !is_mip {
            set_option(&mut hm, "solver", "simplex")?;
        }
        let solved = hm.try_solve().map_err(|s| Error::Backend(format!("solve failed: {s:?}")))?;
        let status = match solved.status() {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Unbounded,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ObjectiveBound
            | HighsModelStatus::ObjectiveTarget
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => SolveStatus::LimitReached,
            other => return Err(Error::Backend(format!("HiGHS status {other:?}"))),
        };
        let solution = solved.get_solution();
        let objective = solved.objective_value() + model.offset;
        let (dual_bound, gap, duals) = if is_mip {
            let bound = solved
                .double_info_value(c"mip_dual_bound")
                .ok()
                .filter(|b| b.is_finite())
                .map_or(objective, |b| b + model.offset);
            (bound, solved.mip_gap(), None)
        } else {
            (objective, 0.0, Some(solution.dual_rows().to_vec()))
        };
        Ok(SolveOutcome {
            status,
            objective,
            dual_bound: if status == SolveStatus::Optimal { dual_bound.min(objective) } else { dual_bound },
            primal: solution.columns().to_vec(),
            duals,
            gap,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}

fn set_option<V: HighsOptionValue>(hm: &mut highs::Model, name: &str, value: V) -> Result<()> {
    hm.try_set_option(name, value)
        .map_err(|e| Error::Backend(format!("setting {name}: {e:?}")))
}

fn empty_outcome(model: &LinearModel, start: Instant) -> SolveOutcome {
    let feasible = model.rows.iter().all(|r| r.lower <= 0.0 && 0.0 <= r.upper);
    SolveOutcome {
        status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
        objective: model.offset,
        dual_bound: model.offset,
        primal: Vec::new(),
        duals: if model.is_mip() { None } else { Some(vec![0.0; model.rows.len()]) },
        gap: 0.0,
        wall_time: start.elapsed().as_secs_f64(),
    }
}
