//! Narrow LP/MIP solver interface.
//!
//! Models are built as [`LinearModel`]s and handed to a [`Backend`]. The
//! reference backend wraps HiGHS; `PSPS_SOLVER_BACKEND` selects a backend by
//! name when several are compiled in.

mod highs_backend;
mod model;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use highs_backend::HighsBackend;
pub use model::{Col, Column, LinearModel, Row, RowId};

use crate::error::{Error, Result};

/// Environment variable naming the solver backend.
pub const BACKEND_ENV: &str = "PSPS_SOLVER_BACKEND";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    LimitReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub mip_gap: f64,
    /// Seconds; infinite means no limit.
    pub time_limit: f64,
    /// Worker threads used by the callers that fan out solves.
    pub threads: usize,
    pub seed: u64,
    /// Primal and integrality feasibility tolerance.
    pub feasibility_tol: f64,
    /// After a MIP solve, fix the integers at their rounded values and
    /// re-solve the LP so continuous values satisfy the rows exactly.
    pub polish: bool,
    /// When set, every solved model is written here in LP format.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_dir: Option<PathBuf>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            mip_gap: 1e-6,
            time_limit: f64::INFINITY,
            threads: 0,
            seed: 0,
            feasibility_tol: 1e-7,
            polish: false,
            dump_dir: None,
        }
    }
}

impl SolverParams {
    pub fn with_gap(mip_gap: f64) -> Self {
        SolverParams { mip_gap, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mip_gap >= 0.0) {
            return Err(Error::InvalidParams(format!("mip_gap {} must be >= 0", self.mip_gap)));
        }
        if !(self.feasibility_tol > 0.0 && self.feasibility_tol < 1e-3) {
            return Err(Error::InvalidParams(format!("feasibility_tol {} must be in (0, 1e-3)", self.feasibility_tol)));
        }
        if !(self.time_limit > 0.0) {
            return Err(Error::InvalidParams("time_limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Objective of the returned point, offset included.
    pub objective: f64,
    /// Best proven lower bound (equals `objective` for continuous models).
    pub dual_bound: f64,
    pub primal: Vec<f64>,
    /// Row duals; present only when the solved model was continuous.
    pub duals: Option<Vec<f64>>,
    pub gap: f64,
    pub wall_time: f64,
}

impl SolveOutcome {
    pub fn value(&self, c: Col) -> f64 {
        self.primal[c.0]
    }

    pub fn dual(&self, r: RowId) -> Option<f64> {
        self.duals.as_ref().map(|d| d[r.0])
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Errors unless the status is `Optimal`.
    pub fn require_optimal(self, context: &str) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::SolveStatus { status: format!("{:?}", self.status), context: context.into() })
        }
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves `model` as given: a MIP when any column is integer, otherwise an
    /// LP (simplex, so duals are basic) or a convex QP.
    fn solve(&self, model: &LinearModel, params: &SolverParams) -> Result<SolveOutcome>;
}

/// Backend chosen by [`BACKEND_ENV`], defaulting to HiGHS.
pub fn default_backend() -> Result<Arc<dyn Backend>> {
    match std::env::var(BACKEND_ENV).ok().as_deref() {
        None | Some("") | Some("highs") => Ok(Arc::new(HighsBackend)),
        Some(other) => Err(Error::Backend(format!("unknown solver backend {other:?}"))),
    }
}

static DUMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

pub(crate) fn maybe_dump(model: &LinearModel, params: &SolverParams) {
    if let Some(dir) = &params.dump_dir {
        let k = DUMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = dir.join(format!("model_{k:06}.lp"));
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, model.to_lp_string())) {
            log::warn!("could not write {}: {e}", path.display());
        }
    }
}

/// Solves a model with integer columns.
pub fn solve_mip(backend: &dyn Backend, model: &LinearModel, params: &SolverParams) -> Result<SolveOutcome> {
    let out = backend.solve(model, params)?;
    if !params.polish || !model.is_mip() || !out.is_optimal() {
        return Ok(out);
    }
    let mut fixed = model.clone();
    for (k, col) in fixed.cols.iter_mut().enumerate() {
        if col.integer {
            let v = out.primal[k].round();
            col.lower = v;
            col.upper = v;
            col.integer = false;
        }
    }
    let lp = backend.solve(&fixed, &SolverParams { polish: false, ..params.clone() })?;
    if !lp.is_optimal() {
        log::debug!("polishing LP returned {:?}; keeping the MIP point", lp.status);
        return Ok(out);
    }
    Ok(SolveOutcome { primal: lp.primal, ..out })
}

/// Solves a continuous model and returns basic row duals.
pub fn solve_lp(backend: &dyn Backend, model: &LinearModel, params: &SolverParams) -> Result<SolveOutcome> {
    if model.is_mip() {
        return Err(Error::Backend("solve_lp called on a model with integer columns".into()));
    }
    backend.solve(model, params)
}
