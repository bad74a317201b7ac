use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ComparisonRow, Evaluation, FairnessMetrics};
use crate::engine::{SolveReport, TerminationReason};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub convergence_csv: PathBuf,
    pub summary_json: PathBuf,
    pub cut_log_json: PathBuf,
}

#[derive(Serialize)]
struct Summary<'a> {
    family: &'a str,
    lower_bound: f64,
    upper_bound: f64,
    gap: f64,
    iterations: usize,
    termination: TerminationReason,
    wall_time: f64,
    cuts: usize,
    evaluation: Option<&'a Evaluation>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes `convergence.csv`, `summary.json` and `cuts.json` into `dir`.
pub fn emit_reports(dir: &Path, report: &SolveReport, evaluation: Option<&Evaluation>) -> Result<ReportPaths> {
    std::fs::create_dir_all(dir)?;
    let paths = ReportPaths {
        convergence_csv: dir.join("convergence.csv"),
        summary_json: dir.join("summary.json"),
        cut_log_json: dir.join("cuts.json"),
    };
    let mut w = csv::Writer::from_path(&paths.convergence_csv)?;
    for row in &report.history {
        w.serialize(row)?;
    }
    w.flush()?;
    let summary = Summary {
        family: report.family.short_name(),
        lower_bound: report.lower_bound,
        upper_bound: report.upper_bound,
        gap: report.gap,
        iterations: report.iterations,
        termination: report.termination,
        wall_time: report.wall_time,
        cuts: report.cuts.len(),
        evaluation,
    };
    write_json(&paths.summary_json, &summary)?;
    write_json(&paths.cut_log_json, &report.cuts.log())?;
    Ok(paths)
}

pub fn write_fairness(path: &Path, metrics: &FairnessMetrics) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["load", "priority", "cum_shed_frac", "beta"])?;
    for l in &metrics.loads {
        w.write_record([
            l.load.clone(),
            l.priority.to_string(),
            l.cum_shed_frac.to_string(),
            metrics.beta.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the cost split as `component,cost` rows ending with the total.
pub fn write_breakdown(path: &Path, evaluation: &Evaluation) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["component", "cost"])?;
    for (name, v) in [
        ("nominal", evaluation.nominal_cost),
        ("disruption", evaluation.disruption_cost),
        ("damage", evaluation.damage_cost),
        ("total", evaluation.total),
    ] {
        w.write_record([name, &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
