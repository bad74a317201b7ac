use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use psps_core::backend::default_backend;
use psps_core::engine::Engine;
use psps_core::evaluation::{
    emit_reports, evaluate_out_of_sample, fairness_metrics, plan_and_evaluate, write_breakdown, write_comparison,
    write_fairness,
    NominalPlan,
};
use psps_core::scenario::{load_tree, ScenarioTree};
use serde::Serialize;

use crate::config::{self, Loaded};
use crate::{Common, Overrides};

fn setup(common: &Common) -> Result<(Loaded, PathBuf)> {
    let mut loaded = config::load(&common.config)?;
    if let Some(t) = common.threads {
        loaded.config.engine.threads = t;
        // generation runs on the global pool; ignore a second initialisation
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let out = match &common.output {
        Some(dir) => dir.clone(),
        None => loaded.base.join(&loaded.config.output_dir),
    };
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((loaded, out))
}

fn apply(loaded: &mut Loaded, o: &Overrides) {
    let cfg = &mut loaded.config;
    if let Some(b) = o.beta {
        cfg.options.beta = b;
    }
    if o.no_restoration {
        cfg.options.restoration = false;
    }
    if let Some(f) = o.cuts {
        cfg.engine.family = f;
    }
    if let Some(e) = o.epsilon {
        cfg.engine.epsilon = e;
    }
    if let Some(n) = o.max_iterations {
        cfg.engine.max_iterations = n;
    }
    if let Some(dir) = &o.dump_lp {
        cfg.engine.forward.dump_dir = Some(dir.clone());
        cfg.engine.dual.solver.dump_dir = Some(dir.clone());
    }
}

fn trees(loaded: &Loaded, seed: Option<u64>) -> Result<(ScenarioTree, Option<ScenarioTree>)> {
    let c = &loaded.config;
    let train = c.scenarios.resolve(&loaded.base, &loaded.network, seed)?;
    let test = match &c.testing {
        Some(src) => Some(src.resolve(&loaded.base, &loaded.network, seed.map(|s| s.wrapping_add(1)))?),
        None => None,
    };
    Ok((train, test))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn generate(common: &Common) -> Result<()> {
    let (loaded, out) = setup(common)?;
    let (train, test) = trees(&loaded, common.seed)?;
    train.save(out.join("tree.json"))?;
    let s = train.stats();
    info!("training tree: {} nodes, {} disruptions, depth {}", s.nodes, s.disruption_nodes, s.disruption_depth);
    if let Some(test) = test {
        test.save(out.join("test_tree.json"))?;
        info!("testing tree: {} nodes", test.nodes.len());
    }
    Ok(())
}

pub fn solve(common: &Common, overrides: &Overrides) -> Result<()> {
    let (mut loaded, out) = setup(common)?;
    apply(&mut loaded, overrides);
    let (train, test) = trees(&loaded, common.seed)?;
    train.save(out.join("tree.json"))?;
    let backend = default_backend()?;
    let c = &loaded.config;
    let report = Engine::new(&loaded.network, &train, c.options.clone(), c.engine.clone(), backend.clone())?.run()?;
    info!(
        "{:?} after {} iterations: LB {:.6} UB {:.6} gap {:.3e}",
        report.termination, report.iterations, report.lower_bound, report.upper_bound, report.gap
    );
    let plan = NominalPlan::from_solution(&loaded.network, &report.incumbent, &c.options);
    plan.save(out.join("plan.json"))?;
    write_fairness(&out.join("fairness.csv"), &fairness_metrics(&loaded.network, &plan)?)?;
    let evaluation = match &test {
        Some(test) => {
            test.save(out.join("test_tree.json"))?;
            Some(evaluate_out_of_sample(&loaded.network, &plan, test, &*backend, &c.engine.forward)?)
        }
        None => None,
    };
    emit_reports(&out, &report, evaluation.as_ref())?;
    println!(
        "{} {:?} iterations={} lb={:.6} ub={:.6} gap={:.3e}",
        report.family, report.termination, report.iterations, report.lower_bound, report.upper_bound, report.gap
    );
    Ok(())
}

pub fn evaluate(common: &Common, plan: &Path, test_tree: &Path) -> Result<()> {
    let (loaded, out) = setup(common)?;
    let plan = NominalPlan::load(plan).with_context(|| format!("loading plan {}", plan.display()))?;
    let tree = load_tree(test_tree).with_context(|| format!("loading tree {}", test_tree.display()))?;
    let backend = default_backend()?;
    let eval = evaluate_out_of_sample(&loaded.network, &plan, &tree, &*backend, &loaded.config.engine.forward)?;
    write_json(&out.join("evaluation.json"), &eval)?;
    write_breakdown(&out.join("breakdown.csv"), &eval)?;
    println!(
        "nominal={:.6} disruption={:.6} damage={:.6} total={:.6}",
        eval.nominal_cost, eval.disruption_cost, eval.damage_cost, eval.total
    );
    Ok(())
}

pub fn compare(common: &Common, overrides: &Overrides, betas: Option<Vec<f64>>) -> Result<()> {
    let (mut loaded, out) = setup(common)?;
    apply(&mut loaded, overrides);
    let (train, test) = trees(&loaded, common.seed)?;
    let test = test.unwrap_or_else(|| train.clone());
    let backend = default_backend()?;
    let c = &loaded.config;
    let betas = betas.unwrap_or_else(|| vec![c.options.beta]);
    if betas.is_empty() {
        return Err(psps_core::Error::EmptyInput("no fairness levels given".into()).into());
    }
    let mut rows = Vec::new();
    let mut fairness = Vec::new();
    for &beta in &betas {
        for restoration in [true, false] {
            let options = psps_core::formulation::FormulationOptions { beta, restoration, ..c.options.clone() };
            let label = format!("beta={beta}{}", if restoration { "" } else { ",no_restoration" });
            let (_, plan, row) =
                plan_and_evaluate(&loaded.network, &train, &test, &options, &c.engine, backend.clone(), label)?;
            info!("{}: total {:.6}", row.label, row.total);
            if restoration {
                fairness.push(fairness_metrics(&loaded.network, &plan)?);
            }
            rows.push(row);
        }
    }
    write_comparison(&out.join("comparison.csv"), &rows)?;
    write_json(&out.join("fairness.json"), &fairness)?;
    for r in &rows {
        println!(
            "{} nominal={:.6} disruption={:.6} damage={:.6} total={:.6}",
            r.label, r.nominal_cost, r.disruption_cost, r.damage_cost, r.total
        );
    }
    Ok(())
}
