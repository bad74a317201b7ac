use proptest::prelude::*;

use super::*;
use crate::backend::{solve_mip, SolveStatus};
use crate::cuts::{CutFamily, ZDomain};
use crate::grid::Component;
use crate::testutil::{backend, exact, exogenous, fault, one_event_tree, toy3};

fn solve(stage: &StageModel) -> crate::backend::SolveOutcome {
    solve_mip(&*backend(), &stage.model, &exact()).unwrap()
}

fn no_fairness() -> FormulationOptions {
    FormulationOptions { beta: f64::INFINITY, restoration: true, fairness_enabled: true }
}

fn cut(owner: NodeId, n: usize) -> CutRecord {
    CutRecord {
        owner,
        slope: vec![0.0; n],
        intercept: 7.0,
        anchor: vec![1.0; n],
        family: CutFamily::Benders,
        z_domain: ZDomain::Binary,
        iteration: 0,
        oracle_calls: 1,
        wall_time: 0.0,
        tight: false,
    }
}

#[test]
fn deterministic_toy_sheds_nothing() {
    let net = toy3();
    let tree = ScenarioTree::nominal_only(net.horizon);
    let stage = StageModel::build_root(&net, &tree, &FormulationOptions::default(), []).unwrap();
    assert!(stage.children.is_empty());
    let out = solve(&stage);
    assert_eq!(out.status, SolveStatus::Optimal);
    assert!(out.objective.abs() < 1e-7);
    let sol = stage.solution(&out);
    assert!(sol.s.iter().flatten().all(|v| v.abs() < 1e-7));
}

#[test]
fn flows_follow_angles_on_energized_lines() {
    let net = toy3();
    let tree = ScenarioTree::nominal_only(net.horizon);
    let stage = StageModel::build_root(&net, &tree, &no_fairness(), []).unwrap();
    let sol = stage.solution(&solve(&stage));
    for k in 0..net.horizon {
        for (l, line) in net.lines.iter().enumerate() {
            let (f, t) = net.line_ends(l);
            let z = sol.z[net.flat_index(Component::Line(l))][k];
            let p = sol.pl[l][k];
            if z > 0.5 {
                let expected = net.line_susceptance_mw(l) * (sol.theta[t][k] - sol.theta[f][k]);
                assert!((p - expected).abs() < 1e-5, "line {} period {k}", line.id);
            } else {
                assert!(p.abs() < 1e-7);
            }
            assert!(p.abs() <= line.thermal_limit + 1e-7);
        }
        assert!(sol.theta[net.reference_bus()][k].abs() < 1e-12);
    }
}

#[test]
fn capacity_shortfall_goes_to_low_priority_load() {
    let mut net = toy3();
    net.generators[0].p_max = 70.0;
    net.finalize().unwrap();
    let tree = ScenarioTree::nominal_only(net.horizon);
    let stage = StageModel::build_root(&net, &tree, &no_fairness(), []).unwrap();
    let out = solve(&stage);
    let sol = stage.solution(&out);
    // 30 MW short each period: d3 (priority 50) sheds 0.75, d2 (priority 100) sheds 0
    for k in 0..net.horizon {
        assert!(sol.s[0][k].abs() < 1e-6);
        assert!((sol.s[1][k] - 0.75).abs() < 1e-6);
    }
    assert!((out.objective - 4.0 * 50.0 * 0.75).abs() < 1e-5);
}

#[test]
fn zero_beta_equalizes_shed_fractions() {
    let mut net = toy3();
    net.generators[0].p_max = 70.0;
    net.finalize().unwrap();
    let tree = ScenarioTree::nominal_only(net.horizon);
    let opts = FormulationOptions { beta: 0.0, ..Default::default() };
    let stage = StageModel::build_root(&net, &tree, &opts, []).unwrap();
    let fair_rows = stage.model.rows.iter().filter(|r| r.name.starts_with("fair[")).count();
    assert_eq!(fair_rows, 2);
    let sol = stage.solution(&solve(&stage));
    let avg = |d: usize| sol.s[d].iter().sum::<f64>() / net.horizon as f64;
    assert!((avg(0) - avg(1)).abs() < 1e-6);
    assert!((avg(0) - 0.3).abs() < 1e-6);
}

#[test]
fn fairness_rows_skipped_when_disabled() {
    let net = toy3();
    let tree = ScenarioTree::nominal_only(net.horizon);
    for opts in [
        FormulationOptions { beta: f64::INFINITY, ..Default::default() },
        FormulationOptions { fairness_enabled: false, beta: 0.0, ..Default::default() },
    ] {
        let stage = StageModel::build_root(&net, &tree, &opts, []).unwrap();
        assert!(!stage.model.rows.iter().any(|r| r.name.starts_with("fair")));
    }
    let bad = FormulationOptions { beta: -0.1, ..Default::default() };
    assert!(matches!(StageModel::build_root(&net, &tree, &bad, []), Err(Error::InvalidParams(_))));
}

fn five_period_toy() -> PowerNetwork {
    let mut net = toy3();
    net.horizon = 5;
    for d in &mut net.loads {
        d.demand_by_period.push(d.demand_by_period[0]);
    }
    net.finalize().unwrap();
    net
}

fn pattern_feasible(restoration: bool, pattern: &[f64]) -> bool {
    let net = five_period_toy();
    let tree = ScenarioTree::nominal_only(net.horizon);
    let opts = FormulationOptions { restoration, ..no_fairness() };
    let mut stage = StageModel::build_root(&net, &tree, &opts, []).unwrap();
    let c = net.flat_index(Component::Line(1));
    for (k, &v) in pattern.iter().enumerate() {
        let col = stage.model.col_mut(stage.vars.z[c][k]);
        col.lower = v;
        col.upper = v;
    }
    solve(&stage).status == SolveStatus::Optimal
}

#[test]
fn restoration_allows_a_single_switch_back() {
    assert!(pattern_feasible(true, &[1.0, 0.0, 0.0, 1.0, 1.0]));
    assert!(pattern_feasible(true, &[1.0, 0.0, 1.0, 1.0, 0.0]));
    assert!(pattern_feasible(true, &[0.0, 0.0, 0.0, 0.0, 1.0]));
    assert!(!pattern_feasible(true, &[1.0, 0.0, 1.0, 0.0, 1.0]));
    assert!(!pattern_feasible(true, &[0.0, 1.0, 0.0, 1.0, 1.0]));
}

#[test]
fn without_restoration_off_is_permanent() {
    assert!(pattern_feasible(false, &[1.0, 1.0, 1.0, 0.0, 0.0]));
    assert!(pattern_feasible(false, &[0.0, 0.0, 0.0, 0.0, 0.0]));
    assert!(!pattern_feasible(false, &[1.0, 0.0, 0.0, 1.0, 1.0]));
    assert!(!pattern_feasible(false, &[0.0, 0.0, 0.0, 0.0, 1.0]));
}

#[test]
fn exogenous_damage_is_forced() {
    let net = toy3();
    let (tree, child) = one_event_tree(net.horizon, exogenous(3, "line:l13"), 0.5);
    let anchor = vec![1.0; net.n_components()];
    let stage = StageModel::build_node(&net, &tree, child, &anchor, []).unwrap();
    let out = solve(&stage);
    let sol = stage.solution(&out);
    let c = net.flat_index(Component::Line(1));
    assert_eq!(sol.first_period, 3);
    assert!(sol.z[c].iter().all(|v| *v < 0.5));
    assert!(sol.nu.as_ref().unwrap()[c] > 0.5);
    // d3 loses its only feeder for periods 3 and 4
    let expected = net.damage_cost(Component::Line(1)) + 2.0 * 50.0;
    assert!((out.objective - expected).abs() < 1e-5);
    assert!((sol.damage_cost - net.damage_cost(Component::Line(1))).abs() < 1e-7);
}

#[test]
fn endogenous_spread_depends_on_inherited_status() {
    let net = toy3();
    let ev = fault(2, "line:l12", &["bus:3"]);
    let (tree, child) = one_event_tree(net.horizon, ev, 0.5);
    let l12 = net.flat_index(Component::Line(0));
    let bus3 = net.flat_index(Component::Bus(2));

    let energized = vec![1.0; net.n_components()];
    let stage = StageModel::build_node(&net, &tree, child, &energized, []).unwrap();
    let sol = stage.solution(&solve(&stage));
    let nu = sol.nu.unwrap();
    assert!(nu[l12] > 0.5 && nu[bus3] > 0.5);
    assert!(sol.z[bus3].iter().all(|v| *v < 0.5));

    let mut off = energized.clone();
    off[l12] = 0.0;
    let mut stage = stage;
    stage.set_anchor(&off).unwrap();
    let out = solve(&stage);
    let sol = stage.solution(&out);
    assert!(sol.nu.unwrap().iter().all(|v| *v < 0.5));
    // d2 is stranded for periods 2..=4; nothing else is lost
    assert!((out.objective - 3.0 * 100.0).abs() < 1e-5);
}

#[test]
fn root_sees_disruption_children() {
    let net = toy3();
    let (tree, child) = one_event_tree(net.horizon, fault(3, "line:l12", &[]), 0.25);
    let mut stage = StageModel::build_root(&net, &tree, &no_fairness(), []).unwrap();
    assert_eq!(stage.children.len(), 1);
    let term = &stage.children[0];
    assert_eq!(term.node, child);
    assert_eq!(term.state_cols[0], stage.vars.z[0][1]);
    assert!((stage.model.col(term.value_var).cost - 0.25).abs() < 1e-15);
    // shed in periods >= onset is only paid on the nominal branch
    assert!((stage.model.col(stage.vars.s[0][2]).cost - 100.0 * 0.75).abs() < 1e-12);
    assert!((stage.model.col(stage.vars.s[0][1]).cost - 100.0).abs() < 1e-12);

    stage.attach_cut(&cut(child, net.n_components())).unwrap();
    let sol = stage.solution(&solve(&stage));
    assert!((sol.value_estimates[0].1 - 7.0).abs() < 1e-7);
    assert!((sol.objective - sol.stage_cost - 0.25 * 7.0).abs() < 1e-7);
}

#[test]
fn cut_attachment_errors() {
    let net = toy3();
    let (tree, child) = one_event_tree(net.horizon, fault(3, "line:l12", &[]), 0.25);
    let mut stage = StageModel::build_root(&net, &tree, &no_fairness(), []).unwrap();
    assert!(matches!(stage.attach_cut(&cut(NodeId(77), 6)), Err(Error::NotAChild(NodeId(77)))));
    assert!(matches!(
        stage.attach_cut(&cut(child, 4)),
        Err(Error::DimensionMismatch { expected: 6, got: 4 })
    ));
    assert_eq!(stage.n_cuts(), 0);
}

#[test]
fn anchor_validation() {
    let net = toy3();
    let (tree, child) = one_event_tree(net.horizon, fault(3, "line:l12", &[]), 0.25);
    assert!(matches!(
        StageModel::build_node(&net, &tree, child, &[1.0; 3], []),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(matches!(
        StageModel::build_node(&net, &tree, child, &[1.0, 1.0, 2.0, 1.0, 1.0, 1.0], []),
        Err(Error::InvalidAnchor(_))
    ));
    let mut root = StageModel::build_root(&net, &tree, &no_fairness(), []).unwrap();
    assert!(root.set_anchor(&[1.0; 6]).is_err());
    assert!(StageModel::build_node(&net, &tree, tree.root, &[1.0; 6], []).is_err());
}

#[test]
fn relaxation_bounds_the_mip() {
    let net = toy3();
    let (tree, child) = one_event_tree(net.horizon, fault(2, "line:l12", &["bus:2", "gen:g1"]), 0.5);
    let stage = StageModel::build_node(&net, &tree, child, &[1.0; 6], []).unwrap();
    let relaxed = stage.relax_binaries();
    assert!(!relaxed.model.is_mip());
    let lp = crate::backend::solve_lp(&*backend(), &relaxed.model, &exact()).unwrap();
    let mip = solve(&stage);
    assert!(lp.objective <= mip.objective + 1e-7);
}

#[test]
fn large_load_sets_use_envelope_rows() {
    let mut net = toy3();
    for k in 0..(PAIRWISE_FAIRNESS_LIMIT as u32) {
        net.loads.push(crate::grid::Load {
            id: format!("x{k}"),
            bus: "3".into(),
            demand_by_period: vec![0.1; 4],
            priority: None,
        });
    }
    net.finalize().unwrap();
    let tree = ScenarioTree::nominal_only(net.horizon);
    let stage = StageModel::build_root(&net, &tree, &FormulationOptions::default(), []).unwrap();
    assert!(stage.model.rows.iter().any(|r| r.name == "fair_spread"));
    assert!(!stage.model.rows.iter().any(|r| r.name.starts_with("fair[")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Any inherited binary state admits a feasible recourse.
    #[test]
    fn every_binary_anchor_is_feasible(bits in proptest::collection::vec(0u8..2, 6), onset in 2usize..=4) {
        let net = toy3();
        let (tree, child) = one_event_tree(net.horizon, fault(onset, "bus:1", &["line:l13"]), 0.3);
        let anchor: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        let stage = StageModel::build_node(&net, &tree, child, &anchor, []).unwrap();
        let out = solve(&stage);
        prop_assert_eq!(out.status, SolveStatus::Optimal);
        let sol = stage.solution(&out);
        for c in 0..6 {
            if anchor[c] == 0.0 {
                prop_assert!(sol.z[c].iter().all(|v| *v < 0.5));
            }
        }
        prop_assert!(stage.model.max_violation(&out.primal) < 1e-6);
    }
}
