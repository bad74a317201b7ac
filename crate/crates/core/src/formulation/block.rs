//! Constraint blocks shared by the stage problems and the extensive form.

use std::f64::consts::PI;

use crate::backend::{Col, LinearModel};
use crate::error::Result;
use crate::grid::{Component, PowerNetwork};
use crate::scenario::{Branch, NodeId, ScenarioTree};

use super::FormulationOptions;

/// Above this many loads the pairwise fairness rows are replaced by a
/// max/min envelope with the same feasible set.
pub const PAIRWISE_FAIRNESS_LIMIT: usize = 60;

/// Column handles of one stage block. Period indices are 1-based; vectors
/// are indexed by `t - first_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageVars {
    pub first_period: usize,
    pub last_period: usize,
    /// On/off status per flat component and period.
    pub z: Vec<Vec<Col>>,
    /// Restoration indicator (1 = not yet restored); root only.
    pub r: Option<Vec<Vec<Col>>>,
    /// Shed fraction per load and period.
    pub s: Vec<Vec<Col>>,
    pub pg: Vec<Vec<Col>>,
    pub pl: Vec<Vec<Col>>,
    pub theta: Vec<Vec<Col>>,
    /// Stage damage indicator per flat component; disruption stages only.
    pub nu: Option<Vec<Col>>,
    /// Local copy of the inherited state at `first_period - 1`.
    pub copy: Option<Vec<Col>>,
}

impl StageVars {
    pub fn periods(&self) -> std::ops::RangeInclusive<usize> {
        self.first_period..=self.last_period
    }

    /// Status column of component `c` at period `t`, where
    /// `first_period - 1` refers to the inherited copy.
    pub fn state(&self, c: usize, t: usize) -> Col {
        if t + 1 == self.first_period {
            self.copy.as_ref().expect("copy variables exist only in disruption stages")[c]
        } else {
            self.z[c][t - self.first_period]
        }
    }

    pub fn state_cols(&self, t: usize) -> Vec<Col> {
        (0..self.z.len()).map(|c| self.state(c, t)).collect()
    }
}

pub(crate) enum BlockKind<'a> {
    Root(&'a FormulationOptions),
    Node,
}

/// Adds the constraints and weighted stage costs of `node` to `lm`.
///
/// Stage costs are `weight * sum_b p_b [shed(t < onset_b) + damage]` over the
/// node's branches; continuation values are left to the caller.
pub(crate) fn add_stage_block(
    lm: &mut LinearModel,
    network: &PowerNetwork,
    tree: &ScenarioTree,
    node: NodeId,
    weight: f64,
    kind: BlockKind<'_>,
) -> Result<StageVars> {
    let horizon = network.horizon;
    let first = tree.node(node).onset;
    let is_root = matches!(kind, BlockKind::Root(_));
    let branches = tree.branches(node);
    let tag = if is_root { String::new() } else { format!("{node}.") };
    let n_comp = network.n_components();
    let periods: Vec<usize> = (first..=horizon).collect();

    let mass_after = |t: usize| -> f64 {
        branches.iter().filter(|b: &&Branch| b.onset > t).map(|b| b.probability).sum()
    };

    let z: Vec<Vec<Col>> = (0..n_comp)
        .map(|c| {
            let key = network.component_key(network.component_at(c));
            periods.iter().map(|t| lm.add_binary(format!("{tag}z[{key},{t}]"), 0.0)).collect()
        })
        .collect();
    let s: Vec<Vec<Col>> = (0..network.loads.len())
        .map(|d| {
            let w = network.priority(d);
            let id = &network.loads[d].id;
            periods
                .iter()
                .map(|&t| lm.add_col(format!("{tag}s[{id},{t}]"), 0.0, 1.0, weight * w * mass_after(t)))
                .collect()
        })
        .collect();
    let pg: Vec<Vec<Col>> = network
        .generators
        .iter()
        .map(|g| {
            periods
                .iter()
                .map(|t| lm.add_col(format!("{tag}pg[{},{t}]", g.id), 0.0, g.p_max, 0.0))
                .collect()
        })
        .collect();
    let pl: Vec<Vec<Col>> = network
        .lines
        .iter()
        .map(|l| {
            periods
                .iter()
                .map(|t| {
                    lm.add_col(format!("{tag}pl[{},{t}]", l.id), -l.thermal_limit, l.thermal_limit, 0.0)
                })
                .collect()
        })
        .collect();
    let reference = network.reference_bus();
    let theta: Vec<Vec<Col>> = network
        .buses
        .iter()
        .enumerate()
        .map(|(b, bus)| {
            let (lo, hi) = if b == reference { (0.0, 0.0) } else { (-PI, PI) };
            periods.iter().map(|t| lm.add_col(format!("{tag}theta[{},{t}]", bus.id), lo, hi, 0.0)).collect()
        })
        .collect();

    let bus = |b: usize| network.flat_index(Component::Bus(b));
    let gen = |g: usize| network.flat_index(Component::Gen(g));
    let line = |l: usize| network.flat_index(Component::Line(l));

    for (k, &t) in periods.iter().enumerate() {
        for (li, l) in network.lines.iter().enumerate() {
            let (f, to) = network.line_ends(li);
            let b = network.line_susceptance_mw(li);
            let m = b * network.big_m_angle;
            let (p, zl) = (pl[li][k], z[line(li)][k]);
            // P = b (theta_to - theta_from) when energized, relaxed by M otherwise
            lm.add_le(
                format!("{tag}dc_up[{},{t}]", l.id),
                vec![(p, 1.0), (theta[f][k], b), (theta[to][k], -b), (zl, m)],
                m,
            );
            lm.add_ge(
                format!("{tag}dc_lo[{},{t}]", l.id),
                vec![(p, 1.0), (theta[f][k], b), (theta[to][k], -b), (zl, -m)],
                -m,
            );
            lm.add_le(format!("{tag}therm_up[{},{t}]", l.id), vec![(p, 1.0), (zl, -l.thermal_limit)], 0.0);
            lm.add_ge(format!("{tag}therm_lo[{},{t}]", l.id), vec![(p, 1.0), (zl, l.thermal_limit)], 0.0);
        }
        for (bi, b) in network.buses.iter().enumerate() {
            let mut coeffs: Vec<(Col, f64)> = network.bus_gens(bi).iter().map(|&g| (pg[g][k], 1.0)).collect();
            for &li in network.bus_lines(bi) {
                let (f, _) = network.line_ends(li);
                coeffs.push((pl[li][k], if f == bi { 1.0 } else { -1.0 }));
            }
            let mut demand = 0.0;
            for &d in network.bus_loads(bi) {
                let dem = network.loads[d].demand_by_period[t - 1];
                demand += dem;
                coeffs.push((s[d][k], dem));
            }
            lm.add_eq(format!("{tag}balance[{},{t}]", b.id), coeffs, demand);
        }
        for (gi, g) in network.generators.iter().enumerate() {
            let zg = z[gen(gi)][k];
            lm.add_le(format!("{tag}gen_up[{},{t}]", g.id), vec![(pg[gi][k], 1.0), (zg, -g.p_max)], 0.0);
            lm.add_ge(format!("{tag}gen_lo[{},{t}]", g.id), vec![(pg[gi][k], 1.0), (zg, -g.p_min)], 0.0);
            let zb = z[bus(network.gen_bus(gi))][k];
            lm.add_le(format!("{tag}gen_bus[{},{t}]", g.id), vec![(zg, 1.0), (zb, -1.0)], 0.0);
        }
        for (di, d) in network.loads.iter().enumerate() {
            let zb = z[bus(network.load_bus(di))][k];
            lm.add_ge(format!("{tag}load_bus[{},{t}]", d.id), vec![(s[di][k], 1.0), (zb, 1.0)], 1.0);
        }
        for (li, l) in network.lines.iter().enumerate() {
            let (f, to) = network.line_ends(li);
            let zl = z[line(li)][k];
            lm.add_le(format!("{tag}line_from[{},{t}]", l.id), vec![(zl, 1.0), (z[bus(f)][k], -1.0)], 0.0);
            lm.add_le(format!("{tag}line_to[{},{t}]", l.id), vec![(zl, 1.0), (z[bus(to)][k], -1.0)], 0.0);
        }
    }

    let mut vars = StageVars {
        first_period: first,
        last_period: horizon,
        z,
        r: None,
        s,
        pg,
        pl,
        theta,
        nu: None,
        copy: None,
    };

    match kind {
        BlockKind::Root(options) => {
            add_time_logic(lm, network, &mut vars, options.restoration);
            if options.fairness_enabled && options.beta.is_finite() {
                add_fairness(lm, network, &vars, options.beta);
            }
        }
        BlockKind::Node => add_disruption_logic(lm, network, tree, node, weight, &branches, &mut vars)?,
    }
    Ok(vars)
}

fn add_time_logic(lm: &mut LinearModel, network: &PowerNetwork, vars: &mut StageVars, restoration: bool) {
    let n = vars.z.len();
    let len = vars.z.first().map_or(0, Vec::len);
    if restoration {
        let r: Vec<Vec<Col>> = (0..n)
            .map(|c| {
                let key = network.component_key(network.component_at(c));
                vars.periods().map(|t| lm.add_binary(format!("r[{key},{t}]"), 0.0)).collect()
            })
            .collect();
        for c in 0..n {
            for k in 1..len {
                let t = vars.first_period + k;
                lm.add_ge(format!("restore_once[{c},{t}]"), vec![(r[c][k - 1], 1.0), (r[c][k], -1.0)], 0.0);
                lm.add_ge(
                    format!("restore_logic[{c},{t}]"),
                    vec![(r[c][k - 1], 1.0), (r[c][k], -1.0), (vars.z[c][k], -1.0), (vars.z[c][k - 1], 1.0)],
                    0.0,
                );
            }
        }
        vars.r = Some(r);
    } else {
        for c in 0..n {
            for k in 1..len {
                let t = vars.first_period + k;
                lm.add_ge(format!("stay_off[{c},{t}]"), vec![(vars.z[c][k - 1], 1.0), (vars.z[c][k], -1.0)], 0.0);
            }
        }
    }
}

fn add_fairness(lm: &mut LinearModel, network: &PowerNetwork, vars: &StageVars, beta: f64) {
    let horizon = network.horizon as f64;
    let cum = |d: usize| -> Vec<(Col, f64)> { vars.s[d].iter().map(|&c| (c, 1.0)).collect() };
    let nd = vars.s.len();
    if nd <= PAIRWISE_FAIRNESS_LIMIT {
        for d in 0..nd {
            for e in 0..nd {
                if d == e {
                    continue;
                }
                let mut coeffs = cum(d);
                coeffs.extend(vars.s[e].iter().map(|&c| (c, -1.0)));
                lm.add_le(format!("fair[{d},{e}]"), coeffs, beta * horizon);
            }
        }
    } else {
        let hi = lm.add_col("fair_max", 0.0, horizon, 0.0);
        let lo = lm.add_col("fair_min", 0.0, horizon, 0.0);
        for d in 0..nd {
            let mut up = cum(d);
            up.push((hi, -1.0));
            lm.add_le(format!("fair_max[{d}]"), up, 0.0);
            let mut down = cum(d);
            down.push((lo, -1.0));
            lm.add_ge(format!("fair_min[{d}]"), down, 0.0);
        }
        lm.add_le("fair_spread", vec![(hi, 1.0), (lo, -1.0)], beta * horizon);
    }
}

fn add_disruption_logic(
    lm: &mut LinearModel,
    network: &PowerNetwork,
    tree: &ScenarioTree,
    node: NodeId,
    weight: f64,
    branches: &[Branch],
    vars: &mut StageVars,
) -> Result<()> {
    let tag = format!("{node}.");
    let disruption = tree.resolve(network, node)?;
    let n = vars.z.len();
    let inherited = vars.first_period - 1;
    let total_mass: f64 = branches.iter().map(|b| b.probability).sum();
    let copy: Vec<Col> = (0..n)
        .map(|c| {
            let key = network.component_key(network.component_at(c));
            lm.add_binary(format!("{tag}zc[{key},{inherited}]"), 0.0)
        })
        .collect();
    let nu: Vec<Col> = (0..n)
        .map(|c| {
            let comp = network.component_at(c);
            let key = network.component_key(comp);
            lm.add_binary(format!("{tag}nu[{key}]"), weight * total_mass * network.damage_cost(comp))
        })
        .collect();
    for &c in &disruption.exogenous {
        lm.col_mut(nu[c]).lower = 1.0;
    }
    let len = vars.z[0].len();
    for c in 0..n {
        for k in 0..len {
            let prev = if k == 0 { copy[c] } else { vars.z[c][k - 1] };
            let t = vars.first_period + k;
            lm.add_le(format!("{tag}stay_off[{c},{t}]"), vec![(vars.z[c][k], 1.0), (prev, -1.0)], 0.0);
            lm.add_le(format!("{tag}damaged_off[{c},{t}]"), vec![(vars.z[c][k], 1.0), (nu[c], 1.0)], 1.0);
        }
    }
    for (c, affected) in &disruption.spread {
        for &k in affected {
            lm.add_ge(format!("{tag}ignite[{c}->{k}]"), vec![(nu[k], 1.0), (copy[*c], -1.0)], 0.0);
        }
    }
    vars.copy = Some(copy);
    vars.nu = Some(nu);
    Ok(())
}
