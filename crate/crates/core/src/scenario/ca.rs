//! Stochastic lattice fire model used to sample disruption paths.
//!
//! The landscape is an `nx x ny` grid of cells. Fire spreads from a burning
//! cell to each of its eight neighbours once per period with probability
//! `spread_prob * (1 + bias * cos(angle to wind))`, clamped to `[0, 1]`; a
//! bias of zero is isotropic. Every grid component sits in one cell.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DisruptionEvent, SamplePath};
use crate::error::{Error, Result};
use crate::grid::PowerNetwork;

pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wind {
    /// Direction the wind blows towards, degrees counter-clockwise from +x.
    pub direction_deg: f64,
    pub bias: f64,
}

impl Default for Wind {
    fn default() -> Self {
        Wind { direction_deg: 0.0, bias: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaParams {
    pub grid_cells: (usize, usize),
    pub cell_km: f64,
    /// Exogenous ignition probability per cell and period.
    pub ignition_rate: f64,
    pub spread_prob: f64,
    #[serde(default)]
    pub wind: Wind,
    /// Fault probability per component and period.
    pub fault_rate: f64,
    /// Cell of each component, keyed by component key.
    #[serde(default)]
    pub component_cells: BTreeMap<String, Cell>,
}

const NEIGHBOURS: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

impl CaParams {
    /// Default rates with an automatic layout of `network` on a `nx x ny`
    /// grid: buses on a regular lattice in index order, generators on their
    /// bus cell, lines on the cell midway between their end buses.
    pub fn for_network(network: &PowerNetwork, grid_cells: (usize, usize)) -> Self {
        let mut params = CaParams {
            grid_cells,
            cell_km: 5.0,
            ignition_rate: 2e-4,
            spread_prob: 0.3,
            wind: Wind::default(),
            fault_rate: 1e-3,
            component_cells: BTreeMap::new(),
        };
        params.component_cells = auto_layout(network, grid_cells);
        params
    }

    pub fn validate(&self, network: &PowerNetwork) -> Result<()> {
        let (nx, ny) = self.grid_cells;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParams("grid must have at least one cell".into()));
        }
        for (name, p) in [
            ("ignition_rate", self.ignition_rate),
            ("spread_prob", self.spread_prob),
            ("fault_rate", self.fault_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParams(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.wind.bias >= 0.0 && self.wind.bias.is_finite()) {
            return Err(Error::InvalidParams(format!("wind bias {} must be >= 0", self.wind.bias)));
        }
        if !self.wind.direction_deg.is_finite() {
            return Err(Error::InvalidParams("wind direction must be finite".into()));
        }
        for c in network.components() {
            let key = network.component_key(c);
            match self.component_cells.get(&key) {
                None => {
                    return Err(Error::InvalidParams(format!("component {key} has no cell")));
                }
                Some(&(x, y)) if x >= nx || y >= ny => {
                    return Err(Error::InvalidParams(format!(
                        "component {key} sits at ({x}, {y}) outside the {nx}x{ny} grid"
                    )));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    fn directional_prob(&self, dx: isize, dy: isize) -> f64 {
        let theta = self.wind.direction_deg.to_radians();
        let norm = ((dx * dx + dy * dy) as f64).sqrt();
        let cos = (dx as f64 * theta.cos() + dy as f64 * theta.sin()) / norm;
        (self.spread_prob * (1.0 + self.wind.bias * cos)).clamp(0.0, 1.0)
    }

    /// Cells burning after `steps` periods of spread from `origin`.
    pub fn burn<R: Rng>(&self, origin: Cell, steps: usize, rng: &mut R) -> BTreeSet<Cell> {
        let (nx, ny) = self.grid_cells;
        let mut burned = BTreeSet::from([origin]);
        let mut front = vec![origin];
        for _ in 0..steps {
            let mut next = Vec::new();
            for &(x, y) in &front {
                for (dx, dy) in NEIGHBOURS {
                    let (cx, cy) = (x as isize + dx, y as isize + dy);
                    if cx < 0 || cy < 0 || cx >= nx as isize || cy >= ny as isize {
                        continue;
                    }
                    let cell = (cx as usize, cy as usize);
                    let p = self.directional_prob(dx, dy);
                    let lit = rng.gen::<f64>() < p;
                    if lit && !burned.contains(&cell) {
                        burned.insert(cell);
                        next.push(cell);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            front = next;
        }
        burned
    }
}

fn auto_layout(network: &PowerNetwork, (nx, ny): (usize, usize)) -> BTreeMap<String, Cell> {
    let nb = network.n_buses().max(1);
    let per_row = (nb as f64).sqrt().ceil() as usize;
    let rows = nb.div_ceil(per_row);
    let place = |k: usize, slots: usize, cells: usize| -> usize {
        // centre of the k-th of `slots` equal strips
        (((2 * k + 1) * cells) / (2 * slots)).min(cells - 1)
    };
    let bus_cell: Vec<Cell> = (0..network.n_buses())
        .map(|b| (place(b % per_row, per_row, nx), place(b / per_row, rows, ny)))
        .collect();
    let mut out = BTreeMap::new();
    for c in network.components() {
        let cell = match c {
            crate::grid::Component::Bus(b) => bus_cell[b],
            crate::grid::Component::Gen(g) => bus_cell[network.gen_bus(g)],
            crate::grid::Component::Line(l) => {
                let (f, t) = network.line_ends(l);
                let (a, b) = (bus_cell[f], bus_cell[t]);
                ((a.0 + b.0) / 2, (a.1 + b.1) / 2)
            }
        };
        out.insert(network.component_key(c), cell);
    }
    out
}

/// Components grouped by cell, keyed in flat component order.
struct Occupancy {
    by_cell: BTreeMap<Cell, Vec<String>>,
    keys: Vec<String>,
    cells: Vec<Cell>,
}

impl Occupancy {
    fn new(network: &PowerNetwork, params: &CaParams) -> Self {
        let mut by_cell: BTreeMap<Cell, Vec<String>> = BTreeMap::new();
        let mut keys = Vec::new();
        let mut cells = Vec::new();
        for c in network.components() {
            let key = network.component_key(c);
            let cell = params.component_cells[&key];
            by_cell.entry(cell).or_default().push(key.clone());
            keys.push(key);
            cells.push(cell);
        }
        Occupancy { by_cell, keys, cells }
    }

    fn components_in<'a>(&'a self, cells: &'a BTreeSet<Cell>) -> impl Iterator<Item = &'a String> {
        cells.iter().filter_map(|c| self.by_cell.get(c)).flatten()
    }
}

/// Components reached by a fire started at `component`'s cell at period
/// `onset`, spreading for the `T - onset` remaining periods. Always contains
/// `component` itself.
pub fn spread_set<R: Rng>(
    network: &PowerNetwork,
    params: &CaParams,
    component: &str,
    onset: usize,
    rng: &mut R,
) -> Result<BTreeSet<String>> {
    network.resolve_key(component)?;
    let origin = *params
        .component_cells
        .get(component)
        .ok_or_else(|| Error::InvalidParams(format!("component {component} has no cell")))?;
    let steps = network.horizon.saturating_sub(onset);
    let burned = params.burn(origin, steps, rng);
    let occupancy = Occupancy::new(network, params);
    let mut set: BTreeSet<String> = occupancy.components_in(&burned).cloned().collect();
    set.insert(component.to_string());
    Ok(set)
}

/// Samples `n` disruption paths of at most `max_disruptions` events each.
///
/// Sample `k` draws from its own ChaCha stream derived from `seed`, so the
/// output is identical for any thread count.
pub fn simulate_paths(
    network: &PowerNetwork,
    params: &CaParams,
    n: usize,
    seed: u64,
    max_disruptions: usize,
) -> Result<Vec<SamplePath>> {
    if n == 0 {
        return Err(Error::InvalidParams("sample count must be at least 1".into()));
    }
    if max_disruptions == 0 {
        return Err(Error::InvalidParams("max_disruptions must be at least 1".into()));
    }
    params.validate(network)?;
    let occupancy = Occupancy::new(network, params);
    let paths = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            sample_path(network, params, &occupancy, max_disruptions, &mut rng)
        })
        .collect();
    Ok(paths)
}

fn sample_path(
    network: &PowerNetwork,
    params: &CaParams,
    occupancy: &Occupancy,
    max_disruptions: usize,
    rng: &mut ChaCha8Rng,
) -> SamplePath {
    let horizon = network.horizon;
    let (nx, ny) = params.grid_cells;
    let mut events = Vec::new();
    for onset in 2..=horizon {
        if events.len() >= max_disruptions {
            break;
        }
        let faulted: Vec<usize> = (0..occupancy.keys.len())
            .filter(|_| rng.gen::<f64>() < params.fault_rate)
            .collect();
        let ignitions: Vec<Cell> = (0..ny)
            .flat_map(|y| (0..nx).map(move |x| (x, y)))
            .filter(|_| rng.gen::<f64>() < params.ignition_rate)
            .collect();
        if faulted.is_empty() && ignitions.is_empty() {
            continue;
        }
        let steps = horizon - onset;
        let mut ev = DisruptionEvent { onset, ..Default::default() };
        for k in faulted {
            let key = occupancy.keys[k].clone();
            let burned = params.burn(occupancy.cells[k], steps, rng);
            let mut set: BTreeSet<String> = occupancy.components_in(&burned).cloned().collect();
            set.insert(key.clone());
            ev.fault_flags.insert(key.clone(), 1);
            ev.spread_sets.insert(key, set);
        }
        let mut scorched = BTreeSet::new();
        for cell in ignitions {
            scorched.extend(params.burn(cell, steps, rng));
        }
        for key in occupancy.components_in(&scorched) {
            ev.exogenous_flags.insert(key.clone(), 1);
        }
        if ev.is_quiet() {
            continue;
        }
        events.push(ev);
    }
    SamplePath { events }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, Line, PowerNetwork};

    /// Buses 0..k on a 1 x k strip of cells, bus j in cell j.
    fn strip(k: usize, horizon: usize) -> (PowerNetwork, CaParams) {
        let buses = (0..k)
            .map(|j| Bus { id: j.to_string(), is_reference: j == 0 })
            .collect();
        let net = PowerNetwork::new(horizon, buses, vec![], Vec::<Line>::new(), vec![]).unwrap();
        let cells = (0..k).map(|j| (format!("bus:{j}"), (j, 0))).collect();
        let params = CaParams {
            grid_cells: (k, 1),
            cell_km: 1.0,
            ignition_rate: 0.0,
            spread_prob: 1.0,
            wind: Wind { direction_deg: 0.0, bias: 1.0 },
            fault_rate: 0.0,
            component_cells: cells,
        };
        (net, params)
    }

    #[test]
    fn no_randomness_source_gives_nominal_paths() {
        let (net, params) = strip(5, 6);
        let paths = simulate_paths(&net, &params, 20, 3, 2).unwrap();
        assert_eq!(paths.len(), 20);
        assert!(paths.iter().all(|p| p.events.is_empty()));
    }

    #[test]
    fn deterministic_spread_matches_flood_fill() {
        let (net, params) = strip(10, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for onset in 2..=8 {
            let set = spread_set(&net, &params, "bus:0", onset, &mut rng).unwrap();
            let reach = 8 - onset;
            // flood fill on the strip: every cell within `reach` of the origin
            let expected: BTreeSet<String> =
                (0..10).filter(|j| *j <= reach).map(|j| format!("bus:{j}")).collect();
            assert_eq!(set, expected, "onset {onset}");
        }
    }

    #[test]
    fn zero_spread_is_singleton() {
        let (net, mut params) = strip(4, 6);
        params.spread_prob = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = spread_set(&net, &params, "bus:2", 2, &mut rng).unwrap();
        assert_eq!(set, BTreeSet::from(["bus:2".to_string()]));
    }

    #[test]
    fn last_period_keeps_fire_in_its_cell() {
        let (net, mut params) = strip(4, 6);
        params.component_cells.insert("bus:1".into(), (2, 0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = spread_set(&net, &params, "bus:2", 6, &mut rng).unwrap();
        assert_eq!(set, BTreeSet::from(["bus:1".to_string(), "bus:2".to_string()]));
    }

    #[test]
    fn rejects_bad_probabilities() {
        let (net, mut params) = strip(3, 4);
        params.fault_rate = 1.5;
        assert!(matches!(simulate_paths(&net, &params, 1, 0, 1), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn same_seed_same_paths() {
        let (net, mut params) = strip(6, 6);
        params.fault_rate = 0.05;
        params.spread_prob = 0.4;
        params.ignition_rate = 0.02;
        let a = simulate_paths(&net, &params, 50, 11, 2).unwrap();
        let b = simulate_paths(&net, &params, 50, 11, 2).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().any(|p| !p.events.is_empty()));
        for p in &a {
            assert!(p.events.len() <= 2);
            assert!(p.events.windows(2).all(|w| w[0].onset < w[1].onset));
            assert!(p.events.iter().all(|e| (2..=6).contains(&e.onset)));
        }
    }
}
