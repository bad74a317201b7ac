//! Power-network data model, JSON ingestion and structural validation.
//!
//! Components are addressed two ways: by [`Component`] (kind + position in the
//! owning vector) inside the optimization code, and by a string key of the form
//! `bus:<id>`, `gen:<id>` or `line:<id>` in scenario files. The flat component
//! order used for state vectors is buses, then generators, then lines.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default damage costs for components without an explicit value.
pub const WIND_DAMAGE_COST: f64 = 50.0;
pub const THERMAL_DAMAGE_COST: f64 = 1000.0;
pub const NUCLEAR_DAMAGE_COST: f64 = 2500.0;
pub const BUS_DAMAGE_COST: f64 = 50.0;
/// Line damage cost per km of line length.
pub const LINE_DAMAGE_COST_PER_KM: f64 = 0.285;
/// Admissible range for load priorities.
/// System base used to convert per-unit susceptances to MW per radian.
pub const BASE_MVA: f64 = 100.0;

pub const MIN_PRIORITY: f64 = 50.0;
pub const MAX_PRIORITY: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(default)]
    pub is_reference: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelType {
    Wind,
    Solar,
    Hydro,
    #[default]
    Thermal,
    Nuclear,
}

impl FuelType {
    pub fn default_damage_cost(self) -> f64 {
        match self {
            FuelType::Wind => WIND_DAMAGE_COST,
            FuelType::Nuclear => NUCLEAR_DAMAGE_COST,
            // Only wind, thermal and nuclear have published figures; other
            // dispatchable plants are priced like thermal units.
            FuelType::Solar | FuelType::Hydro | FuelType::Thermal => THERMAL_DAMAGE_COST,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    #[serde(default)]
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damage_cost: Option<f64>,
    #[serde(default)]
    pub fuel: FuelType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Magnitude of the series susceptance, per unit on a 100 MVA base.
    pub susceptance_mag: f64,
    /// MW.
    pub thermal_limit: f64,
    /// km.
    #[serde(default)]
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damage_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: String,
    pub bus: String,
    /// MW per period, one entry per period of the horizon.
    pub demand_by_period: Vec<f64>,
    /// Cost per unit of shed fraction per period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<f64>,
}

fn default_big_m_angle() -> f64 {
    2.0 * std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerNetwork {
    #[serde(rename = "horizon_T")]
    pub horizon: usize,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub lines: Vec<Line>,
    #[serde(default)]
    pub loads: Vec<Load>,
    /// Explicit bus damage costs keyed by bus id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bus_damage_cost: BTreeMap<String, f64>,
    /// Angle big-M (radians); the lower big-M is its negation.
    #[serde(default = "default_big_m_angle")]
    pub big_m_angle: f64,
    #[serde(skip)]
    index: NetworkIndex,
}

/// One grid component in its kind-local numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Bus(usize),
    Gen(usize),
    Line(usize),
}

#[derive(Debug, Clone, Default, PartialEq)]
struct NetworkIndex {
    bus_pos: HashMap<String, usize>,
    key_pos: HashMap<String, usize>,
    bus_loads: Vec<Vec<usize>>,
    bus_gens: Vec<Vec<usize>>,
    bus_lines: Vec<Vec<usize>>,
    line_ends: Vec<(usize, usize)>,
    gen_bus: Vec<usize>,
    load_bus: Vec<usize>,
}

/// Loads, generators and lines attached to one bus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incidence {
    pub loads: Vec<usize>,
    pub generators: Vec<usize>,
    pub lines: Vec<usize>,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Bus(i) => write!(f, "bus#{i}"),
            Component::Gen(i) => write!(f, "gen#{i}"),
            Component::Line(i) => write!(f, "line#{i}"),
        }
    }
}

impl PowerNetwork {
    /// Assembles and validates a network from its parts.
    pub fn new(
        horizon: usize,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        lines: Vec<Line>,
        loads: Vec<Load>,
    ) -> Result<Self> {
        let mut net = PowerNetwork {
            horizon,
            buses,
            generators,
            lines,
            loads,
            bus_damage_cost: BTreeMap::new(),
            big_m_angle: default_big_m_angle(),
            index: NetworkIndex::default(),
        };
        net.finalize()?;
        Ok(net)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut net: PowerNetwork =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        net.finalize()?;
        Ok(net)
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    /// Validates and builds the lookup tables. Must be called after any
    /// structural mutation of the public fields.
    pub fn finalize(&mut self) -> Result<()> {
        self.validate()?;
        self.index = self.build_index();
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.horizon == 0 {
            return fail("horizon_T must be at least 1".into());
        }
        if !(self.big_m_angle.is_finite() && self.big_m_angle > 0.0) {
            return fail(format!("big_m_angle must be positive, got {}", self.big_m_angle));
        }
        let mut bus_ids = HashSet::new();
        for bus in &self.buses {
            if !bus_ids.insert(bus.id.as_str()) {
                return fail(format!("duplicate bus id {:?}", bus.id));
            }
        }
        let refs = self.buses.iter().filter(|b| b.is_reference).count();
        if refs != 1 {
            return fail(format!("expected exactly one reference bus, found {refs}"));
        }
        let check_bus = |owner: &str, bus: &str| -> Result<()> {
            if bus_ids.contains(bus) {
                Ok(())
            } else {
                Err(Error::Validation(format!("{owner} references unknown bus {bus:?}")))
            }
        };
        let mut ids = HashSet::new();
        for g in &self.generators {
            if !ids.insert(g.id.as_str()) {
                return fail(format!("duplicate generator id {:?}", g.id));
            }
            check_bus(&format!("generator {:?}", g.id), &g.bus)?;
            if !(g.p_min >= 0.0 && g.p_min <= g.p_max && g.p_max.is_finite()) {
                return fail(format!(
                    "generator {:?} needs 0 <= p_min <= p_max, got [{}, {}]",
                    g.id, g.p_min, g.p_max
                ));
            }
            check_cost(&g.id, g.damage_cost)?;
        }
        ids.clear();
        for l in &self.lines {
            if !ids.insert(l.id.as_str()) {
                return fail(format!("duplicate line id {:?}", l.id));
            }
            check_bus(&format!("line {:?}", l.id), &l.from_bus)?;
            check_bus(&format!("line {:?}", l.id), &l.to_bus)?;
            if l.from_bus == l.to_bus {
                return fail(format!("line {:?} is a self-loop", l.id));
            }
            if !(l.susceptance_mag > 0.0 && l.susceptance_mag.is_finite()) {
                return fail(format!("line {:?} needs susceptance_mag > 0", l.id));
            }
            if !(l.thermal_limit > 0.0 && l.thermal_limit.is_finite()) {
                return fail(format!("line {:?} needs thermal_limit > 0", l.id));
            }
            if !(l.length >= 0.0 && l.length.is_finite()) {
                return fail(format!("line {:?} has invalid length {}", l.id, l.length));
            }
            check_cost(&l.id, l.damage_cost)?;
        }
        ids.clear();
        for d in &self.loads {
            if !ids.insert(d.id.as_str()) {
                return fail(format!("duplicate load id {:?}", d.id));
            }
            check_bus(&format!("load {:?}", d.id), &d.bus)?;
            if d.demand_by_period.len() != self.horizon {
                return fail(format!(
                    "load {:?} has {} demand entries, horizon is {}",
                    d.id,
                    d.demand_by_period.len(),
                    self.horizon
                ));
            }
            if d.demand_by_period.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return fail(format!("load {:?} has a negative or non-finite demand", d.id));
            }
            if let Some(w) = d.priority {
                if !(w > 0.0 && w.is_finite()) {
                    return fail(format!("load {:?} needs priority > 0", d.id));
                }
            }
        }
        for (bus, cost) in &self.bus_damage_cost {
            check_bus("bus_damage_cost", bus)?;
            check_cost(bus, Some(*cost))?;
        }
        Ok(())
    }

    fn build_index(&self) -> NetworkIndex {
        let bus_pos: HashMap<String, usize> =
            self.buses.iter().enumerate().map(|(i, b)| (b.id.clone(), i)).collect();
        let nb = self.buses.len();
        let mut idx = NetworkIndex {
            bus_loads: vec![Vec::new(); nb],
            bus_gens: vec![Vec::new(); nb],
            bus_lines: vec![Vec::new(); nb],
            ..Default::default()
        };
        for (k, g) in self.generators.iter().enumerate() {
            let b = bus_pos[&g.bus];
            idx.bus_gens[b].push(k);
            idx.gen_bus.push(b);
        }
        for (k, d) in self.loads.iter().enumerate() {
            let b = bus_pos[&d.bus];
            idx.bus_loads[b].push(k);
            idx.load_bus.push(b);
        }
        for (k, l) in self.lines.iter().enumerate() {
            let (f, t) = (bus_pos[&l.from_bus], bus_pos[&l.to_bus]);
            idx.bus_lines[f].push(k);
            idx.bus_lines[t].push(k);
            idx.line_ends.push((f, t));
        }
        let mut key_pos = HashMap::new();
        for (flat, c) in self.components().enumerate() {
            key_pos.insert(self.component_key(c), flat);
        }
        idx.key_pos = key_pos;
        idx.bus_pos = bus_pos;
        idx
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_components(&self) -> usize {
        self.buses.len() + self.generators.len() + self.lines.len()
    }

    /// All components in flat order.
    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        (0..self.buses.len())
            .map(Component::Bus)
            .chain((0..self.generators.len()).map(Component::Gen))
            .chain((0..self.lines.len()).map(Component::Line))
    }

    pub fn flat_index(&self, c: Component) -> usize {
        match c {
            Component::Bus(i) => i,
            Component::Gen(i) => self.buses.len() + i,
            Component::Line(i) => self.buses.len() + self.generators.len() + i,
        }
    }

    pub fn component_at(&self, flat: usize) -> Component {
        let (nb, ng) = (self.buses.len(), self.generators.len());
        if flat < nb {
            Component::Bus(flat)
        } else if flat < nb + ng {
            Component::Gen(flat - nb)
        } else {
            Component::Line(flat - nb - ng)
        }
    }

    /// Scenario-file key of a component, e.g. `line:l12`.
    pub fn component_key(&self, c: Component) -> String {
        match c {
            Component::Bus(i) => format!("bus:{}", self.buses[i].id),
            Component::Gen(i) => format!("gen:{}", self.generators[i].id),
            Component::Line(i) => format!("line:{}", self.lines[i].id),
        }
    }

    /// Flat index of a component key.
    pub fn resolve_key(&self, key: &str) -> Result<usize> {
        self.index
            .key_pos
            .get(key)
            .copied()
            .ok_or_else(|| Error::UnknownComponent(key.to_string()))
    }

    pub fn bus_index(&self, id: &str) -> Result<usize> {
        self.index
            .bus_pos
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownBus(id.to_string()))
    }

    pub fn reference_bus(&self) -> usize {
        self.buses.iter().position(|b| b.is_reference).expect("validated")
    }

    /// Loads, generators and lines connected to a bus.
    pub fn incidence(&self, bus_id: &str) -> Result<Incidence> {
        let b = self.bus_index(bus_id)?;
        Ok(Incidence {
            loads: self.index.bus_loads[b].clone(),
            generators: self.index.bus_gens[b].clone(),
            lines: self.index.bus_lines[b].clone(),
        })
    }

    pub(crate) fn bus_loads(&self, b: usize) -> &[usize] {
        &self.index.bus_loads[b]
    }

    pub(crate) fn bus_gens(&self, b: usize) -> &[usize] {
        &self.index.bus_gens[b]
    }

    pub(crate) fn bus_lines(&self, b: usize) -> &[usize] {
        &self.index.bus_lines[b]
    }

    /// (from, to) bus positions of a line.
    pub fn line_ends(&self, l: usize) -> (usize, usize) {
        self.index.line_ends[l]
    }

    pub fn gen_bus(&self, g: usize) -> usize {
        self.index.gen_bus[g]
    }

    pub fn load_bus(&self, d: usize) -> usize {
        self.index.load_bus[d]
    }

    /// Damage cost of a component: the explicit value, else the default.
    /// Line susceptance in MW per radian.
    pub fn line_susceptance_mw(&self, l: usize) -> f64 {
        self.lines[l].susceptance_mag * BASE_MVA
    }

    pub fn damage_cost(&self, c: Component) -> f64 {
        match c {
            Component::Bus(i) => self
                .bus_damage_cost
                .get(&self.buses[i].id)
                .copied()
                .unwrap_or(BUS_DAMAGE_COST),
            Component::Gen(i) => {
                let g = &self.generators[i];
                g.damage_cost.unwrap_or_else(|| g.fuel.default_damage_cost())
            }
            Component::Line(i) => {
                let l = &self.lines[i];
                l.damage_cost.unwrap_or(LINE_DAMAGE_COST_PER_KM * l.length)
            }
        }
    }

    /// Shedding priority of a load: the explicit value, else the lower end of
    /// the admissible range.
    pub fn priority(&self, d: usize) -> f64 {
        self.loads[d].priority.unwrap_or(MIN_PRIORITY)
    }

    /// Returns a copy with every missing cost field filled with its default.
    /// Missing priorities get [`MIN_PRIORITY`]; explicit values are kept.
    pub fn default_costs(&self) -> PowerNetwork {
        let mut out = self.clone();
        for b in 0..out.buses.len() {
            let cost = self.damage_cost(Component::Bus(b));
            out.bus_damage_cost.insert(out.buses[b].id.clone(), cost);
        }
        for (k, g) in out.generators.iter_mut().enumerate() {
            g.damage_cost = Some(self.damage_cost(Component::Gen(k)));
        }
        for (k, l) in out.lines.iter_mut().enumerate() {
            l.damage_cost = Some(self.damage_cost(Component::Line(k)));
        }
        for (k, d) in out.loads.iter_mut().enumerate() {
            d.priority = Some(self.priority(k));
        }
        out
    }

    pub fn total_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max).sum()
    }

    pub fn total_demand(&self, t: usize) -> f64 {
        self.loads.iter().map(|d| d.demand_by_period[t]).sum()
    }
}

fn check_cost(owner: &str, cost: Option<f64>) -> Result<()> {
    match cost {
        Some(c) if !(c >= 0.0 && c.is_finite()) => Err(Error::Validation(format!(
            "{owner:?} has an invalid damage cost {c}"
        ))),
        _ => Ok(()),
    }
}

/// Reads and validates a network JSON file.
pub fn load_network(path: impl AsRef<Path>) -> Result<PowerNetwork> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    PowerNetwork::from_json_str(&text)
}
