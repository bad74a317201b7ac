use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use psps_core::engine::EngineConfig;
use psps_core::formulation::FormulationOptions;
use psps_core::grid::{load_network, PowerNetwork};
use psps_core::scenario::{build_tree, load_tree, simulate_paths, CaParams, Cell, ScenarioTree, Wind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Network JSON, relative to the config file.
    pub network: PathBuf,
    pub scenarios: ScenarioSource,
    /// Out-of-sample tree; evaluation is skipped when absent.
    #[serde(default)]
    pub testing: Option<ScenarioSource>,
    #[serde(default)]
    pub options: FormulationOptions,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioSource {
    Generate(GenerateSpec),
    Load { tree_path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_depth")]
    pub depth_limit: usize,
    #[serde(default = "default_grid")]
    pub grid_cells: (usize, usize),
    #[serde(default)]
    pub cell_km: Option<f64>,
    #[serde(default)]
    pub ignition_rate: Option<f64>,
    #[serde(default)]
    pub spread_prob: Option<f64>,
    #[serde(default)]
    pub fault_rate: Option<f64>,
    #[serde(default)]
    pub wind: Option<Wind>,
    /// Overrides the automatic placement of components on the grid.
    #[serde(default)]
    pub component_cells: Option<BTreeMap<String, Cell>>,
}

fn default_depth() -> usize {
    2
}

fn default_grid() -> (usize, usize) {
    (10, 10)
}

impl GenerateSpec {
    pub fn ca_params(&self, network: &PowerNetwork) -> CaParams {
        let mut p = CaParams::for_network(network, self.grid_cells);
        if let Some(v) = self.cell_km {
            p.cell_km = v;
        }
        if let Some(v) = self.ignition_rate {
            p.ignition_rate = v;
        }
        if let Some(v) = self.spread_prob {
            p.spread_prob = v;
        }
        if let Some(v) = self.fault_rate {
            p.fault_rate = v;
        }
        if let Some(w) = self.wind {
            p.wind = w;
        }
        if let Some(cells) = &self.component_cells {
            p.component_cells = cells.clone();
        }
        p
    }

    pub fn tree(&self, network: &PowerNetwork, seed: u64) -> psps_core::Result<ScenarioTree> {
        let params = self.ca_params(network);
        let paths = simulate_paths(network, &params, self.samples, seed, self.depth_limit)?;
        build_tree(&paths, network.horizon, self.depth_limit)
    }
}

impl ScenarioSource {
    /// `seed` overrides the configured generator seed.
    pub fn resolve(&self, base: &Path, network: &PowerNetwork, seed: Option<u64>) -> Result<ScenarioTree> {
        let tree = match self {
            ScenarioSource::Generate(spec) => spec.tree(network, seed.unwrap_or(spec.seed))?,
            ScenarioSource::Load { tree_path } => {
                let path = base.join(tree_path);
                load_tree(&path).with_context(|| format!("loading scenario tree {}", path.display()))?
            }
        };
        tree.validate_against(network)?;
        Ok(tree)
    }
}

pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
    pub network: PowerNetwork,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| psps_core::Error::Parse(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let network = load_network(base.join(&config.network))?;
    config.options.validate()?;
    config.engine.validate()?;
    Ok(Loaded { config, base, network })
}
