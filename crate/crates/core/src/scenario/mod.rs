//! Wildfire disruption sampling and scenario trees.

mod ca;
mod tree;

pub use ca::{simulate_paths, spread_set, CaParams, Cell, Wind};
pub use tree::{
    build_tree, load_tree, save_tree, Branch, DisruptionEvent, DisruptionRealization, NodeId,
    ResolvedDisruption, SamplePath, ScenarioTree, TreeStats, PROBABILITY_TOLERANCE,
};
