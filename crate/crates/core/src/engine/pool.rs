use std::collections::{BTreeMap, HashSet};

use crate::cuts::CutRecord;
use crate::scenario::NodeId;

/// Cuts per owning node, dropping exact duplicates.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    by_owner: BTreeMap<NodeId, Vec<CutRecord>>,
    seen: HashSet<(NodeId, Vec<u64>)>,
}

fn key(cut: &CutRecord) -> (NodeId, Vec<u64>) {
    let bits = cut
        .slope
        .iter()
        .chain(&cut.anchor)
        .chain(std::iter::once(&cut.intercept))
        .map(|v| v.to_bits())
        .collect();
    (cut.owner, bits)
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when an identical cut is already stored.
    pub fn insert(&mut self, cut: CutRecord) -> bool {
        if !self.seen.insert(key(&cut)) {
            return false;
        }
        self.by_owner.entry(cut.owner).or_default().push(cut);
        true
    }

    pub fn cuts_for(&self, owner: NodeId) -> &[CutRecord] {
        self.by_owner.get(&owner).map_or(&[], Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CutRecord> {
        self.by_owner.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// All cuts ordered by iteration, then owner.
    pub fn log(&self) -> Vec<&CutRecord> {
        let mut all: Vec<&CutRecord> = self.iter().collect();
        all.sort_by_key(|c| (c.iteration, c.owner));
        all
    }
}
