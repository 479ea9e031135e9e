//! Novelty feedback: unseen ETS traces or new coverage map slots.

use std::collections::HashSet;

pub const MAP_SIZE: usize = 1 << 16;

#[derive(Debug, Clone)]
pub struct CoverageMap(Vec<bool>);

impl Default for CoverageMap {
    fn default() -> Self {
        CoverageMap(vec![false; MAP_SIZE])
    }
}

impl CoverageMap {
    /// Marks `slots` as covered; true when at least one was new.
    pub fn merge(&mut self, slots: &[u16]) -> bool {
        let mut new = false;
        for &s in slots {
            let hit = &mut self.0[usize::from(s)];
            new |= !*hit;
            *hit = true;
        }
        new
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|h| **h).count()
    }
}

/// Every ETS trace observed so far.
#[derive(Debug, Clone, Default)]
pub struct SeenTraces(HashSet<Vec<u32>>);

impl SeenTraces {
    pub fn contains(&self, trace: &[u32]) -> bool {
        self.0.contains(trace)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// True when `trace` was never seen or the execution covered new edges. The
/// trace is remembered either way.
pub fn is_novel(seen: &mut SeenTraces, trace: &[u32], new_edges: bool) -> bool {
    let unseen = if seen.0.contains(trace) {
        false
    } else {
        seen.0.insert(trace.to_vec())
    };
    unseen || new_edges
}
