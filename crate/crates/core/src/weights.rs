//! Context weights for ETS members.
//!
//! For a node `i` and the target `t` of its graph segment, the weight is the
//! mean of four terms in [0, 1]:
//!
//! * distance: `1 / distance(i, t)` with indirect edges costing 2;
//! * levels: `depth(i) / max_depth` in the dominator tree;
//! * successors: the share of `i`'s successors that can still reach `t`;
//! * probability: `1 / number of dominator-tree children of i`.
//!
//! Targets themselves always weigh 1.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::ets::{AnalyzedGraph, EnhancedTargetSequence};
use crate::graph::{GraphKind, Membership, ProgramGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeMetrics {
    /// Edge-weighted shortest path length, 0 when there is no path.
    pub distance_to_target: u32,
    pub level: u32,
    pub max_levels: u32,
    pub rel_succ: u32,
    pub succ: u32,
    pub domsucc: u32,
}

/// Shortest path from `from` to `to` where indirect edges cost 2 and direct
/// edges cost 1. Returns 0 when `to` is unreachable or `from == to`.
pub fn shortest_distance(graph: &ProgramGraph, from: &str, to: &str) -> u32 {
    let (Some(s), Some(t)) = (graph.index_of(from), graph.index_of(to)) else {
        return 0;
    };
    if s == t {
        return 0;
    }
    let succ = graph.successors();
    let mut dist = vec![u32::MAX; graph.len()];
    let mut heap = BinaryHeap::new();
    dist[s] = 0;
    heap.push(Reverse((0u32, s)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if v == t {
            return d;
        }
        if d > dist[v] {
            continue;
        }
        for &(w, cost) in &succ[v] {
            let nd = d + cost;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(Reverse((nd, w)));
            }
        }
    }
    0
}

/// Nodes from which `to` is reachable, `to` included.
fn reaches(graph: &ProgramGraph, to: usize) -> Vec<bool> {
    let pred = graph.predecessors();
    let mut seen = vec![false; graph.len()];
    seen[to] = true;
    let mut stack = vec![to];
    while let Some(v) = stack.pop() {
        for &p in &pred[v] {
            if !seen[p] {
                seen[p] = true;
                stack.push(p);
            }
        }
    }
    seen
}

/// Distinct successors of `i` that are `t` or can reach `t`.
pub fn relevant_successors(graph: &ProgramGraph, i: &str, t: &str) -> u32 {
    let Some(ti) = graph.index_of(t) else {
        return 0;
    };
    let can_reach = reaches(graph, ti);
    graph
        .distinct_successors(i)
        .into_iter()
        .filter(|s| can_reach[graph.index_of(s).expect("edge endpoint exists")])
        .count() as u32
}

pub fn node_metrics(ag: &AnalyzedGraph, i: &str, t: &str) -> NodeMetrics {
    NodeMetrics {
        distance_to_target: shortest_distance(&ag.graph, i, t),
        level: ag.tree.depth(i).unwrap_or(1),
        max_levels: ag.tree.max_depth().max(1),
        rel_succ: relevant_successors(&ag.graph, i, t),
        succ: ag.graph.distinct_successors(i).len() as u32,
        domsucc: ag.tree.child_count(i) as u32,
    }
}

/// Mean of the four proximity terms. A missing path contributes 0 distance,
/// a node without successors 0 successors, and a dominator-tree leaf a
/// probability of 1.
pub fn context_weight(m: &NodeMetrics) -> f64 {
    let distance = if m.distance_to_target == 0 {
        0.0
    } else {
        1.0 / f64::from(m.distance_to_target)
    };
    let levels = f64::from(m.level) / f64::from(m.max_levels.max(1));
    let successors = if m.succ == 0 {
        0.0
    } else {
        f64::from(m.rel_succ) / f64::from(m.succ)
    };
    let probability = if m.domsucc == 0 {
        1.0
    } else {
        1.0 / f64::from(m.domsucc)
    };
    let w = (distance + levels + successors + probability) / 4.0;
    w.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Weight of one element of `ets` within `ag`, whose segment target is
/// `target`.
fn element_weight(ag: &AnalyzedGraph, node: &str, target: &str, membership: Membership) -> f64 {
    match membership {
        Membership::TargetPoint => 1.0,
        Membership::Intermediate => context_weight(&node_metrics(ag, node, target)),
    }
}

/// Computes weights for every ETS element and records memberships and weights
/// on the graph nodes. Previous annotations are cleared first, so repeated
/// calls give the same result.
pub fn annotate_graphs(
    etss: &mut [EnhancedTargetSequence],
    cg: &mut AnalyzedGraph,
    cfgs: &mut BTreeMap<String, AnalyzedGraph>,
) {
    cg.graph.clear_annotations();
    for ag in cfgs.values_mut() {
        ag.graph.clear_annotations();
    }
    for ets in etss.iter_mut() {
        for el in &mut ets.elements {
            let (ag, target) = match &el.graph {
                GraphKind::CallGraph => (&mut *cg, ets.cg_target.as_str()),
                GraphKind::ControlFlow(f) => (
                    cfgs.get_mut(f).expect("CFG of ETS function is loaded"),
                    ets.cfg_target.as_str(),
                ),
            };
            el.weight = element_weight(ag, &el.node, target, el.membership);
            let node = ag
                .graph
                .node_mut(&el.node)
                .expect("ETS element exists in its graph");
            node.memberships.insert(ets.id, el.membership);
            node.weights.insert(ets.id, el.weight);
        }
    }
}
