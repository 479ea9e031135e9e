//! Target-point mapping and enhanced target sequence construction.
//!
//! An ETS for a target point is the chain of dominator-tree ancestors of the
//! target function in the call graph followed by the chain of ancestors of
//! the target block in that function's CFG.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::domtree::DominatorTree;
use crate::graph::{EtsId, GraphKind, Membership, ProgramGraph, TargetPoint};

#[derive(Debug, Error, PartialEq)]
pub enum EtsError {
    #[error("target {tp_id} ({file}:{line}) unmappable: no function contains it")]
    Unmappable { tp_id: u32, file: String, line: u32 },
    #[error("target {tp_id} ({file}:{line}) is contained in several functions: {candidates:?}")]
    Ambiguous {
        tp_id: u32,
        file: String,
        line: u32,
        candidates: Vec<String>,
    },
    #[error("CFG of `{0}` has no blocks with source locations")]
    EmptyCfg(String),
    #[error(
        "target {tp_id} statically unreachable: `{node}` not reachable from the entry of {graph}"
    )]
    Unreachable {
        tp_id: u32,
        node: String,
        graph: GraphKind,
    },
}

/// A graph together with its dominator tree.
#[derive(Debug, Clone)]
pub struct AnalyzedGraph {
    pub graph: ProgramGraph,
    pub tree: DominatorTree,
}

impl AnalyzedGraph {
    pub fn new(graph: ProgramGraph) -> Self {
        let tree = DominatorTree::compute(&graph);
        AnalyzedGraph { graph, tree }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtsElement {
    pub graph: GraphKind,
    pub node: String,
    pub membership: Membership,
    /// Context weight in (0, 1]. Targets are always 1.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedTargetSequence {
    pub id: EtsId,
    pub target: TargetPoint,
    /// Function containing the target, as a call graph node id.
    pub cg_target: String,
    /// Name of that function, which also names its CFG.
    pub function: String,
    pub cfg_target: String,
    /// Call graph segment first, then the CFG segment.
    pub elements: Vec<EtsElement>,
}

impl EnhancedTargetSequence {
    pub fn cg_segment(&self) -> impl Iterator<Item = &EtsElement> {
        self.elements
            .iter()
            .filter(|e| e.graph == GraphKind::CallGraph)
    }

    pub fn cfg_segment(&self) -> impl Iterator<Item = &EtsElement> {
        self.elements
            .iter()
            .filter(|e| e.graph != GraphKind::CallGraph)
    }

    pub fn node_names(&self) -> Vec<&str> {
        self.elements.iter().map(|e| e.node.as_str()).collect()
    }

    /// Sets every weight to 1, which turns weighted similarity into plain
    /// common-subsequence counting.
    pub fn unweighted(mut self) -> Self {
        for e in &mut self.elements {
            e.weight = 1.0;
        }
        self
    }
}

/// Functions containing at least one target point.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetFunctionSet(pub BTreeSet<String>);

/// The unique call graph node whose source range contains the target.
pub fn map_target_to_cg(cg: &ProgramGraph, tp: &TargetPoint) -> Result<String, EtsError> {
    let hits: Vec<String> = cg
        .nodes()
        .iter()
        .filter(|n| {
            n.location
                .as_ref()
                .is_some_and(|l| l.matches_file(&tp.file) && l.contains_line(tp.line))
        })
        .map(|n| n.id.clone())
        .collect();
    match hits.len() {
        0 => Err(EtsError::Unmappable {
            tp_id: tp.tp_id,
            file: tp.file.clone(),
            line: tp.line,
        }),
        1 => Ok(hits.into_iter().next().unwrap()),
        _ => Err(EtsError::Ambiguous {
            tp_id: tp.tp_id,
            file: tp.file.clone(),
            line: tp.line,
            candidates: hits,
        }),
    }
}

/// The CFG block for a target point. A block containing the line wins (the
/// narrowest one if several do); otherwise the block whose range boundary is
/// nearest, preferring the earlier block on ties.
pub fn map_target_to_cfg(cfg: &ProgramGraph, tp: &TargetPoint) -> Result<String, EtsError> {
    let located: Vec<_> = cfg
        .nodes()
        .iter()
        .filter_map(|n| n.location.as_ref().map(|l| (n, l)))
        .collect();
    if located.is_empty() {
        let name = cfg.kind.function().unwrap_or("?").to_owned();
        return Err(EtsError::EmptyCfg(name));
    }
    let same_file: Vec<_> = located
        .iter()
        .copied()
        .filter(|(_, l)| l.matches_file(&tp.file))
        .collect();
    let pool = if same_file.is_empty() {
        located
    } else {
        same_file
    };

    let best = pool
        .iter()
        .enumerate()
        .min_by_key(|(order, (_, l))| {
            let d = l.line_distance(tp.line);
            let span = if d == 0 { l.end_line - l.start_line } else { 0 };
            (d, span, l.start_line, *order)
        })
        .map(|(_, (n, _))| n.id.clone())
        .expect("pool is non-empty");
    Ok(best)
}

/// Joins the dominator chains of the call graph target and the CFG target.
/// Weights are left at 1 for the weight engine to fill in.
pub fn build_ets(
    cg_tree: &DominatorTree,
    cfg_tree: &DominatorTree,
    tp: &TargetPoint,
    cg_target: &str,
    function: &str,
    cfg_target: &str,
) -> Result<EnhancedTargetSequence, EtsError> {
    let cg_chain = cg_tree
        .ancestors_to_root(cg_target)
        .map_err(|_| EtsError::Unreachable {
            tp_id: tp.tp_id,
            node: cg_target.to_owned(),
            graph: GraphKind::CallGraph,
        })?;
    assemble(tp, cg_chain, cfg_tree, cg_target, function, cfg_target)
}

/// Variant of [`build_ets`] for call graphs where the target function cannot
/// be reached from the entry (for instance when indirect calls were left
/// unresolved): the call graph segment shrinks to the target function alone.
pub fn build_ets_detached(
    cg_tree: &DominatorTree,
    cfg_tree: &DominatorTree,
    tp: &TargetPoint,
    cg_target: &str,
    function: &str,
    cfg_target: &str,
) -> Result<EnhancedTargetSequence, EtsError> {
    match cg_tree.ancestors_to_root(cg_target) {
        Ok(chain) => assemble(tp, chain, cfg_tree, cg_target, function, cfg_target),
        Err(_) => assemble(
            tp,
            vec![cg_target],
            cfg_tree,
            cg_target,
            function,
            cfg_target,
        ),
    }
}

fn assemble(
    tp: &TargetPoint,
    cg_chain: Vec<&str>,
    cfg_tree: &DominatorTree,
    cg_target: &str,
    function: &str,
    cfg_target: &str,
) -> Result<EnhancedTargetSequence, EtsError> {
    let cfg_kind = GraphKind::ControlFlow(function.to_owned());
    let cfg_chain = cfg_tree
        .ancestors_to_root(cfg_target)
        .map_err(|_| EtsError::Unreachable {
            tp_id: tp.tp_id,
            node: cfg_target.to_owned(),
            graph: cfg_kind.clone(),
        })?;
    let element = |graph: &GraphKind, node: &str, target: &str| EtsElement {
        graph: graph.clone(),
        node: node.to_owned(),
        membership: if node == target {
            Membership::TargetPoint
        } else {
            Membership::Intermediate
        },
        weight: 1.0,
    };
    let mut elements: Vec<EtsElement> = cg_chain
        .iter()
        .map(|n| element(&GraphKind::CallGraph, n, cg_target))
        .collect();
    elements.extend(cfg_chain.iter().map(|n| element(&cfg_kind, n, cfg_target)));
    Ok(EnhancedTargetSequence {
        id: tp.tp_id,
        target: tp.clone(),
        cg_target: cg_target.to_owned(),
        function: function.to_owned(),
        cfg_target: cfg_target.to_owned(),
        elements,
    })
}
