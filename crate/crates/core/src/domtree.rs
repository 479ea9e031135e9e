//! Immediate-dominator trees over program graphs.
//!
//! Construction uses the iterative data-flow formulation of Cooper, Harvey and
//! Kennedy over a reverse post-order. Nodes unreachable from the entry are
//! left out of the tree.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::graph::{GraphEdge, ProgramGraph};

#[derive(Debug, Error, PartialEq)]
pub enum DomError {
    #[error("node `{0}` is not in the dominator tree")]
    NotInTree(String),
    #[error("node `{0}` is unreachable from the entry")]
    Unreachable(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominatorTree {
    /// Reachable node ids, in graph declaration order.
    ids: Vec<String>,
    pos: HashMap<String, usize>,
    root: usize,
    parent: Vec<Option<usize>>,
    depth: Vec<u32>,
    children: Vec<Vec<usize>>,
    unreachable: usize,
}

const UNDEF: usize = usize::MAX;

impl DominatorTree {
    pub fn compute(graph: &ProgramGraph) -> DominatorTree {
        let n = graph.len();
        let entry = graph.index_of(graph.entry()).expect("entry exists");
        let succ = graph.successors();
        let pred = graph.predecessors();

        // Iterative DFS post-order.
        let mut post = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        let mut stack = vec![(entry, 0usize)];
        visited[entry] = true;
        while let Some((v, i)) = stack.pop() {
            if i < succ[v].len() {
                stack.push((v, i + 1));
                let w = succ[v][i].0;
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                post.push(v);
            }
        }
        let mut po_num = vec![UNDEF; n];
        for (i, &v) in post.iter().enumerate() {
            po_num[v] = i;
        }

        let mut idom = vec![UNDEF; n];
        idom[entry] = entry;
        let intersect = |idom: &[usize], mut a: usize, mut b: usize| {
            while a != b {
                while po_num[a] < po_num[b] {
                    a = idom[a];
                }
                while po_num[b] < po_num[a] {
                    b = idom[b];
                }
            }
            a
        };
        let mut changed = true;
        while changed {
            changed = false;
            for &v in post.iter().rev() {
                if v == entry {
                    continue;
                }
                let mut new_idom = UNDEF;
                for &p in &pred[v] {
                    if idom[p] == UNDEF {
                        continue;
                    }
                    new_idom = if new_idom == UNDEF {
                        p
                    } else {
                        intersect(&idom, p, new_idom)
                    };
                }
                if new_idom != idom[v] {
                    idom[v] = new_idom;
                    changed = true;
                }
            }
        }

        // Re-index reachable nodes in declaration order.
        let mut ids = Vec::new();
        let mut pos = HashMap::new();
        let mut local = vec![UNDEF; n];
        for (gi, node) in graph.nodes().iter().enumerate() {
            if visited[gi] {
                local[gi] = ids.len();
                pos.insert(node.id.clone(), ids.len());
                ids.push(node.id.clone());
            }
        }
        let m = ids.len();
        let mut parent = vec![None; m];
        let mut children = vec![Vec::new(); m];
        for gi in 0..n {
            if visited[gi] && gi != entry {
                let p = local[idom[gi]];
                parent[local[gi]] = Some(p);
                children[p].push(local[gi]);
            }
        }
        let root = local[entry];
        let mut depth = vec![0u32; m];
        depth[root] = 1;
        let mut queue = vec![root];
        while let Some(v) = queue.pop() {
            for &c in &children[v] {
                depth[c] = depth[v] + 1;
                queue.push(c);
            }
        }
        DominatorTree {
            ids,
            pos,
            root,
            parent,
            depth,
            children,
            unreachable: n - m,
        }
    }

    pub fn root(&self) -> &str {
        &self.ids[self.root]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of graph nodes left out because the entry cannot reach them.
    pub fn unreachable_count(&self) -> usize {
        self.unreachable
    }

    pub fn contains(&self, id: &str) -> bool {
        self.pos.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        let i = *self.pos.get(id)?;
        self.parent[i].map(|p| self.ids[p].as_str())
    }

    /// Depth counting the root as 1.
    pub fn depth(&self, id: &str) -> Option<u32> {
        self.pos.get(id).map(|&i| self.depth[i])
    }

    pub fn max_depth(&self) -> u32 {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn children(&self, id: &str) -> Vec<&str> {
        match self.pos.get(id) {
            Some(&i) => self.children[i]
                .iter()
                .map(|&c| self.ids[c].as_str())
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn child_count(&self, id: &str) -> usize {
        self.pos.get(id).map_or(0, |&i| self.children[i].len())
    }

    /// `[root, ..., parent(id), id]`.
    pub fn ancestors_to_root(&self, id: &str) -> Result<Vec<&str>, DomError> {
        let mut i = *self
            .pos
            .get(id)
            .ok_or_else(|| DomError::NotInTree(id.to_owned()))?;
        let mut chain = vec![self.ids[i].as_str()];
        while let Some(p) = self.parent[i] {
            chain.push(&self.ids[p]);
            i = p;
        }
        chain.reverse();
        Ok(chain)
    }

    pub fn dominates(&self, a: &str, b: &str) -> bool {
        self.ancestors_to_root(b)
            .map(|chain| chain.contains(&a))
            .unwrap_or(false)
    }

    /// The tree as a graph: nodes copied from `source` (with all their
    /// attributes) and one edge per immediate-dominance relation.
    pub fn to_graph(&self, source: &ProgramGraph) -> ProgramGraph {
        let nodes = self
            .ids
            .iter()
            .map(|id| source.node(id).expect("tree built from source").clone())
            .collect();
        let mut edges = Vec::new();
        for (i, kids) in self.children.iter().enumerate() {
            for &c in kids {
                edges.push(GraphEdge::direct(self.ids[i].clone(), self.ids[c].clone()));
            }
        }
        let mut g = ProgramGraph::new(source.kind.clone(), nodes, edges, self.root())
            .expect("tree nodes and edges are consistent");
        g.name = source.name.as_ref().map(|n| format!("Dominator tree: {n}"));
        g.attrs = source.attrs.clone();
        g
    }
}

fn reachable_without(graph: &ProgramGraph, removed: Option<usize>) -> Vec<bool> {
    let succ = graph.successors();
    let entry = graph.index_of(graph.entry()).expect("entry exists");
    let mut seen = vec![false; graph.len()];
    if Some(entry) == removed {
        return seen;
    }
    seen[entry] = true;
    let mut stack = vec![entry];
    while let Some(v) = stack.pop() {
        for &(w, _) in &succ[v] {
            if Some(w) != removed && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Dominators of `n` straight from the definition: `m` dominates `n` when
/// deleting `m` disconnects `n` from the entry. Quadratic; meant as an oracle.
pub fn dominators_brute_force(graph: &ProgramGraph, n: &str) -> Result<BTreeSet<String>, DomError> {
    let target = graph
        .index_of(n)
        .ok_or_else(|| DomError::NotInTree(n.to_owned()))?;
    if !reachable_without(graph, None)[target] {
        return Err(DomError::Unreachable(n.to_owned()));
    }
    let mut out = BTreeSet::new();
    out.insert(n.to_owned());
    for (m, node) in graph.nodes().iter().enumerate() {
        if m != target && !reachable_without(graph, Some(m))[target] {
            out.insert(node.id.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphKind, GraphNode};

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> ProgramGraph {
        ProgramGraph::new(
            GraphKind::ControlFlow("f".into()),
            nodes.iter().map(|n| GraphNode::new(*n)).collect(),
            edges
                .iter()
                .map(|(a, b)| GraphEdge::direct(*a, *b))
                .collect(),
            nodes[0],
        )
        .unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_node() {
        let g = graph(&["a"], &[]);
        let t = DominatorTree::compute(&g);
        assert_eq!(t.root(), "a");
        assert_eq!(t.depth("a"), Some(1));
        assert_eq!(t.ancestors_to_root("a").unwrap(), vec!["a"]);
    }

    #[test]
    fn brute_force_small_cases() {
        let chain = graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        assert_eq!(dominators_brute_force(&chain, "a").unwrap(), set(&["a"]));
        assert_eq!(
            dominators_brute_force(&chain, "c").unwrap(),
            set(&["a", "b", "c"])
        );
        let diamond = graph(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")],
        );
        assert_eq!(
            dominators_brute_force(&diamond, "d").unwrap(),
            set(&["a", "d"])
        );
    }

    #[test]
    fn brute_force_rejects_unreachable() {
        let g = graph(&["a", "b"], &[]);
        assert_eq!(
            dominators_brute_force(&g, "b").unwrap_err(),
            DomError::Unreachable("b".into())
        );
    }

    #[test]
    fn unreachable_nodes_are_excluded() {
        let g = graph(&["a", "b", "x"], &[("a", "b"), ("x", "b")]);
        let t = DominatorTree::compute(&g);
        assert!(!t.contains("x"));
        assert_eq!(t.unreachable_count(), 1);
        assert_eq!(t.parent("b"), Some("a"));
        assert!(t.ancestors_to_root("x").is_err());
    }

    #[test]
    fn loops_and_back_edges() {
        // a -> b -> c -> b, c -> d, a -> d
        let g = graph(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "c"), ("c", "b"), ("c", "d"), ("a", "d")],
        );
        let t = DominatorTree::compute(&g);
        assert_eq!(t.parent("c"), Some("b"));
        assert_eq!(t.parent("d"), Some("a"));
        assert_eq!(t.children("a"), vec!["b", "d"]);
        assert_eq!(t.max_depth(), 3);
    }

    #[test]
    fn to_graph_keeps_attributes() {
        let g = graph(&["a", "b", "c"], &[("a", "b"), ("a", "c"), ("b", "c")]);
        let t = DominatorTree::compute(&g);
        let dg = t.to_graph(&g);
        assert_eq!(dg.edges().len(), 2);
        assert!(dg.has_edge("a", "b") && dg.has_edge("a", "c"));
        assert_eq!(dg.entry(), "a");
    }
}
