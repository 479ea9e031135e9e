use std::collections::{BTreeMap, BTreeSet};

use difuzz_core::domtree::{dominators_brute_force, DominatorTree};
use difuzz_core::ets::{build_ets, AnalyzedGraph};
use difuzz_core::graph::{
    dump_dot, parse_dot, GraphEdge, GraphKind, GraphNode, Membership, ProgramGraph, SourceLocation,
    TargetPoint,
};
use difuzz_core::weights::{annotate_graphs, shortest_distance};
use proptest::prelude::*;

fn name(i: usize) -> String {
    format!("n{i}")
}

fn digraph(kind: GraphKind, n: usize, edges: &[(usize, usize, bool)]) -> ProgramGraph {
    ProgramGraph::new(
        kind,
        (0..n).map(|i| GraphNode::new(name(i))).collect(),
        edges
            .iter()
            .map(|&(a, b, ind)| {
                if ind {
                    GraphEdge::indirect(name(a), name(b))
                } else {
                    GraphEdge::direct(name(a), name(b))
                }
            })
            .collect(),
        name(0),
    )
    .unwrap()
}

fn edges_strategy(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, bool)>)> {
    (1..=max_nodes).prop_flat_map(|n| {
        let e = prop::collection::vec((0..n, 0..n, any::<bool>()), 0..=n * 3);
        (Just(n), e)
    })
}

fn reachable(g: &ProgramGraph) -> Vec<bool> {
    let succ = g.successors();
    let mut seen = vec![false; g.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(w, _) in &succ[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Minimum cost over all simple paths, by exhaustive depth-first search.
fn simple_path_distance(g: &ProgramGraph, from: usize, to: usize) -> u32 {
    fn go(
        succ: &[Vec<(usize, u32)>],
        v: usize,
        to: usize,
        cost: u32,
        on_path: &mut Vec<bool>,
        best: &mut Option<u32>,
    ) {
        if v == to {
            *best = Some(best.map_or(cost, |b| b.min(cost)));
            return;
        }
        for &(w, c) in &succ[v] {
            if !on_path[w] {
                on_path[w] = true;
                go(succ, w, to, cost + c, on_path, best);
                on_path[w] = false;
            }
        }
    }
    if from == to {
        return 0;
    }
    let succ = g.successors();
    let mut on_path = vec![false; g.len()];
    on_path[from] = true;
    let mut best = None;
    go(&succ, from, to, 0, &mut on_path, &mut best);
    best.unwrap_or(0)
}

const OPAQUE_KEYS: [&str; 3] = ["color", "shape", "tooltip"];

fn text() -> impl Strategy<Value = String> {
    prop::string::string_regex("[a-zA-Z0-9_ .:/\"\\\\{}|-]{1,12}").unwrap()
}

#[derive(Debug, Clone)]
struct NodeSpec {
    label: Option<String>,
    location: Option<(String, u32, u32, Option<u32>)>,
    ets: Vec<(u32, bool, u32)>,
    attrs: Vec<(usize, String)>,
}

fn node_spec() -> impl Strategy<Value = NodeSpec> {
    (
        prop::option::of(text()),
        prop::option::of((
            "[a-z]{1,6}(/[a-z]{1,6})?\\.c",
            1..500u32,
            0..20u32,
            prop::option::of(1..80u32),
        )),
        prop::collection::vec((0..6u32, any::<bool>(), 1..=1000u32), 0..3),
        prop::collection::vec((0..OPAQUE_KEYS.len(), text()), 0..3),
    )
        .prop_map(|(label, loc, ets, attrs)| NodeSpec {
            label,
            location: loc.map(|(f, s, d, c)| (f, s, s + d, c)),
            ets,
            attrs,
        })
}

fn build_node(i: usize, spec: &NodeSpec) -> GraphNode {
    let mut n = GraphNode::new(name(i));
    n.label = spec.label.clone();
    n.location = spec.location.as_ref().map(|(f, s, e, c)| SourceLocation {
        file: f.clone(),
        start_line: *s,
        end_line: *e,
        start_column: *c,
    });
    for &(id, point, w) in &spec.ets {
        if n.memberships.contains_key(&id) {
            continue;
        }
        let (m, w) = if point {
            (Membership::TargetPoint, 1.0)
        } else {
            (Membership::Intermediate, f64::from(w) / 1000.0 * 0.987)
        };
        n.memberships.insert(id, m);
        n.weights.insert(id, w);
    }
    let mut keys = BTreeSet::new();
    for (k, v) in &spec.attrs {
        if keys.insert(*k) {
            n.attrs.push((OPAQUE_KEYS[*k].to_owned(), v.clone()));
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dot_round_trip(
        nodes in prop::collection::vec(node_spec(), 1..8),
        raw_edges in prop::collection::vec((0..8usize, 0..8usize, any::<bool>(), prop::option::of(text())), 0..12),
        cg in any::<bool>(),
        gname in prop::option::of("[A-Za-z][A-Za-z0-9 ]{0,10}"),
    ) {
        let n = nodes.len();
        let built: Vec<GraphNode> = nodes.iter().enumerate().map(|(i, s)| build_node(i, s)).collect();
        let edges: Vec<GraphEdge> = raw_edges
            .iter()
            .map(|(a, b, ind, attr)| {
                let mut e = if *ind {
                    GraphEdge::indirect(name(a % n), name(b % n))
                } else {
                    GraphEdge::direct(name(a % n), name(b % n))
                };
                if let Some(v) = attr {
                    e.attrs.push(("style".into(), v.clone()));
                }
                e
            })
            .collect();
        let kind = if cg { GraphKind::CallGraph } else { GraphKind::ControlFlow("f".into()) };
        let entry = name(n - 1);
        let mut g = ProgramGraph::new(kind.clone(), built, edges, entry).unwrap();
        g.name = gname;
        let text = dump_dot(&g);
        let back = parse_dot(&text, kind).unwrap();
        prop_assert_eq!(&back, &g, "{}", text);
        prop_assert_eq!(dump_dot(&back), text);
    }

    #[test]
    fn dominators_match_brute_force((n, edges) in edges_strategy(12)) {
        let g = digraph(GraphKind::CallGraph, n, &edges);
        let tree = DominatorTree::compute(&g);
        let live = reachable(&g);
        for (i, node) in g.nodes().iter().enumerate() {
            let brute = dominators_brute_force(&g, &node.id);
            if !live[i] {
                prop_assert!(brute.is_err());
                prop_assert!(!tree.contains(&node.id));
                continue;
            }
            let chain = tree.ancestors_to_root(&node.id).unwrap();
            prop_assert_eq!(tree.depth(&node.id), Some(chain.len() as u32));
            let fast: BTreeSet<String> = chain.into_iter().map(str::to_owned).collect();
            prop_assert_eq!(fast, brute.unwrap());
        }
        let again = DominatorTree::compute(&g);
        prop_assert_eq!(dump_dot(&again.to_graph(&g)), dump_dot(&tree.to_graph(&g)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn distance_matches_path_enumeration((n, edges) in edges_strategy(7), from in 0..7usize, to in 0..7usize) {
        let g = digraph(GraphKind::CallGraph, n, &edges);
        let (from, to) = (from % n, to % n);
        prop_assert_eq!(
            shortest_distance(&g, &name(from), &name(to)),
            simple_path_distance(&g, from, to)
        );
    }

    /// Targets are picked among reachable nodes; each ETS element must be a
    /// dominator and removing an intermediate node must cut the target off.
    #[test]
    fn ets_elements_dominate(
        (n, edges) in edges_strategy(8),
        (m, cfg_edges) in edges_strategy(8),
        pick in any::<prop::sample::Index>(),
        pick_block in any::<prop::sample::Index>(),
    ) {
        let cg = digraph(GraphKind::CallGraph, n, &edges);
        let cfg = digraph(GraphKind::ControlFlow("f".into()), m, &cfg_edges);
        let live: Vec<usize> = reachable(&cg).iter().enumerate().filter(|(_, r)| **r).map(|(i, _)| i).collect();
        let live_b: Vec<usize> = reachable(&cfg).iter().enumerate().filter(|(_, r)| **r).map(|(i, _)| i).collect();
        let t = name(*pick.get(&live));
        let tb = name(*pick_block.get(&live_b));
        let mut cg_a = AnalyzedGraph::new(cg.clone());
        let cfg_a = AnalyzedGraph::new(cfg.clone());
        let tp = TargetPoint { tp_id: 0, file: "x.c".into(), line: 1 };
        let ets = build_ets(&cg_a.tree, &cfg_a.tree, &tp, &t, "f", &tb).unwrap();
        for el in &ets.elements {
            let (g, target) = if el.graph == GraphKind::CallGraph { (&cg, &t) } else { (&cfg, &tb) };
            prop_assert!(dominators_brute_force(g, target).unwrap().contains(&el.node));
            if el.membership == Membership::Intermediate {
                let cut: Vec<(usize, usize, bool)> = if el.graph == GraphKind::CallGraph { edges.clone() } else { cfg_edges.clone() }
                    .into_iter()
                    .filter(|(a, b, _)| name(*a) != el.node && name(*b) != el.node)
                    .collect();
                let size = if el.graph == GraphKind::CallGraph { n } else { m };
                let reduced = digraph(el.graph.clone(), size, &cut);
                let idx = reduced.index_of(target).unwrap();
                prop_assert!(el.node == name(0) || !reachable(&reduced)[idx]);
            }
        }

        let mut etss = vec![ets];
        let mut cfgs = BTreeMap::from([("f".to_owned(), cfg_a)]);
        annotate_graphs(&mut etss, &mut cg_a, &mut cfgs);
        for el in &etss[0].elements {
            prop_assert!(el.weight > 0.0 && el.weight <= 1.0);
            if el.membership == Membership::TargetPoint {
                prop_assert_eq!(el.weight, 1.0);
            }
            let g = if el.graph == GraphKind::CallGraph { &cg_a.graph } else { &cfgs["f"].graph };
            let node = g.node(&el.node).unwrap();
            prop_assert_eq!(node.weights.get(&0), Some(&el.weight));
        }
    }

    /// Renaming nodes through a permutation leaves every weight unchanged.
    #[test]
    fn weights_survive_renaming(
        (n, edges) in edges_strategy(8),
        perm in Just((0..8).collect::<Vec<usize>>()).prop_shuffle(),
        pick in any::<prop::sample::Index>(),
    ) {
        let live: Vec<usize> = {
            let g = digraph(GraphKind::CallGraph, n, &edges);
            reachable(&g).iter().enumerate().filter(|(_, r)| **r).map(|(i, _)| i).collect()
        };
        let t = *pick.get(&live);
        let weights = |rename: &dyn Fn(usize) -> String| -> Vec<f64> {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|i| rename(*i));
            let entry = rename(0);
            let g = ProgramGraph::new(
                GraphKind::CallGraph,
                order.iter().map(|i| GraphNode::new(rename(*i))).collect(),
                edges.iter().map(|&(a, b, ind)| {
                    let mut e = GraphEdge::direct(rename(a), rename(b));
                    e.indirect = ind;
                    e
                }).collect(),
                entry,
            ).unwrap();
            let single = digraph(GraphKind::ControlFlow("f".into()), 1, &[]);
            let mut cg = AnalyzedGraph::new(g);
            let cfg = AnalyzedGraph::new(single);
            let tp = TargetPoint { tp_id: 0, file: "x.c".into(), line: 1 };
            let ets = build_ets(&cg.tree, &cfg.tree, &tp, &rename(t), "f", "n0").unwrap();
            let mut etss = vec![ets];
            let mut cfgs = BTreeMap::from([("f".to_owned(), cfg)]);
            annotate_graphs(&mut etss, &mut cg, &mut cfgs);
            etss[0].elements.iter().map(|e| e.weight).collect()
        };
        let plain = weights(&|i| name(i));
        let renamed = weights(&|i| format!("v{}", perm[i]));
        prop_assert_eq!(plain, renamed);
    }
}

#[test]
fn indirect_edge_lowers_distance_term() {
    let chain = |ind: bool| {
        let cg = digraph(GraphKind::CallGraph, 3, &[(0, 1, false), (1, 2, ind)]);
        let mut cg = AnalyzedGraph::new(cg);
        let cfg = AnalyzedGraph::new(digraph(GraphKind::ControlFlow("f".into()), 1, &[]));
        let tp = TargetPoint {
            tp_id: 0,
            file: "x.c".into(),
            line: 1,
        };
        let ets = build_ets(&cg.tree, &cfg.tree, &tp, "n2", "f", "n0").unwrap();
        let mut etss = vec![ets];
        let mut cfgs = BTreeMap::from([("f".to_owned(), cfg)]);
        annotate_graphs(&mut etss, &mut cg, &mut cfgs);
        etss[0].elements[0].weight
    };
    assert!(chain(true) < chain(false));
}
