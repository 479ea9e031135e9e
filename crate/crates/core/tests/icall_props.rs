use std::collections::BTreeSet;

use difuzz_core::graph::{GraphEdge, GraphKind, GraphNode, ProgramGraph};
use difuzz_core::icall::{
    build_hierarchy_trees, resolve_indirect_calls, site_candidates, CallKind, ClassHierarchy,
    FunctionSig, IndirectCallSite, MethodSig, Prototype,
};
use proptest::prelude::*;

const PROTOS: [&[&str]; 2] = [&["void"], &["int", "void"]];
const NAMES: [&str; 2] = ["run", "stop"];

#[derive(Debug, Clone)]
struct World {
    h: ClassHierarchy,
    sites: Vec<IndirectCallSite>,
    cg: ProgramGraph,
}

fn class(i: usize) -> String {
    format!("C{i}")
}

fn world() -> impl Strategy<Value = World> {
    (1..=7usize)
        .prop_flat_map(|n| {
            let bases = prop::collection::vec(prop::collection::btree_set(0..n.max(1), 0..=2), n);
            let methods = prop::collection::vec((0..n, 0..2usize, 0..2usize), 0..10);
            let funcs = prop::collection::vec(0..2usize, 0..3);
            let sites = prop::collection::vec((0..n, 0..2usize, 0..2usize, any::<bool>()), 1..5);
            (Just(n), bases, methods, funcs, sites)
        })
        .prop_map(|(n, bases, methods, funcs, sites)| {
            // Bases only point to lower indices, which keeps the hierarchy acyclic.
            let classes = (0..n)
                .map(|i| {
                    (
                        class(i),
                        bases[i]
                            .iter()
                            .filter(|b| **b < i)
                            .map(|b| class(*b))
                            .collect(),
                    )
                })
                .collect();
            let mut seen = BTreeSet::new();
            let methods: Vec<MethodSig> = methods
                .into_iter()
                .filter(|(c, name, _)| seen.insert((*c, *name)))
                .map(|(c, name, p)| MethodSig {
                    owner: class(c),
                    name: NAMES[name].into(),
                    prototype: Prototype::new(PROTOS[p]),
                    cg_node: format!("{}::{}", class(c), NAMES[name]),
                })
                .collect();
            let functions: Vec<FunctionSig> = funcs
                .into_iter()
                .enumerate()
                .map(|(i, p)| FunctionSig {
                    name: format!("f{i}"),
                    prototype: Prototype::new(PROTOS[p]),
                    cg_node: format!("f{i}"),
                })
                .collect();
            let sites = sites
                .into_iter()
                .map(|(b, name, p, virt)| IndirectCallSite {
                    caller: "main".into(),
                    kind: if virt {
                        CallKind::Virtual {
                            base_class: class(b),
                            name: NAMES[name].into(),
                        }
                    } else {
                        CallKind::FunctionPointer
                    },
                    prototype: Prototype::new(PROTOS[p]),
                })
                .collect();
            let mut nodes = vec![GraphNode::new("main")];
            nodes.extend(methods.iter().map(|m| GraphNode::new(m.cg_node.clone())));
            nodes.extend(functions.iter().map(|f| GraphNode::new(f.cg_node.clone())));
            let edges = functions
                .first()
                .map(|f| GraphEdge::direct("main", f.cg_node.clone()))
                .into_iter()
                .collect();
            let cg = ProgramGraph::new(GraphKind::CallGraph, nodes, edges, "main").unwrap();
            World {
                h: ClassHierarchy {
                    classes,
                    methods,
                    functions,
                },
                sites,
                cg,
            }
        })
}

/// Root classes `c` descends from, itself included when it has no bases.
fn roots(h: &ClassHierarchy, c: &str) -> BTreeSet<String> {
    let bases = &h.classes.iter().find(|(n, _)| n == c).unwrap().1;
    if bases.is_empty() {
        return BTreeSet::from([c.to_owned()]);
    }
    bases.iter().flat_map(|b| roots(h, b)).collect()
}

fn descends(h: &ClassHierarchy, d: &str, b: &str) -> bool {
    d == b
        || h.classes
            .iter()
            .find(|(n, _)| n == d)
            .unwrap()
            .1
            .iter()
            .any(|p| descends(h, p, b))
}

fn oracle(h: &ClassHierarchy, site: &IndirectCallSite) -> BTreeSet<String> {
    match &site.kind {
        CallKind::Virtual { base_class, name } => {
            let base_roots = roots(h, base_class);
            h.methods
                .iter()
                .filter(|m| m.name == *name && m.prototype == site.prototype)
                .filter(|m| !roots(h, &m.owner).is_disjoint(&base_roots))
                .map(|m| m.cg_node.clone())
                .collect()
        }
        CallKind::FunctionPointer => h
            .functions
            .iter()
            .filter(|f| f.prototype == site.prototype)
            .map(|f| f.cg_node.clone())
            .chain(
                h.methods
                    .iter()
                    .filter(|m| m.prototype == site.prototype)
                    .map(|m| m.cg_node.clone()),
            )
            .collect(),
    }
}

fn edge_set(g: &ProgramGraph) -> BTreeSet<(String, String, bool)> {
    g.edges()
        .iter()
        .map(|e| (e.from.clone(), e.to.clone(), e.indirect))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn candidates_match_root_oracle(w in world()) {
        let trees = build_hierarchy_trees(&w.h).unwrap();
        for site in &w.sites {
            prop_assert_eq!(site_candidates(&trees, &w.h, site).unwrap(), oracle(&w.h, site));
        }
    }

    #[test]
    fn base_candidates_cover_derived(w in world()) {
        let trees = build_hierarchy_trees(&w.h).unwrap();
        for site in &w.sites {
            let CallKind::Virtual { base_class, name } = &site.kind else { continue };
            let at_base = site_candidates(&trees, &w.h, site).unwrap();
            let shared: Vec<_> = trees.iter().filter(|t| t.contains(base_class)).collect();
            let owner = |node: &str| w.h.methods.iter().find(|m| m.cg_node == node).unwrap().owner.clone();
            for (d, _) in w.h.classes.iter().filter(|(d, _)| descends(&w.h, d, base_class)) {
                let derived_site = IndirectCallSite {
                    kind: CallKind::Virtual { base_class: d.clone(), name: name.clone() },
                    ..site.clone()
                };
                let at_derived: BTreeSet<String> = site_candidates(&trees, &w.h, &derived_site)
                    .unwrap()
                    .into_iter()
                    .filter(|c| shared.iter().any(|t| t.contains(&owner(c))))
                    .collect();
                prop_assert!(at_base.is_superset(&at_derived));
            }
        }
    }

    #[test]
    fn resolution_is_order_free_and_reversible(w in world()) {
        let r = resolve_indirect_calls(&w.cg, &w.h, &w.sites).unwrap();
        let mut reversed = w.sites.clone();
        reversed.reverse();
        let r2 = resolve_indirect_calls(&w.cg, &w.h, &reversed).unwrap();
        prop_assert_eq!(edge_set(&r.graph), edge_set(&r2.graph));

        let added: BTreeSet<_> = r.added.iter().cloned().collect();
        for e in r.graph.edges() {
            if added.contains(&(e.from.clone(), e.to.clone())) {
                prop_assert!(e.indirect);
            }
        }
        let restored: BTreeSet<_> = edge_set(&r.graph).into_iter().filter(|e| !e.2).collect();
        prop_assert_eq!(restored, edge_set(&w.cg));

        let expected: BTreeSet<(String, String)> = w.sites
            .iter()
            .flat_map(|s| oracle(&w.h, s).into_iter().map(|c| (s.caller.clone(), c)))
            .filter(|(a, b)| !w.cg.has_edge(a, b))
            .collect();
        prop_assert_eq!(added, expected);
    }
}
