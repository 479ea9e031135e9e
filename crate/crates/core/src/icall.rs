//! Indirect call resolution from class hierarchies and prototypes.
//!
//! Virtual call sites are resolved against every hierarchy tree that contains
//! the static base class of the receiver: each method of a tree member with
//! the same name and prototype becomes a candidate. Function-pointer sites get
//! every function whose prototype matches. Candidates are added to the call
//! graph as `indirect` edges.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Deserialize;
use thiserror::Error;

use crate::graph::{GraphEdge, GraphError, ProgramGraph};

#[derive(Debug, Error, PartialEq)]
pub enum ResolveError {
    #[error("hierarchy file: {0}")]
    Format(String),
    #[error("class `{0}` declared twice")]
    DuplicateClass(String),
    #[error("class `{class}` derives from unknown class `{base}`")]
    UnknownBase { class: String, base: String },
    #[error("inheritance cycle through class `{0}`")]
    Cycle(String),
    #[error("method `{name}` owned by unknown class `{class}`")]
    UnknownOwner { class: String, name: String },
    #[error("indirect call site {site} in `{caller}`: unknown base class `{base}`")]
    UnknownBaseClass {
        site: usize,
        caller: String,
        base: String,
    },
    #[error("indirect call site {site}: {msg}")]
    InvalidSite { site: usize, msg: String },
    #[error("call graph has no node `{0}`")]
    MissingNode(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parameter types followed by the return type, whitespace-normalized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prototype(Vec<String>);

impl Prototype {
    pub fn new<S: AsRef<str>>(types: impl IntoIterator<Item = S>) -> Self {
        Prototype(
            types
                .into_iter()
                .map(|t| normalize_type(t.as_ref()))
                .collect(),
        )
    }

    pub fn types(&self) -> &[String] {
        &self.0
    }
}

fn normalize_type(t: &str) -> String {
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mut out = String::with_capacity(t.len());
    let mut pending_space = false;
    for c in t.trim().chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && out.chars().last().is_some_and(is_word) && is_word(c) {
            out.push(' ');
        }
        pending_space = false;
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSig {
    pub owner: String,
    pub name: String,
    pub prototype: Prototype,
    pub cg_node: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSig {
    pub name: String,
    pub prototype: Prototype,
    pub cg_node: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallKind {
    Virtual { base_class: String, name: String },
    FunctionPointer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndirectCallSite {
    pub caller: String,
    pub kind: CallKind,
    pub prototype: Prototype,
}

/// Classes with their direct bases, plus the methods and free functions that
/// can be indirect call targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassHierarchy {
    /// Class name to direct bases, in declaration order.
    pub classes: Vec<(String, Vec<String>)>,
    pub methods: Vec<MethodSig>,
    pub functions: Vec<FunctionSig>,
}

/// Hierarchy description plus call sites, as read from the sidecar file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HierarchySpec {
    pub hierarchy: ClassHierarchy,
    pub sites: Vec<IndirectCallSite>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    class: Vec<RawClass>,
    #[serde(default)]
    method: Vec<RawMethod>,
    #[serde(default)]
    function: Vec<RawFunction>,
    #[serde(default)]
    icall: Vec<RawSite>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    name: String,
    #[serde(default)]
    bases: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    class: String,
    name: String,
    prototype: Vec<String>,
    cg_node: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunction {
    name: String,
    prototype: Vec<String>,
    cg_node: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSite {
    caller: String,
    kind: String,
    base_class: Option<String>,
    name: Option<String>,
    prototype: Vec<String>,
}

impl HierarchySpec {
    /// Reads the TOML sidecar:
    /// `[[class]] name, bases`; `[[method]] class, name, prototype, cg_node`;
    /// `[[function]] name, prototype, cg_node?`;
    /// `[[icall]] caller, kind = "virtual"|"fnptr", base_class?, name?, prototype`.
    pub fn from_toml(text: &str) -> Result<Self, ResolveError> {
        let raw: RawSpec =
            toml::from_str(text).map_err(|e| ResolveError::Format(e.message().to_owned()))?;
        let hierarchy = ClassHierarchy {
            classes: raw.class.into_iter().map(|c| (c.name, c.bases)).collect(),
            methods: raw
                .method
                .into_iter()
                .map(|m| MethodSig {
                    owner: m.class,
                    name: m.name,
                    prototype: Prototype::new(m.prototype),
                    cg_node: m.cg_node,
                })
                .collect(),
            functions: raw
                .function
                .into_iter()
                .map(|f| FunctionSig {
                    cg_node: f.cg_node.unwrap_or_else(|| f.name.clone()),
                    name: f.name,
                    prototype: Prototype::new(f.prototype),
                })
                .collect(),
        };
        let mut sites = Vec::with_capacity(raw.icall.len());
        for (i, s) in raw.icall.into_iter().enumerate() {
            let kind = match s.kind.as_str() {
                "virtual" => {
                    let (Some(base_class), Some(name)) = (s.base_class, s.name) else {
                        return Err(ResolveError::InvalidSite {
                            site: i,
                            msg: "virtual call needs `base_class` and `name`".into(),
                        });
                    };
                    CallKind::Virtual { base_class, name }
                }
                "fnptr" => CallKind::FunctionPointer,
                other => {
                    return Err(ResolveError::InvalidSite {
                        site: i,
                        msg: format!("unknown kind `{other}`"),
                    })
                }
            };
            sites.push(IndirectCallSite {
                caller: s.caller,
                kind,
                prototype: Prototype::new(s.prototype),
            });
        }
        Ok(HierarchySpec { hierarchy, sites })
    }
}

/// One rooted inheritance tree: a base class with no bases of its own and
/// every class deriving from it, directly or transitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyTree {
    pub root: String,
    pub members: BTreeSet<String>,
    /// `(base, derived)` pairs for direct derivation.
    pub edges: BTreeSet<(String, String)>,
}

impl HierarchyTree {
    pub fn contains(&self, class: &str) -> bool {
        self.members.contains(class)
    }
}

/// One tree per root class. A class deriving from several bases shows up in
/// the tree of each root it descends from.
pub fn build_hierarchy_trees(h: &ClassHierarchy) -> Result<Vec<HierarchyTree>, ResolveError> {
    let mut derived: HashMap<&str, Vec<&str>> = HashMap::new();
    let mut known = BTreeMap::new();
    for (i, (name, _)) in h.classes.iter().enumerate() {
        if known.insert(name.as_str(), i).is_some() {
            return Err(ResolveError::DuplicateClass(name.clone()));
        }
    }
    for (name, bases) in &h.classes {
        for b in bases {
            if !known.contains_key(b.as_str()) {
                return Err(ResolveError::UnknownBase {
                    class: name.clone(),
                    base: b.clone(),
                });
            }
            derived.entry(b.as_str()).or_default().push(name.as_str());
        }
    }
    check_acyclic(h, &derived)?;
    for m in &h.methods {
        if !known.contains_key(m.owner.as_str()) {
            return Err(ResolveError::UnknownOwner {
                class: m.owner.clone(),
                name: m.name.clone(),
            });
        }
    }

    let mut trees = Vec::new();
    for (root, bases) in &h.classes {
        if !bases.is_empty() {
            continue;
        }
        let mut tree = HierarchyTree {
            root: root.clone(),
            members: BTreeSet::from([root.clone()]),
            edges: BTreeSet::new(),
        };
        let mut stack = vec![root.as_str()];
        while let Some(c) = stack.pop() {
            for &d in derived.get(c).map(Vec::as_slice).unwrap_or_default() {
                tree.edges.insert((c.to_owned(), d.to_owned()));
                if tree.members.insert(d.to_owned()) {
                    stack.push(d);
                }
            }
        }
        trees.push(tree);
    }
    Ok(trees)
}

fn check_acyclic(
    h: &ClassHierarchy,
    derived: &HashMap<&str, Vec<&str>>,
) -> Result<(), ResolveError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark: HashMap<&str, Mark> = h
        .classes
        .iter()
        .map(|(n, _)| (n.as_str(), Mark::New))
        .collect();
    for (start, _) in &h.classes {
        if mark[start.as_str()] != Mark::New {
            continue;
        }
        let mut stack = vec![(start.as_str(), 0usize)];
        mark.insert(start, Mark::Active);
        while let Some((c, i)) = stack.pop() {
            let kids = derived.get(c).map(Vec::as_slice).unwrap_or_default();
            if i < kids.len() {
                stack.push((c, i + 1));
                let d = kids[i];
                match mark[d] {
                    Mark::Active => return Err(ResolveError::Cycle(d.to_owned())),
                    Mark::New => {
                        mark.insert(d, Mark::Active);
                        stack.push((d, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark.insert(c, Mark::Done);
            }
        }
    }
    Ok(())
}

/// Candidate callee nodes for a single site.
pub fn site_candidates(
    trees: &[HierarchyTree],
    h: &ClassHierarchy,
    site: &IndirectCallSite,
) -> Option<BTreeSet<String>> {
    match &site.kind {
        CallKind::Virtual { base_class, name } => {
            let containing: Vec<_> = trees.iter().filter(|t| t.contains(base_class)).collect();
            if containing.is_empty() {
                return None;
            }
            let mut out = BTreeSet::new();
            for tree in containing {
                out.extend(
                    h.methods
                        .iter()
                        .filter(|m| {
                            tree.contains(&m.owner)
                                && m.name == *name
                                && m.prototype == site.prototype
                        })
                        .map(|m| m.cg_node.clone()),
                );
            }
            Some(out)
        }
        CallKind::FunctionPointer => Some(
            h.functions
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
        ),
    }
}

#[derive(Debug, Clone)]
pub struct Resolution {
    pub graph: ProgramGraph,
    /// Edges added, in insertion order.
    pub added: Vec<(String, String)>,
    /// Indices of sites that had no candidates.
    pub unresolved: Vec<usize>,
}

/// Adds an indirect edge from each site's caller to each of its candidates.
/// Existing edges are kept and never duplicated.
pub fn resolve_indirect_calls(
    cg: &ProgramGraph,
    h: &ClassHierarchy,
    sites: &[IndirectCallSite],
) -> Result<Resolution, ResolveError> {
    let trees = build_hierarchy_trees(h)?;
    let known: BTreeSet<&str> = h.classes.iter().map(|(n, _)| n.as_str()).collect();
    let mut wanted = BTreeSet::new();
    let mut unresolved = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        if !cg.contains(&site.caller) {
            return Err(ResolveError::MissingNode(site.caller.clone()));
        }
        if let CallKind::Virtual { base_class, .. } = &site.kind {
            if !known.contains(base_class.as_str()) {
                return Err(ResolveError::UnknownBaseClass {
                    site: i,
                    caller: site.caller.clone(),
                    base: base_class.clone(),
                });
            }
        }
        let candidates = site_candidates(&trees, h, site).unwrap_or_default();
        if candidates.is_empty() {
            unresolved.push(i);
        }
        for c in candidates {
            if !cg.contains(&c) {
                return Err(ResolveError::MissingNode(c));
            }
            wanted.insert((site.caller.clone(), c));
        }
    }
    let mut graph = cg.clone();
    let mut added = Vec::new();
    for (from, to) in wanted {
        if graph.add_edge(GraphEdge::indirect(from.clone(), to.clone()))? {
            added.push((from, to));
        }
    }
    Ok(Resolution {
        graph,
        added,
        unresolved,
    })
}
