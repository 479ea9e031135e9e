//! Static analysis end to end, the `ets.toml` exchange format and trace
//! evaluation against it.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ets::{
    build_ets, build_ets_detached, map_target_to_cfg, map_target_to_cg, AnalyzedGraph,
    EnhancedTargetSequence, EtsError,
};
use crate::graph::{GraphKind, Membership, ProgramGraph, TargetPoint};
use crate::icall::{resolve_indirect_calls, HierarchySpec, ResolveError};
use crate::proximity::{
    priorityw_all, score_trace, select_ots_and_cfw, GMaxCov, ProximityError, BETA,
};
use crate::weights::annotate_graphs;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyzeError {
    #[error(transparent)]
    Ets(#[from] EtsError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Proximity(#[from] ProximityError),
    #[error("no CFG for function `{0}`")]
    MissingCfg(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AnalyzeOptions {
    pub resolve_icalls: bool,
    /// Build a shortened ETS instead of failing when the target function is
    /// not reachable in the call graph.
    pub allow_unreachable: bool,
}

#[derive(Debug, Clone)]
pub struct AnalysisInput {
    pub cg: ProgramGraph,
    /// CFGs keyed by function name.
    pub cfgs: BTreeMap<String, ProgramGraph>,
    pub targets: Vec<TargetPoint>,
    pub hierarchy: Option<HierarchySpec>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    /// Call graph after indirect-call resolution, annotated.
    pub cg: AnalyzedGraph,
    pub cfgs: BTreeMap<String, AnalyzedGraph>,
    pub etss: Vec<EnhancedTargetSequence>,
    pub priorities: Vec<u32>,
    pub plan: Vec<PlanBlock>,
    pub resolved_edges: Vec<(String, String)>,
    pub unresolved_sites: Vec<usize>,
}

pub fn analyze(input: AnalysisInput, opts: AnalyzeOptions) -> Result<Analysis, AnalyzeError> {
    let AnalysisInput {
        mut cg,
        cfgs,
        targets,
        hierarchy,
    } = input;
    let mut resolved_edges = Vec::new();
    let mut unresolved_sites = Vec::new();
    if opts.resolve_icalls {
        if let Some(spec) = &hierarchy {
            let r = resolve_indirect_calls(&cg, &spec.hierarchy, &spec.sites)?;
            cg = r.graph;
            resolved_edges = r.added;
            unresolved_sites = r.unresolved;
        }
    }
    let mut cg = AnalyzedGraph::new(cg);
    let mut cfgs: BTreeMap<String, AnalyzedGraph> = cfgs
        .into_iter()
        .map(|(name, g)| (name, AnalyzedGraph::new(g)))
        .collect();

    let mut etss = Vec::with_capacity(targets.len());
    for tp in &targets {
        let cg_target = map_target_to_cg(&cg.graph, tp)?;
        let function = cg
            .graph
            .node(&cg_target)
            .expect("mapped node exists")
            .name()
            .to_owned();
        let cfg = cfgs
            .get(&function)
            .ok_or_else(|| AnalyzeError::MissingCfg(function.clone()))?;
        let cfg_target = map_target_to_cfg(&cfg.graph, tp)?;
        let build = if opts.allow_unreachable {
            build_ets_detached
        } else {
            build_ets
        };
        etss.push(build(
            &cg.tree,
            &cfg.tree,
            tp,
            &cg_target,
            &function,
            &cfg_target,
        )?);
    }
    annotate_graphs(&mut etss, &mut cg, &mut cfgs);
    let plan = instrumentation_plan(&etss, &cg, &cfgs);
    let priorities = priorityw_all(&keyed_sequences(&etss))?;
    Ok(Analysis {
        cg,
        cfgs,
        etss,
        priorities,
        plan,
        resolved_edges,
        unresolved_sites,
    })
}

/// ETS elements keyed by graph and node, so equal nodes compare equal across
/// sequences.
fn keyed_sequences(etss: &[EnhancedTargetSequence]) -> Vec<Vec<((GraphKind, String), f64)>> {
    etss.iter()
        .map(|e| {
            e.elements
                .iter()
                .map(|el| ((el.graph.clone(), el.node.clone()), el.weight))
                .collect()
        })
        .collect()
}

/// A block that reports its execution at run time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBlock {
    pub id: u32,
    /// `cg` or `cfg`.
    pub graph: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    pub node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
}

impl PlanBlock {
    pub fn kind(&self) -> Option<GraphKind> {
        match (self.graph.as_str(), &self.function) {
            ("cg", None) => Some(GraphKind::CallGraph),
            ("cfg", Some(f)) => Some(GraphKind::ControlFlow(f.clone())),
            _ => None,
        }
    }
}

fn instrumentation_plan(
    etss: &[EnhancedTargetSequence],
    cg: &AnalyzedGraph,
    cfgs: &BTreeMap<String, AnalyzedGraph>,
) -> Vec<PlanBlock> {
    let mut seen = HashSet::new();
    let mut plan = Vec::new();
    for el in etss.iter().flat_map(|e| &e.elements) {
        if !seen.insert((el.graph.clone(), el.node.clone())) {
            continue;
        }
        let graph = match &el.graph {
            GraphKind::CallGraph => &cg.graph,
            GraphKind::ControlFlow(f) => &cfgs[f].graph,
        };
        let node = graph.node(&el.node).expect("ETS element exists");
        let loc = node.location.as_ref();
        plan.push(PlanBlock {
            id: plan.len() as u32,
            graph: if el.graph == GraphKind::CallGraph {
                "cg"
            } else {
                "cfg"
            }
            .into(),
            function: el.graph.function().map(str::to_owned),
            node: el.node.clone(),
            name: node.label.as_ref().map(|_| node.name().to_owned()),
            file: loc.map(|l| l.file.clone()),
            line: loc.map(|l| l.start_line),
        });
    }
    plan
}

#[derive(Debug, Error, PartialEq)]
pub enum EtsFileError {
    #[error("ets file: {0}")]
    Format(String),
    #[error("ets file: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementRecord {
    pub block: u32,
    pub membership: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtsRecord {
    pub id: u32,
    pub file: String,
    pub line: u32,
    pub cg_target: String,
    pub function: String,
    pub cfg_target: String,
    pub priority: u32,
    pub element: Vec<ElementRecord>,
}

/// Contents of `ets.toml`: the instrumentation plan and every ETS as a list
/// of plan blocks with weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtsFile {
    pub block: Vec<PlanBlock>,
    pub ets: Vec<EtsRecord>,
}

/// An ETS as the campaign sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEts {
    pub id: u32,
    pub seq: Vec<(u32, f64)>,
    pub priority: u32,
}

impl EtsFile {
    pub fn from_analysis(a: &Analysis) -> Self {
        let ids: HashMap<(GraphKind, &str), u32> = a
            .plan
            .iter()
            .map(|b| ((b.kind().expect("plan built here"), b.node.as_str()), b.id))
            .collect();
        let ets = a
            .etss
            .iter()
            .zip(&a.priorities)
            .map(|(e, p)| EtsRecord {
                id: e.id,
                file: e.target.file.clone(),
                line: e.target.line,
                cg_target: e.cg_target.clone(),
                function: e.function.clone(),
                cfg_target: e.cfg_target.clone(),
                priority: *p,
                element: e
                    .elements
                    .iter()
                    .map(|el| ElementRecord {
                        block: ids[&(el.graph.clone(), el.node.as_str())],
                        membership: el.membership.as_str().to_owned(),
                        weight: el.weight,
                    })
                    .collect(),
            })
            .collect();
        EtsFile {
            block: a.plan.clone(),
            ets,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("ets file serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, EtsFileError> {
        let f: EtsFile =
            toml::from_str(text).map_err(|e| EtsFileError::Format(e.message().to_owned()))?;
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<(), EtsFileError> {
        let bad = |m: String| Err(EtsFileError::Invalid(m));
        let mut ids = HashSet::new();
        for b in &self.block {
            if !ids.insert(b.id) {
                return bad(format!("duplicate block id {}", b.id));
            }
            if b.kind().is_none() {
                return bad(format!(
                    "block {}: graph must be `cg` (no function) or `cfg` with a function",
                    b.id
                ));
            }
        }
        if self.ets.is_empty() {
            return bad("no ETS".into());
        }
        let mut ets_ids = HashSet::new();
        for e in &self.ets {
            if !ets_ids.insert(e.id) {
                return bad(format!("duplicate ETS id {}", e.id));
            }
            if e.element.is_empty() {
                return bad(format!("ETS {} is empty", e.id));
            }
            for el in &e.element {
                if !ids.contains(&el.block) {
                    return bad(format!(
                        "ETS {} references unknown block {}",
                        e.id, el.block
                    ));
                }
                if !(el.weight > 0.0 && el.weight <= 1.0) {
                    return bad(format!("ETS {}: weight {} outside (0, 1]", e.id, el.weight));
                }
                if Membership::parse(&el.membership).is_none() {
                    return bad(format!("ETS {}: bad membership `{}`", e.id, el.membership));
                }
            }
        }
        Ok(())
    }

    /// Sequences for the campaign. With `weighted` false every weight becomes
    /// 1 and priorities are recomputed for the flattened sequences.
    pub fn weighted_sequences(&self, weighted: bool) -> Result<Vec<WeightedEts>, ProximityError> {
        let mut out: Vec<WeightedEts> = self
            .ets
            .iter()
            .map(|e| WeightedEts {
                id: e.id,
                seq: e
                    .element
                    .iter()
                    .map(|el| (el.block, if weighted { el.weight } else { 1.0 }))
                    .collect(),
                priority: e.priority,
            })
            .collect();
        if !weighted {
            let seqs: Vec<_> = out.iter().map(|e| e.seq.clone()).collect();
            for (e, p) in out.iter_mut().zip(priorityw_all(&seqs)?) {
                e.priority = p;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("trace line {line}: `{text}` is not a block id")]
    Parse { line: usize, text: String },
    #[error("trace line {line}: unknown block id {id}")]
    UnknownBlock { line: usize, id: u32 },
}

/// One block id per line; blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str, plan: &[PlanBlock]) -> Result<Vec<u32>, TraceError> {
    let known: HashSet<u32> = plan.iter().map(|b| b.id).collect();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let id: u32 = t.parse().map_err(|_| TraceError::Parse {
            line: i + 1,
            text: t.to_owned(),
        })?;
        if !known.contains(&id) {
            return Err(TraceError::UnknownBlock { line: i + 1, id });
        }
        out.push(id);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtsMetrics {
    pub ets_id: u32,
    pub simw: f64,
    pub w: f64,
    pub seqcovw: f64,
    pub priorityw: u32,
    pub gmaxcovw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub per_ets: Vec<EtsMetrics>,
    pub ots_id: u32,
    pub cfw: f64,
}

/// Scores one trace against every ETS, folds the scores into `gmax` and
/// selects the outstanding sequence.
pub fn evaluate_trace(
    etss: &[WeightedEts],
    trace: &[u32],
    gmax: &mut GMaxCov,
) -> Result<MetricsReport, ProximityError> {
    let mut per_ets = Vec::with_capacity(etss.len());
    for (i, e) in etss.iter().enumerate() {
        let s = score_trace(&e.seq, trace)?;
        gmax.update(i, s.seqcovw);
        per_ets.push(EtsMetrics {
            ets_id: e.id,
            simw: s.simw,
            w: s.w,
            seqcovw: s.seqcovw,
            priorityw: e.priority,
            gmaxcovw: gmax.values()[i],
        });
    }
    let seqcov: Vec<f64> = per_ets.iter().map(|m| m.seqcovw).collect();
    let prio: Vec<u32> = per_ets.iter().map(|m| m.priorityw).collect();
    let o = select_ots_and_cfw(&seqcov, &prio, gmax.values(), BETA).expect("ETS list is non-empty");
    Ok(MetricsReport {
        ots_id: etss[o.ots].id,
        cfw: o.cfw,
        per_ets,
    })
}
