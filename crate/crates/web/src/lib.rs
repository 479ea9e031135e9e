//! Browser bindings. Every export returns a JSON string; failures come back as
//! `{"error": "..."}` so the page never has to catch exceptions.

use difuzz_core::domtree::DominatorTree;
use difuzz_core::graph::{dump_dot, parse_dot, GraphKind};
use difuzz_core::pipeline::{evaluate_trace, parse_trace, EtsFile};
use difuzz_core::proximity::GMaxCov;
use difuzz_core::schedule::{capability_w, ets_energy, temperature, ScheduleConfig};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

const SAMPLE_ETS: &str = include_str!("../../../fixtures/ets1/ets.toml");
const SAMPLE_TRACE: &str = include_str!("../../../fixtures/ets1/t2.trace");
const SAMPLE_DOT: &str = include_str!("../../../fixtures/model/graphs/cg.dot");

fn error(msg: impl ToString) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// Built-in inputs for the page: `ets`, `trace` or `dot`.
#[wasm_bindgen]
pub fn sample(kind: &str) -> String {
    match kind {
        "ets" => SAMPLE_ETS,
        "trace" => SAMPLE_TRACE,
        "dot" => SAMPLE_DOT,
        _ => "",
    }
    .to_owned()
}

#[derive(Serialize)]
struct Curve {
    t: Vec<f64>,
    temperature: Vec<f64>,
    capability: Vec<f64>,
    energy: Vec<u64>,
}

/// Temperature, capability and energy for an input with the given CFW,
/// sampled at `points` instants over `[0, 2 * tx_seconds]`.
#[wasm_bindgen]
pub fn schedule_curve(tx_seconds: f64, base_energy: u32, cfw: f64, points: u32) -> String {
    let cfg = ScheduleConfig {
        tx_seconds,
        base_energy: u64::from(base_energy),
        ..ScheduleConfig::default()
    };
    if let Err(e) = cfg.validate() {
        return error(e);
    }
    if !(0.0..=1.0).contains(&cfw) {
        return error("CFW must lie in [0, 1]");
    }
    let n = points.clamp(2, 2000);
    let mut c = Curve {
        t: Vec::new(),
        temperature: Vec::new(),
        capability: Vec::new(),
        energy: Vec::new(),
    };
    for i in 0..n {
        let t = 2.0 * tx_seconds * f64::from(i) / f64::from(n - 1);
        let temp = temperature(t, tx_seconds);
        let cap = capability_w(cfw, temp);
        c.t.push(t);
        c.temperature.push(temp);
        c.capability.push(cap);
        c.energy.push(ets_energy(cfg.base_energy, cap));
    }
    serde_json::to_string(&c).expect("curve serializes")
}

/// Scores a trace (block ids, one per line) against an `ets.toml`.
#[wasm_bindgen]
pub fn score_trace(ets_toml: &str, trace: &str, weighted: bool) -> String {
    let file = match EtsFile::from_toml(ets_toml) {
        Ok(f) => f,
        Err(e) => return error(e),
    };
    let trace = match parse_trace(trace, &file.block) {
        Ok(t) => t,
        Err(e) => return error(e),
    };
    let report = file
        .weighted_sequences(weighted)
        .map_err(|e| e.to_string())
        .and_then(|etss| {
            evaluate_trace(&etss, &trace, &mut GMaxCov::new(etss.len())).map_err(|e| e.to_string())
        });
    match report {
        Ok(r) => json!({ "per_ets": r.per_ets, "ots_id": r.ots_id, "cfw": r.cfw }).to_string(),
        Err(e) => error(e),
    }
}

/// Dominator tree of a DOT graph: immediate dominator and depth per
/// reachable node, plus the tree itself as DOT.
#[wasm_bindgen]
pub fn dominators(dot: &str) -> String {
    let g = match parse_dot(dot, GraphKind::CallGraph) {
        Ok(g) => g,
        Err(e) => return error(e),
    };
    let tree = DominatorTree::compute(&g);
    let nodes: Vec<_> = g
        .nodes()
        .iter()
        .filter(|n| tree.contains(&n.id))
        .map(|n| {
            json!({
                "id": n.id,
                "name": n.name(),
                "idom": tree.parent(&n.id),
                "depth": tree.depth(&n.id),
            })
        })
        .collect();
    json!({
        "entry": g.entry(),
        "unreachable": tree.unreachable_count(),
        "nodes": nodes,
        "dot": dump_dot(&tree.to_graph(&g)),
    })
    .to_string()
}
