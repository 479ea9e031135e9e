//! Mock programs: functions made of blocks that branch on input bytes and
//! call other functions, directly or through a byte-selected dispatch table.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Deserialize;

use super::SimError;
use crate::graph::{GraphEdge, GraphKind, GraphNode, ProgramGraph, SourceLocation};
use crate::pipeline::PlanBlock;

const MAX_CALL_DEPTH: usize = 64;
const MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cmp {
    Lt,
    Gt,
    Eq,
    Ne,
}

impl Cmp {
    fn holds(self, a: u8, b: u8) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Gt => a > b,
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProgram {
    input_len: usize,
    entry: String,
    #[serde(default)]
    function: Vec<RawFunction>,
    #[serde(default)]
    block: Vec<RawBlock>,
    #[serde(default)]
    target: Vec<RawTarget>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunction {
    name: String,
    cg_node: Option<String>,
    entry: String,
    file: Option<String>,
    lines: Option<[u32; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlock {
    function: String,
    id: String,
    lines: Option<[u32; 2]>,
    #[serde(default)]
    calls: Vec<RawCall>,
    next: Option<String>,
    branch: Option<RawBranch>,
    #[serde(default)]
    crash: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCall {
    Direct(String),
    Dispatch(RawDispatch),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDispatch {
    byte: usize,
    targets: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    byte: usize,
    cmp: Cmp,
    value: u8,
    then: String,
    #[serde(rename = "else")]
    otherwise: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    tp_id: u32,
    function: String,
    block: String,
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub cg_node: String,
    pub entry: usize,
    pub file: Option<String>,
    pub lines: Option<[u32; 2]>,
}

#[derive(Debug, Clone)]
enum Call {
    Direct(usize),
    /// Calls `targets[input[byte] % len]`.
    Dispatch {
        byte: usize,
        targets: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
enum Exit {
    Return,
    Goto(usize),
    Branch {
        byte: usize,
        cmp: Cmp,
        value: u8,
        then: usize,
        otherwise: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Block {
    pub function: usize,
    pub id: String,
    pub lines: Option<[u32; 2]>,
    calls: Vec<Call>,
    exit: Exit,
    pub crash: bool,
    hash: u16,
}

#[derive(Debug, Clone)]
pub struct MockProgram {
    pub input_len: usize,
    entry: usize,
    functions: Vec<Function>,
    blocks: Vec<Block>,
    /// `(tp_id, block index)`.
    targets: Vec<(u32, usize)>,
}

/// Which functions and blocks report to the trace, and under which plan id.
#[derive(Debug, Clone)]
pub struct Instrumentation {
    functions: Vec<Option<u32>>,
    blocks: Vec<Option<u32>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Execution {
    pub trace: Vec<u32>,
    pub crashed: bool,
    /// Target ids hit, ascending.
    pub reached: Vec<u32>,
    /// Coverage map slots touched, in execution order.
    pub edges: Vec<u16>,
    pub truncated: bool,
}

fn invalid(msg: String) -> SimError {
    SimError::Program(msg)
}

impl MockProgram {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let raw: RawProgram = toml::from_str(text).map_err(|e| invalid(e.message().to_owned()))?;
        if raw.input_len == 0 {
            return Err(invalid("input_len must be positive".into()));
        }
        let mut fn_index = HashMap::new();
        for (i, f) in raw.function.iter().enumerate() {
            if fn_index.insert(f.name.clone(), i).is_some() {
                return Err(invalid(format!("function `{}` declared twice", f.name)));
            }
        }
        let mut cg_nodes = HashSet::new();
        for f in &raw.function {
            if !cg_nodes.insert(f.cg_node.as_deref().unwrap_or(&f.name)) {
                return Err(invalid(format!(
                    "call graph node of `{}` is not unique",
                    f.name
                )));
            }
        }
        let mut block_index = HashMap::new();
        for (i, b) in raw.block.iter().enumerate() {
            let Some(&f) = fn_index.get(&b.function) else {
                return Err(invalid(format!(
                    "block `{}` in unknown function `{}`",
                    b.id, b.function
                )));
            };
            if block_index.insert((f, b.id.clone()), i).is_some() {
                return Err(invalid(format!(
                    "block `{}::{}` declared twice",
                    b.function, b.id
                )));
            }
        }
        let lookup_fn = |name: &str, ctx: &str| {
            fn_index
                .get(name)
                .copied()
                .ok_or_else(|| invalid(format!("{ctx}: unknown function `{name}`")))
        };
        let lookup_block = |f: usize, id: &str, ctx: &str| {
            block_index
                .get(&(f, id.to_owned()))
                .copied()
                .ok_or_else(|| invalid(format!("{ctx}: unknown block `{id}`")))
        };
        let check_byte = |byte: usize, ctx: &str| {
            if byte >= raw.input_len {
                Err(invalid(format!(
                    "{ctx}: byte {byte} beyond input length {}",
                    raw.input_len
                )))
            } else {
                Ok(())
            }
        };

        let mut functions = Vec::with_capacity(raw.function.len());
        for (i, f) in raw.function.iter().enumerate() {
            let entry = lookup_block(i, &f.entry, &format!("function `{}`", f.name))?;
            functions.push(Function {
                name: f.name.clone(),
                cg_node: f.cg_node.clone().unwrap_or_else(|| f.name.clone()),
                entry,
                file: f.file.clone(),
                lines: f.lines,
            });
        }

        let mut blocks = Vec::with_capacity(raw.block.len());
        for (i, b) in raw.block.iter().enumerate() {
            let f = fn_index[&b.function];
            let ctx = format!("block `{}::{}`", b.function, b.id);
            let mut calls = Vec::new();
            for c in &b.calls {
                calls.push(match c {
                    RawCall::Direct(name) => Call::Direct(lookup_fn(name, &ctx)?),
                    RawCall::Dispatch(d) => {
                        check_byte(d.byte, &ctx)?;
                        if d.targets.is_empty() {
                            return Err(invalid(format!("{ctx}: empty dispatch table")));
                        }
                        Call::Dispatch {
                            byte: d.byte,
                            targets: d
                                .targets
                                .iter()
                                .map(|t| lookup_fn(t, &ctx))
                                .collect::<Result<_, _>>()?,
                        }
                    }
                });
            }
            let exit = match (&b.next, &b.branch) {
                (Some(_), Some(_)) => {
                    return Err(invalid(format!("{ctx}: both `next` and `branch` given")))
                }
                (None, None) => Exit::Return,
                (Some(n), None) => Exit::Goto(lookup_block(f, n, &ctx)?),
                (None, Some(br)) => {
                    check_byte(br.byte, &ctx)?;
                    Exit::Branch {
                        byte: br.byte,
                        cmp: br.cmp,
                        value: br.value,
                        then: lookup_block(f, &br.then, &ctx)?,
                        otherwise: lookup_block(f, &br.otherwise, &ctx)?,
                    }
                }
            };
            blocks.push(Block {
                function: f,
                id: b.id.clone(),
                lines: b.lines,
                calls,
                exit,
                crash: b.crash,
                hash: ((i as u32 + 1).wrapping_mul(0x9E37_79B1) >> 16) as u16,
            });
        }

        let entry = lookup_fn(&raw.entry, "entry")?;
        let mut targets = Vec::new();
        let mut tp_ids = HashSet::new();
        for t in &raw.target {
            if !tp_ids.insert(t.tp_id) {
                return Err(invalid(format!("target {} declared twice", t.tp_id)));
            }
            let f = lookup_fn(&t.function, &format!("target {}", t.tp_id))?;
            targets.push((
                t.tp_id,
                lookup_block(f, &t.block, &format!("target {}", t.tp_id))?,
            ));
        }
        Ok(MockProgram {
            input_len: raw.input_len,
            entry,
            functions,
            blocks,
            targets,
        })
    }

    pub fn functions(&self) -> &[Function] {
        &self.functions
    }

    pub fn target_ids(&self) -> Vec<u32> {
        self.targets.iter().map(|(t, _)| *t).collect()
    }

    /// Maps plan blocks onto the program. Fails with every plan block that
    /// has no counterpart.
    pub fn instrument(&self, plan: &[PlanBlock]) -> Result<Instrumentation, SimError> {
        let mut functions = vec![None; self.functions.len()];
        let mut blocks = vec![None; self.blocks.len()];
        let mut missing = Vec::new();
        for p in plan {
            let hit = match p.kind() {
                Some(GraphKind::CallGraph) => self
                    .functions
                    .iter()
                    .position(|f| f.cg_node == p.node)
                    .map(|i| functions[i] = Some(p.id)),
                Some(GraphKind::ControlFlow(func)) => self
                    .blocks
                    .iter()
                    .position(|b| b.id == p.node && self.functions[b.function].name == func)
                    .map(|i| blocks[i] = Some(p.id)),
                None => None,
            };
            if hit.is_none() {
                missing.push(p.id);
            }
        }
        if missing.is_empty() {
            Ok(Instrumentation { functions, blocks })
        } else {
            Err(SimError::PlanMismatch(missing))
        }
    }

    /// Runs `input` from the entry function. Input bytes past the end read
    /// as 0. The trace stops growing at `max_trace` entries.
    pub fn execute(&self, input: &[u8], instr: &Instrumentation, max_trace: usize) -> Execution {
        let mut run = Run {
            program: self,
            input,
            instr,
            max_trace,
            out: Execution::default(),
            prev: 0,
            steps: 0,
            stop: false,
        };
        run.call(self.entry, 0);
        let mut out = run.out;
        out.reached.sort_unstable();
        out.reached.dedup();
        out
    }

    /// Call graph with one node per function and direct call edges.
    pub fn call_graph(&self) -> ProgramGraph {
        let nodes = self
            .functions
            .iter()
            .map(|f| {
                let mut n = GraphNode::new(f.cg_node.clone()).with_label(format!("{{{}}}", f.name));
                if let (Some(file), Some([s, e])) = (&f.file, f.lines) {
                    n = n.with_location(SourceLocation::new(file.clone(), s, e));
                }
                n
            })
            .collect();
        let mut edges: Vec<GraphEdge> = Vec::new();
        let mut seen = HashSet::new();
        for b in &self.blocks {
            for c in &b.calls {
                if let Call::Direct(callee) = c {
                    if seen.insert((b.function, *callee)) {
                        edges.push(GraphEdge::direct(
                            self.functions[b.function].cg_node.clone(),
                            self.functions[*callee].cg_node.clone(),
                        ));
                    }
                }
            }
        }
        let mut g = ProgramGraph::new(
            GraphKind::CallGraph,
            nodes,
            edges,
            &self.functions[self.entry].cg_node,
        )
        .expect("validated program lowers to a valid graph");
        g.name = Some("Call graph".into());
        g
    }

    /// CFG of every function, keyed by function name.
    pub fn cfgs(&self) -> BTreeMap<String, ProgramGraph> {
        let mut out = BTreeMap::new();
        for (fi, f) in self.functions.iter().enumerate() {
            let members: Vec<&Block> = self.blocks.iter().filter(|b| b.function == fi).collect();
            let nodes = members
                .iter()
                .map(|b| {
                    let mut n = GraphNode::new(b.id.clone());
                    if let (Some(file), Some([s, e])) = (&f.file, b.lines) {
                        n = n.with_location(SourceLocation::new(file.clone(), s, e));
                    }
                    n
                })
                .collect();
            let mut edges = Vec::new();
            for b in &members {
                let succ = match &b.exit {
                    Exit::Return => vec![],
                    Exit::Goto(n) => vec![*n],
                    Exit::Branch {
                        then, otherwise, ..
                    } if then == otherwise => vec![*then],
                    Exit::Branch {
                        then, otherwise, ..
                    } => vec![*then, *otherwise],
                };
                for s in succ {
                    edges.push(GraphEdge::direct(b.id.clone(), self.blocks[s].id.clone()));
                }
            }
            let mut g = ProgramGraph::new(
                GraphKind::ControlFlow(f.name.clone()),
                nodes,
                edges,
                &self.blocks[f.entry].id,
            )
            .expect("validated program lowers to a valid graph");
            g.name = Some(format!("CFG for '{}' function", f.name));
            out.insert(f.name.clone(), g);
        }
        out
    }

    /// Targets file text locating each target block by its first line.
    /// Targets whose function has no file or whose block has no lines are
    /// skipped.
    pub fn targets_toml(&self) -> String {
        let mut out = String::new();
        let mut targets = self.targets.clone();
        targets.sort_unstable();
        for (_, b) in targets {
            let block = &self.blocks[b];
            let f = &self.functions[block.function];
            if let (Some(file), Some([s, _])) = (&f.file, block.lines) {
                out.push_str(&format!("[[target]]\nfile = {file:?}\nline = {s}\n\n"));
            }
        }
        out
    }
}

struct Run<'a> {
    program: &'a MockProgram,
    input: &'a [u8],
    instr: &'a Instrumentation,
    max_trace: usize,
    out: Execution,
    prev: u16,
    steps: usize,
    stop: bool,
}

impl Run<'_> {
    fn byte(&self, i: usize) -> u8 {
        self.input.get(i).copied().unwrap_or(0)
    }

    fn emit(&mut self, id: Option<u32>) {
        if let Some(id) = id {
            if self.out.trace.len() < self.max_trace {
                self.out.trace.push(id);
            } else {
                self.out.truncated = true;
            }
        }
    }

    fn call(&mut self, f: usize, depth: usize) {
        if self.stop || depth >= MAX_CALL_DEPTH {
            return;
        }
        self.emit(self.instr.functions[f]);
        let mut b = self.program.functions[f].entry;
        loop {
            self.steps += 1;
            if self.steps > MAX_STEPS {
                self.stop = true;
                return;
            }
            let block = &self.program.blocks[b];
            self.emit(self.instr.blocks[b]);
            self.out.edges.push(block.hash ^ self.prev);
            self.prev = block.hash >> 1;
            self.visited(b);
            if block.crash {
                self.out.crashed = true;
                self.stop = true;
                return;
            }
            for c in &block.calls {
                let callee = match c {
                    Call::Direct(t) => *t,
                    Call::Dispatch { byte, targets } => {
                        targets[usize::from(self.byte(*byte)) % targets.len()]
                    }
                };
                self.call(callee, depth + 1);
                if self.stop {
                    return;
                }
            }
            b = match &block.exit {
                Exit::Return => return,
                Exit::Goto(n) => *n,
                Exit::Branch {
                    byte,
                    cmp,
                    value,
                    then,
                    otherwise,
                } => {
                    if cmp.holds(self.byte(*byte), *value) {
                        *then
                    } else {
                        *otherwise
                    }
                }
            };
        }
    }

    fn visited(&mut self, b: usize) {
        for (tp, tb) in &self.program.targets {
            if *tb == b {
                self.out.reached.push(*tp);
            }
        }
    }
}
