use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use difuzz_core::ets::EtsError;
use difuzz_core::graph::{dump_dot, parse_dot_with_entry, parse_targets, GraphKind, ProgramGraph};
use difuzz_core::icall::HierarchySpec;
use difuzz_core::pipeline::{
    analyze, evaluate_trace, parse_trace, AnalysisInput, AnalyzeError, AnalyzeOptions, EtsFile,
};
use difuzz_core::proximity::GMaxCov;
use difuzz_core::sim::{run_campaign, CampaignConfig, MockProgram};

const USAGE: u8 = 1;
const VALIDATION: u8 = 2;
const ANALYSIS: u8 = 3;

struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn fail<E: Into<anyhow::Error>>(code: u8) -> impl FnOnce(E) -> Failure {
    move |e| Failure {
        code,
        err: e.into(),
    }
}

type Outcome = Result<(), Failure>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Parser)]
#[command(
    name = "difuzz",
    version,
    about = "ETS-guided directed fuzzing: static analysis, metrics and simulation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build ETSs for the target points and write ets.toml plus annotated graphs.
    Analyze {
        /// Directory holding cg.dot and cfg_<function>.dot files.
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        /// Class hierarchy and indirect call sites.
        #[arg(long)]
        hierarchy: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "on")]
        resolve_icalls: Switch,
        /// Call graph entry node (defaults to the `entry` graph attribute or `main`).
        #[arg(long)]
        entry: Option<String>,
        /// Keep targets whose function is unreachable in the call graph, with a
        /// call graph segment reduced to the function itself.
        #[arg(long)]
        allow_unreachable: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one trace against every ETS of an ets.toml.
    Metrics {
        #[arg(long)]
        ets: PathBuf,
        /// One block id per line.
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated gMaxCovW values carried over from earlier traces.
        #[arg(long, value_delimiter = ',')]
        gmax: Vec<f64>,
        #[arg(long, value_enum, default_value = "on")]
        weights: Switch,
    },
    /// Run a simulated campaign against a mock program.
    Simulate {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        ets: PathBuf,
        /// Campaign configuration TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "on")]
        weights: Switch,
        /// Charge a fixed virtual duration per execution instead of wall time.
        #[arg(long)]
        virtual_time: bool,
        #[arg(long)]
        budget_iters: Option<u64>,
        #[arg(long)]
        tx_seconds: Option<f64>,
        /// Event log destination (JSON lines); standard output when omitted.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Lower a mock program to cg.dot, cfg_<function>.dot and targets.toml.
    ExportGraphs {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(fail(USAGE))
}

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(fail(USAGE))
}

fn load_graphs(
    dir: &Path,
    entry: Option<&str>,
) -> Result<(ProgramGraph, BTreeMap<String, ProgramGraph>), Failure> {
    let cg_path = dir.join("cg.dot");
    let cg = parse_dot_with_entry(&read(&cg_path)?, GraphKind::CallGraph, entry)
        .with_context(|| cg_path.display().to_string())
        .map_err(fail(VALIDATION))?;
    let listing = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))
        .map_err(fail(USAGE))?;
    let mut paths: Vec<PathBuf> = listing.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    let mut cfgs = BTreeMap::new();
    for p in paths {
        let Some(name) = p.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(func) = name
            .strip_prefix("cfg_")
            .and_then(|n| n.strip_suffix(".dot"))
        else {
            continue;
        };
        let g = parse_dot_with_entry(&read(&p)?, GraphKind::ControlFlow(func.to_owned()), None)
            .with_context(|| p.display().to_string())
            .map_err(fail(VALIDATION))?;
        cfgs.insert(func.to_owned(), g);
    }
    Ok((cg, cfgs))
}

fn analyze_code(e: &AnalyzeError) -> u8 {
    match e {
        AnalyzeError::Ets(
            EtsError::Unmappable { .. } | EtsError::Ambiguous { .. } | EtsError::Unreachable { .. },
        ) => ANALYSIS,
        _ => VALIDATION,
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    graphs: &Path,
    targets: &Path,
    hierarchy: Option<&Path>,
    resolve_icalls: bool,
    entry: Option<&str>,
    allow_unreachable: bool,
    out: &Path,
) -> Outcome {
    let targets_text = read(targets)?;
    let hierarchy_text = hierarchy.map(read).transpose()?;
    let (cg, cfgs) = load_graphs(graphs, entry)?;
    let targets = parse_targets(&targets_text)
        .context("targets file")
        .map_err(fail(VALIDATION))?;
    let have_hierarchy = hierarchy_text.is_some();
    let hierarchy = hierarchy_text
        .map(|t| HierarchySpec::from_toml(&t))
        .transpose()
        .map_err(fail(VALIDATION))?;
    let analysis = analyze(
        AnalysisInput {
            cg,
            cfgs,
            targets,
            hierarchy,
        },
        AnalyzeOptions {
            resolve_icalls,
            allow_unreachable,
        },
    )
    .map_err(|e| Failure {
        code: analyze_code(&e),
        err: e.into(),
    })?;

    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(fail(USAGE))?;
    write(
        &out.join("ets.toml"),
        &EtsFile::from_analysis(&analysis).to_toml(),
    )?;
    write(&out.join("cg.dot"), &dump_dot(&analysis.cg.graph))?;
    write(
        &out.join("domtree_cg.dot"),
        &dump_dot(&analysis.cg.tree.to_graph(&analysis.cg.graph)),
    )?;
    for (name, ag) in &analysis.cfgs {
        write(&out.join(format!("cfg_{name}.dot")), &dump_dot(&ag.graph))?;
        write(
            &out.join(format!("domtree_cfg_{name}.dot")),
            &dump_dot(&ag.tree.to_graph(&ag.graph)),
        )?;
    }

    if resolve_icalls && have_hierarchy {
        eprintln!(
            "resolved {} indirect call edges ({} sites without candidates)",
            analysis.resolved_edges.len(),
            analysis.unresolved_sites.len()
        );
    }
    for (ets, prio) in analysis.etss.iter().zip(&analysis.priorities) {
        eprintln!(
            "target {} {}:{} -> {} / {}, ETS length {}, PriorityW {}: [{}]",
            ets.id,
            ets.target.file,
            ets.target.line,
            ets.function,
            ets.cfg_target,
            ets.elements.len(),
            prio,
            ets.node_names().join(", ")
        );
    }
    Ok(())
}

fn cmd_metrics(ets: &Path, trace: &Path, gmax: &[f64], weighted: bool) -> Outcome {
    let ets_text = read(ets)?;
    let trace_text = read(trace)?;
    let file = EtsFile::from_toml(&ets_text).map_err(fail(VALIDATION))?;
    let trace = parse_trace(&trace_text, &file.block).map_err(fail(VALIDATION))?;
    let etss = file
        .weighted_sequences(weighted)
        .map_err(fail(VALIDATION))?;
    let mut state = if gmax.is_empty() {
        GMaxCov::new(etss.len())
    } else if gmax.len() == etss.len() {
        GMaxCov::from_values(gmax.to_vec())
    } else {
        return Err(Failure {
            code: USAGE,
            err: anyhow!("--gmax has {} values for {} ETSs", gmax.len(), etss.len()),
        });
    };
    let report = evaluate_trace(&etss, &trace, &mut state).map_err(fail(VALIDATION))?;
    for m in &report.per_ets {
        println!("{}", serde_json::json!(m));
        eprintln!(
            "ETS {}: SIMW {:.4}  W {:.4}  SeqCovW {:.4}  PriorityW {}  gMaxCovW {:.4}",
            m.ets_id, m.simw, m.w, m.seqcovw, m.priorityw, m.gmaxcovw
        );
    }
    println!(
        "{}",
        serde_json::json!({"ots_id": report.ots_id, "cfw": report.cfw})
    );
    eprintln!("OTS {}  CFW {:.4}", report.ots_id, report.cfw);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    program: &Path,
    ets: &Path,
    config: Option<&Path>,
    seed: u64,
    weighted: bool,
    virtual_time: bool,
    budget_iters: Option<u64>,
    tx_seconds: Option<f64>,
    events: Option<&Path>,
) -> Outcome {
    let program_text = read(program)?;
    let ets_text = read(ets)?;
    let config_text = config.map(read).transpose()?;
    let program = MockProgram::from_toml(&program_text).map_err(fail(VALIDATION))?;
    let file = EtsFile::from_toml(&ets_text).map_err(fail(VALIDATION))?;
    let mut cfg = match config_text {
        Some(t) => CampaignConfig::from_toml(&t).map_err(fail(VALIDATION))?,
        None => CampaignConfig::default(),
    };
    if virtual_time {
        cfg.virtual_time = true;
    }
    if let Some(b) = budget_iters {
        cfg.budget_iters = b;
    }
    if let Some(t) = tx_seconds {
        cfg.tx_seconds = t;
    }
    let instr = program.instrument(&file.block).map_err(fail(VALIDATION))?;
    let etss = file
        .weighted_sequences(weighted)
        .map_err(fail(VALIDATION))?;
    let state = run_campaign(&program, &instr, &etss, &cfg, seed).map_err(fail(VALIDATION))?;

    let log = state.events_jsonl();
    match events {
        Some(p) => write(p, &log)?,
        None => print!("{log}"),
    }
    for tp in program.target_ids() {
        match state.first_reach.get(&tp) {
            Some(r) => eprintln!(
                "target {tp}: reached at iteration {} (clock {:.3}s, {} executions)",
                r.iter, r.clock, r.executions
            ),
            None => eprintln!("target {tp}: not reached"),
        }
    }
    eprintln!(
        "{} iterations, {} executions, corpus {}, {} distinct traces",
        state.iterations,
        state.executions,
        state.corpus.len(),
        state.seen_traces.len()
    );
    Ok(())
}

fn cmd_export(program: &Path, out: &Path) -> Outcome {
    let program = MockProgram::from_toml(&read(program)?).map_err(fail(VALIDATION))?;
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(fail(USAGE))?;
    write(&out.join("cg.dot"), &dump_dot(&program.call_graph()))?;
    for (name, g) in program.cfgs() {
        write(&out.join(format!("cfg_{name}.dot")), &dump_dot(&g))?;
    }
    write(&out.join("targets.toml"), &program.targets_toml())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.cmd {
        Cmd::Analyze {
            graphs,
            targets,
            hierarchy,
            resolve_icalls,
            entry,
            allow_unreachable,
            out,
        } => cmd_analyze(
            graphs,
            targets,
            hierarchy.as_deref(),
            resolve_icalls.on(),
            entry.as_deref(),
            *allow_unreachable,
            out,
        ),
        Cmd::Metrics {
            ets,
            trace,
            gmax,
            weights,
        } => cmd_metrics(ets, trace, gmax, weights.on()),
        Cmd::Simulate {
            program,
            ets,
            config,
            seed,
            weights,
            virtual_time,
            budget_iters,
            tx_seconds,
            events,
        } => cmd_simulate(
            program,
            ets,
            config.as_deref(),
            *seed,
            weights.on(),
            *virtual_time,
            *budget_iters,
            *tx_seconds,
            events.as_deref(),
        ),
        Cmd::ExportGraphs { program, out } => cmd_export(program, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
