//! The fuzzing loop: round-robin corpus scheduling with ETS-driven energy.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::feedback::{is_novel, CoverageMap, SeenTraces};
use super::mutate::mutate;
use super::program::{Execution, Instrumentation, MockProgram};
use super::SimError;
use crate::pipeline::{evaluate_trace, WeightedEts};
use crate::proximity::GMaxCov;
use crate::schedule::{
    capability_w, ets_energy, temperature, BaselineEnergy, Clock, ConstantBaseline, ScheduleConfig,
    VirtualClock, WallClock,
};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub tx_seconds: f64,
    pub alpha: f64,
    pub base_energy: u64,
    pub virtual_time: bool,
    /// Scheduling iterations; 0 runs nothing.
    pub budget_iters: u64,
    /// Virtual seconds charged per execution.
    pub exec_seconds: f64,
    pub max_trace_len: usize,
    /// Initial corpus, hex encoded.
    pub seeds: Vec<String>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let s = ScheduleConfig::default();
        CampaignConfig {
            tx_seconds: s.tx_seconds,
            alpha: s.alpha,
            base_energy: s.base_energy,
            virtual_time: s.virtual_time,
            budget_iters: 1000,
            exec_seconds: 0.001,
            max_trace_len: 4096,
            seeds: vec!["00".into()],
        }
    }
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let c: CampaignConfig =
            toml::from_str(text).map_err(|e| SimError::Config(e.message().to_owned()))?;
        c.schedule()
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        Ok(c)
    }

    pub fn schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            tx_seconds: self.tx_seconds,
            alpha: self.alpha,
            base_energy: self.base_energy,
            virtual_time: self.virtual_time,
        }
    }

    pub fn seed_inputs(&self) -> Result<Vec<Vec<u8>>, SimError> {
        self.seeds.iter().map(|s| decode_hex(s)).collect()
    }
}

pub fn encode_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn decode_hex(s: &str) -> Result<Vec<u8>, SimError> {
    let s = s.trim();
    if !s.len().is_multiple_of(2) || !s.is_ascii() {
        return Err(SimError::Config(format!("bad hex seed `{s}`")));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16)
                .map_err(|_| SimError::Config(format!("bad hex seed `{s}`")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub input: Vec<u8>,
    pub trace: Vec<u32>,
    pub cfw: f64,
    /// capabilityW at the last time this entry was scheduled.
    pub capability_w: f64,
    pub ots_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    TargetReached,
    Crash,
    CorpusAdd,
    TraceTruncated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub iter: u64,
    pub clock: f64,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tp_id: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_hex: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfw: Option<f64>,
}

/// When a target was first reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstReach {
    pub iter: u64,
    pub clock: f64,
    pub executions: u64,
}

#[derive(Debug, Clone)]
pub struct CampaignState {
    pub corpus: Vec<CorpusEntry>,
    pub seen_traces: SeenTraces,
    pub coverage: CoverageMap,
    pub gmax: GMaxCov,
    pub clock: f64,
    pub iterations: u64,
    pub executions: u64,
    pub rng_seed: u64,
    pub events: Vec<Event>,
    pub first_reach: BTreeMap<u32, FirstReach>,
}

impl CampaignState {
    fn new(n_ets: usize, rng_seed: u64) -> Self {
        CampaignState {
            corpus: Vec::new(),
            seen_traces: SeenTraces::default(),
            coverage: CoverageMap::default(),
            gmax: GMaxCov::new(n_ets),
            clock: 0.0,
            iterations: 0,
            executions: 0,
            rng_seed,
            events: Vec::new(),
            first_reach: BTreeMap::new(),
        }
    }

    /// Event log as JSON lines.
    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
            .collect()
    }
}

/// Energy for a corpus entry with the given CFW at time `clock`.
pub fn schedule_energy(cfw: f64, clock: f64, cfg: &ScheduleConfig, base: u64) -> (u64, f64) {
    let cap = capability_w(cfw, temperature(clock, cfg.tx_seconds));
    (ets_energy(base, cap), cap)
}

/// Children receive a stack of `2^k` mutations with `k <= MAX_STACK_POW`.
const MAX_STACK_POW: u32 = 2;

struct Campaign<'a> {
    program: &'a MockProgram,
    instr: &'a Instrumentation,
    etss: &'a [WeightedEts],
    cfg: &'a CampaignConfig,
    targets: Vec<u32>,
    clock: Box<dyn Clock>,
    state: CampaignState,
    truncation_logged: bool,
}

impl Campaign<'_> {
    fn all_reached(&self) -> bool {
        self.targets
            .iter()
            .all(|t| self.state.first_reach.contains_key(t))
    }

    fn log(&mut self, kind: EventKind, tp_id: Option<u32>, input: Option<&[u8]>, cfw: Option<f64>) {
        self.state.events.push(Event {
            iter: self.state.iterations,
            clock: self.state.clock,
            kind,
            tp_id,
            input_hex: input.map(encode_hex),
            cfw,
        });
    }

    /// Executes one input and adds it to the corpus when it is novel (or
    /// unconditionally for seeds).
    fn process(&mut self, input: Vec<u8>, seed: bool) -> Result<(), SimError> {
        let exec: Execution = self
            .program
            .execute(&input, self.instr, self.cfg.max_trace_len);
        self.clock.tick();
        self.state.executions += 1;
        self.state.clock = self.clock.now();

        if exec.truncated && !self.truncation_logged {
            self.truncation_logged = true;
            self.log(EventKind::TraceTruncated, None, Some(&input), None);
        }
        for &tp in &exec.reached {
            if !self.state.first_reach.contains_key(&tp) {
                self.state.first_reach.insert(
                    tp,
                    FirstReach {
                        iter: self.state.iterations,
                        clock: self.state.clock,
                        executions: self.state.executions,
                    },
                );
                self.log(EventKind::TargetReached, Some(tp), Some(&input), None);
            }
        }
        let report = evaluate_trace(self.etss, &exec.trace, &mut self.state.gmax)?;
        let new_edges = self.state.coverage.merge(&exec.edges);
        let novel = is_novel(&mut self.state.seen_traces, &exec.trace, new_edges);
        if exec.crashed && novel {
            self.log(EventKind::Crash, None, Some(&input), None);
        }
        if novel || seed {
            self.log(EventKind::CorpusAdd, None, Some(&input), Some(report.cfw));
            self.state.corpus.push(CorpusEntry {
                input,
                trace: exec.trace,
                cfw: report.cfw,
                capability_w: 0.5,
                ots_id: report.ots_id,
            });
        }
        Ok(())
    }
}

/// Runs a campaign until every program target is reached or the iteration
/// budget is spent.
pub fn run_campaign(
    program: &MockProgram,
    instr: &Instrumentation,
    etss: &[WeightedEts],
    cfg: &CampaignConfig,
    rng_seed: u64,
) -> Result<CampaignState, SimError> {
    let schedule = cfg.schedule();
    schedule
        .validate()
        .map_err(|e| SimError::Config(e.to_string()))?;
    if etss.is_empty() {
        return Err(SimError::Config("no ETS".into()));
    }
    let seeds = cfg.seed_inputs()?;
    if seeds.is_empty() {
        return Err(SimError::EmptyCorpus);
    }
    if cfg.budget_iters == 0 {
        return Ok(CampaignState::new(etss.len(), rng_seed));
    }
    let clock: Box<dyn Clock> = if cfg.virtual_time {
        Box::new(VirtualClock::new(cfg.exec_seconds))
    } else {
        Box::new(WallClock::start())
    };
    let mut c = Campaign {
        program,
        instr,
        etss,
        cfg,
        targets: program.target_ids(),
        clock,
        state: CampaignState::new(etss.len(), rng_seed),
        truncation_logged: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let baseline = ConstantBaseline(schedule.base_energy);
    for s in seeds {
        let s = s.into_iter().take(program.input_len).collect();
        c.process(s, true)?;
    }
    let mut cursor = 0usize;
    while !c.all_reached() && c.state.iterations < cfg.budget_iters {
        c.state.iterations += 1;
        let idx = cursor % c.state.corpus.len();
        cursor += 1;
        let (energy, cap) = schedule_energy(
            c.state.corpus[idx].cfw,
            c.clock.now(),
            &schedule,
            baseline.base(idx),
        );
        c.state.corpus[idx].capability_w = cap;
        let parent = c.state.corpus[idx].input.clone();
        for _ in 0..energy {
            let mut child = parent.clone();
            for _ in 0..1u32 << rng.gen_range(0..=MAX_STACK_POW) {
                child = mutate(&child, program.input_len, &mut rng);
            }
            c.process(child, false)?;
            if c.all_reached() {
                break;
            }
        }
    }
    Ok(c.state)
}
