//! Deterministic fuzzing simulator over mock programs.

mod campaign;
mod feedback;
mod mutate;
mod program;

use thiserror::Error;

pub use campaign::{
    decode_hex, encode_hex, run_campaign, schedule_energy, CampaignConfig, CampaignState,
    CorpusEntry, Event, EventKind, FirstReach,
};
pub use feedback::{is_novel, CoverageMap, SeenTraces, MAP_SIZE};
pub use mutate::{mutate, Mutation, INTERESTING};
pub use program::{Cmp, Execution, Function, Instrumentation, MockProgram};

use crate::proximity::ProximityError;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("program: {0}")]
    Program(String),
    #[error("campaign config: {0}")]
    Config(String),
    #[error("plan blocks missing from the program: {0:?}")]
    PlanMismatch(Vec<u32>),
    #[error("initial corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Proximity(#[from] ProximityError),
}
