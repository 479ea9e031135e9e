//! Annealing-based power schedule.

use std::time::Instant;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("alpha must lie in [0.8, 0.99], got {0}")]
    Alpha(f64),
    #[error("tx_seconds must be positive, got {0}")]
    Tx(f64),
    #[error("base_energy must be positive")]
    BaseEnergy,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Length of the exploration phase: temperature reaches 0.05 here.
    pub tx_seconds: f64,
    /// Cooling factor of the discrete schedule. The closed form used for the
    /// temperature does not depend on it; it is kept and validated so that
    /// configurations stay meaningful for alternative schedules.
    pub alpha: f64,
    pub base_energy: u64,
    /// Advance the clock by a fixed amount per execution instead of reading
    /// wall time.
    pub virtual_time: bool,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            tx_seconds: 7200.0,
            alpha: 0.95,
            base_energy: 100,
            virtual_time: true,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(0.8..=0.99).contains(&self.alpha) {
            return Err(ScheduleError::Alpha(self.alpha));
        }
        if !(self.tx_seconds > 0.0 && self.tx_seconds.is_finite()) {
            return Err(ScheduleError::Tx(self.tx_seconds));
        }
        if self.base_energy == 0 {
            return Err(ScheduleError::BaseEnergy);
        }
        Ok(())
    }
}

/// `20^(-t / tx)`: 1 at the start, 0.05 once the exploration time is spent.
pub fn temperature(t: f64, tx: f64) -> f64 {
    20f64.powf(-t.max(0.0) / tx)
}

/// Blends CFW with the neutral value 0.5; hot schedules ignore CFW.
pub fn capability_w(cfw: f64, temp: f64) -> f64 {
    cfw * (1.0 - temp) + 0.5 * temp
}

/// `round(base * 2^((capability - 0.2) * 10))`, at least 1.
pub fn ets_energy(base: u64, capability: f64) -> u64 {
    let e = (base as f64 * 2f64.powf((capability - 0.2) * 10.0)).round();
    if e < 1.0 {
        1
    } else {
        e as u64
    }
}

/// Baseline energy before the ETS multiplier is applied.
pub trait BaselineEnergy {
    fn base(&self, corpus_index: usize) -> u64;
}

/// Every entry gets the same baseline.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBaseline(pub u64);

impl BaselineEnergy for ConstantBaseline {
    fn base(&self, _corpus_index: usize) -> u64 {
        self.0
    }
}

/// Elapsed campaign time in seconds.
pub trait Clock {
    fn now(&self) -> f64;
    /// Called once per execution.
    fn tick(&mut self);
}

/// Deterministic clock advancing by a fixed step per execution.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    elapsed: f64,
    step: f64,
}

impl VirtualClock {
    pub fn new(step: f64) -> Self {
        VirtualClock { elapsed: 0.0, step }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> f64 {
        self.elapsed
    }

    fn tick(&mut self) {
        self.elapsed += self.step;
    }
}

#[derive(Debug, Clone)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }

    fn tick(&mut self) {}
}
