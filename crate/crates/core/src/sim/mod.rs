//! Deterministic microscopic simulator.
//!
//! Vehicles follow a conservative safe-speed rule: each tick a vehicle may
//! accelerate up to its free speed but never beyond the speed that would stop
//! it `min_gap` short of the next obstacle within one tick. Obstacles are the
//! leader's rear bumper, a red (or yellow) stop line, or the tail of the lane
//! the vehicle is about to enter. Braking is instantaneous, so vehicles never
//! overlap.

mod engine;
pub mod topology;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use engine::{
    Engine, FinishedTrip, LaneQuery, SignalState, SimState, StepOutcome, TrafficView, Trip, VehicleState,
};
pub use topology::{InterIdx, LaneIdx, MoveIdx, RoadIdx, Topology};

use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepartSpeed {
    /// Enter at the free speed (capped by the headway to the lane's last vehicle).
    #[default]
    Max,
    /// Enter at rest.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Seconds per tick.
    pub dt: f64,
    /// Seconds simulated before `step` refuses to advance.
    pub horizon: f64,
    /// Vehicles slower than this (m/s) count as waiting.
    pub waiting_speed_threshold: f64,
    pub seed: u64,
    pub depart_speed: DepartSpeed,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            horizon: 3600.0,
            waiting_speed_threshold: 0.1,
            seed: 0,
            depart_speed: DepartSpeed::Max,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !is_positive_multiple(self.horizon, self.dt) {
            return Err(SimError::Config(format!(
                "horizon {} is not a positive multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        if !(self.waiting_speed_threshold >= 0.0) {
            return Err(SimError::Config("waiting speed threshold must be non-negative".into()));
        }
        Ok(())
    }

    pub fn ticks(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

/// `value` is `k * unit` for an integer k ≥ 1 (up to rounding).
pub fn is_positive_multiple(value: f64, unit: f64) -> bool {
    if !(value > 0.0) || !(unit > 0.0) || !value.is_finite() {
        return false;
    }
    let k = (value / unit).round();
    k >= 1.0 && (k * unit - value).abs() <= 1e-9 * value.max(1.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("flow_{flow}: {reason}")]
    Route { flow: usize, reason: String },
    #[error("cannot step past the horizon ({0} s)")]
    PastHorizon(f64),
}
