//! Controllers from deadband logic up to gradient-based MPC.

mod mpc;
mod rules;

pub use mpc::{mpc_cost_tape, mpc_solve, mpc_true_cost, MpcConfig, MpcDiagnostics, MpcSolution};
pub use rules::{
    cluster_peak_coordinator, linear_or_staged_track, onoff_deadband, pid_step, pv_allocation, tou_battery_dispatch,
    DeadbandConfig, HvacMode, PidConfig, PidState, PvAllocation, TouDispatchConfig, TrackMode,
};

use thiserror::Error;

use crate::autodiff::AdError;
use crate::thermal::ThermalError;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{what} must be nonnegative, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("forecast has {got} steps; horizon is {horizon}")]
    ForecastLength { got: usize, horizon: usize },
    #[error("non-finite MPC cost")]
    NonFiniteCost,
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}
