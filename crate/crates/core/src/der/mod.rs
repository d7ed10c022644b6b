//! PV generation, stationary batteries and EVs as mobile storage.
//!
//! Sign convention at the bus: positive power charges storage, negative
//! power discharges it.

mod battery;
mod ev;
mod pv;

pub use battery::{battery_degradation_step, battery_step, BatterySpec, BatteryState, BatteryStep};
pub use ev::{daily_schedule, ev_step, load_ev_schedule_csv, EvEvent, EvSpec, EvState, EvStep, EvTrip};
pub use pv::{pv_power, PvSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DerError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("time step must be positive, got {0} h")]
    BadStep(f64),
    #[error("EV schedule row {row}: {msg}")]
    Schedule { row: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
