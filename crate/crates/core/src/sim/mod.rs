//! Runtime modules wrapping the component models, as wired by scenarios.

mod controllers;
mod electrical;
mod sources;
mod thermal;
mod water;

pub use controllers::{
    ClusterPeakController, DeadbandFcuController, DerController, EvRequestConfig, FanProfile, FanProfileController,
    FcuRealization, Forecast, MpcFcuController, TankControl, TankController,
};
pub use electrical::{BatteryModule, BusModule, EvModule, GridModule, LoadKind, LoadModule, MeterModule, PvModule};
pub use sources::{OccupancyModule, OccupancySource, PriceModule, WeatherModule, WeatherSource};
pub use thermal::{FanModule, FcuModule, ZoneModule};
pub use water::TankModule;

use thiserror::Error;

use crate::runtime::SimClock;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{what} has no value for step {t}")]
    OutOfRange { what: &'static str, t: u64 },
    #[error("invalid module configuration: {0}")]
    Invalid(String),
}

/// `clock` moved to step `t`.
pub(crate) fn clock_at(clock: &SimClock, t: u64) -> SimClock {
    let mut c = *clock;
    c.t = t;
    c
}
