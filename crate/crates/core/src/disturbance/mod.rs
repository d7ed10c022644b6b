//! Exogenous inputs: weather, prices and occupancy, from files or generators.

mod epw;
mod forecast;
mod occupancy;
mod price;
mod profile;
mod weather;

pub use epw::load_epw_subset;
pub use forecast::{seasonal_naive_forecast, Forecaster, SeasonalNaive};
pub use occupancy::{synth_occupancy, ActivitySpec, OccupancyParams, OccupancyRecord};
pub use price::{tou_price_at, PriceSchedule};
pub use profile::{load_occupancy_csv, load_price_csv, load_profile_csv, load_weather_csv, Profile, ProfileSchema};
pub use weather::{synth_weather, wet_bulb_stull, DayParams, WeatherRecord};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DisturbanceError {
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("{path} row {row}: {msg}")]
    BadRow { path: String, row: usize, msg: String },
    #[error("{path} row {row}: irregular timestamp spacing")]
    IrregularTimestamps { path: String, row: usize },
    #[error("{path}: profile step {profile_s} s cannot be resampled to clock step {clock_s} s")]
    Resolution { path: String, profile_s: f64, clock_s: f64 },
    #[error("EPW line {line}: {msg}")]
    Epw { line: usize, msg: String },
    #[error("forecast history has {got} samples; need at least {needed} (24 h)")]
    ShortHistory { got: usize, needed: usize },
    #[error("price series has no value for step {0}")]
    PriceOutOfRange(u64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
