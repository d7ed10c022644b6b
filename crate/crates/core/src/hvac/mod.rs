//! Equation-based HVAC components and the fan-coil system assembly.

mod components;
mod fcu;

pub use components::{
    boiler_step, chiller_step, coil_step, cooling_tower_step, fan_step, heat_pump_step, ice_storage_step, pump_step,
    BoilerSpec, ChillerMode, ChillerOutput, ChillerSpec, CoilOutput, CoilSpec, CoolingTowerSpec, FanKind, FanSpec,
    HeatPumpMode, HeatPumpSpec, IceStep, IceStorageSpec, IceStorageState, PumpSpec, CP_AIR, CP_WATER,
};
pub use fcu::{fcu_compose, fcu_system_step, FcuAction, FcuAssembly, HvacOutput, PlantState, TowerLoop};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HvacError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("{what} must be nonnegative, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("condenser {t_cond} °C must be warmer than evaporator {t_evap} °C")]
    TemperatureOrder { t_evap: f64, t_cond: f64 },
    #[error("simultaneous charge and discharge")]
    SimultaneousChargeDischarge,
}

pub(crate) fn nonneg(what: &'static str, value: f64) -> Result<(), HvacError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(HvacError::Negative { what, value })
    }
}
