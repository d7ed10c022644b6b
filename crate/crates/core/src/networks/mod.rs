//! Building thermal, electrical and water networks.

use thiserror::Error;

use crate::disturbance::OccupancyRecord;
use crate::hvac::CP_WATER;
use crate::thermal::{modnn_step, RcZoneSpec, ThermalError, ThermalModelParams, ZoneInputs};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown appliance '{0}'")]
    UnknownAppliance(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ElectricalNetworkSpec {
    /// Always-on load, W
    pub base: f64,
    /// Rated W per activity flag name
    pub appliances: Vec<(String, f64)>,
    /// Lighting W while occupied
    pub lighting: f64,
}

impl ElectricalNetworkSpec {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let neg = self.base < 0.0 || self.lighting < 0.0 || self.appliances.iter().any(|(_, w)| !(*w >= 0.0));
        if neg {
            return Err(NetworkError::InvalidSpec("rated powers must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElectricalDemand {
    pub base: f64,
    pub plug: f64,
    pub lighting: f64,
}

impl ElectricalDemand {
    pub fn total(&self) -> f64 {
        self.base + self.plug + self.lighting
    }
}

pub fn electrical_demand(
    spec: &ElectricalNetworkSpec,
    flags: &[(String, bool)],
    occupied: bool,
) -> Result<ElectricalDemand, NetworkError> {
    let mut plug = 0.0;
    for (name, on) in flags {
        let rated = spec
            .appliances
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, w)| *w)
            .ok_or_else(|| NetworkError::UnknownAppliance(name.clone()))?;
        if *on {
            plug += rated;
        }
    }
    Ok(ElectricalDemand {
        base: spec.base,
        plug,
        lighting: if occupied { spec.lighting } else { 0.0 },
    })
}

/// Hot-water draw in kg/s; flags without a draw entry contribute nothing.
pub fn dhw_demand(flags: &[(String, bool)], draws: &[(String, f64)]) -> f64 {
    flags
        .iter()
        .filter(|(_, on)| *on)
        .filter_map(|(n, _)| draws.iter().find(|(d, _)| d == n).map(|(_, kg)| *kg))
        .sum()
}

pub const TANK_T_MAX: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterTankSpec {
    /// kg
    pub mass: f64,
    /// W/K
    pub ua: f64,
    /// W
    pub heater: f64,
    pub t_inlet: f64,
    pub t_ambient: f64,
}

impl WaterTankSpec {
    /// Rejects time steps where explicit Euler on the standing loss would
    /// overshoot (`UA·dt/(m·cp) ≥ 0.5`).
    pub fn validate(&self, dt_s: f64) -> Result<(), NetworkError> {
        if !(self.mass > 0.0 && self.ua >= 0.0 && self.heater >= 0.0) {
            return Err(NetworkError::InvalidSpec("tank mass > 0, UA and heater >= 0".into()));
        }
        if self.t_inlet > TANK_T_MAX {
            return Err(NetworkError::InvalidSpec("inlet above tank maximum".into()));
        }
        let r = self.ua * dt_s / (self.mass * CP_WATER);
        if r >= 0.5 {
            return Err(NetworkError::InvalidSpec(format!(
                "tank step unstable: UA·dt/(m·cp) = {r}"
            )));
        }
        Ok(())
    }
}

/// Returns `(next temperature, heater electric power)`.
pub fn water_tank_step(spec: &WaterTankSpec, t: f64, heater_on: bool, draw: f64, dt_s: f64) -> (f64, f64) {
    water_tank_step_modulated(spec, t, if heater_on { 1.0 } else { 0.0 }, draw, dt_s)
}

/// Heater driven at `fraction` ∈ [0, 1] of its rating.
pub fn water_tank_step_modulated(spec: &WaterTankSpec, t: f64, fraction: f64, draw: f64, dt_s: f64) -> (f64, f64) {
    let q_heater = spec.heater * fraction.clamp(0.0, 1.0);
    let flow = q_heater - draw.max(0.0) * CP_WATER * (t - spec.t_inlet) - spec.ua * (t - spec.t_ambient);
    let next = t + dt_s * flow / (spec.mass * CP_WATER);
    (next.clamp(spec.t_inlet, TANK_T_MAX), q_heater)
}

/// Zone model attached to a building.
#[derive(Debug, Clone, PartialEq)]
pub enum ZoneModel {
    Rc(RcZoneSpec),
    Learned(ThermalModelParams),
}

impl ZoneModel {
    pub fn step(&self, t: f64, d: &ZoneInputs, q_hvac: f64, dt: f64) -> Result<f64, NetworkError> {
        Ok(match self {
            ZoneModel::Rc(s) => s.step(t, d, q_hvac, dt),
            ZoneModel::Learned(p) => modnn_step(p, t, d, q_hvac, dt)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Building {
    pub zone: ZoneModel,
    pub electrical: ElectricalNetworkSpec,
    pub tank: Option<WaterTankSpec>,
    pub draws: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildingState {
    pub t_zone: f64,
    pub t_tank: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildingInputs<'a> {
    pub t_out: f64,
    pub ghi: f64,
    pub occupancy: &'a OccupancyRecord,
    /// Heat delivered by HVAC, W
    pub q_hvac: f64,
    /// HVAC electric power, W
    pub p_hvac: f64,
    pub heater_on: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildingOutputs {
    pub state: BuildingState,
    pub demand: ElectricalDemand,
    pub p_hvac: f64,
    pub p_heater: f64,
    pub dhw_draw: f64,
}

impl BuildingOutputs {
    pub fn total_load(&self) -> f64 {
        self.p_hvac + self.demand.total() + self.p_heater
    }
}

/// Steps the zone, electrical and water networks of one building.
pub fn building_step(
    b: &Building,
    state: &BuildingState,
    inputs: &BuildingInputs,
    dt_s: f64,
) -> Result<BuildingOutputs, NetworkError> {
    let occ = inputs.occupancy;
    let d = ZoneInputs {
        t_out: inputs.t_out,
        ghi: inputs.ghi,
        occupancy: occ.count,
        activity: occ.active_count() as f64,
    };
    let t_zone = b.zone.step(state.t_zone, &d, inputs.q_hvac, dt_s)?;
    let demand = electrical_demand(&b.electrical, &occ.activities, occ.occupied)?;
    let draw = dhw_demand(&occ.activities, &b.draws);
    let (t_tank, p_heater) = match (&b.tank, state.t_tank) {
        (Some(spec), Some(t)) => {
            let (t2, p) = water_tank_step(spec, t, inputs.heater_on, draw, dt_s);
            (Some(t2), p)
        }
        _ => (None, 0.0),
    };
    Ok(BuildingOutputs {
        state: BuildingState { t_zone, t_tank },
        demand,
        p_hvac: inputs.p_hvac,
        p_heater,
        dhw_draw: draw,
    })
}
