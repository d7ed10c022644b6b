use super::{nonneg, HvacError};
use crate::runtime::celsius_to_kelvin;

/// J/(kg·K)
pub const CP_AIR: f64 = 1006.0;
/// J/(kg·K)
pub const CP_WATER: f64 = 4186.0;

#[derive(Debug, Clone, PartialEq)]
pub enum FanKind {
    /// On/off: full flow whenever the setpoint is positive.
    Constant,
    /// Discrete stage fractions of rated flow; must include 0.
    Staged(Vec<f64>),
    /// Continuous between `turndown·rated` and rated.
    Vfd { turndown: f64 },
}

/// Fan (air, kg/s) or pump (water, kg/s); both follow the affinity cube law.
#[derive(Debug, Clone, PartialEq)]
pub struct FanSpec {
    pub kind: FanKind,
    pub rated_flow: f64,
    pub rated_power: f64,
}

pub type PumpSpec = FanSpec;

impl FanSpec {
    pub fn validate(&self) -> Result<(), HvacError> {
        let bad = |m: &str| Err(HvacError::InvalidSpec(m.to_string()));
        if !(self.rated_flow > 0.0 && self.rated_flow.is_finite()) {
            return bad("rated flow must be > 0");
        }
        if !(self.rated_power >= 0.0 && self.rated_power.is_finite()) {
            return bad("rated power must be >= 0");
        }
        match &self.kind {
            FanKind::Constant => {}
            FanKind::Staged(st) => {
                if st.is_empty() || st.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("stages must be strictly increasing");
                }
                if st[0] != 0.0 || st.iter().any(|s| !(0.0..=1.0).contains(s)) {
                    return bad("stages must lie in [0, 1] and include 0");
                }
            }
            FanKind::Vfd { turndown } => {
                if !(0.0..1.0).contains(turndown) {
                    return bad("turndown must lie in [0, 1)");
                }
            }
        }
        Ok(())
    }

    /// Half the widest gap between adjacent stages, as a flow.
    pub fn max_tracking_error(&self) -> f64 {
        match &self.kind {
            FanKind::Staged(st) => st.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) * self.rated_flow / 2.0,
            _ => 0.0,
        }
    }
}

/// Returns `(actual flow, electric power)`.
pub fn fan_step(spec: &FanSpec, setpoint: f64) -> Result<(f64, f64), HvacError> {
    nonneg("flow setpoint", setpoint)?;
    let rated = spec.rated_flow;
    let actual = match &spec.kind {
        FanKind::Constant => {
            if setpoint > 0.0 {
                rated
            } else {
                0.0
            }
        }
        FanKind::Staged(stages) => {
            let frac = setpoint / rated;
            let mut best = stages[0];
            for &s in stages {
                // strict comparison keeps the lower stage on ties
                if (s - frac).abs() < (best - frac).abs() {
                    best = s;
                }
            }
            best * rated
        }
        FanKind::Vfd { turndown } => {
            if setpoint <= 0.0 {
                0.0
            } else {
                setpoint.clamp(turndown * rated, rated)
            }
        }
    };
    let ratio = actual / rated;
    Ok((actual, spec.rated_power * ratio * ratio * ratio))
}

pub fn pump_step(spec: &PumpSpec, setpoint: f64) -> Result<(f64, f64), HvacError> {
    fan_step(spec, setpoint)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilSpec {
    pub effectiveness: f64,
}

impl CoilSpec {
    pub fn validate(&self) -> Result<(), HvacError> {
        if self.effectiveness > 0.0 && self.effectiveness <= 1.0 {
            Ok(())
        } else {
            Err(HvacError::InvalidSpec("coil effectiveness must lie in (0, 1]".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoilOutput {
    /// Heat removed from the air, W (positive when cooling).
    pub q: f64,
    pub t_air_out: f64,
    pub t_water_out: f64,
}

pub fn coil_step(
    spec: &CoilSpec,
    m_air: f64,
    t_air_in: f64,
    m_water: f64,
    t_water_in: f64,
) -> Result<CoilOutput, HvacError> {
    nonneg("air flow", m_air)?;
    nonneg("water flow", m_water)?;
    if m_air == 0.0 || m_water == 0.0 {
        return Ok(CoilOutput {
            q: 0.0,
            t_air_out: t_air_in,
            t_water_out: t_water_in,
        });
    }
    let c_a = m_air * CP_AIR;
    let c_w = m_water * CP_WATER;
    let q = spec.effectiveness * c_a.min(c_w) * (t_air_in - t_water_in);
    Ok(CoilOutput {
        q,
        t_air_out: t_air_in - q / c_a,
        t_water_out: t_water_in + q / c_w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChillerMode {
    Carnot { eta: f64 },
    Curve { cop_ref: f64, a: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChillerSpec {
    pub mode: ChillerMode,
    /// W
    pub capacity: f64,
}

impl ChillerSpec {
    pub fn validate(&self) -> Result<(), HvacError> {
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(HvacError::InvalidSpec("chiller capacity must be > 0".into()));
        }
        match self.mode {
            ChillerMode::Carnot { eta } if !(eta > 0.0 && eta <= 1.0) => {
                Err(HvacError::InvalidSpec("Carnot efficiency must lie in (0, 1]".into()))
            }
            ChillerMode::Curve { cop_ref, a } => {
                if !(cop_ref > 0.0) {
                    return Err(HvacError::InvalidSpec("reference COP must be > 0".into()));
                }
                if (a.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(HvacError::InvalidSpec("curve coefficients must sum to 1".into()));
                }
                // COP stays positive on PLR ∈ [0, 1] iff the quadratic does
                let vertex = if a[2] != 0.0 { -a[1] / (2.0 * a[2]) } else { f64::NAN };
                let mut pts = vec![0.0, 1.0];
                if (0.0..=1.0).contains(&vertex) {
                    pts.push(vertex);
                }
                if pts.iter().any(|p| a[0] + a[1] * p + a[2] * p * p <= 0.0) {
                    return Err(HvacError::InvalidSpec("curve must be positive on PLR in [0, 1]".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn cop(&self, q_met: f64, t_evap: f64, t_cond: f64) -> Result<f64, HvacError> {
        match self.mode {
            ChillerMode::Carnot { eta } => {
                let (te, tc) = (celsius_to_kelvin(t_evap), celsius_to_kelvin(t_cond));
                if tc <= te {
                    return Err(HvacError::TemperatureOrder { t_evap, t_cond });
                }
                Ok(eta * te / (tc - te))
            }
            ChillerMode::Curve { cop_ref, a } => {
                let plr = q_met / self.capacity;
                Ok(cop_ref * (a[0] + a[1] * plr + a[2] * plr * plr))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChillerOutput {
    pub q_met: f64,
    pub p_elec: f64,
    pub cop: f64,
}

/// `q_load` is the cooling demand in W (≥ 0).
pub fn chiller_step(spec: &ChillerSpec, q_load: f64, t_evap: f64, t_cond: f64) -> Result<ChillerOutput, HvacError> {
    nonneg("chiller load", q_load)?;
    let q_met = q_load.min(spec.capacity);
    let cop = spec.cop(q_met, t_evap, t_cond)?;
    let p_elec = if q_met > 0.0 { q_met / cop } else { 0.0 };
    Ok(ChillerOutput { q_met, p_elec, cop })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingTowerSpec {
    pub effectiveness: f64,
    pub fan_power: f64,
}

impl CoolingTowerSpec {
    pub fn validate(&self) -> Result<(), HvacError> {
        if !(self.effectiveness > 0.0 && self.effectiveness <= 1.0) {
            return Err(HvacError::InvalidSpec("tower effectiveness must lie in (0, 1]".into()));
        }
        nonneg("tower fan power", self.fan_power)
    }
}

/// Returns `(T_cws, P_fan)`.
pub fn cooling_tower_step(spec: &CoolingTowerSpec, m_cw: f64, t_cwr: f64, t_wb: f64) -> Result<(f64, f64), HvacError> {
    nonneg("condenser water flow", m_cw)?;
    if m_cw == 0.0 || t_cwr < t_wb {
        return Ok((t_cwr, if m_cw > 0.0 { spec.fan_power } else { 0.0 }));
    }
    Ok((t_cwr - spec.effectiveness * (t_cwr - t_wb), spec.fan_power))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoilerSpec {
    pub efficiency: f64,
}

/// Returns `(T_out, Q_delivered)`.
pub fn boiler_step(spec: &BoilerSpec, fuel_power: f64, m_water: f64, t_in: f64) -> (f64, f64) {
    if m_water <= 0.0 || fuel_power <= 0.0 {
        return (t_in, 0.0);
    }
    let q = spec.efficiency * fuel_power;
    (t_in + q / (m_water * CP_WATER), q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatPumpMode {
    Heating,
    Cooling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatPumpSpec {
    pub eta: f64,
    pub capacity: f64,
}

/// Heating COP uses the sink temperature `t_supply`; cooling mirrors the
/// Carnot chiller with `t_supply` as evaporator and `t_source` as sink.
pub fn heat_pump_step(
    spec: &HeatPumpSpec,
    q_demand: f64,
    t_source: f64,
    t_supply: f64,
    mode: HeatPumpMode,
) -> Result<ChillerOutput, HvacError> {
    nonneg("heat pump demand", q_demand)?;
    let (src, sup) = (celsius_to_kelvin(t_source), celsius_to_kelvin(t_supply));
    let cop = match mode {
        HeatPumpMode::Heating => {
            if sup <= src {
                return Err(HvacError::TemperatureOrder {
                    t_evap: t_source,
                    t_cond: t_supply,
                });
            }
            spec.eta * sup / (sup - src)
        }
        HeatPumpMode::Cooling => {
            if src <= sup {
                return Err(HvacError::TemperatureOrder {
                    t_evap: t_supply,
                    t_cond: t_source,
                });
            }
            spec.eta * sup / (src - sup)
        }
    };
    let q_met = q_demand.min(spec.capacity);
    let p_elec = if q_met > 0.0 { q_met / cop } else { 0.0 };
    Ok(ChillerOutput { q_met, p_elec, cop })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IceStorageSpec {
    /// kWh
    pub capacity: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IceStorageState {
    /// kWh
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IceStep {
    pub state: IceStorageState,
    /// W actually taken from the chiller for charging
    pub charge_accepted: f64,
    /// W of cooling actually delivered
    pub discharge_delivered: f64,
}

/// Powers in W, `dt` in hours.
pub fn ice_storage_step(
    spec: &IceStorageSpec,
    state: IceStorageState,
    q_charge: f64,
    q_discharge: f64,
    dt_h: f64,
) -> Result<IceStep, HvacError> {
    nonneg("ice charge", q_charge)?;
    nonneg("ice discharge", q_discharge)?;
    if q_charge > 0.0 && q_discharge > 0.0 {
        return Err(HvacError::SimultaneousChargeDischarge);
    }
    let eta = spec.efficiency;
    let e = state.energy;
    let mut charge = q_charge;
    let mut discharge = q_discharge;
    let mut next = e + (eta * charge - discharge / eta) * dt_h / 1000.0;
    if next > spec.capacity {
        charge = (spec.capacity - e) * 1000.0 / (eta * dt_h);
        next = spec.capacity;
    } else if next < 0.0 {
        discharge = e * eta * 1000.0 / dt_h;
        next = 0.0;
    }
    Ok(IceStep {
        state: IceStorageState { energy: next },
        charge_accepted: charge,
        discharge_delivered: discharge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn fan(kind: FanKind) -> FanSpec {
        FanSpec {
            kind,
            rated_flow: 1.0,
            rated_power: 500.0,
        }
    }

    #[test]
    fn fan_kinds() {
        let (v, p) = fan_step(&fan(FanKind::Vfd { turndown: 0.2 }), 0.6).unwrap();
        assert!(close(v, 0.6, 1e-15) && close(p, 108.0, 1e-9));
        assert_eq!(fan_step(&fan(FanKind::Constant), 0.6).unwrap(), (1.0, 500.0));
        let (v, p) = fan_step(&fan(FanKind::Staged(vec![0.0, 0.5, 1.0])), 0.6).unwrap();
        assert!(close(v, 0.5, 0.0) && close(p, 62.5, 1e-12));
        // tie rounds down
        assert_eq!(
            fan_step(&fan(FanKind::Staged(vec![0.0, 0.5, 1.0])), 0.75).unwrap().0,
            0.5
        );
        assert!(fan_step(&fan(FanKind::Constant), -0.1).is_err());
    }

    #[test]
    fn pump_examples() {
        let spec = FanSpec {
            kind: FanKind::Vfd { turndown: 0.0 },
            rated_flow: 0.25,
            rated_power: 200.0,
        };
        let (f, p) = pump_step(&spec, 0.2).unwrap();
        assert!(close(f, 0.2, 0.0) && close(p, 102.4, 1e-9));
        assert_eq!(pump_step(&spec, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(pump_step(&spec, 0.5).unwrap(), (0.25, 200.0));
    }

    #[test]
    fn coil_example() {
        let c = coil_step(&CoilSpec { effectiveness: 0.8 }, 0.5, 26.0, 0.2, 7.0).unwrap();
        assert!(close(c.q, 7645.6, 1e-9));
        assert!(close(c.t_air_out, 10.8, 1e-9));
        assert!(close(c.t_water_out, 16.1324, 1e-4));
        let z = coil_step(&CoilSpec { effectiveness: 0.8 }, 0.5, 12.0, 0.2, 12.0).unwrap();
        assert_eq!(z.q, 0.0);
        let off = coil_step(&CoilSpec { effectiveness: 0.8 }, 0.5, 26.0, 0.0, 7.0).unwrap();
        assert_eq!((off.q, off.t_air_out, off.t_water_out), (0.0, 26.0, 7.0));
    }

    #[test]
    fn chiller_examples() {
        let carnot = ChillerSpec {
            mode: ChillerMode::Carnot { eta: 0.5 },
            capacity: 20_000.0,
        };
        let o = chiller_step(&carnot, 7645.6, 7.0, 35.0).unwrap();
        assert!(close(o.cop, 0.5 * 280.15 / 28.0, 1e-12));
        assert!(close(o.p_elec, 1528.30, 0.01));
        assert!(chiller_step(&carnot, 1000.0, 35.0, 35.0).is_err());
        let curve = ChillerSpec {
            mode: ChillerMode::Curve {
                cop_ref: 5.0,
                a: [0.2, 1.6, -0.8],
            },
            capacity: 10_000.0,
        };
        curve.validate().unwrap();
        assert!(close(
            chiller_step(&curve, 10_000.0, 7.0, 35.0).unwrap().cop,
            5.0,
            1e-12
        ));
        let half = chiller_step(&curve, 5_000.0, 7.0, 35.0).unwrap();
        assert!(close(half.cop, 4.0, 1e-12) && close(half.p_elec, 1250.0, 1e-9));
        // capacity respected
        assert_eq!(chiller_step(&curve, 12_000.0, 7.0, 35.0).unwrap().q_met, 10_000.0);
    }

    #[test]
    fn tower_boiler_heat_pump() {
        let t = CoolingTowerSpec {
            effectiveness: 0.7,
            fan_power: 300.0,
        };
        assert!(close(cooling_tower_step(&t, 1.0, 35.0, 24.0).unwrap().0, 27.3, 1e-12));
        assert_eq!(cooling_tower_step(&t, 1.0, 24.0, 24.0).unwrap().0, 24.0);
        assert_eq!(cooling_tower_step(&t, 0.0, 35.0, 24.0).unwrap(), (35.0, 0.0));

        let b = BoilerSpec { efficiency: 0.9 };
        let (tout, q) = boiler_step(&b, 10_000.0, 0.2, 40.0);
        assert!(close(q, 9000.0, 1e-9) && close(tout, 50.75, 1e-3));
        assert_eq!(boiler_step(&b, 0.0, 0.2, 40.0).0, 40.0);
        assert_eq!(boiler_step(&b, 10_000.0, 0.0, 40.0).1, 0.0);

        let hp = HeatPumpSpec {
            eta: 0.45,
            capacity: 8000.0,
        };
        let o = heat_pump_step(&hp, 5000.0, 5.0, 45.0, HeatPumpMode::Heating).unwrap();
        assert!(close(o.cop, 3.579, 1e-3) && close(o.p_elec, 1397.0, 0.1));
        assert_eq!(
            heat_pump_step(&hp, 0.0, 5.0, 45.0, HeatPumpMode::Heating)
                .unwrap()
                .p_elec,
            0.0
        );
        assert!(heat_pump_step(&hp, 100.0, 20.0, 20.0, HeatPumpMode::Heating).is_err());
    }

    #[test]
    fn ice_storage() {
        let spec = IceStorageSpec {
            capacity: 100.0,
            efficiency: 0.98,
        };
        let s = ice_storage_step(&spec, IceStorageState { energy: 50.0 }, 10_000.0, 0.0, 0.25).unwrap();
        assert!(close(s.state.energy, 52.45, 1e-12));
        let e = ice_storage_step(&spec, IceStorageState { energy: 0.0 }, 0.0, 5000.0, 0.25).unwrap();
        assert_eq!(e.discharge_delivered, 0.0);
        let f = ice_storage_step(&spec, IceStorageState { energy: 100.0 }, 5000.0, 0.0, 0.25).unwrap();
        assert_eq!(f.state.energy, 100.0);
        assert_eq!(f.charge_accepted, 0.0);
        assert!(ice_storage_step(&spec, IceStorageState { energy: 1.0 }, 1.0, 1.0, 0.25).is_err());
    }
}
