use super::ControlError;
use crate::runtime::disaggregate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvacMode {
    Cooling,
    Heating,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadbandConfig {
    pub setpoint: f64,
    pub half_band: f64,
    pub mode: HvacMode,
}

impl DeadbandConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.half_band > 0.0 && self.setpoint.is_finite() {
            Ok(())
        } else {
            Err(ControlError::InvalidConfig("deadband half-band must be > 0".into()))
        }
    }
}

pub fn onoff_deadband(cfg: &DeadbandConfig, t_zone: f64, prev_on: bool) -> bool {
    let (hi, lo) = (cfg.setpoint + cfg.half_band, cfg.setpoint - cfg.half_band);
    match cfg.mode {
        HvacMode::Cooling if t_zone > hi => true,
        HvacMode::Cooling if t_zone < lo => false,
        HvacMode::Heating if t_zone < lo => true,
        HvacMode::Heating if t_zone > hi => false,
        _ => prev_on,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackMode {
    Linear {
        min: f64,
        max: f64,
    },
    /// Absolute stage values, ascending.
    Staged(Vec<f64>),
}

pub fn linear_or_staged_track(mode: &TrackMode, reference: f64) -> Result<f64, ControlError> {
    if !(reference >= 0.0) {
        return Err(ControlError::Negative {
            what: "reference",
            value: reference,
        });
    }
    Ok(match mode {
        TrackMode::Linear { min, max } => reference.clamp(*min, *max),
        TrackMode::Staged(stages) => {
            let mut best = stages[0];
            for &s in stages {
                if (s - reference).abs() < (best - reference).abs() {
                    best = s;
                }
            }
            best
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// |I| never exceeds this.
    pub i_clamp: f64,
}

impl PidConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.u_min <= self.u_max && self.i_clamp >= 0.0 {
            Ok(())
        } else {
            Err(ControlError::InvalidConfig("PID bounds out of order".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
}

/// Clamping anti-windup: the integral only advances while the output is
/// unsaturated with the advanced integral.
pub fn pid_step(cfg: &PidConfig, state: &PidState, error: f64, dt: f64) -> Result<(f64, PidState), ControlError> {
    if !(dt > 0.0) {
        return Err(ControlError::InvalidConfig("dt must be > 0".into()));
    }
    let deriv = (error - state.prev_error) / dt;
    let trial_i = (state.integral + error * dt).clamp(-cfg.i_clamp, cfg.i_clamp);
    let raw = cfg.kp * error + cfg.ki * trial_i + cfg.kd * deriv;
    let (u, integral) = if raw > cfg.u_max || raw < cfg.u_min {
        let held = cfg.kp * error + cfg.ki * state.integral + cfg.kd * deriv;
        (held.clamp(cfg.u_min, cfg.u_max), state.integral)
    } else {
        (raw, trial_i)
    };
    Ok((
        u,
        PidState {
            integral,
            prev_error: error,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TouDispatchConfig {
    pub peak_start: u32,
    pub peak_end: u32,
    /// Charge off-peak until this SOC.
    pub charge_target: f64,
    /// Never discharge below this SOC.
    pub reserve_floor: f64,
    pub p_max_charge: f64,
    pub p_max_discharge: f64,
}

impl TouDispatchConfig {
    pub fn validate(&self, soc_min: f64, soc_max: f64) -> Result<(), ControlError> {
        let ok = soc_min <= self.reserve_floor
            && self.reserve_floor <= self.charge_target
            && self.charge_target <= soc_max
            && self.p_max_charge >= 0.0
            && self.p_max_discharge >= 0.0
            && self.peak_start <= self.peak_end
            && self.peak_end <= 24;
        if ok {
            Ok(())
        } else {
            Err(ControlError::InvalidConfig(
                "TOU targets must lie within battery SOC bounds".into(),
            ))
        }
    }

    pub fn is_peak(&self, hour: f64) -> bool {
        let h = hour.floor() as u32;
        (self.peak_start..self.peak_end).contains(&h)
    }
}

/// Signed bus-side request (positive = charge). The request is sized so
/// the resulting SOC lands at most on the target (charging) or floor
/// (discharging) given the usable capacity and efficiencies.
#[allow(clippy::too_many_arguments)]
pub fn tou_battery_dispatch(
    cfg: &TouDispatchConfig,
    is_peak: bool,
    soc: f64,
    load_unmet: f64,
    capacity_kwh: f64,
    eta_charge: f64,
    eta_discharge: f64,
    dt_h: f64,
) -> f64 {
    if is_peak {
        if soc <= cfg.reserve_floor {
            return 0.0;
        }
        let room = (soc - cfg.reserve_floor) * capacity_kwh * eta_discharge * 1000.0 / dt_h;
        -(cfg.p_max_discharge.min(load_unmet.max(0.0)).min(room))
    } else if soc < cfg.charge_target {
        let room = (cfg.charge_target - soc) * capacity_kwh * 1000.0 / (eta_charge * dt_h);
        cfg.p_max_charge.min(room)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PvAllocation {
    pub to_building: f64,
    pub to_ev: f64,
    pub to_battery: f64,
    /// Exported when export is allowed, curtailed otherwise.
    pub surplus: f64,
}

impl PvAllocation {
    pub fn total(&self) -> f64 {
        self.to_building + self.to_ev + self.to_battery + self.surplus
    }
}

/// Building first, then EV, then battery; whatever is left is surplus.
pub fn pv_allocation(
    p_pv: f64,
    load: f64,
    ev_headroom: f64,
    battery_headroom: f64,
) -> Result<PvAllocation, ControlError> {
    for (what, v) in [
        ("PV power", p_pv),
        ("building load", load),
        ("EV headroom", ev_headroom),
        ("battery headroom", battery_headroom),
    ] {
        if !(v >= 0.0) {
            return Err(ControlError::Negative { what, value: v });
        }
    }
    let to_building = p_pv.min(load);
    let to_ev = (p_pv - to_building).min(ev_headroom);
    let to_battery = (p_pv - to_building - to_ev).min(battery_headroom);
    let surplus = p_pv - to_building - to_ev - to_battery;
    Ok(PvAllocation {
        to_building,
        to_ev,
        to_battery,
        surplus,
    })
}

/// Allowed power per building: unchanged under the cap, otherwise the cap
/// split in proportion to the loads.
pub fn cluster_peak_coordinator(loads: &[f64], cap: f64) -> Result<Vec<f64>, ControlError> {
    if !(cap > 0.0) {
        return Err(ControlError::InvalidConfig("cap must be > 0".into()));
    }
    let total: f64 = loads.iter().sum();
    if total <= cap {
        return Ok(loads.to_vec());
    }
    disaggregate(cap, loads).map_err(|e| ControlError::InvalidConfig(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deadband_examples() {
        let c = DeadbandConfig {
            setpoint: 24.0,
            half_band: 1.0,
            mode: HvacMode::Cooling,
        };
        assert!(onoff_deadband(&c, 25.2, false));
        assert!(onoff_deadband(&c, 23.5, true));
        assert!(!onoff_deadband(&c, 22.9, true));
        let h = DeadbandConfig {
            mode: HvacMode::Heating,
            ..c
        };
        assert!(onoff_deadband(&h, 22.9, false));
        assert!(!onoff_deadband(&h, 25.1, true));
    }

    #[test]
    fn tracking_examples() {
        let lin = TrackMode::Linear { min: 0.0, max: 1.0 };
        assert_eq!(linear_or_staged_track(&lin, 0.6).unwrap(), 0.6);
        assert_eq!(linear_or_staged_track(&lin, 1.4).unwrap(), 1.0);
        let st = TrackMode::Staged(vec![0.0, 0.5, 1.0]);
        assert_eq!(linear_or_staged_track(&st, 0.75).unwrap(), 0.5);
    }

    #[test]
    fn pid_examples() {
        let p = PidConfig {
            kp: 1.0,
            ki: 0.0,
            kd: 0.0,
            u_min: -10.0,
            u_max: 10.0,
            i_clamp: 100.0,
        };
        assert_eq!(pid_step(&p, &PidState::default(), 0.5, 1.0).unwrap().0, 0.5);
        let mut s = PidState::default();
        let pi = PidConfig { ki: 0.3, ..p };
        for _ in 0..10 {
            let (u, n) = pid_step(&pi, &s, 0.0, 1.0).unwrap();
            assert_eq!(u, 0.0);
            s = n;
        }
    }

    #[test]
    fn pid_anti_windup() {
        let p = PidConfig {
            kp: 0.0,
            ki: 1.0,
            kd: 0.0,
            u_min: 0.0,
            u_max: 1.0,
            i_clamp: 1e9,
        };
        let mut s = PidState::default();
        for _ in 0..100 {
            s = pid_step(&p, &s, 1.0, 1.0).unwrap().1;
        }
        assert!(s.integral <= 1.0);
    }

    #[test]
    fn tou_examples() {
        let c = TouDispatchConfig {
            peak_start: 16,
            peak_end: 20,
            charge_target: 0.9,
            reserve_floor: 0.2,
            p_max_charge: 5000.0,
            p_max_discharge: 5000.0,
        };
        let p = tou_battery_dispatch(&c, true, 0.8, 3000.0, 10.0, 0.95, 0.95, 0.25);
        assert_eq!(p, -3000.0);
        assert_eq!(
            tou_battery_dispatch(&c, false, 0.5, 0.0, 10.0, 0.95, 0.95, 0.25),
            5000.0
        );
        assert_eq!(tou_battery_dispatch(&c, true, 0.2, 3000.0, 10.0, 0.95, 0.95, 0.25), 0.0);
        // near the target the request only fills the gap
        let near = tou_battery_dispatch(&c, false, 0.89, 0.0, 10.0, 0.95, 0.95, 0.25);
        assert!(near < 5000.0 && near > 0.0);
    }

    #[test]
    fn pv_examples() {
        let a = pv_allocation(3.0, 2.0, 7.0, 5.0).unwrap();
        assert_eq!((a.to_building, a.to_ev, a.to_battery, a.surplus), (2.0, 1.0, 0.0, 0.0));
        let a = pv_allocation(10.0, 2.0, 7.0, 1.0).unwrap();
        assert_eq!((a.to_building, a.to_ev, a.to_battery, a.surplus), (2.0, 7.0, 1.0, 0.0));
        assert_eq!(pv_allocation(0.0, 2.0, 7.0, 1.0).unwrap(), PvAllocation::default());
    }

    #[test]
    fn coordinator_examples() {
        assert_eq!(cluster_peak_coordinator(&[3.0, 2.0], 10.0).unwrap(), vec![3.0, 2.0]);
        assert_eq!(cluster_peak_coordinator(&[6.0, 4.0], 5.0).unwrap(), vec![3.0, 2.0]);
        assert_eq!(cluster_peak_coordinator(&[8.0], 5.0).unwrap(), vec![5.0]);
    }
}
