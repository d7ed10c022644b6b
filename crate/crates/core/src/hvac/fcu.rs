use super::{
    chiller_step, coil_step, cooling_tower_step, fan_step, ice_storage_step, pump_step, ChillerSpec, CoilSpec,
    CoolingTowerSpec, FanKind, FanSpec, HvacError, IceStorageSpec, IceStorageState, PumpSpec, CP_AIR, CP_WATER,
};

const BISECT_ITERS: usize = 20;
const BISECT_TOL_K: f64 = 0.05;

/// Condenser loop closed through a cooling tower instead of a fixed
/// condenser temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct TowerLoop {
    pub tower: CoolingTowerSpec,
    /// kg/s
    pub m_cw: f64,
    /// Condensing temperature above tower supply, K
    pub approach: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcuAssembly {
    pub fan: FanSpec,
    pub pump: PumpSpec,
    pub coil: CoilSpec,
    pub chiller: ChillerSpec,
    /// Chilled-water supply temperature, °C
    pub t_chw: f64,
    /// Condensing temperature used when there is no tower loop, °C
    pub t_cond: f64,
    pub tower: Option<TowerLoop>,
    pub ice: Option<IceStorageSpec>,
}

impl FcuAssembly {
    pub fn validate(&self) -> Result<(), HvacError> {
        self.fan.validate()?;
        self.pump.validate()?;
        self.coil.validate()?;
        self.chiller.validate()?;
        if let Some(t) = &self.tower {
            t.tower.validate()?;
            if !(t.m_cw > 0.0 && t.approach >= 0.0) {
                return Err(HvacError::InvalidSpec("tower loop needs positive flow".into()));
            }
        }
        if let Some(i) = &self.ice {
            if !(i.capacity > 0.0 && i.efficiency > 0.0 && i.efficiency <= 1.0) {
                return Err(HvacError::InvalidSpec("ice storage capacity/efficiency".into()));
            }
        }
        Ok(())
    }

    /// Largest cooling the coil can deliver to air at `t_zone` with the fan at rated flow.
    pub fn max_cooling(&self, t_zone: f64) -> f64 {
        coil_step(
            &self.coil,
            self.fan.rated_flow,
            t_zone,
            self.pump.rated_flow,
            self.t_chw,
        )
        .map(|c| c.q.max(0.0))
        .unwrap_or(0.0)
    }

    pub fn initial_plant(&self) -> PlantState {
        PlantState {
            t_cws: self.t_cond - self.tower.as_ref().map_or(0.0, |t| t.approach),
            ice: self.ice.map(|_| IceStorageState { energy: 0.0 }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FcuAction {
    /// °C
    pub t_sa_setpoint: f64,
    /// kg/s
    pub v_sa_setpoint: f64,
    /// W drawn from the chiller into ice storage
    pub ice_charge: f64,
    /// W of cooling requested from ice storage
    pub ice_discharge: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    /// Condenser water supply temperature, °C
    pub t_cws: f64,
    pub ice: Option<IceStorageState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HvacOutput {
    pub t_sa: f64,
    pub v_sa: f64,
    pub m_chw: f64,
    /// Heat delivered to the zone, W (negative = cooling)
    pub q_zone: f64,
    /// Chiller load not met, W
    pub q_unmet: f64,
    pub cop: f64,
    pub p_fan: f64,
    pub p_pump: f64,
    pub p_chiller: f64,
    pub p_tower: f64,
    pub p_total: f64,
}

/// Fan, pump, coil and chiller evaluated at fixed air and water flow
/// setpoints with the condenser at `t_cond`.
pub fn fcu_compose(
    asm: &FcuAssembly,
    v_sa: f64,
    m_chw: f64,
    t_zone: f64,
    t_cond: f64,
) -> Result<HvacOutput, HvacError> {
    let (v, p_fan) = fan_step(&asm.fan, v_sa)?;
    let (m, p_pump) = if v > 0.0 {
        pump_step(&asm.pump, m_chw)?
    } else {
        (0.0, 0.0)
    };
    let coil = coil_step(&asm.coil, v, t_zone, m, asm.t_chw)?;
    let ch = chiller_step(&asm.chiller, coil.q.max(0.0), asm.t_chw, t_cond)?;
    let p_total = p_fan + p_pump + ch.p_elec;
    Ok(HvacOutput {
        t_sa: coil.t_air_out,
        v_sa: v,
        m_chw: m,
        q_zone: v * CP_AIR * (coil.t_air_out - t_zone),
        q_unmet: coil.q.max(0.0) - ch.q_met,
        cop: ch.cop,
        p_fan,
        p_pump,
        p_chiller: ch.p_elec,
        p_tower: 0.0,
        p_total,
    })
}

/// Chilled-water flow that brings the coil's leaving air to `t_sa_sp`,
/// clamped to pump limits. Best effort when the setpoint is out of reach.
fn chw_flow_for(asm: &FcuAssembly, v: f64, t_zone: f64, t_sa_sp: f64) -> Result<f64, HvacError> {
    if v == 0.0 || t_sa_sp >= t_zone {
        return Ok(0.0);
    }
    let m_max = asm.pump.rated_flow;
    let t_out = |m: f64| coil_step(&asm.coil, v, t_zone, m, asm.t_chw).map(|c| c.t_air_out);
    if t_out(m_max)? > t_sa_sp {
        return Ok(m_max);
    }
    let (mut lo, mut hi) = (0.0, m_max);
    let mut mid = hi;
    for _ in 0..BISECT_ITERS {
        mid = 0.5 * (lo + hi);
        let t = t_out(mid)?;
        if (t - t_sa_sp).abs() <= BISECT_TOL_K {
            break;
        }
        if t > t_sa_sp {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// One step of the fan-coil system. `t_wb` feeds the tower, `dt_h` the
/// ice storage; `plant` carries condenser and storage state between steps.
pub fn fcu_system_step(
    asm: &FcuAssembly,
    action: &FcuAction,
    t_zone: f64,
    t_wb: f64,
    dt_h: f64,
    plant: &mut PlantState,
) -> Result<HvacOutput, HvacError> {
    let (v, _) = fan_step(&asm.fan, action.v_sa_setpoint)?;
    let m_sp = chw_flow_for(asm, v, t_zone, action.t_sa_setpoint)?;
    let (m, p_pump) = if v > 0.0 && m_sp > 0.0 {
        pump_step(&asm.pump, m_sp)?
    } else {
        (0.0, 0.0)
    };
    let (_, p_fan) = fan_step(&asm.fan, action.v_sa_setpoint)?;
    let coil = coil_step(&asm.coil, v, t_zone, m, asm.t_chw)?;
    let coil_load = coil.q.max(0.0);

    let mut chiller_load = coil_load;
    if let (Some(spec), Some(state)) = (&asm.ice, plant.ice.as_mut()) {
        let want_dis = action.ice_discharge.min(coil_load);
        let step = ice_storage_step(spec, *state, action.ice_charge, want_dis, dt_h)?;
        *state = step.state;
        chiller_load = coil_load - step.discharge_delivered + step.charge_accepted;
    }
    let t_cond = match &asm.tower {
        Some(t) => plant.t_cws + t.approach,
        None => asm.t_cond,
    };
    let ch = chiller_step(&asm.chiller, chiller_load, asm.t_chw, t_cond)?;
    let mut p_tower = 0.0;
    if let Some(t) = &asm.tower {
        let m_cw = if ch.q_met > 0.0 { t.m_cw } else { 0.0 };
        let t_cwr = plant.t_cws
            + if m_cw > 0.0 {
                (ch.q_met + ch.p_elec) / (m_cw * CP_WATER)
            } else {
                0.0
            };
        let (t_cws, p) = cooling_tower_step(&t.tower, m_cw, t_cwr, t_wb)?;
        plant.t_cws = t_cws;
        p_tower = p;
    }
    let p_total = p_fan + p_pump + ch.p_elec + p_tower;
    Ok(HvacOutput {
        t_sa: coil.t_air_out,
        v_sa: v,
        m_chw: m,
        q_zone: v * CP_AIR * (coil.t_air_out - t_zone),
        q_unmet: chiller_load - ch.q_met,
        cop: ch.cop,
        p_fan,
        p_pump,
        p_chiller: ch.p_elec,
        p_tower,
        p_total,
    })
}

impl Default for FcuAssembly {
    fn default() -> Self {
        FcuAssembly {
            fan: FanSpec {
                kind: FanKind::Vfd { turndown: 0.2 },
                rated_flow: 1.0,
                rated_power: 500.0,
            },
            pump: FanSpec {
                kind: FanKind::Vfd { turndown: 0.0 },
                rated_flow: 0.25,
                rated_power: 200.0,
            },
            coil: CoilSpec { effectiveness: 0.8 },
            chiller: ChillerSpec {
                mode: super::ChillerMode::Carnot { eta: 0.5 },
                capacity: 20_000.0,
            },
            t_chw: 7.0,
            t_cond: 35.0,
            tower: None,
            ice: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn staged_asm() -> FcuAssembly {
        FcuAssembly {
            fan: FanSpec {
                kind: FanKind::Staged(vec![0.0, 0.5, 1.0]),
                rated_flow: 1.0,
                rated_power: 500.0,
            },
            ..Default::default()
        }
    }

    #[test]
    fn composed_example() {
        let o = fcu_compose(&staged_asm(), 0.5, 0.2, 26.0, 35.0).unwrap();
        assert!((o.q_zone + 7645.6).abs() < 1e-9);
        assert!((o.t_sa - 10.8).abs() < 1e-9);
        assert!((o.p_total - 1693.2).abs() < 0.01, "{}", o.p_total);
        assert_eq!(o.p_total, o.p_fan + o.p_pump + o.p_chiller);
    }

    #[test]
    fn tracks_reachable_setpoint() {
        let asm = FcuAssembly::default();
        let mut plant = asm.initial_plant();
        let a = FcuAction {
            t_sa_setpoint: 14.0,
            v_sa_setpoint: 0.5,
            ..Default::default()
        };
        let o = fcu_system_step(&asm, &a, 26.0, 20.0, 0.25, &mut plant).unwrap();
        assert!((o.t_sa - 14.0).abs() <= 0.05, "{}", o.t_sa);
        assert!(o.q_zone < 0.0);
    }

    #[test]
    fn off_and_unreachable() {
        let asm = FcuAssembly::default();
        let mut plant = asm.initial_plant();
        let off = fcu_system_step(&asm, &FcuAction::default(), 26.0, 20.0, 0.25, &mut plant).unwrap();
        assert_eq!((off.q_zone, off.p_total), (0.0, 0.0));
        let a = FcuAction {
            t_sa_setpoint: 8.0,
            v_sa_setpoint: 0.5,
            ..Default::default()
        };
        let o = fcu_system_step(&asm, &a, 26.0, 20.0, 0.25, &mut plant).unwrap();
        assert!(o.t_sa > 8.0);
        assert_eq!(o.m_chw, asm.pump.rated_flow);
    }

    #[test]
    fn tower_and_ice_addons() {
        let asm = FcuAssembly {
            tower: Some(TowerLoop {
                tower: CoolingTowerSpec {
                    effectiveness: 0.7,
                    fan_power: 150.0,
                },
                m_cw: 0.5,
                approach: 3.0,
            }),
            ice: Some(IceStorageSpec {
                capacity: 20.0,
                efficiency: 0.95,
            }),
            ..Default::default()
        };
        asm.validate().unwrap();
        let mut plant = asm.initial_plant();
        let a = FcuAction {
            t_sa_setpoint: 14.0,
            v_sa_setpoint: 0.5,
            ice_charge: 2000.0,
            ..Default::default()
        };
        let o = fcu_system_step(&asm, &a, 26.0, 22.0, 0.25, &mut plant).unwrap();
        assert!(plant.ice.unwrap().energy > 0.0);
        assert_eq!(o.p_total, o.p_fan + o.p_pump + o.p_chiller + o.p_tower);
        assert!(plant.t_cws < 32.0 + 1e-9);
    }
}
