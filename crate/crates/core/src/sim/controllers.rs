use std::f64::consts::PI;

use super::sources::price_forecast_at;
use super::{OccupancySource, SimError, WeatherSource};
use crate::control::{
    cluster_peak_coordinator, mpc_solve, onoff_deadband, pid_step, tou_battery_dispatch, DeadbandConfig, MpcConfig,
    PidConfig, PidState, TouDispatchConfig,
};
use crate::der::BatterySpec;
use crate::disturbance::{seasonal_naive_forecast, PriceSchedule};
use crate::hvac::CP_AIR;
use crate::runtime::{
    DataKind, Emitter, HierPath, InputDecl, Module, ModuleError, ModuleHandle, ModuleKind, SimClock, StepCtx, Unit,
};
use crate::thermal::{ThermalModelParams, ZoneInputs};

/// Sinusoidal flow reference, kg/s, over elapsed simulation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanProfile {
    pub mean: f64,
    pub amplitude: f64,
    pub period_h: f64,
    pub phase_h: f64,
}

pub struct FanProfileController {
    handle: ModuleHandle,
    profile: FanProfile,
}

impl FanProfileController {
    pub fn new(path: HierPath, profile: FanProfile) -> Self {
        let handle =
            ModuleHandle::new(path, ModuleKind::Controller).output("v_setpoint", DataKind::Action, Unit::KgPerSecond);
        FanProfileController { handle, profile }
    }
}

impl Module for FanProfileController {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let p = &self.profile;
        let h = ctx.clock.t as f64 * ctx.clock.dt_hours();
        let v = p.mean + p.amplitude * (2.0 * PI * (h - p.phase_h) / p.period_h).sin();
        out.emit("v_setpoint", v.max(0.0))?;
        Ok(())
    }
}

/// How a controller turns its decision into FCU setpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcuRealization {
    /// Supply-air temperature setpoint, °C
    pub t_sa: f64,
    /// Flow when on (deadband) or upper flow limit (MPC), kg/s
    pub v_max: f64,
}

fn zone_controller_outputs(path: HierPath) -> ModuleHandle {
    ModuleHandle::new(path, ModuleKind::Controller)
        .output("t_sa_setpoint", DataKind::Action, Unit::Celsius)
        .output("v_sa_setpoint", DataKind::Action, Unit::KgPerSecond)
        .output("t_lo", DataKind::Observation, Unit::Celsius)
        .output("t_hi", DataKind::Observation, Unit::Celsius)
}

/// On/off FCU control. Switching happens `switch_margin` inside the
/// comfort band `setpoint ± half_band`, which is published as `t_lo`/`t_hi`.
pub struct DeadbandFcuController {
    handle: ModuleHandle,
    cfg: DeadbandConfig,
    switch_margin: f64,
    fcu: FcuRealization,
    on: bool,
    curtail_at: Option<usize>,
    offset_at: Option<usize>,
}

impl DeadbandFcuController {
    pub fn new(
        path: HierPath,
        cfg: DeadbandConfig,
        switch_margin: f64,
        fcu: FcuRealization,
        zone: &HierPath,
        curtail: Option<(&HierPath, &str)>,
        comfort_offset: Option<&HierPath>,
    ) -> Result<Self, SimError> {
        cfg.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
        if !(switch_margin >= 0.0 && switch_margin < cfg.half_band) {
            return Err(SimError::Invalid("switch margin must lie in [0, half_band)".into()));
        }
        let mut handle = zone_controller_outputs(path)
            .output("hvac_on", DataKind::Action, Unit::Flag)
            .input(InputDecl::new(zone, "t_zone", DataKind::Observation, Unit::Celsius));
        let mut n = 1;
        let mut curtail_at = None;
        if let Some((p, var)) = curtail {
            handle = handle.input(InputDecl::new(p, var, DataKind::Action, Unit::Fraction));
            curtail_at = Some(n);
            n += 1;
        }
        let mut offset_at = None;
        if let Some(p) = comfort_offset {
            handle = handle.input(InputDecl::new(p, "comfort_offset", DataKind::Disturbance, Unit::Kelvin));
            offset_at = Some(n);
        }
        Ok(DeadbandFcuController {
            handle,
            cfg,
            switch_margin,
            fcu,
            on: false,
            curtail_at,
            offset_at,
        })
    }
}

impl Module for DeadbandFcuController {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.on = false;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let offset = self.offset_at.map_or(0.0, |i| ctx.input(i));
        let sp = self.cfg.setpoint + offset;
        let switching = DeadbandConfig {
            setpoint: sp,
            half_band: self.cfg.half_band - self.switch_margin,
            mode: self.cfg.mode,
        };
        self.on = onoff_deadband(&switching, ctx.input(0), self.on);
        let scale = self.curtail_at.map_or(1.0, |i| ctx.input(i).clamp(0.0, 1.0));
        out.emit("t_sa_setpoint", self.fcu.t_sa)?;
        out.emit("v_sa_setpoint", if self.on { self.fcu.v_max * scale } else { 0.0 })?;
        out.emit("hvac_on", if self.on { 1.0 } else { 0.0 })?;
        out.emit("t_lo", sp - self.cfg.half_band)?;
        out.emit("t_hi", sp + self.cfg.half_band)?;
        Ok(())
    }
}

/// Disturbance forecast used by the MPC.
#[derive(Debug, Clone)]
pub enum Forecast {
    /// Reads future values from the same sources that drive the plant.
    Perfect {
        weather: WeatherSource,
        occupancy: OccupancySource,
    },
    /// Seasonal-naive on the controller's own disturbance history;
    /// persistence until a day of history exists.
    SeasonalNaive,
}

/// Receding-horizon MPC on zone heat; the first action is realized as an
/// FCU flow at a fixed supply-air temperature.
pub struct MpcFcuController {
    handle: ModuleHandle,
    cfg: MpcConfig,
    params: ThermalModelParams,
    forecast: Forecast,
    prices: PriceSchedule,
    bounds: (f64, f64),
    fcu: FcuRealization,
    clock0: SimClock,
    warm: Option<Vec<f64>>,
    history: Vec<ZoneInputs>,
    curtail: bool,
}

impl MpcFcuController {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        path: HierPath,
        cfg: MpcConfig,
        params: ThermalModelParams,
        forecast: Forecast,
        prices: PriceSchedule,
        q_min: f64,
        fcu: FcuRealization,
        clock0: SimClock,
        zone: &HierPath,
        weather: &HierPath,
        occupancy: &HierPath,
        curtail: Option<(&HierPath, &str)>,
    ) -> Result<Self, SimError> {
        cfg.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
        params.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
        if !(q_min < 0.0) {
            return Err(SimError::Invalid("MPC cooling bound q_min must be < 0".into()));
        }
        let mut handle = zone_controller_outputs(path)
            .output("q_target", DataKind::Action, Unit::Watt)
            .output("mpc_cost", DataKind::Observation, Unit::Dimensionless)
            .output("mpc_iterations", DataKind::Observation, Unit::Count)
            .output("mpc_grad_norm", DataKind::Observation, Unit::Dimensionless)
            .input(InputDecl::new(zone, "t_zone", DataKind::Observation, Unit::Celsius))
            .input(InputDecl::new(weather, "t_out", DataKind::Disturbance, Unit::Celsius))
            .input(InputDecl::new(weather, "ghi", DataKind::Disturbance, Unit::WattPerM2))
            .input(InputDecl::new(
                occupancy,
                "occupants",
                DataKind::Disturbance,
                Unit::Count,
            ))
            .input(InputDecl::new(
                occupancy,
                "activity",
                DataKind::Disturbance,
                Unit::Count,
            ));
        if let Some((p, var)) = curtail {
            handle = handle.input(InputDecl::new(p, var, DataKind::Action, Unit::Fraction));
        }
        Ok(MpcFcuController {
            handle,
            cfg,
            params,
            forecast,
            prices,
            bounds: (q_min, 0.0),
            fcu,
            clock0,
            warm: None,
            history: Vec::new(),
            curtail: curtail.is_some(),
        })
    }

    fn disturbances(&self, t: u64, current: ZoneInputs) -> Result<Vec<ZoneInputs>, ModuleError> {
        let h = self.cfg.horizon;
        let mut out = Vec::with_capacity(h);
        out.push(current);
        match &self.forecast {
            Forecast::Perfect { weather, occupancy } => {
                for k in 1..h as u64 {
                    let prev = *out.last().unwrap();
                    // past the end of a table source: hold the last value
                    let w = weather.at(&self.clock0, t + k).ok();
                    let o = occupancy.at(&self.clock0, t + k).ok();
                    out.push(ZoneInputs {
                        t_out: w.map_or(prev.t_out, |w| w.t_out),
                        ghi: w.map_or(prev.ghi, |w| w.ghi),
                        occupancy: o.as_ref().map_or(prev.occupancy, |o| o.count),
                        activity: o.as_ref().map_or(prev.activity, |o| o.active_count() as f64),
                    });
                }
            }
            Forecast::SeasonalNaive => {
                let period = self.clock0.steps_per_day().unwrap_or(usize::MAX);
                if self.history.len() >= period {
                    let chan = |f: fn(&ZoneInputs) -> f64| -> Result<Vec<f64>, ModuleError> {
                        let series: Vec<f64> = self.history.iter().map(f).collect();
                        Ok(seasonal_naive_forecast(&series, h - 1, period)?)
                    };
                    let (a, b, c, d) = (
                        chan(|z| z.t_out)?,
                        chan(|z| z.ghi)?,
                        chan(|z| z.occupancy)?,
                        chan(|z| z.activity)?,
                    );
                    for k in 0..h - 1 {
                        out.push(ZoneInputs {
                            t_out: a[k],
                            ghi: b[k],
                            occupancy: c[k],
                            activity: d[k],
                        });
                    }
                } else {
                    out.resize(h, current);
                }
            }
        }
        Ok(out)
    }
}

impl Module for MpcFcuController {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.warm = None;
        self.history.clear();
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let t = ctx.clock.t;
        let t_zone = ctx.input(0);
        let current = ZoneInputs {
            t_out: ctx.input(1),
            ghi: ctx.input(2),
            occupancy: ctx.input(3),
            activity: ctx.input(4),
        };
        self.history.push(current);
        let fc = self.disturbances(t, current)?;
        let prices: Vec<f64> = (0..self.cfg.horizon as u64)
            .map(|k| price_forecast_at(&self.prices, &self.clock0, t + k))
            .collect();
        let warm = self.warm.as_ref().map(|w| {
            let mut s: Vec<f64> = w[1..].to_vec();
            s.push(*w.last().unwrap());
            s
        });
        let sol = mpc_solve(
            &self.cfg,
            &self.params,
            t_zone,
            &fc,
            &prices,
            self.bounds,
            warm.as_deref(),
        )?;
        let scale = if self.curtail {
            ctx.input(5).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let q0 = sol.q[0] * scale;
        let lift = t_zone - self.fcu.t_sa;
        let v = if q0 < 0.0 && lift > 0.5 {
            (-q0 / (CP_AIR * lift)).min(self.fcu.v_max)
        } else {
            0.0
        };
        out.emit("t_sa_setpoint", self.fcu.t_sa)?;
        out.emit("v_sa_setpoint", v)?;
        out.emit("q_target", q0)?;
        out.emit("t_lo", self.cfg.t_lo)?;
        out.emit("t_hi", self.cfg.t_hi)?;
        out.emit("mpc_cost", sol.diagnostics.final_cost)?;
        out.emit("mpc_iterations", sol.diagnostics.iterations as f64)?;
        out.emit("mpc_grad_norm", sol.diagnostics.grad_norm)?;
        log::debug!(
            "{} t={t}: cost {:.5} after {} iterations, |g| {:.3e}",
            self.handle.path,
            sol.diagnostics.final_cost,
            sol.diagnostics.iterations,
            sol.diagnostics.grad_norm
        );
        self.warm = Some(sol.q);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvRequestConfig {
    pub id: String,
    /// Charging is requested while SOC is below this.
    pub target_soc: f64,
    pub p_max: f64,
}

/// TOU battery dispatch plus EV charge requests for one building bus.
pub struct DerController {
    handle: ModuleHandle,
    tou: Option<(TouDispatchConfig, BatterySpec)>,
    evs: Vec<EvRequestConfig>,
    has_pv: bool,
}

impl DerController {
    pub fn new(
        path: HierPath,
        bus: &HierPath,
        pv: Option<&HierPath>,
        battery: Option<(&HierPath, TouDispatchConfig, BatterySpec)>,
        evs: Vec<(EvRequestConfig, HierPath)>,
    ) -> Result<Self, SimError> {
        let mut h = ModuleHandle::new(path, ModuleKind::Controller).input(InputDecl::new(
            bus,
            "load",
            DataKind::Observation,
            Unit::Watt,
        ));
        if let Some(p) = pv {
            h = h.input(InputDecl::new(p, "generation", DataKind::Observation, Unit::Watt));
        }
        let tou = match battery {
            Some((b, cfg, spec)) => {
                cfg.validate(spec.soc_min, spec.soc_max)
                    .map_err(|e| SimError::Invalid(e.to_string()))?;
                h = h
                    .input(InputDecl::new(b, "soc", DataKind::Observation, Unit::Fraction))
                    .input(InputDecl::new(b, "soh", DataKind::Observation, Unit::Fraction))
                    .output("battery_request", DataKind::Action, Unit::Watt)
                    .output("peak", DataKind::Action, Unit::Flag);
                Some((cfg, spec))
            }
            None => None,
        };
        for (cfg, p) in &evs {
            h = h
                .input(InputDecl::new(p, "soc", DataKind::Observation, Unit::Fraction))
                .output(&format!("ev_request_{}", cfg.id), DataKind::Action, Unit::Watt);
        }
        Ok(DerController {
            handle: h,
            tou,
            evs: evs.into_iter().map(|(c, _)| c).collect(),
            has_pv: pv.is_some(),
        })
    }
}

impl Module for DerController {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let mut i = 1;
        let load = ctx.input(0);
        let pv = if self.has_pv {
            i += 1;
            ctx.input(1)
        } else {
            0.0
        };
        if let Some((cfg, spec)) = &self.tou {
            let (soc, soh) = (ctx.input(i), ctx.input(i + 1));
            i += 2;
            let peak = cfg.is_peak(ctx.clock.hour_of_day());
            let p = tou_battery_dispatch(
                cfg,
                peak,
                soc,
                (load - pv).max(0.0),
                spec.capacity * soh,
                spec.eta_charge,
                spec.eta_discharge,
                ctx.clock.dt_hours(),
            );
            out.emit("battery_request", p)?;
            out.emit("peak", if peak { 1.0 } else { 0.0 })?;
        }
        for (k, ev) in self.evs.iter().enumerate() {
            let soc = ctx.input(i + k);
            let p = if soc < ev.target_soc { ev.p_max } else { 0.0 };
            out.emit(&format!("ev_request_{}", ev.id), p)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TankControl {
    Deadband(DeadbandConfig),
    Pid { cfg: PidConfig, setpoint: f64 },
}

/// Heater command in [0, 1] for a hot-water tank.
pub struct TankController {
    handle: ModuleHandle,
    control: TankControl,
    on: bool,
    pid: PidState,
}

impl TankController {
    pub fn new(path: HierPath, control: TankControl, tank: &HierPath) -> Result<Self, SimError> {
        match &control {
            TankControl::Deadband(c) => c.validate(),
            TankControl::Pid { cfg, .. } => cfg.validate(),
        }
        .map_err(|e| SimError::Invalid(e.to_string()))?;
        let handle = ModuleHandle::new(path, ModuleKind::Controller)
            .input(InputDecl::new(tank, "t_tank", DataKind::Observation, Unit::Celsius))
            .output("heater_command", DataKind::Action, Unit::Fraction);
        Ok(TankController {
            handle,
            control,
            on: false,
            pid: PidState::default(),
        })
    }
}

impl Module for TankController {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.on = false;
        self.pid = PidState::default();
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let t = ctx.input(0);
        let u = match &self.control {
            TankControl::Deadband(c) => {
                self.on = onoff_deadband(c, t, self.on);
                if self.on {
                    1.0
                } else {
                    0.0
                }
            }
            TankControl::Pid { cfg, setpoint } => {
                let (u, s) = pid_step(cfg, &self.pid, setpoint - t, ctx.dt())?;
                self.pid = s;
                u.clamp(0.0, 1.0)
            }
        };
        out.emit("heater_command", u)?;
        Ok(())
    }
}

/// Cluster-level peak cap: per-building `curtail_<id>` fractions from the
/// previous step's building power.
pub struct ClusterPeakController {
    handle: ModuleHandle,
    cap: f64,
    ids: Vec<String>,
}

impl ClusterPeakController {
    /// `buildings` pairs each id with the path whose aggregated `power` it reads.
    pub fn new(path: HierPath, cap: f64, buildings: &[(String, HierPath)]) -> Result<Self, SimError> {
        if !(cap > 0.0) {
            return Err(SimError::Invalid("cluster cap must be > 0".into()));
        }
        let mut h = ModuleHandle::new(path, ModuleKind::Controller);
        for (id, p) in buildings {
            h = h
                .input(InputDecl::new(p, "power", DataKind::Observation, Unit::Watt))
                .output(&format!("curtail_{id}"), DataKind::Action, Unit::Fraction);
        }
        Ok(ClusterPeakController {
            handle: h,
            cap,
            ids: buildings.iter().map(|(id, _)| id.clone()).collect(),
        })
    }
}

impl Module for ClusterPeakController {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let loads: Vec<f64> = ctx.inputs.iter().map(|p| p.max(0.0)).collect();
        let allowed = if loads.iter().sum::<f64>() > 0.0 {
            cluster_peak_coordinator(&loads, self.cap)?
        } else {
            loads.clone()
        };
        for ((id, l), a) in self.ids.iter().zip(&loads).zip(allowed) {
            let f = if *l > 0.0 { (a / l).min(1.0) } else { 1.0 };
            out.emit(&format!("curtail_{id}"), f)?;
        }
        Ok(())
    }
}
