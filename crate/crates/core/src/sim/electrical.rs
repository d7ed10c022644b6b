use super::{clock_at, SimError};
use crate::control::pv_allocation;
use crate::der::{
    battery_degradation_step, battery_step, ev_step, pv_power, BatterySpec, BatteryState, EvEvent, EvSpec, EvState,
    PvSpec,
};
use crate::networks::{electrical_demand, ElectricalNetworkSpec};
use crate::runtime::{
    DataKind, Emitter, HierPath, InputDecl, Module, ModuleError, ModuleHandle, ModuleKind, SimClock, StepCtx, Unit,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    /// Base load plus active appliances.
    Plug,
    Lighting,
}

/// Occupancy-driven electrical load publishing `power`.
pub struct LoadModule {
    handle: ModuleHandle,
    kind: LoadKind,
    spec: ElectricalNetworkSpec,
}

impl LoadModule {
    pub fn new(path: HierPath, kind: LoadKind, spec: ElectricalNetworkSpec, occupancy: &HierPath) -> Self {
        let mut handle = ModuleHandle::new(path, ModuleKind::DynamicStateless)
            .input(InputDecl::new(occupancy, "occupied", DataKind::Disturbance, Unit::Flag))
            .output("power", DataKind::State, Unit::Watt);
        if kind == LoadKind::Plug {
            for (name, _) in &spec.appliances {
                handle = handle.input(InputDecl::new(
                    occupancy,
                    &format!("act_{name}"),
                    DataKind::Disturbance,
                    Unit::Flag,
                ));
            }
        }
        LoadModule { handle, kind, spec }
    }
}

impl Module for LoadModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        out.emit("power", 0.0)?;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let occupied = ctx.input(0) > 0.5;
        let p = match self.kind {
            LoadKind::Plug => {
                let flags: Vec<(String, bool)> = self
                    .spec
                    .appliances
                    .iter()
                    .enumerate()
                    .map(|(i, (n, _))| (n.clone(), ctx.input(1 + i) > 0.5))
                    .collect();
                let d = electrical_demand(&self.spec, &flags, occupied)?;
                d.base + d.plug
            }
            LoadKind::Lighting => electrical_demand(&self.spec, &[], occupied)?.lighting,
        };
        out.emit("power", p)?;
        Ok(())
    }
}

/// Re-publishes a W-valued state of another module as `power`.
pub struct MeterModule {
    handle: ModuleHandle,
}

impl MeterModule {
    pub fn new(path: HierPath, source: &HierPath, var: &str) -> Self {
        let handle = ModuleHandle::new(path, ModuleKind::DynamicStateless)
            .input(InputDecl::new(source, var, DataKind::State, Unit::Watt))
            .output("power", DataKind::State, Unit::Watt);
        MeterModule { handle }
    }
}

impl Module for MeterModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        out.emit("power", 0.0)?;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        out.emit("power", ctx.input(0))?;
        Ok(())
    }
}

pub struct PvModule {
    handle: ModuleHandle,
    spec: PvSpec,
    age_years: f64,
}

impl PvModule {
    pub fn new(path: HierPath, spec: PvSpec, age_years: f64, weather: &HierPath) -> Self {
        let handle = ModuleHandle::new(path, ModuleKind::DynamicStateless)
            .input(InputDecl::new(weather, "ghi", DataKind::Disturbance, Unit::WattPerM2))
            .input(InputDecl::new(weather, "t_out", DataKind::Disturbance, Unit::Celsius))
            .output("generation", DataKind::State, Unit::Watt);
        PvModule {
            handle,
            spec,
            age_years,
        }
    }
}

impl Module for PvModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        out.emit("generation", 0.0)?;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        out.emit(
            "generation",
            pv_power(&self.spec, ctx.input(0), ctx.input(1), self.age_years),
        )?;
        Ok(())
    }
}

/// Building bus: sums loads and runs the PV waterfall (building, then EVs
/// in order, then the battery) to turn controller requests into storage
/// setpoints.
pub struct BusModule {
    handle: ModuleHandle,
    has_pv: bool,
    n_loads: usize,
    has_battery: bool,
    evs: Vec<String>,
}

impl BusModule {
    /// `evs` pairs each EV id with its module path.
    pub fn new(
        path: HierPath,
        pv: Option<&HierPath>,
        loads: &[HierPath],
        controller: Option<&HierPath>,
        battery: Option<&HierPath>,
        evs: &[(String, HierPath)],
    ) -> Result<Self, SimError> {
        if (battery.is_some() || !evs.is_empty()) && controller.is_none() {
            return Err(SimError::Invalid("storage on the bus needs a DER controller".into()));
        }
        let mut h = ModuleHandle::new(path, ModuleKind::DynamicStateless);
        if let Some(p) = pv {
            h = h.input(InputDecl::new(p, "generation", DataKind::State, Unit::Watt));
        }
        for l in loads {
            h = h.input(InputDecl::new(l, "power", DataKind::State, Unit::Watt));
        }
        if let (Some(b), Some(c)) = (battery, controller) {
            h = h
                .input(InputDecl::new(c, "battery_request", DataKind::Action, Unit::Watt))
                .input(InputDecl::new(b, "charge_headroom", DataKind::State, Unit::Watt).delayed());
        }
        for (id, ev) in evs {
            let c = controller.expect("checked above");
            h = h
                .input(InputDecl::new(
                    c,
                    &format!("ev_request_{id}"),
                    DataKind::Action,
                    Unit::Watt,
                ))
                .input(InputDecl::new(ev, "charge_headroom", DataKind::State, Unit::Watt).delayed());
        }
        h = h
            .output("load", DataKind::State, Unit::Watt)
            .output("pv_to_load", DataKind::State, Unit::Watt)
            .output("pv_to_ev", DataKind::State, Unit::Watt)
            .output("pv_to_battery", DataKind::State, Unit::Watt)
            .output("pv_surplus", DataKind::State, Unit::Watt);
        if battery.is_some() {
            h = h.output("battery_setpoint", DataKind::State, Unit::Watt);
        }
        for (id, _) in evs {
            h = h.output(&format!("ev_setpoint_{id}"), DataKind::State, Unit::Watt);
        }
        Ok(BusModule {
            handle: h,
            has_pv: pv.is_some(),
            n_loads: loads.len(),
            has_battery: battery.is_some(),
            evs: evs.iter().map(|(id, _)| id.clone()).collect(),
        })
    }
}

impl Module for BusModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        for v in ["load", "pv_to_load", "pv_to_ev", "pv_to_battery", "pv_surplus"] {
            out.emit(v, 0.0)?;
        }
        if self.has_battery {
            out.emit("battery_setpoint", 0.0)?;
        }
        for id in &self.evs {
            out.emit(&format!("ev_setpoint_{id}"), 0.0)?;
        }
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let mut i = 0;
        let pv = if self.has_pv {
            i += 1;
            ctx.input(0).max(0.0)
        } else {
            0.0
        };
        let load: f64 = (0..self.n_loads).map(|k| ctx.input(i + k)).sum();
        i += self.n_loads;
        let (b_req, b_head) = if self.has_battery {
            i += 2;
            (ctx.input(i - 2), ctx.input(i - 1).max(0.0))
        } else {
            (0.0, 0.0)
        };
        let ev: Vec<(f64, f64)> = (0..self.evs.len())
            .map(|k| (ctx.input(i + 2 * k).max(0.0), ctx.input(i + 2 * k + 1).max(0.0)))
            .collect();
        let ev_head: f64 = ev.iter().map(|e| e.1).sum();
        let pv_batt_head = if b_req < 0.0 { 0.0 } else { b_head };
        let a = pv_allocation(pv, load.max(0.0), ev_head, pv_batt_head)?;
        out.emit("load", load)?;
        out.emit("pv_to_load", a.to_building)?;
        out.emit("pv_to_ev", a.to_ev)?;
        out.emit("pv_to_battery", a.to_battery)?;
        out.emit("pv_surplus", a.surplus)?;
        if self.has_battery {
            let set = if b_req < 0.0 {
                // discharge only into load the PV left uncovered
                b_req.max(-(load - a.to_building).max(0.0))
            } else {
                b_req.max(a.to_battery)
            };
            out.emit("battery_setpoint", set)?;
        }
        let mut pv_left = a.to_ev;
        for (id, (req, head)) in self.evs.iter().zip(ev) {
            let share = pv_left.min(head);
            pv_left -= share;
            out.emit(&format!("ev_setpoint_{id}"), req.min(head).max(share))?;
        }
        Ok(())
    }
}

fn charge_headroom(spec: &BatterySpec, s: &BatteryState, t_amb: f64, dt_h: f64) -> f64 {
    let room = ((spec.soc_max - s.soc) * spec.capacity * s.soh).max(0.0);
    (spec.p_max_charge * spec.derate_at(t_amb)).min(room * 1000.0 / (spec.eta_charge * dt_h))
}

pub struct BatteryModule {
    handle: ModuleHandle,
    spec: BatterySpec,
    init: BatteryState,
    state: BatteryState,
}

impl BatteryModule {
    pub fn new(path: HierPath, spec: BatterySpec, soc0: f64, bus: &HierPath, weather: &HierPath) -> Self {
        let handle = ModuleHandle::new(path, ModuleKind::DynamicStateful)
            .input(InputDecl::new(bus, "battery_setpoint", DataKind::State, Unit::Watt))
            .input(InputDecl::new(weather, "t_out", DataKind::Disturbance, Unit::Celsius))
            .output("soc", DataKind::State, Unit::Fraction)
            .output("soh", DataKind::State, Unit::Fraction)
            .output("p_batt", DataKind::State, Unit::Watt)
            .output("p_loss", DataKind::State, Unit::Watt)
            .output("charge_headroom", DataKind::State, Unit::Watt);
        let init = BatteryState { soc: soc0, soh: 1.0 };
        BatteryModule {
            handle,
            spec,
            init,
            state: init,
        }
    }
}

impl Module for BatteryModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.state = self.init;
        out.emit("soc", self.state.soc)?;
        out.emit("soh", self.state.soh)?;
        out.emit("p_batt", 0.0)?;
        out.emit("p_loss", 0.0)?;
        out.emit("charge_headroom", charge_headroom(&self.spec, &self.state, 25.0, 0.25))?;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let dt_h = ctx.clock.dt_hours();
        let t_amb = ctx.input(1);
        let s = battery_step(&self.spec, self.state, ctx.input(0), t_amb, dt_h)?;
        self.state = s.state;
        self.state.soh = battery_degradation_step(&self.spec, self.state.soh, s.cell_energy.abs(), dt_h);
        out.emit("soc", self.state.soc)?;
        out.emit("soh", self.state.soh)?;
        out.emit("p_batt", s.p_actual)?;
        out.emit("p_loss", s.p_loss)?;
        out.emit("charge_headroom", charge_headroom(&self.spec, &self.state, t_amb, dt_h))?;
        Ok(())
    }
}

pub struct EvModule {
    handle: ModuleHandle,
    spec: EvSpec,
    clock0: SimClock,
    soc0: f64,
    state: EvState,
    short: u32,
    underflow: u32,
}

impl EvModule {
    pub fn new(
        path: HierPath,
        spec: EvSpec,
        soc0: f64,
        clock0: SimClock,
        bus: &HierPath,
        setpoint_var: &str,
        weather: &HierPath,
    ) -> Self {
        let handle = ModuleHandle::new(path, ModuleKind::DynamicStateful)
            .input(InputDecl::new(bus, setpoint_var, DataKind::State, Unit::Watt))
            .input(InputDecl::new(weather, "t_out", DataKind::Disturbance, Unit::Celsius))
            .output("soc", DataKind::State, Unit::Fraction)
            .output("p_ev", DataKind::State, Unit::Watt)
            .output("available", DataKind::State, Unit::Flag)
            .output("trip_energy", DataKind::State, Unit::KiloWattHour)
            .output("short_departures", DataKind::State, Unit::Count)
            .output("charge_headroom", DataKind::State, Unit::Watt);
        let state = EvState::new(&spec, soc0, &clock0);
        EvModule {
            handle,
            spec,
            clock0,
            soc0,
            state,
            short: 0,
            underflow: 0,
        }
    }

    fn headroom(&self, clock: &SimClock, t_amb: f64) -> f64 {
        if self.state.available(&self.spec, clock) {
            charge_headroom(&self.spec.battery, &self.state.battery, t_amb, clock.dt_hours())
        } else {
            0.0
        }
    }
}

impl Module for EvModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.state = EvState::new(&self.spec, self.soc0, &self.clock0);
        self.short = 0;
        self.underflow = 0;
        out.emit("soc", self.state.battery.soc)?;
        out.emit("p_ev", 0.0)?;
        out.emit(
            "available",
            if self.state.available(&self.spec, &self.clock0) {
                1.0
            } else {
                0.0
            },
        )?;
        out.emit("trip_energy", 0.0)?;
        out.emit("short_departures", 0.0)?;
        out.emit("charge_headroom", self.headroom(&self.clock0, 25.0))?;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let dt_h = ctx.clock.dt_hours();
        let t_amb = ctx.input(1);
        let available = self.state.available(&self.spec, ctx.clock);
        let s = ev_step(&self.spec, &self.state, ctx.input(0), t_amb, ctx.clock, dt_h)?;
        self.state = s.state;
        for e in &s.events {
            match e {
                EvEvent::DepartureShort {
                    interval,
                    soc,
                    required,
                } => {
                    self.short += 1;
                    log::warn!(
                        "{}: departure {interval} at SOC {soc:.3} below required {required:.3}",
                        self.handle.path
                    );
                }
                EvEvent::TripUnderflow { interval, shortfall } => {
                    self.underflow += 1;
                    log::warn!("{}: trip {interval} short by {shortfall:.3} kWh", self.handle.path);
                }
                _ => {}
            }
        }
        let next = clock_at(ctx.clock, ctx.clock.t + 1);
        out.emit("soc", self.state.battery.soc)?;
        out.emit("p_ev", s.p_actual)?;
        out.emit("available", if available { 1.0 } else { 0.0 })?;
        out.emit("trip_energy", s.trip_energy)?;
        out.emit("short_departures", self.short as f64)?;
        out.emit("charge_headroom", self.headroom(&next, t_amb))?;
        Ok(())
    }
}

/// Closes the building bus: grid = load + storage charging − PV used.
/// Without export, negative grid power is curtailed PV instead.
pub struct GridModule {
    handle: ModuleHandle,
    has_pv: bool,
    has_battery: bool,
    n_evs: usize,
    export: bool,
}

impl GridModule {
    pub fn new(
        path: HierPath,
        bus: &HierPath,
        pv: Option<&HierPath>,
        battery: Option<&HierPath>,
        evs: &[HierPath],
        export: bool,
    ) -> Self {
        let mut h = ModuleHandle::new(path, ModuleKind::DynamicStateless).input(InputDecl::new(
            bus,
            "load",
            DataKind::State,
            Unit::Watt,
        ));
        if let Some(p) = pv {
            h = h.input(InputDecl::new(p, "generation", DataKind::State, Unit::Watt));
        }
        if let Some(b) = battery {
            h = h.input(InputDecl::new(b, "p_batt", DataKind::State, Unit::Watt));
        }
        for e in evs {
            h = h.input(InputDecl::new(e, "p_ev", DataKind::State, Unit::Watt));
        }
        h = h
            .output("grid", DataKind::State, Unit::Watt)
            .output("pv_used", DataKind::State, Unit::Watt)
            .output("pv_curtailed", DataKind::State, Unit::Watt);
        GridModule {
            handle: h,
            has_pv: pv.is_some(),
            has_battery: battery.is_some(),
            n_evs: evs.len(),
            export,
        }
    }
}

impl Module for GridModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        for v in ["grid", "pv_used", "pv_curtailed"] {
            out.emit(v, 0.0)?;
        }
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
        let mut storage = 0.0;
        if self.has_battery {
            storage += ctx.input(i);
            i += 1;
        }
        for k in 0..self.n_evs {
            storage += ctx.input(i + k);
        }
        let net = load + storage - pv;
        let (grid, curtailed) = if net < 0.0 && !self.export {
            (0.0, -net)
        } else {
            (net, 0.0)
        };
        out.emit("grid", grid)?;
        out.emit("pv_used", pv - curtailed)?;
        out.emit("pv_curtailed", curtailed)?;
        Ok(())
    }
}
