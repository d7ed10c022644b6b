use crate::networks::{dhw_demand, water_tank_step_modulated, WaterTankSpec};
use crate::runtime::{
    DataKind, Emitter, HierPath, InputDecl, Module, ModuleError, ModuleHandle, ModuleKind, StepCtx, Unit,
};

/// Hot-water tank with a modulating heater; draws follow occupancy
/// activities.
pub struct TankModule {
    handle: ModuleHandle,
    spec: WaterTankSpec,
    draws: Vec<(String, f64)>,
    t0: f64,
    t: f64,
}

impl TankModule {
    /// `draws` maps activity names to flow in kg/s while active.
    pub fn new(
        path: HierPath,
        spec: WaterTankSpec,
        draws: Vec<(String, f64)>,
        t0: f64,
        controller: &HierPath,
        occupancy: &HierPath,
    ) -> Self {
        let mut handle = ModuleHandle::new(path, ModuleKind::DynamicStateful)
            .input(InputDecl::new(
                controller,
                "heater_command",
                DataKind::Action,
                Unit::Fraction,
            ))
            .output("t_tank", DataKind::State, Unit::Celsius)
            .output("heater_power", DataKind::State, Unit::Watt)
            .output("draw", DataKind::State, Unit::KgPerSecond);
        for (name, _) in &draws {
            handle = handle.input(InputDecl::new(
                occupancy,
                &format!("act_{name}"),
                DataKind::Disturbance,
                Unit::Flag,
            ));
        }
        TankModule {
            handle,
            spec,
            draws,
            t0,
            t: t0,
        }
    }
}

impl Module for TankModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.t = self.t0;
        out.emit("t_tank", self.t)?;
        out.emit("heater_power", 0.0)?;
        out.emit("draw", 0.0)?;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let flags: Vec<(String, bool)> = self
            .draws
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (n.clone(), ctx.input(1 + i) > 0.5))
            .collect();
        let draw = dhw_demand(&flags, &self.draws);
        let (t, p) = water_tank_step_modulated(&self.spec, self.t, ctx.input(0), draw, ctx.dt());
        self.t = t;
        out.emit("t_tank", t)?;
        out.emit("heater_power", p)?;
        out.emit("draw", draw)?;
        Ok(())
    }
}
