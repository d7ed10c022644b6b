use crate::hvac::{fan_step, fcu_system_step, FanSpec, FcuAction, FcuAssembly, PlantState};
use crate::networks::ZoneModel;
use crate::runtime::{
    DataKind, Emitter, HierPath, InputDecl, Module, ModuleError, ModuleHandle, ModuleKind, StepCtx, Unit,
};
use crate::thermal::ZoneInputs;

/// Single zone driven by weather, occupancy and (optionally) the heat
/// delivered by an HVAC module in the same step.
pub struct ZoneModule {
    handle: ModuleHandle,
    model: ZoneModel,
    var: String,
    t0: f64,
    t: f64,
    has_hvac: bool,
}

impl ZoneModule {
    /// `var` names the published temperature (`t_zone` for the plant,
    /// something else for shadow predictors).
    pub fn new(
        path: HierPath,
        model: ZoneModel,
        var: &str,
        t0: f64,
        weather: &HierPath,
        occupancy: &HierPath,
        hvac: Option<&HierPath>,
    ) -> Self {
        let mut handle = ModuleHandle::new(path, ModuleKind::DynamicStateful)
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
            ))
            .output(var, DataKind::State, Unit::Celsius);
        if let Some(h) = hvac {
            handle = handle.input(InputDecl::new(h, "q_zone", DataKind::State, Unit::Watt));
        }
        ZoneModule {
            handle,
            model,
            var: var.to_string(),
            t0,
            t: t0,
            has_hvac: hvac.is_some(),
        }
    }
}

impl Module for ZoneModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.t = self.t0;
        out.emit(&self.var, self.t)?;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let d = ZoneInputs {
            t_out: ctx.input(0),
            ghi: ctx.input(1),
            occupancy: ctx.input(2),
            activity: ctx.input(3),
        };
        let q = if self.has_hvac { ctx.input(4) } else { 0.0 };
        self.t = self.model.step(self.t, &d, q, ctx.dt())?;
        out.emit(&self.var, self.t)?;
        Ok(())
    }
}

const FCU_STATES: [(&str, Unit); 11] = [
    ("q_zone", Unit::Watt),
    ("t_sa", Unit::Celsius),
    ("v_sa", Unit::KgPerSecond),
    ("m_chw", Unit::KgPerSecond),
    ("p_fan", Unit::Watt),
    ("p_pump", Unit::Watt),
    ("p_chiller", Unit::Watt),
    ("p_tower", Unit::Watt),
    ("elec_power", Unit::Watt),
    ("cop", Unit::Dimensionless),
    ("q_unmet", Unit::Watt),
];

/// Fan coil unit with its chilled-water plant. Reads supply-air setpoints
/// from a controller and the zone temperature of the previous step.
pub struct FcuModule {
    handle: ModuleHandle,
    asm: FcuAssembly,
    plant: PlantState,
    /// Forced off from this step on.
    off_after: Option<u64>,
}

impl FcuModule {
    pub fn new(
        path: HierPath,
        asm: FcuAssembly,
        controller: &HierPath,
        zone: &HierPath,
        weather: &HierPath,
        off_after: Option<u64>,
    ) -> Self {
        let mut handle = ModuleHandle::new(path, ModuleKind::DynamicStateful)
            .input(InputDecl::new(
                controller,
                "t_sa_setpoint",
                DataKind::Action,
                Unit::Celsius,
            ))
            .input(InputDecl::new(
                controller,
                "v_sa_setpoint",
                DataKind::Action,
                Unit::KgPerSecond,
            ))
            .input(InputDecl::new(zone, "t_zone", DataKind::State, Unit::Celsius).delayed())
            .input(InputDecl::new(weather, "t_wb", DataKind::Disturbance, Unit::Celsius));
        for (v, u) in FCU_STATES {
            handle = handle.output(v, DataKind::State, u);
        }
        let plant = asm.initial_plant();
        FcuModule {
            handle,
            asm,
            plant,
            off_after,
        }
    }
}

impl Module for FcuModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.plant = self.asm.initial_plant();
        for (v, _) in FCU_STATES {
            out.emit(v, 0.0)?;
        }
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let off = self.off_after.is_some_and(|s| ctx.clock.t >= s);
        let action = FcuAction {
            t_sa_setpoint: ctx.input(0),
            v_sa_setpoint: if off { 0.0 } else { ctx.input(1).max(0.0) },
            ..Default::default()
        };
        let t_zone = ctx.input(2);
        let o = fcu_system_step(
            &self.asm,
            &action,
            t_zone,
            ctx.input(3),
            ctx.clock.dt_hours(),
            &mut self.plant,
        )?;
        let vals = [
            o.q_zone,
            o.t_sa,
            o.v_sa,
            o.m_chw,
            o.p_fan,
            o.p_pump,
            o.p_chiller,
            o.p_tower,
            o.p_total,
            o.cop,
            o.q_unmet,
        ];
        for ((v, _), x) in FCU_STATES.iter().zip(vals) {
            out.emit(v, x)?;
        }
        Ok(())
    }
}

/// A stand-alone fan following a flow setpoint action.
pub struct FanModule {
    handle: ModuleHandle,
    spec: FanSpec,
}

impl FanModule {
    pub fn new(path: HierPath, spec: FanSpec, controller: &HierPath, setpoint_var: &str) -> Self {
        let handle = ModuleHandle::new(path, ModuleKind::DynamicStateless)
            .input(InputDecl::new(
                controller,
                setpoint_var,
                DataKind::Action,
                Unit::KgPerSecond,
            ))
            .output("flow", DataKind::State, Unit::KgPerSecond)
            .output("elec_power", DataKind::State, Unit::Watt);
        FanModule { handle, spec }
    }
}

impl Module for FanModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        out.emit("flow", 0.0)?;
        out.emit("elec_power", 0.0)?;
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let (flow, p) = fan_step(&self.spec, ctx.input(0))?;
        out.emit("flow", flow)?;
        out.emit("elec_power", p)?;
        Ok(())
    }
}
