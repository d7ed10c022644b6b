use super::{DataKind, HierPath, RuntimeError, SignalFrame, SignalKey, SimClock, Unit};

pub type ModuleError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModuleKind {
    DynamicStateful,
    DynamicStateless,
    Controller,
    Disturbance,
}

impl ModuleKind {
    pub fn is_dynamic(&self) -> bool {
        matches!(self, ModuleKind::DynamicStateful | ModuleKind::DynamicStateless)
    }
}

/// A value a module reads from the bus.
///
/// `delayed` inputs are taken from the previous frame. Observation inputs
/// are always read from the previous frame because observations of the
/// current step only exist after the dynamics have run.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDecl {
    pub key: SignalKey,
    pub unit: Unit,
    pub delayed: bool,
}

impl InputDecl {
    pub fn new(path: &HierPath, var: &str, kind: DataKind, unit: Unit) -> Self {
        InputDecl {
            key: SignalKey::new(path.clone(), var, kind),
            unit,
            delayed: false,
        }
    }

    pub fn delayed(mut self) -> Self {
        self.delayed = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputDecl {
    pub var: String,
    pub kind: DataKind,
    pub unit: Unit,
}

impl OutputDecl {
    pub fn new(var: &str, kind: DataKind, unit: Unit) -> Self {
        OutputDecl {
            var: var.to_string(),
            kind,
            unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleHandle {
    pub path: HierPath,
    pub kind: ModuleKind,
    pub inputs: Vec<InputDecl>,
    pub outputs: Vec<OutputDecl>,
}

impl ModuleHandle {
    pub fn new(path: HierPath, kind: ModuleKind) -> Self {
        ModuleHandle {
            path,
            kind,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, decl: InputDecl) -> Self {
        self.inputs.push(decl);
        self
    }

    pub fn output(mut self, var: &str, kind: DataKind, unit: Unit) -> Self {
        self.outputs.push(OutputDecl::new(var, kind, unit));
        self
    }

    pub fn find_output(&self, var: &str, kind: DataKind) -> Option<&OutputDecl> {
        self.outputs.iter().find(|o| o.var == var && o.kind == kind)
    }
}

/// Read side of a step: the clock and this module's resolved inputs, in
/// declaration order.
pub struct StepCtx<'a> {
    pub clock: &'a SimClock,
    pub inputs: &'a [f64],
}

impl StepCtx<'_> {
    pub fn input(&self, i: usize) -> f64 {
        self.inputs[i]
    }

    pub fn dt(&self) -> f64 {
        self.clock.dt()
    }
}

/// Write side of a step; only declared outputs may be published.
pub struct Emitter<'a> {
    handle: &'a ModuleHandle,
    frame: &'a mut SignalFrame,
}

impl<'a> Emitter<'a> {
    pub(crate) fn new(handle: &'a ModuleHandle, frame: &'a mut SignalFrame) -> Self {
        Emitter { handle, frame }
    }

    /// Publishes `var` under the first declared output with that name.
    pub fn emit(&mut self, var: &str, value: f64) -> Result<(), RuntimeError> {
        let decl = self
            .handle
            .outputs
            .iter()
            .find(|o| o.var == var)
            .ok_or_else(|| RuntimeError::UndeclaredOutput {
                path: self.handle.path.clone(),
                var: var.to_string(),
            })?;
        let key = SignalKey::new(self.handle.path.clone(), var, decl.kind);
        self.frame.insert(key, value, decl.unit)
    }

    pub fn emit_kind(&mut self, var: &str, kind: DataKind, value: f64) -> Result<(), RuntimeError> {
        let decl = self
            .handle
            .find_output(var, kind)
            .ok_or_else(|| RuntimeError::UndeclaredOutput {
                path: self.handle.path.clone(),
                var: var.to_string(),
            })?;
        let key = SignalKey::new(self.handle.path.clone(), var, kind);
        self.frame.insert(key, value, decl.unit)
    }
}

/// A simulation module: dynamic model, controller or disturbance source.
pub trait Module: Send {
    fn handle(&self) -> &ModuleHandle;

    /// Restores the initial condition and publishes the values later steps
    /// may read as "previous" (delayed inputs, first observations). Called
    /// on initialize and on every reset, so it must be idempotent.
    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError>;

    /// Executes one simulation time step.
    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError>;
}
