use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::module::Emitter;
use super::wiring::{analyze, ActionEdge, Plan, Violation};
use super::{DataKind, HierPath, Module, ModuleHandle, RuntimeError, SignalFrame, SignalKey, SimClock, StepCtx, Unit};

/// How states of one variable combine into an observation at an ancestor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Sum,
    Mean,
}

pub struct Environment {
    clock: SimClock,
    modules: Vec<Box<dyn Module>>,
    paths: HashMap<HierPath, usize>,
    aggregation: BTreeMap<String, AggFn>,
    plan: Option<Plan>,
    previous: SignalFrame,
}

impl Environment {
    pub fn new(clock: SimClock) -> Self {
        Environment {
            clock,
            modules: Vec::new(),
            paths: HashMap::new(),
            aggregation: BTreeMap::new(),
            plan: None,
            previous: SignalFrame::new(0),
        }
    }

    /// Variables listed here are aggregated into observations at every
    /// ancestor path; all other states are only mirrored at their own path.
    pub fn set_aggregation(&mut self, var: &str, f: AggFn) {
        self.aggregation.insert(var.to_string(), f);
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn is_initialized(&self) -> bool {
        self.plan.is_some()
    }

    pub fn register_module(&mut self, module: Box<dyn Module>) -> Result<(), RuntimeError> {
        if self.plan.is_some() {
            return Err(RuntimeError::AlreadyInitialized);
        }
        let path = module.handle().path.clone();
        if self.paths.contains_key(&path) {
            return Err(RuntimeError::DuplicatePath(path));
        }
        self.paths.insert(path, self.modules.len());
        self.modules.push(module);
        Ok(())
    }

    pub fn handles(&self) -> Vec<&ModuleHandle> {
        self.modules.iter().map(|m| m.handle()).collect()
    }

    pub fn handle(&self, path: &HierPath) -> Option<&ModuleHandle> {
        self.paths.get(path).map(|&i| self.modules[i].handle())
    }

    /// Every wiring violation; empty means the graph is valid.
    pub fn validate_wiring(&self) -> Vec<Violation> {
        analyze(&self.handles(), &self.aggregation).0
    }

    /// Action edges of the current module graph, for replay checks.
    pub fn action_edges(&self) -> Vec<ActionEdge> {
        analyze(&self.handles(), &self.aggregation).1.action_edges
    }

    /// Validates wiring, fixes the execution order and publishes initial values.
    pub fn initialize(&mut self) -> Result<(), RuntimeError> {
        let (violations, plan) = analyze(&self.handles(), &self.aggregation);
        if let Some(Violation::UnresolvedInput { consumer, key }) = violations
            .iter()
            .find(|v| matches!(v, Violation::UnresolvedInput { .. }))
        {
            return Err(RuntimeError::UnresolvedInput {
                consumer: consumer.clone(),
                key: key.to_string(),
            });
        }
        if !violations.is_empty() {
            return Err(RuntimeError::Wiring(violations));
        }
        self.plan = Some(plan);
        self.reset()
    }

    /// Returns every module to its post-initialize condition and t to 0.
    pub fn reset(&mut self) -> Result<(), RuntimeError> {
        if self.plan.is_none() {
            return self.initialize();
        }
        self.clock.t = 0;
        let mut frame = SignalFrame::new(0);
        for m in self.modules.iter_mut() {
            let handle = m.handle().clone();
            let mut out = Emitter::new(&handle, &mut frame);
            m.initialize(&mut out).map_err(|source| RuntimeError::Module {
                path: handle.path.clone(),
                step: 0,
                source,
            })?;
        }
        self.observe(&mut frame)?;
        self.previous = frame;
        Ok(())
    }

    /// The most recent completed frame (the initial frame before any step).
    pub fn latest(&self) -> &SignalFrame {
        &self.previous
    }

    /// Runs one step: disturbances, controllers top-down, dynamics, then
    /// observation aggregation. Returns the completed frame.
    pub fn step(&mut self) -> Result<SignalFrame, RuntimeError> {
        if self.plan.is_none() {
            self.initialize()?;
        }
        let plan = self.plan.take().expect("plan present");
        let result = self.run_plan(&plan);
        self.plan = Some(plan);
        let frame = result?;
        self.previous = frame.clone();
        self.clock.t += 1;
        Ok(frame)
    }

    fn run_plan(&mut self, plan: &Plan) -> Result<SignalFrame, RuntimeError> {
        let mut frame = SignalFrame::new(self.clock.t + 1);
        let order = plan.disturbances.iter().chain(&plan.controllers).chain(&plan.dynamics);
        let mut inputs = Vec::new();
        for &i in order {
            let handle = self.modules[i].handle().clone();
            inputs.clear();
            for (decl, &delayed) in handle.inputs.iter().zip(&plan.delayed[i]) {
                let src = if delayed { &self.previous } else { &frame };
                let v = src.value(&decl.key).ok_or_else(|| RuntimeError::UnresolvedInput {
                    consumer: handle.path.clone(),
                    key: decl.key.to_string(),
                })?;
                inputs.push(v);
            }
            let ctx = StepCtx {
                clock: &self.clock,
                inputs: &inputs,
            };
            let mut out = Emitter::new(&handle, &mut frame);
            let step = self.clock.t;
            self.modules[i]
                .step(&ctx, &mut out)
                .map_err(|source| match source.downcast::<RuntimeError>() {
                    Ok(e) => *e,
                    Err(source) => RuntimeError::Module {
                        path: handle.path.clone(),
                        step,
                        source,
                    },
                })?;
        }
        self.observe(&mut frame)?;
        Ok(frame)
    }

    /// Mirrors every state as an observation at its own path and, for
    /// variables with an aggregation rule, at every ancestor.
    fn observe(&self, frame: &mut SignalFrame) -> Result<(), RuntimeError> {
        let mut acc: BTreeMap<(HierPath, String), (f64, usize, Unit)> = BTreeMap::new();
        let mut direct: BTreeSet<(HierPath, String)> = BTreeSet::new();
        for (k, _) in frame.iter() {
            if k.kind == DataKind::Observation {
                direct.insert((k.path.clone(), k.var.clone()));
            }
        }
        for (k, s) in frame.iter() {
            if k.kind != DataKind::State {
                continue;
            }
            let targets = if self.aggregation.contains_key(&k.var) {
                k.path.ancestors_inclusive()
            } else {
                vec![k.path.clone()]
            };
            for p in targets {
                let e = acc.entry((p, k.var.clone())).or_insert((0.0, 0, s.unit));
                e.0 += s.value;
                e.1 += 1;
            }
        }
        for ((path, var), (sum, n, unit)) in acc {
            if direct.contains(&(path.clone(), var.clone())) {
                continue;
            }
            let value = match self.aggregation.get(&var) {
                Some(AggFn::Mean) => sum / n as f64,
                _ => sum,
            };
            frame.insert(SignalKey::new(path, var, DataKind::Observation), value, unit)?;
        }
        Ok(())
    }

    /// Sum (or configured mean) of matching entries in the latest frame.
    pub fn aggregate(&self, prefix: &HierPath, var: &str, kind: DataKind) -> Result<f64, RuntimeError> {
        let vals: Vec<f64> = self
            .previous
            .matching(prefix, var, kind)
            .map(|(_, s)| s.value)
            .collect();
        if vals.is_empty() {
            return Err(RuntimeError::NoMatch {
                prefix: prefix.clone(),
                var: var.to_string(),
                kind,
            });
        }
        let sum: f64 = vals.iter().sum();
        Ok(match self.aggregation.get(var) {
            Some(AggFn::Mean) => sum / vals.len() as f64,
            _ => sum,
        })
    }

    /// Splits `total` across the matching entries under `prefix`, in path order.
    pub fn disaggregate(
        &self,
        prefix: &HierPath,
        var: &str,
        kind: DataKind,
        total: f64,
        weights: &[f64],
    ) -> Result<Vec<(HierPath, f64)>, RuntimeError> {
        let children: Vec<HierPath> = self
            .previous
            .matching(prefix, var, kind)
            .map(|(k, _)| k.path.clone())
            .collect();
        if children.len() != weights.len() {
            return Err(RuntimeError::WeightCount {
                expected: children.len(),
                got: weights.len(),
            });
        }
        let shares = disaggregate(total, weights)?;
        Ok(children.into_iter().zip(shares).collect())
    }
}

/// `total·wᵢ/Σw` for each weight.
pub fn disaggregate(total: f64, weights: &[f64]) -> Result<Vec<f64>, RuntimeError> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(RuntimeError::BadWeights);
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(RuntimeError::BadWeights);
    }
    Ok(weights.iter().map(|w| total * w / sum).collect())
}
