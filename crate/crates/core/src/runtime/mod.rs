//! Hierarchical module registry, signal bus and the step loop.
//!
//! An [`Environment`] owns a set of [`Module`]s addressed by [`HierPath`].
//! Each call to [`Environment::step`] runs disturbances, then controllers
//! from the cluster level down, then dynamic modules in dependency order,
//! and finally aggregates states into observations bottom-up.

mod clock;
mod env;
mod module;
mod path;
mod signal;
mod wiring;

pub use clock::SimClock;
pub use env::{disaggregate, AggFn, Environment};
pub use module::{Emitter, InputDecl, Module, ModuleError, ModuleHandle, ModuleKind, OutputDecl, StepCtx};
pub use path::{Domain, HierLevel, HierPath};
pub use signal::{celsius_to_kelvin, kelvin_to_celsius, DataKind, Signal, SignalFrame, SignalKey, Unit};
pub use wiring::{ActionEdge, Violation};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("malformed path: {0}")]
    MalformedPath(String),
    #[error("unknown data kind '{0}'")]
    UnknownKind(String),
    #[error("duplicate module path {0}")]
    DuplicatePath(HierPath),
    #[error("duplicate bus key {0}")]
    DuplicateKey(String),
    #[error("environment already initialized; registration is closed")]
    AlreadyInitialized,
    #[error("unresolved input {key} required by {consumer}")]
    UnresolvedInput { consumer: HierPath, key: String },
    #[error("non-finite value for {key} produced by {path}")]
    NonFinite { path: HierPath, key: String },
    #[error("module {path} did not declare output '{var}'")]
    UndeclaredOutput { path: HierPath, var: String },
    #[error("wiring invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Wiring(Vec<Violation>),
    #[error("no entries match {var}[{kind}] under {prefix}")]
    NoMatch {
        prefix: HierPath,
        var: String,
        kind: DataKind,
    },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be nonnegative with a positive sum")]
    BadWeights,
    #[error("module {path} failed at step {step}: {source}")]
    Module {
        path: HierPath,
        step: u64,
        #[source]
        source: ModuleError,
    },
}
