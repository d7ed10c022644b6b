//! Zone thermal dynamics: an RC reference simulator and trainable
//! physics-structured models built on the gradient engine.

mod datagen;
mod io;
mod model;
mod rc;
mod train;

pub use datagen::{generate_rc_trace, HvacPolicy, TraceGenConfig};
pub use io::{read_model, read_trace_csv, write_model, write_trace_csv};
pub use model::{
    modnn_step, rollout_predict, HeadKind, ModelKind, MultiZoneModel, Normalization, StepTerms, ThermalModelParams,
    MLP_WIDTH, RECURRENT_WIDTH,
};
pub use rc::{rc_ground_truth_step, rc_rollout, RcZoneSpec};
pub use train::{
    physics_violation_metric, rollout_loss_tape, rollout_rmse, train, train_from, TrainConfig, TrainReport,
    ViolationReport,
};

use thiserror::Error;

use crate::autodiff::AdError;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("invalid zone spec: {0}")]
    InvalidSpec(String),
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("horizon length mismatch: {disturbances} disturbance steps vs {actions} HVAC steps")]
    LengthMismatch { disturbances: usize, actions: usize },
    #[error("trace of {len} steps is too short; need at least {needed}")]
    TraceTooShort { len: usize, needed: usize },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("non-finite training loss")]
    NonFiniteLoss,
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("model file line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Exogenous inputs to a zone for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZoneInputs {
    /// °C
    pub t_out: f64,
    /// W/m²
    pub ghi: f64,
    /// occupant count
    pub occupancy: f64,
    /// number of active appliance/activity flags
    pub activity: f64,
}

/// Aligned fixed-step series. `q_hvac` is negative for cooling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThermalTrace {
    pub dt: f64,
    pub t_zone: Vec<f64>,
    pub t_out: Vec<f64>,
    pub ghi: Vec<f64>,
    pub occupancy: Vec<f64>,
    pub activity: Vec<f64>,
    pub q_hvac: Vec<f64>,
}

impl ThermalTrace {
    pub fn len(&self) -> usize {
        self.t_zone.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_zone.is_empty()
    }

    /// Rows `[0, at)` and `[at, len)`.
    pub fn split_at(&self, at: usize) -> (ThermalTrace, ThermalTrace) {
        let at = at.min(self.len());
        let part = |r: std::ops::Range<usize>| ThermalTrace {
            dt: self.dt,
            t_zone: self.t_zone[r.clone()].to_vec(),
            t_out: self.t_out[r.clone()].to_vec(),
            ghi: self.ghi[r.clone()].to_vec(),
            occupancy: self.occupancy[r.clone()].to_vec(),
            activity: self.activity[r.clone()].to_vec(),
            q_hvac: self.q_hvac[r].to_vec(),
        };
        (part(0..at), part(at..self.len()))
    }

    pub fn inputs(&self, i: usize) -> ZoneInputs {
        ZoneInputs {
            t_out: self.t_out[i],
            ghi: self.ghi[i],
            occupancy: self.occupancy[i],
            activity: self.activity[i],
        }
    }

    pub fn validate(&self) -> Result<(), ThermalError> {
        let n = self.len();
        let cols = [&self.t_out, &self.ghi, &self.occupancy, &self.activity, &self.q_hvac];
        if cols.iter().any(|c| c.len() != n) {
            return Err(ThermalError::InvalidTrace("columns differ in length".into()));
        }
        if !(self.dt > 0.0) {
            return Err(ThermalError::InvalidTrace("dt must be positive".into()));
        }
        for (i, (z, o)) in self.t_zone.iter().zip(&self.t_out).enumerate() {
            if !((-50.0..=60.0).contains(z) && (-50.0..=60.0).contains(o)) {
                return Err(ThermalError::InvalidTrace(format!(
                    "row {i}: temperature outside [-50, 60] °C"
                )));
            }
        }
        let nonneg = [&self.ghi, &self.occupancy, &self.activity];
        if nonneg.iter().any(|c| c.iter().any(|v| !(*v >= 0.0))) {
            return Err(ThermalError::InvalidTrace("gains must be nonnegative".into()));
        }
        if self.q_hvac.iter().any(|q| !q.is_finite()) {
            return Err(ThermalError::InvalidTrace("non-finite HVAC power".into()));
        }
        Ok(())
    }

    /// Rows `range` as a new trace.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ThermalTrace {
        ThermalTrace {
            dt: self.dt,
            t_zone: self.t_zone[range.clone()].to_vec(),
            t_out: self.t_out[range.clone()].to_vec(),
            ghi: self.ghi[range.clone()].to_vec(),
            occupancy: self.occupancy[range.clone()].to_vec(),
            activity: self.activity[range.clone()].to_vec(),
            q_hvac: self.q_hvac[range].to_vec(),
        }
    }
}
