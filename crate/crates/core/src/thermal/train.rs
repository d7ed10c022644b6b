use std::time::{Duration, Instant};

use super::{ModelKind, Normalization, ThermalError, ThermalModelParams, ThermalTrace};
use crate::autodiff::{descend, AdError, DescentConfig, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: ModelKind,
    /// Rollout length H of each training window.
    pub horizon: usize,
    /// Descent iterations over the full set of windows.
    pub epochs: usize,
    pub step_size: f64,
    /// λ weighting the sign-violation penalty.
    pub physics_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ModelKind::Modnn {
                head: super::HeadKind::Affine,
                projected: true,
            },
            horizon: 96,
            epochs: 2000,
            step_size: 0.05,
            physics_weight: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: ThermalModelParams,
    /// Initial loss followed by one value per epoch; non-increasing.
    pub loss_history: Vec<f64>,
    pub wall_time: Duration,
}

/// Records the mean squared multi-step rollout error (plus `λ·penalty`)
/// over non-overlapping windows of `horizon` steps. Parameter slot `i`
/// is `params.theta[i]`.
pub fn rollout_loss_tape(
    tape: &Tape,
    params: &ThermalModelParams,
    trace: &ThermalTrace,
    horizon: usize,
    physics_weight: f64,
) -> Result<(), ThermalError> {
    let needed = horizon + 1;
    if horizon == 0 || trace.len() < needed {
        return Err(ThermalError::TraceTooShort {
            len: trace.len(),
            needed,
        });
    }
    let theta = tape.params(0, params.kind.param_count());
    let windows = (trace.len() - 1) / horizon;
    let mut sq = tape.constant(0.0);
    let mut pen = tape.constant(0.0);
    for w in 0..windows {
        let start = w * horizon;
        let mut t = tape.constant(trace.t_zone[start]);
        for i in start..start + horizon {
            let q = tape.constant(trace.q_hvac[i]);
            let terms = params.step_terms(&theta, t, &trace.inputs(i), q, trace.dt);
            t = terms.next;
            let e = t - trace.t_zone[i + 1];
            sq = sq + e * e;
            if physics_weight > 0.0 {
                pen = pen + terms.penalty;
            }
        }
    }
    let n = (windows * horizon) as f64;
    let loss = sq / n + pen * (physics_weight / n);
    tape.set_output(loss);
    Ok(())
}

/// Trains from freshly initialised parameters with scales fitted to `trace`.
pub fn train(trace: &ThermalTrace, config: &TrainConfig) -> Result<TrainReport, ThermalError> {
    let init = ThermalModelParams::init(config.kind, Normalization::from_trace(trace), config.seed);
    train_from(init, trace, config)
}

/// Full-batch descent with halving backoff from `initial`.
pub fn train_from(
    initial: ThermalModelParams,
    trace: &ThermalTrace,
    config: &TrainConfig,
) -> Result<TrainReport, ThermalError> {
    let started = Instant::now();
    trace.validate()?;
    initial.validate()?;
    let needed = 2 * config.horizon;
    if trace.len() < needed {
        return Err(ThermalError::TraceTooShort {
            len: trace.len(),
            needed,
        });
    }
    let tape = Tape::new();
    rollout_loss_tape(&tape, &initial, trace, config.horizon, config.physics_weight)?;
    let cfg = DescentConfig {
        step: config.step_size,
        iterations: config.epochs,
        ..Default::default()
    };
    let report = descend(
        |x| {
            let f = tape.forward(x)?;
            Ok((f, tape.backward()?))
        },
        |x| match tape.forward(x) {
            Ok(f) => Ok(f),
            // an overflowing trial step is treated as a loss increase
            Err(AdError::NonFinite { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        },
        |_| {},
        &initial.theta,
        &cfg,
    )
    .map_err(|e| match e {
        AdError::NonFiniteLoss | AdError::NonFinite { .. } => ThermalError::NonFiniteLoss,
        e => ThermalError::Ad(e),
    })?;
    let params = ThermalModelParams {
        theta: report.x,
        ..initial
    };
    Ok(TrainReport {
        params,
        loss_history: report.history,
        wall_time: started.elapsed(),
    })
}

/// RMSE of `horizon`-step rollouts from the observed temperature at the start
/// of each non-overlapping window.
pub fn rollout_rmse(params: &ThermalModelParams, trace: &ThermalTrace, horizon: usize) -> Result<f64, ThermalError> {
    if horizon == 0 || trace.len() < horizon + 1 {
        return Err(ThermalError::TraceTooShort {
            len: trace.len(),
            needed: horizon + 1,
        });
    }
    params.validate()?;
    let windows = (trace.len() - 1) / horizon;
    let mut sq = 0.0;
    for w in 0..windows {
        let start = w * horizon;
        let mut t = trace.t_zone[start];
        for i in start..start + horizon {
            t = params
                .step_terms(&params.theta, t, &trace.inputs(i), trace.q_hvac[i], trace.dt)
                .next;
            sq += (t - trace.t_zone[i + 1]).powi(2);
        }
    }
    Ok((sq / (windows * horizon) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationReport {
    pub fraction: f64,
    /// Steps where HVAC is off, outdoor is warmer than the zone and gains are nonnegative.
    pub qualifying: usize,
    pub violations: usize,
}

/// Share of qualifying steps where the one-step prediction cools the zone
/// even though every heat flow points inward.
pub fn physics_violation_metric(
    params: &ThermalModelParams,
    trace: &ThermalTrace,
) -> Result<ViolationReport, ThermalError> {
    params.validate()?;
    let mut qualifying = 0;
    let mut violations = 0;
    for i in 0..trace.len() {
        let d = trace.inputs(i);
        let tz = trace.t_zone[i];
        let gains_ok = d.ghi >= 0.0 && d.occupancy >= 0.0 && d.activity >= 0.0;
        if trace.q_hvac[i] != 0.0 || d.t_out <= tz || !gains_ok {
            continue;
        }
        qualifying += 1;
        let next = params.step_terms(&params.theta, tz, &d, 0.0, trace.dt).next;
        if next < tz {
            violations += 1;
        }
    }
    let fraction = if qualifying == 0 {
        0.0
    } else {
        violations as f64 / qualifying as f64
    };
    Ok(ViolationReport {
        fraction,
        qualifying,
        violations,
    })
}
