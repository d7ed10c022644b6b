use super::ControlError;
use crate::autodiff::{descend, AdError, DescentConfig, Real, Tape};
use crate::thermal::{ThermalModelParams, ZoneInputs};

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Comfort band, °C
    pub t_lo: f64,
    pub t_hi: f64,
    /// $ per K² of band violation per step
    pub comfort_weight: f64,
    /// Constant COP of the optimizer's electrical model
    pub cop: f64,
    /// s
    pub dt: f64,
    pub iterations: usize,
    /// Descent step in units of `q_scale`.
    pub step_size: f64,
    /// Sharpness of the smooth comfort hinge, 1/K
    pub hinge_beta: f64,
    /// Width of the smooth |Q|, W
    pub abs_eps: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 96,
            t_lo: 22.0,
            t_hi: 26.0,
            comfort_weight: 1.0,
            cop: 3.5,
            dt: 900.0,
            iterations: 200,
            step_size: 1.0,
            hinge_beta: 20.0,
            abs_eps: 1.0,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = self.horizon >= 1
            && self.t_lo <= self.t_hi
            && self.comfort_weight >= 0.0
            && self.cop > 0.0
            && self.dt > 0.0
            && self.step_size > 0.0
            && self.hinge_beta > 0.0
            && self.abs_eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ControlError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcDiagnostics {
    /// Accepted descent iterations
    pub iterations: usize,
    /// True cost of the returned sequence
    pub final_cost: f64,
    pub grad_norm: f64,
    pub best_iteration: usize,
    /// Best true cost after each iteration, starting with the initial guess.
    pub best_cost_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    /// Zone thermal power per step, W (negative = cooling)
    pub q: Vec<f64>,
    pub diagnostics: MpcDiagnostics,
}

struct Problem<'a> {
    cfg: &'a MpcConfig,
    params: &'a ThermalModelParams,
    t0: f64,
    forecast: &'a [ZoneInputs],
    prices: &'a [f64],
}

impl Problem<'_> {
    fn check(&self) -> Result<(), ControlError> {
        self.cfg.validate()?;
        self.params.validate()?;
        for got in [self.forecast.len(), self.prices.len()] {
            if got != self.cfg.horizon {
                return Err(ControlError::ForecastLength {
                    got,
                    horizon: self.cfg.horizon,
                });
            }
        }
        Ok(())
    }

    /// Smoothed cost of the sequence `q` (W).
    fn smooth_cost<R: Real>(&self, q: &[R]) -> R {
        let cfg = self.cfg;
        let energy_scale = cfg.dt / 3600.0 / 1000.0 / cfg.cop;
        let theta: Vec<R> = self.params.theta.iter().map(|v| q[0].lift(*v)).collect();
        let mut t = q[0].lift(self.t0);
        let mut cost = q[0].lift(0.0);
        for (k, qk) in q.iter().enumerate() {
            let abs = *qk * (*qk / cfg.abs_eps).tanh();
            cost = cost + abs * (self.prices[k] * energy_scale);
            t = self.params.step_terms(&theta, t, &self.forecast[k], *qk, cfg.dt).next;
            let hi = (t - cfg.t_hi).max0_smooth(cfg.hinge_beta);
            let lo = (-t + cfg.t_lo).max0_smooth(cfg.hinge_beta);
            cost = cost + (hi * hi + lo * lo) * cfg.comfort_weight;
        }
        cost
    }

    fn true_cost(&self, q: &[f64]) -> f64 {
        let cfg = self.cfg;
        let energy_scale = cfg.dt / 3600.0 / 1000.0 / cfg.cop;
        let mut t = self.t0;
        let mut cost = 0.0;
        for (k, qk) in q.iter().enumerate() {
            cost += qk.abs() * self.prices[k] * energy_scale;
            t = self
                .params
                .step_terms(&self.params.theta, t, &self.forecast[k], *qk, cfg.dt)
                .next;
            let v = (t - cfg.t_hi).max(0.0) + (cfg.t_lo - t).max(0.0);
            cost += cfg.comfort_weight * v * v;
        }
        cost
    }
}

fn q_scale(bounds: (f64, f64)) -> f64 {
    bounds.0.abs().max(bounds.1.abs()).max(1.0)
}

/// Records the smoothed MPC cost on a tape whose parameter slot `k` is
/// `Q_k / q_scale`, with `q_scale` the largest bound magnitude.
pub fn mpc_cost_tape(
    cfg: &MpcConfig,
    params: &ThermalModelParams,
    t0: f64,
    forecast: &[ZoneInputs],
    prices: &[f64],
    bounds: (f64, f64),
) -> Result<Tape, ControlError> {
    let p = Problem {
        cfg,
        params,
        t0,
        forecast,
        prices,
    };
    p.check()?;
    let tape = Tape::new();
    {
        let s = q_scale(bounds);
        let u = tape.params(0, cfg.horizon);
        let q: Vec<_> = u.iter().map(|v| *v * s).collect();
        let c = p.smooth_cost(&q);
        tape.set_output(c);
    }
    Ok(tape)
}

/// Non-smoothed cost of a power sequence.
pub fn mpc_true_cost(
    cfg: &MpcConfig,
    params: &ThermalModelParams,
    t0: f64,
    forecast: &[ZoneInputs],
    prices: &[f64],
    q: &[f64],
) -> Result<f64, ControlError> {
    let p = Problem {
        cfg,
        params,
        t0,
        forecast,
        prices,
    };
    p.check()?;
    if q.len() != cfg.horizon {
        return Err(ControlError::ForecastLength {
            got: q.len(),
            horizon: cfg.horizon,
        });
    }
    Ok(p.true_cost(q))
}

/// Projected descent on the smoothed cost from `warm_start` (or zero),
/// returning the iterate with the lowest true cost.
#[allow(clippy::too_many_arguments)]
pub fn mpc_solve(
    cfg: &MpcConfig,
    params: &ThermalModelParams,
    t0: f64,
    forecast: &[ZoneInputs],
    prices: &[f64],
    bounds: (f64, f64),
    warm_start: Option<&[f64]>,
) -> Result<MpcSolution, ControlError> {
    if !(bounds.0 <= bounds.1) {
        return Err(ControlError::InvalidConfig("action bounds out of order".into()));
    }
    let tape = mpc_cost_tape(cfg, params, t0, forecast, prices, bounds)?;
    let p = Problem {
        cfg,
        params,
        t0,
        forecast,
        prices,
    };
    let s = q_scale(bounds);
    let (lo, hi) = (bounds.0 / s, bounds.1 / s);
    let x0: Vec<f64> = match warm_start {
        Some(w) if w.len() == cfg.horizon => w.iter().map(|q| q / s).collect(),
        _ => vec![0.0; cfg.horizon],
    };
    let descent = DescentConfig {
        step: cfg.step_size,
        iterations: cfg.iterations,
        keep_iterates: true,
        ..Default::default()
    };
    let report = descend(
        |x| {
            let f = tape.forward(x)?;
            Ok((f, tape.backward()?))
        },
        |x| match tape.forward(x) {
            Ok(f) => Ok(f),
            Err(AdError::NonFinite { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        },
        |x| x.iter_mut().for_each(|v| *v = v.clamp(lo, hi)),
        &x0,
        &descent,
    )
    .map_err(|e| match e {
        AdError::NonFiniteLoss => ControlError::NonFiniteCost,
        e => ControlError::Ad(e),
    })?;
    let mut best = (f64::INFINITY, 0usize);
    let mut history = Vec::with_capacity(report.iterates.len());
    for (i, x) in report.iterates.iter().enumerate() {
        let q: Vec<f64> = x.iter().map(|u| u * s).collect();
        let c = p.true_cost(&q);
        if !c.is_finite() {
            return Err(ControlError::NonFiniteCost);
        }
        if c < best.0 {
            best = (c, i);
        }
        history.push(best.0);
    }
    let q = report.iterates[best.1].iter().map(|u| u * s).collect();
    Ok(MpcSolution {
        q,
        diagnostics: MpcDiagnostics {
            iterations: report.iterates.len() - 1,
            final_cost: best.0,
            grad_norm: report.grad_norm,
            best_iteration: best.1,
            best_cost_history: history,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::RcZoneSpec;

    fn model() -> ThermalModelParams {
        let mut rc = RcZoneSpec::new(1e7, 0.004).unwrap();
        rc.solar_aperture = 2.0;
        ThermalModelParams::from_rc(&rc, true)
    }

    fn hot(h: usize) -> Vec<ZoneInputs> {
        vec![
            ZoneInputs {
                t_out: 34.0,
                ghi: 600.0,
                ..Default::default()
            };
            h
        ]
    }

    #[test]
    fn wide_band_stays_off() {
        let cfg = MpcConfig {
            horizon: 8,
            t_lo: 0.0,
            t_hi: 50.0,
            ..Default::default()
        };
        let warm = vec![-2000.0; 8];
        let sol = mpc_solve(&cfg, &model(), 24.0, &hot(8), &[0.2; 8], (-5000.0, 0.0), Some(&warm)).unwrap();
        assert!(sol.q.iter().all(|q| q.abs() < 1.0), "{:?}", sol.q);
        assert!(sol.diagnostics.best_cost_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn tight_band_cools() {
        let cfg = MpcConfig {
            horizon: 8,
            t_lo: 22.0,
            t_hi: 24.5,
            comfort_weight: 10.0,
            ..Default::default()
        };
        let sol = mpc_solve(&cfg, &model(), 24.0, &hot(8), &[0.2; 8], (-5000.0, 0.0), None).unwrap();
        assert!(sol.q.iter().any(|q| *q < -100.0));
        let zero = mpc_true_cost(&cfg, &model(), 24.0, &hot(8), &[0.2; 8], &[0.0; 8]).unwrap();
        assert!(sol.diagnostics.final_cost < zero);
    }

    #[test]
    fn length_mismatch() {
        let cfg = MpcConfig {
            horizon: 4,
            ..Default::default()
        };
        assert!(matches!(
            mpc_solve(&cfg, &model(), 24.0, &hot(3), &[0.2; 4], (-1.0, 0.0), None),
            Err(ControlError::ForecastLength { .. })
        ));
    }

    #[test]
    fn cost_gradient_matches_fd() {
        let cfg = MpcConfig {
            horizon: 6,
            t_hi: 24.2,
            ..Default::default()
        };
        let tape = mpc_cost_tape(
            &cfg,
            &model(),
            24.0,
            &hot(6),
            &[0.1, 0.2, 0.3, 0.3, 0.2, 0.1],
            (-5000.0, 0.0),
        )
        .unwrap();
        let u = [-0.1, -0.3, -0.2, -0.5, -0.05, -0.4];
        assert!(tape.grad_check(&u, 1e-6).unwrap() < 1e-5);
    }
}
