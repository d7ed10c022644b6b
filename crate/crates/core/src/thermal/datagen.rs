use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RcZoneSpec, ThermalError, ThermalTrace, ZoneInputs};
use crate::disturbance::{synth_occupancy, synth_weather, DayParams, OccupancyParams};
use crate::runtime::SimClock;

/// How the reference zone's HVAC is driven while generating a trace.
#[derive(Debug, Clone, PartialEq)]
pub enum HvacPolicy {
    Off,
    /// Full cooling above `setpoint + band/2`, off below `setpoint − band/2`.
    Deadband {
        setpoint: f64,
        band: f64,
        q_max: f64,
    },
    /// Always cooling: `gain·(T − setpoint)` clamped to `[q_min, q_max]`.
    Proportional {
        setpoint: f64,
        gain: f64,
        q_min: f64,
        q_max: f64,
    },
    /// `inner` until step `step`, off afterwards.
    OffAfter {
        step: usize,
        inner: Box<HvacPolicy>,
    },
}

impl HvacPolicy {
    fn power(&self, t: usize, t_zone: f64, cooling: &mut bool) -> f64 {
        match self {
            HvacPolicy::Off => 0.0,
            HvacPolicy::Deadband { setpoint, band, q_max } => {
                if t_zone > setpoint + band / 2.0 {
                    *cooling = true;
                } else if t_zone < setpoint - band / 2.0 {
                    *cooling = false;
                }
                if *cooling {
                    -q_max
                } else {
                    0.0
                }
            }
            HvacPolicy::Proportional {
                setpoint,
                gain,
                q_min,
                q_max,
            } => -(gain * (t_zone - setpoint)).clamp(*q_min, *q_max),
            HvacPolicy::OffAfter { step, inner } => {
                if t < *step {
                    inner.power(t, t_zone, cooling)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceGenConfig {
    pub spec: RcZoneSpec,
    pub start: NaiveDateTime,
    pub dt: f64,
    pub steps: usize,
    pub t0: f64,
    pub weather: DayParams,
    /// Daily mean temperature is drawn uniformly within ± this, K.
    pub t_mean_jitter: f64,
    /// Daily irradiance peak is scaled by a factor drawn from `[1 − x, 1]`.
    pub cloud_jitter: f64,
    pub occupancy: OccupancyParams,
    pub policy: HvacPolicy,
    pub seed: u64,
}

impl TraceGenConfig {
    pub fn summer(spec: RcZoneSpec, start: NaiveDateTime, days: usize, policy: HvacPolicy, seed: u64) -> Self {
        TraceGenConfig {
            spec,
            start,
            dt: 900.0,
            steps: days * 96,
            t0: 26.0,
            weather: DayParams::default(),
            t_mean_jitter: 3.0,
            cloud_jitter: 0.6,
            occupancy: OccupancyParams {
                seed,
                ..Default::default()
            },
            policy,
            seed,
        }
    }
}

/// Simulates the RC zone under synthetic weather and occupancy. The trace
/// holds `steps + 1` rows; the HVAC power in the last row is zero.
pub fn generate_rc_trace(cfg: &TraceGenConfig) -> Result<ThermalTrace, ThermalError> {
    cfg.spec.validate()?;
    cfg.weather
        .validate()
        .map_err(|e| ThermalError::InvalidSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clock = SimClock::new(cfg.start, cfg.dt);
    let steps_per_day = clock.steps_per_day().unwrap_or(usize::MAX);
    let mut day = cfg.weather;
    let mut tr = ThermalTrace {
        dt: cfg.dt,
        ..Default::default()
    };
    let mut t_zone = cfg.t0;
    let mut cooling = false;
    for t in 0..=cfg.steps {
        if t % steps_per_day == 0 {
            day.t_mean = cfg.weather.t_mean + rng.random_range(-1.0..=1.0) * cfg.t_mean_jitter;
            day.ghi_peak = cfg.weather.ghi_peak * (1.0 - rng.random::<f64>() * cfg.cloud_jitter);
        }
        clock.t = t as u64;
        let w = synth_weather(&day, clock.hour_of_day());
        let occ = synth_occupancy(&cfg.occupancy, &clock);
        let d = ZoneInputs {
            t_out: w.t_out,
            ghi: w.ghi,
            occupancy: occ.count,
            activity: occ.active_count() as f64,
        };
        let q = if t < cfg.steps {
            cfg.policy.power(t, t_zone, &mut cooling)
        } else {
            0.0
        };
        tr.t_zone.push(t_zone);
        tr.t_out.push(d.t_out);
        tr.ghi.push(d.ghi);
        tr.occupancy.push(d.occupancy);
        tr.activity.push(d.activity);
        tr.q_hvac.push(q);
        t_zone = cfg.spec.step(t_zone, &d, q, cfg.dt);
    }
    tr.validate()?;
    Ok(tr)
}
