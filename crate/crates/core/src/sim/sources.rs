use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clock_at, SimError};
use crate::disturbance::{
    synth_occupancy, synth_weather, tou_price_at, DayParams, OccupancyParams, OccupancyRecord, PriceSchedule,
    WeatherRecord,
};
use crate::runtime::{
    DataKind, Emitter, HierPath, Module, ModuleError, ModuleHandle, ModuleKind, SimClock, StepCtx, Unit,
};

/// Weather by step index: a seeded daily generator or a table aligned
/// with the clock start.
#[derive(Debug, Clone)]
pub enum WeatherSource {
    Synthetic {
        day: DayParams,
        /// Uniform per-day shift of the mean temperature, ±K
        t_mean_jitter: f64,
        seed: u64,
    },
    Table(Vec<WeatherRecord>),
}

impl WeatherSource {
    pub fn at(&self, clock: &SimClock, t: u64) -> Result<WeatherRecord, SimError> {
        match self {
            WeatherSource::Synthetic {
                day,
                t_mean_jitter,
                seed,
            } => {
                let c = clock_at(clock, t);
                let mut p = *day;
                if *t_mean_jitter > 0.0 {
                    let d = c.wall_time().date().and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp() / 86_400;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ d as u64);
                    p.t_mean += rng.random_range(-1.0..=1.0) * t_mean_jitter;
                }
                Ok(synth_weather(&p, c.hour_of_day()))
            }
            WeatherSource::Table(rows) => rows.get(t as usize).copied().ok_or(SimError::OutOfRange {
                what: "weather table",
                t,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub enum OccupancySource {
    Synthetic(OccupancyParams),
    Table(Vec<OccupancyRecord>),
}

impl OccupancySource {
    pub fn at(&self, clock: &SimClock, t: u64) -> Result<OccupancyRecord, SimError> {
        match self {
            OccupancySource::Synthetic(p) => Ok(synth_occupancy(p, &clock_at(clock, t))),
            OccupancySource::Table(rows) => rows.get(t as usize).cloned().ok_or(SimError::OutOfRange {
                what: "occupancy table",
                t,
            }),
        }
    }

    pub fn activity_names(&self) -> Vec<String> {
        match self {
            OccupancySource::Synthetic(p) => p.activities.iter().map(|a| a.name.clone()).collect(),
            OccupancySource::Table(rows) => rows
                .first()
                .map(|r| r.activities.iter().map(|(n, _)| n.clone()).collect())
                .unwrap_or_default(),
        }
    }
}

/// Price at step `t`; series shorter than a forecast window hold their
/// last value.
pub(crate) fn price_forecast_at(schedule: &PriceSchedule, clock: &SimClock, t: u64) -> f64 {
    match schedule {
        PriceSchedule::Series(v) => v[(t as usize).min(v.len().saturating_sub(1))],
        s => tou_price_at(s, &clock_at(clock, t)).unwrap_or(0.0),
    }
}

pub struct WeatherModule {
    handle: ModuleHandle,
    source: WeatherSource,
}

impl WeatherModule {
    pub fn new(path: HierPath, source: WeatherSource) -> Self {
        let handle = ModuleHandle::new(path, ModuleKind::Disturbance)
            .output("t_out", DataKind::Disturbance, Unit::Celsius)
            .output("ghi", DataKind::Disturbance, Unit::WattPerM2)
            .output("t_wb", DataKind::Disturbance, Unit::Celsius);
        WeatherModule { handle, source }
    }
}

impl Module for WeatherModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let w = self.source.at(ctx.clock, ctx.clock.t)?;
        w.validate().map_err(SimError::Invalid)?;
        out.emit("t_out", w.t_out)?;
        out.emit("ghi", w.ghi)?;
        // without a humidity source the dry-bulb is the wet-bulb upper bound
        out.emit("t_wb", w.t_wb.unwrap_or(w.t_out))?;
        Ok(())
    }
}

pub struct PriceModule {
    handle: ModuleHandle,
    schedule: PriceSchedule,
}

impl PriceModule {
    pub fn new(path: HierPath, schedule: PriceSchedule) -> Self {
        let handle =
            ModuleHandle::new(path, ModuleKind::Disturbance).output("price", DataKind::Disturbance, Unit::UsdPerKwh);
        PriceModule { handle, schedule }
    }
}

impl Module for PriceModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        out.emit("price", tou_price_at(&self.schedule, ctx.clock)?)?;
        Ok(())
    }
}

/// Publishes `occupants`, `activity` (active count), `occupied`,
/// `comfort_offset` and one `act_<name>` flag per activity.
pub struct OccupancyModule {
    handle: ModuleHandle,
    source: OccupancySource,
    names: Vec<String>,
}

impl OccupancyModule {
    pub fn new(path: HierPath, source: OccupancySource) -> Self {
        let names = source.activity_names();
        let mut handle = ModuleHandle::new(path, ModuleKind::Disturbance)
            .output("occupants", DataKind::Disturbance, Unit::Count)
            .output("activity", DataKind::Disturbance, Unit::Count)
            .output("occupied", DataKind::Disturbance, Unit::Flag)
            .output("comfort_offset", DataKind::Disturbance, Unit::Kelvin);
        for n in &names {
            handle = handle.output(&format!("act_{n}"), DataKind::Disturbance, Unit::Flag);
        }
        OccupancyModule { handle, source, names }
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl Module for OccupancyModule {
    fn handle(&self) -> &ModuleHandle {
        &self.handle
    }

    fn initialize(&mut self, _out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        Ok(())
    }

    fn step(&mut self, ctx: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        let r = self.source.at(ctx.clock, ctx.clock.t)?;
        out.emit("occupants", r.count)?;
        out.emit("activity", r.active_count() as f64)?;
        out.emit("occupied", flag(r.occupied))?;
        out.emit("comfort_offset", r.offset_k)?;
        for n in &self.names {
            out.emit(&format!("act_{n}"), flag(r.activity(n).unwrap_or(false)))?;
        }
        Ok(())
    }
}
