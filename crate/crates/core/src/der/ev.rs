use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};

use super::{battery_step, BatterySpec, BatteryState, DerError};
use crate::runtime::SimClock;

/// One stay at the charger. `trip_energy` is consumed by the drive that
/// ends at `arrival`; `required_soc` is the target at `departure`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvTrip {
    pub arrival: NaiveDateTime,
    pub departure: NaiveDateTime,
    pub trip_energy: f64,
    pub required_soc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvSpec {
    pub battery: BatterySpec,
    /// Allow discharging to the bus.
    pub v2g: bool,
    pub schedule: Vec<EvTrip>,
}

impl EvSpec {
    pub fn validate(&self) -> Result<(), DerError> {
        self.battery.validate()?;
        for (i, w) in self.schedule.iter().enumerate() {
            if w.departure <= w.arrival || w.trip_energy < 0.0 || !(0.0..=1.0).contains(&w.required_soc) {
                return Err(DerError::Schedule {
                    row: i + 1,
                    msg: "need arrival < departure, trip >= 0, soc in [0, 1]".into(),
                });
            }
            if let Some(next) = self.schedule.get(i + 1) {
                if next.arrival < w.departure {
                    return Err(DerError::Schedule {
                        row: i + 2,
                        msg: "availability intervals overlap or are unsorted".into(),
                    });
                }
            }
        }
        Ok(())
    }

    fn interval_at(&self, t: NaiveDateTime) -> Option<usize> {
        self.schedule.iter().position(|w| w.arrival <= t && t < w.departure)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvState {
    pub battery: BatteryState,
    /// Last interval whose arrival has been processed.
    pub entered: Option<usize>,
    departed: Option<usize>,
}

impl EvState {
    /// A stay already in progress at `clock` counts as arrived.
    pub fn new(spec: &EvSpec, soc: f64, clock: &SimClock) -> Self {
        let at = spec.interval_at(clock.wall_time());
        EvState {
            battery: BatteryState { soc, soh: 1.0 },
            entered: at,
            departed: at.and_then(|i| i.checked_sub(1)),
        }
    }

    pub fn available(&self, spec: &EvSpec, clock: &SimClock) -> bool {
        spec.interval_at(clock.wall_time()).is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvEvent {
    Arrived {
        interval: usize,
        trip_energy: f64,
    },
    /// The trip needed more energy than was stored above `soc_min`.
    TripUnderflow {
        interval: usize,
        shortfall: f64,
    },
    Departed {
        interval: usize,
        soc: f64,
    },
    /// Left below the required SOC.
    DepartureShort {
        interval: usize,
        soc: f64,
        required: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvStep {
    pub state: EvState,
    pub p_actual: f64,
    pub p_loss: f64,
    /// kWh into the cells this step
    pub cell_energy: f64,
    /// kWh removed by trips this step
    pub trip_energy: f64,
    pub events: Vec<EvEvent>,
}

/// Departure bookkeeping and arrival trip decrement happen before any
/// charging in the step that starts at or after the boundary.
pub fn ev_step(
    spec: &EvSpec,
    state: &EvState,
    p_request: f64,
    t_ambient: f64,
    clock: &SimClock,
    dt_h: f64,
) -> Result<EvStep, DerError> {
    if !(dt_h > 0.0) {
        return Err(DerError::BadStep(dt_h));
    }
    let mut st = state.clone();
    let mut events = Vec::new();
    let mut trip = 0.0;
    let now = clock.wall_time();
    let current = spec.interval_at(now);
    if let Some(prev) = st.entered {
        if current != Some(prev) && st.departed.is_none_or(|d| d < prev) {
            let soc = st.battery.soc;
            events.push(EvEvent::Departed { interval: prev, soc });
            let required = spec.schedule[prev].required_soc;
            if soc + 1e-9 < required {
                events.push(EvEvent::DepartureShort {
                    interval: prev,
                    soc,
                    required,
                });
            }
            st.departed = Some(prev);
        }
    }
    if let Some(i) = current {
        if st.entered.is_none_or(|e| e < i) {
            let usable = spec.battery.capacity * st.battery.soh;
            let need = spec.schedule[i].trip_energy;
            let available = ((st.battery.soc - spec.battery.soc_min) * usable).max(0.0);
            trip = need.min(available);
            if need > available {
                events.push(EvEvent::TripUnderflow {
                    interval: i,
                    shortfall: need - available,
                });
                st.battery.soc = spec.battery.soc_min.min(st.battery.soc);
            } else {
                st.battery.soc -= need / usable;
            }
            events.push(EvEvent::Arrived {
                interval: i,
                trip_energy: trip,
            });
            st.entered = Some(i);
        }
    }
    let request = if current.is_none() || (p_request < 0.0 && !spec.v2g) {
        0.0
    } else {
        p_request
    };
    let b = battery_step(&spec.battery, st.battery, request, t_ambient, dt_h)?;
    st.battery = b.state;
    Ok(EvStep {
        state: st,
        p_actual: b.p_actual,
        p_loss: b.p_loss,
        cell_energy: b.cell_energy,
        trip_energy: trip,
        events,
    })
}

/// Same stay every day: home from `arrive_h` until `depart_h` the next morning.
pub fn daily_schedule(
    first_day: NaiveDate,
    days: usize,
    arrive_h: f64,
    depart_h: f64,
    trip_energy: f64,
    required_soc: f64,
) -> Vec<EvTrip> {
    let at = |d: i64, h: f64| {
        first_day.and_hms_opt(0, 0, 0).unwrap() + TimeDelta::days(d) + TimeDelta::seconds((h * 3600.0).round() as i64)
    };
    let mut out = Vec::with_capacity(days + 1);
    // overnight stay from before the run
    out.push(EvTrip {
        arrival: at(-1, arrive_h),
        departure: at(0, depart_h),
        trip_energy,
        required_soc,
    });
    for d in 0..days as i64 {
        out.push(EvTrip {
            arrival: at(d, arrive_h),
            departure: at(d + 1, depart_h),
            trip_energy,
            required_soc,
        });
    }
    out
}

fn parse_time(s: &str) -> Option<NaiveDateTime> {
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Columns: arrival, departure, trip_kWh, required_soc.
pub fn load_ev_schedule_csv(path: &Path) -> Result<Vec<EvTrip>, DerError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DerError::Schedule {
                row: 0,
                msg: format!("missing column '{name}'"),
            })
    };
    let idx = [
        col("arrival")?,
        col("departure")?,
        col("trip_kWh")?,
        col("required_soc")?,
    ];
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = n + 1;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let bad = |m: String| DerError::Schedule { row, msg: m };
        let arrival = parse_time(field(0)).ok_or_else(|| bad(format!("bad arrival '{}'", field(0))))?;
        let departure = parse_time(field(1)).ok_or_else(|| bad(format!("bad departure '{}'", field(1))))?;
        let num = |k: usize| {
            field(k)
                .parse::<f64>()
                .map_err(|_| bad(format!("bad number '{}'", field(k))))
        };
        out.push(EvTrip {
            arrival,
            departure,
            trip_energy: num(2)?,
            required_soc: num(3)?,
        });
    }
    Ok(out)
}
