use std::path::Path;

use chrono::NaiveDateTime;

use super::{DisturbanceError, OccupancyRecord, PriceSchedule, WeatherRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSchema {
    /// timestamp, t_out_c, ghi_wm2[, t_wb_c]
    Weather,
    /// timestamp, usd_per_kwh
    Price,
    /// timestamp, occupied, offset_k, then any number of flag columns
    Occupancy,
}

impl ProfileSchema {
    fn required(self) -> &'static [&'static str] {
        match self {
            ProfileSchema::Weather => &["t_out_c", "ghi_wm2"],
            ProfileSchema::Price => &["usd_per_kwh"],
            ProfileSchema::Occupancy => &["occupied", "offset_k"],
        }
    }

    fn optional(self) -> &'static [&'static str] {
        match self {
            ProfileSchema::Weather => &["t_wb_c"],
            _ => &[],
        }
    }

    fn check_row(self, cols: &[String], vals: &[f64]) -> Result<(), String> {
        let get = |name: &str| cols.iter().position(|c| c == name).map(|i| vals[i]);
        match self {
            ProfileSchema::Weather => {
                let rec = WeatherRecord {
                    t_out: get("t_out_c").unwrap(),
                    ghi: get("ghi_wm2").unwrap(),
                    t_wb: get("t_wb_c"),
                    t_dew: None,
                };
                rec.validate()
            }
            ProfileSchema::Price => match get("usd_per_kwh").unwrap() {
                p if p >= 0.0 => Ok(()),
                p => Err(format!("negative price {p}")),
            },
            ProfileSchema::Occupancy => {
                for (c, v) in cols.iter().zip(vals) {
                    if c != "offset_k" && *v != 0.0 && *v != 1.0 {
                        return Err(format!("flag column '{c}' must be 0 or 1, got {v}"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Loaded profile already resampled to the clock step.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub dt_s: f64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Profile {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn parse_timestamp(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp() as f64);
        }
    }
    None
}

/// Repeats each row `factor` times.
pub(crate) fn hold_forward<T: Clone>(rows: Vec<T>, factor: usize) -> Vec<T> {
    rows.into_iter().flat_map(|r| std::iter::repeat_n(r, factor)).collect()
}

/// Reads a profile CSV. Rows are numbered from 1 after the header. A
/// profile coarser than `clock_dt_s` by an integer factor is hold-forward
/// resampled; any other mismatch is an error.
pub fn load_profile_csv(path: &Path, schema: ProfileSchema, clock_dt_s: f64) -> Result<Profile, DisturbanceError> {
    let pname = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let ts_col = headers
        .iter()
        .position(|h| h == "timestamp")
        .ok_or_else(|| DisturbanceError::MissingColumn {
            path: pname.clone(),
            column: "timestamp".into(),
        })?;
    for req in schema.required() {
        if !headers.iter().any(|h| h == req) {
            return Err(DisturbanceError::MissingColumn {
                path: pname.clone(),
                column: req.to_string(),
            });
        }
    }
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, h)| {
            *i != ts_col
                && (schema == ProfileSchema::Occupancy
                    || schema.required().contains(&h.as_str())
                    || schema.optional().contains(&h.as_str()))
        })
        .map(|(_, h)| h.clone())
        .collect();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| headers.iter().position(|h| h == c).unwrap())
        .collect();

    let mut stamps = Vec::new();
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let row = n + 1;
        let rec = rec?;
        let bad = |msg: String| DisturbanceError::BadRow {
            path: pname.clone(),
            row,
            msg,
        };
        let ts = rec.get(ts_col).unwrap_or("");
        stamps.push(parse_timestamp(ts).ok_or_else(|| bad(format!("bad timestamp '{ts}'")))?);
        let mut vals = Vec::with_capacity(idx.len());
        for (&i, name) in idx.iter().zip(&columns) {
            let f = rec.get(i).unwrap_or("");
            let v: f64 = f.parse().map_err(|_| bad(format!("bad value '{f}' in {name}")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite value in {name}")));
            }
            vals.push(v);
        }
        schema.check_row(&columns, &vals).map_err(bad)?;
        rows.push(vals);
    }
    if stamps.is_empty() {
        return Err(DisturbanceError::BadRow {
            path: pname,
            row: 0,
            msg: "no data rows".into(),
        });
    }
    let dt = if stamps.len() > 1 {
        stamps[1] - stamps[0]
    } else {
        clock_dt_s
    };
    for (i, w) in stamps.windows(2).enumerate() {
        let d = w[1] - w[0];
        if !(d > 0.0) || (d - dt).abs() > 1e-6 {
            return Err(DisturbanceError::IrregularTimestamps {
                path: pname,
                row: i + 2,
            });
        }
    }
    let ratio = dt / clock_dt_s;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 {
        return Err(DisturbanceError::Resolution {
            path: pname,
            profile_s: dt,
            clock_s: clock_dt_s,
        });
    }
    Ok(Profile {
        dt_s: clock_dt_s,
        columns,
        rows: hold_forward(rows, factor as usize),
    })
}

pub fn load_weather_csv(path: &Path, clock_dt_s: f64) -> Result<Vec<WeatherRecord>, DisturbanceError> {
    let p = load_profile_csv(path, ProfileSchema::Weather, clock_dt_s)?;
    let t_out = p.column("t_out_c").unwrap();
    let ghi = p.column("ghi_wm2").unwrap();
    let wb = p.column("t_wb_c");
    Ok((0..p.len())
        .map(|i| WeatherRecord {
            t_out: t_out[i],
            ghi: ghi[i],
            t_wb: wb.as_ref().map(|w| w[i]),
            t_dew: None,
        })
        .collect())
}

pub fn load_price_csv(path: &Path, clock_dt_s: f64) -> Result<PriceSchedule, DisturbanceError> {
    let p = load_profile_csv(path, ProfileSchema::Price, clock_dt_s)?;
    Ok(PriceSchedule::Series(p.column("usd_per_kwh").unwrap()))
}

pub fn load_occupancy_csv(path: &Path, clock_dt_s: f64) -> Result<Vec<OccupancyRecord>, DisturbanceError> {
    let p = load_profile_csv(path, ProfileSchema::Occupancy, clock_dt_s)?;
    let occ = p.columns.iter().position(|c| c == "occupied").unwrap();
    let off = p.columns.iter().position(|c| c == "offset_k").unwrap();
    Ok(p.rows
        .iter()
        .map(|r| OccupancyRecord {
            occupied: r[occ] == 1.0,
            offset_k: r[off],
            count: r[occ],
            activities: p
                .columns
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != occ && *i != off)
                .map(|(i, c)| (c.clone(), r[i] == 1.0))
                .collect(),
        })
        .collect())
}
