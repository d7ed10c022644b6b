use std::path::Path;

use super::{profile::hold_forward, wet_bulb_stull, DisturbanceError, WeatherRecord};

const HEADER_LINES: usize = 8;
const FIELDS: usize = 35;

/// Reads dry-bulb, dew point and global horizontal irradiance from an EPW
/// file. Records are hourly, repeated `3600 / clock_dt_s` times. Missing
/// value codes are rejected rather than filled in.
pub fn load_epw_subset(path: &Path, clock_dt_s: f64) -> Result<Vec<WeatherRecord>, DisturbanceError> {
    let text = std::fs::read_to_string(path)?;
    let per_hour = 3600.0 / clock_dt_s;
    if !(per_hour >= 1.0 && per_hour.fract() == 0.0) {
        return Err(DisturbanceError::Resolution {
            path: path.display().to_string(),
            profile_s: 3600.0,
            clock_s: clock_dt_s,
        });
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| DisturbanceError::Epw { line: line_no, msg };
        if i < HEADER_LINES {
            if i == 0 && !line.starts_with("LOCATION") {
                return Err(err("expected LOCATION header".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FIELDS {
            return Err(err(format!("expected {FIELDS} fields, found {}", fields.len())));
        }
        let num = |k: usize, what: &str| -> Result<f64, DisturbanceError> {
            let v: f64 = fields[k - 1]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad {what} '{}'", fields[k - 1])))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite {what}")));
            }
            Ok(v)
        };
        let t_out = num(7, "dry-bulb")?;
        let t_dew = num(8, "dew point")?;
        let ghi = num(14, "global horizontal irradiance")?;
        if t_out >= 99.9 || t_dew >= 99.9 {
            return Err(err("missing temperature (99.9)".into()));
        }
        if ghi >= 9999.0 {
            return Err(err("missing irradiance (9999)".into()));
        }
        if ghi < 0.0 {
            return Err(err(format!("negative irradiance {ghi}")));
        }
        out.push(WeatherRecord {
            t_out,
            ghi,
            t_wb: Some(wet_bulb_stull(t_out, t_dew)),
            t_dew: Some(t_dew),
        });
    }
    if out.is_empty() {
        return Err(DisturbanceError::Epw {
            line: text.lines().count(),
            msg: "no data records".into(),
        });
    }
    Ok(hold_forward(out, per_hour as usize))
}
