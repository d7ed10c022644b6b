//! Flat text model files and trace CSVs.
//!
//! Model file layout, one record per line:
//!
//! ```text
//! hiersim-thermal-model 1
//! kind modnn affine projected      # or: kind recurrent
//! norm <name> <value>              # one line per normalization constant
//! tensor theta <len>
//! <len values, whitespace separated>
//! end
//! ```
//!
//! Values are written in Rust's shortest round-trip form, so reading a
//! written model reproduces it bit for bit.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use super::{HeadKind, ModelKind, Normalization, ThermalError, ThermalModelParams, ThermalTrace};

const MAGIC: &str = "hiersim-thermal-model 1";

pub fn write_model(params: &ThermalModelParams, mut w: impl Write) -> Result<(), ThermalError> {
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    match params.kind {
        ModelKind::Modnn { head, projected } => {
            let head = match head {
                HeadKind::Affine => "affine",
                HeadKind::Mlp => "mlp",
            };
            let proj = if projected { "projected" } else { "unprojected" };
            writeln!(s, "kind modnn {head} {proj}").unwrap();
        }
        ModelKind::Recurrent => writeln!(s, "kind recurrent").unwrap(),
    }
    for (name, v) in Normalization::NAMES.iter().zip(params.norm.values()) {
        writeln!(s, "norm {name} {v:?}").unwrap();
    }
    writeln!(s, "tensor theta {}", params.theta.len()).unwrap();
    for chunk in params.theta.chunks(8) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{v:?}")).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    writeln!(s, "end").unwrap();
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_model(mut r: impl Read) -> Result<ThermalModelParams, ThermalError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let err = |line: usize, msg: &str| ThermalError::Format {
        line,
        msg: msg.to_string(),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap().trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        Some((n, _)) => return Err(err(n, "missing header")),
        None => return Err(err(0, "empty model file")),
    }
    let (n, kind_line) = lines.next().ok_or_else(|| err(0, "missing kind"))?;
    let toks: Vec<&str> = kind_line.split_whitespace().collect();
    let kind = match toks.as_slice() {
        ["kind", "recurrent"] => ModelKind::Recurrent,
        ["kind", "modnn", head, proj] => {
            let head = match *head {
                "affine" => HeadKind::Affine,
                "mlp" => HeadKind::Mlp,
                _ => return Err(err(n, "unknown head kind")),
            };
            let projected = match *proj {
                "projected" => true,
                "unprojected" => false,
                _ => return Err(err(n, "expected projected|unprojected")),
            };
            ModelKind::Modnn { head, projected }
        }
        _ => return Err(err(n, "malformed kind line")),
    };
    let mut norm = Normalization::default();
    let mut seen = 0;
    let mut theta = Vec::new();
    let mut expected = None;
    let mut ended = false;
    for (n, line) in lines {
        if ended {
            return Err(err(n, "content after end"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["norm", name, v] => {
                let v: f64 = v.parse().map_err(|_| err(n, "bad number"))?;
                if !norm.set(name, v) {
                    return Err(err(n, "unknown normalization constant"));
                }
                seen += 1;
            }
            ["tensor", "theta", len] => {
                expected = Some(len.parse::<usize>().map_err(|_| err(n, "bad length"))?);
            }
            ["end"] => ended = true,
            vals if expected.is_some() => {
                for v in vals {
                    theta.push(v.parse::<f64>().map_err(|_| err(n, "bad number"))?);
                }
            }
            _ => return Err(err(n, "unexpected line")),
        }
    }
    if !ended {
        return Err(err(0, "missing end marker"));
    }
    if seen != Normalization::NAMES.len() {
        return Err(err(0, "incomplete normalization block"));
    }
    if expected != Some(theta.len()) {
        return Err(err(0, "tensor length does not match declared shape"));
    }
    let params = ThermalModelParams { kind, norm, theta };
    params.validate()?;
    Ok(params)
}

const TRACE_COLUMNS: [&str; 7] = [
    "timestamp",
    "t_zone_c",
    "t_out_c",
    "ghi_wm2",
    "occupancy",
    "activity",
    "q_hvac_w",
];

/// Reads a trace CSV. `timestamp` is elapsed seconds; rows must be evenly spaced.
pub fn read_trace_csv(path: &Path) -> Result<ThermalTrace, ThermalError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 7];
    for (k, name) in TRACE_COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h.trim() == *name)
            .ok_or_else(|| ThermalError::InvalidTrace(format!("missing column '{name}'")))?;
    }
    let mut ts = Vec::new();
    let mut tr = ThermalTrace::default();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut vals = [0.0f64; 7];
        for (k, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("").trim();
            vals[k] = field.parse().map_err(|_| {
                ThermalError::InvalidTrace(format!("row {}: bad value '{field}' in {}", row + 1, TRACE_COLUMNS[k]))
            })?;
            if !vals[k].is_finite() {
                return Err(ThermalError::InvalidTrace(format!("row {}: non-finite value", row + 1)));
            }
        }
        ts.push(vals[0]);
        tr.t_zone.push(vals[1]);
        tr.t_out.push(vals[2]);
        tr.ghi.push(vals[3]);
        tr.occupancy.push(vals[4]);
        tr.activity.push(vals[5]);
        tr.q_hvac.push(vals[6]);
    }
    if ts.len() < 2 {
        return Err(ThermalError::InvalidTrace("need at least two rows".into()));
    }
    let dt = ts[1] - ts[0];
    for (i, w) in ts.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 || dt <= 0.0 {
            return Err(ThermalError::InvalidTrace(format!(
                "row {}: irregular timestamp",
                i + 2
            )));
        }
    }
    tr.dt = dt;
    tr.validate()?;
    Ok(tr)
}

pub fn write_trace_csv(trace: &ThermalTrace, path: &Path) -> Result<(), ThermalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_COLUMNS)?;
    for i in 0..trace.len() {
        let row = [
            i as f64 * trace.dt,
            trace.t_zone[i],
            trace.t_out[i],
            trace.ghi[i],
            trace.occupancy[i],
            trace.activity[i],
            trace.q_hvac[i],
        ];
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}
