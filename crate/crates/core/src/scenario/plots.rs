//! Static SVG charts drawn from a run directory's `timeseries.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::ScenarioError;

pub const PLOTS: [&str; 5] = [
    "fan_tracking",
    "zone_temperature",
    "soc",
    "load_stack",
    "cumulative_energy",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotReport {
    pub written: Vec<PathBuf>,
    /// One notice per plot skipped for lack of data.
    pub skipped: Vec<String>,
}

struct Table {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, ScenarioError> {
        let mut rdr =
            csv::Reader::from_path(path).map_err(|e| ScenarioError::Plot(format!("{}: {e}", path.display())))?;
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| ScenarioError::Plot(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut cols = vec![Vec::new(); names.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ScenarioError::Plot(e.to_string()))?;
            for (i, f) in rec.iter().enumerate() {
                // the time column and blanks plot as NaN and are skipped
                cols[i].push(f.parse().unwrap_or(f64::NAN));
            }
        }
        Ok(Table { names, cols })
    }

    fn matching(&self, f: impl Fn(&[&str]) -> bool) -> Vec<(String, &[f64])> {
        self.names
            .iter()
            .zip(&self.cols)
            .filter(|(n, _)| {
                let parts: Vec<&str> = n.split('.').collect();
                parts.len() >= 3 && f(&parts)
            })
            .map(|(n, c)| (n.clone(), c.as_slice()))
            .collect()
    }

    fn rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }
}

fn var<'a>(p: &[&'a str]) -> &'a str {
    p[p.len() - 2]
}

fn kind<'a>(p: &[&'a str]) -> &'a str {
    p[p.len() - 1]
}

/// Path part of a column name.
fn owner(name: &str) -> String {
    let p: Vec<&str> = name.split('.').collect();
    p[..p.len() - 2].join(".")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const W: f64 = 800.0;
const H: f64 = 420.0;
const L: f64 = 70.0;
const R: f64 = 220.0;
const T: f64 = 40.0;
const B: f64 = 50.0;
const COLORS: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: &[f64], ys: impl Iterator<Item = f64>) -> Frame {
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in ys.filter(|y| y.is_finite()) {
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !y0.is_finite() {
            (y0, y1) = (0.0, 1.0);
        }
        if y1 - y0 < 1e-9 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad = 0.05 * (y1 - y0);
        let x0 = xs.first().copied().unwrap_or(0.0);
        let x1 = xs.last().copied().filter(|&x| x > x0).unwrap_or(x0 + 1.0);
        Frame {
            x0,
            x1,
            y0: y0 - pad,
            y1: y1 + pad,
        }
    }

    fn x(&self, x: f64) -> f64 {
        L + (x - self.x0) / (self.x1 - self.x0) * (W - L - R)
    }

    fn y(&self, y: f64) -> f64 {
        H - B - (y - self.y0) / (self.y1 - self.y0) * (H - T - B)
    }
}

fn open(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (L + W - R) / 2.0,
        esc(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{L}" y="{T}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - L - R,
        H - T - B
    );
    for i in 0..=4 {
        let v = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let y = f.y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{L}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
            W - R,
            L - 5.0,
            y + 4.0
        );
        let xv = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{xv:.1}</text>"#,
            f.x(xv),
            H - B + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (L + W - R) / 2.0,
        H - 10.0,
        esc(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    );
    s
}

fn legend(s: &mut String, i: usize, label: &str, color: &str, dashed: bool) {
    let y = T + 10.0 + 16.0 * i as f64;
    let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
        W - R + 10.0,
        W - R + 30.0,
        W - R + 35.0,
        y + 4.0,
        esc(label)
    );
}

fn polyline(f: &Frame, xs: &[f64], ys: &[f64]) -> String {
    let mut pts = String::new();
    for (x, y) in xs.iter().zip(ys) {
        if y.is_finite() {
            let _ = write!(pts, "{:.2},{:.2} ", f.x(*x), f.y(*y));
        }
    }
    pts.trim_end().to_string()
}

struct Series<'a> {
    label: String,
    ys: std::borrow::Cow<'a, [f64]>,
    dashed: bool,
}

fn line_chart(title: &str, ylabel: &str, xs: &[f64], series: &[Series]) -> String {
    let f = Frame::new(xs, series.iter().flat_map(|s| s.ys.iter().copied()));
    let mut s = open(title, "hours", ylabel, &f);
    for (i, se) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = if se.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            polyline(&f, xs, &se.ys)
        );
        legend(&mut s, i, &se.label, color, se.dashed);
    }
    s.push_str("</svg>\n");
    s
}

fn stack_chart(title: &str, ylabel: &str, xs: &[f64], layers: &[(String, Vec<f64>)]) -> String {
    let n = xs.len();
    let mut tops = vec![vec![0.0; n]; layers.len() + 1];
    for (k, (_, ys)) in layers.iter().enumerate() {
        for i in 0..n {
            let y = if ys[i].is_finite() { ys[i].max(0.0) } else { 0.0 };
            tops[k + 1][i] = tops[k][i] + y;
        }
    }
    let f = Frame::new(xs, tops.iter().flatten().copied().chain([0.0]));
    let mut s = open(title, "hours", ylabel, &f);
    for (k, (label, _)) in layers.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = polyline(&f, xs, &tops[k + 1]);
        for i in (0..n).rev() {
            let _ = write!(pts, " {:.2},{:.2}", f.x(xs[i]), f.y(tops[k][i]));
        }
        let _ = writeln!(
            s,
            r#"<polygon fill="{color}" fill-opacity="0.7" stroke="none" points="{pts}"/>"#
        );
        legend(&mut s, k, label, color, false);
    }
    s.push_str("</svg>\n");
    s
}

fn dt_hours(run_dir: &Path, table: &Table) -> f64 {
    let from_metrics = std::fs::read_to_string(run_dir.join("metrics.txt")).ok().and_then(|m| {
        m.lines()
            .find_map(|l| l.strip_prefix("dt_s = "))
            .and_then(|v| v.trim().parse::<f64>().ok())
    });
    match from_metrics {
        Some(dt) => dt / 3600.0,
        // without metrics, assume the common 15-min step only if rows exist
        None if table.rows() > 0 => 0.25,
        None => 1.0,
    }
}

fn build(name: &str, t: &Table, xs: &[f64], dt_h: f64) -> Option<String> {
    match name {
        "fan_tracking" => {
            let mut series = Vec::new();
            for (n, c) in t.matching(|p| var(p) == "v_setpoint" && kind(p) == "action") {
                let sys = owner(&n);
                series.push(Series {
                    label: format!("{sys} setpoint"),
                    ys: c.into(),
                    dashed: true,
                });
                for (fan, fc) in t.matching(|p| var(p) == "flow" && kind(p) == "state") {
                    if owner(&fan).starts_with(&format!("{sys}.")) {
                        series.push(Series {
                            label: owner(&fan),
                            ys: fc.into(),
                            dashed: false,
                        });
                    }
                }
            }
            (!series.is_empty()).then(|| line_chart("Fan flow: setpoint vs actual", "kg/s", xs, &series))
        }
        "zone_temperature" => {
            let mut series = Vec::new();
            for (n, c) in t.matching(|p| matches!(var(p), "t_zone" | "t_pred") && kind(p) == "state") {
                series.push(Series {
                    label: owner(&n),
                    ys: c.into(),
                    dashed: n.contains(".t_pred."),
                });
            }
            if series.is_empty() {
                return None;
            }
            for (n, c) in t.matching(|p| matches!(var(p), "t_lo" | "t_hi") && kind(p) == "observation") {
                series.push(Series {
                    label: format!("{} {}", owner(&n), if n.contains(".t_lo.") { "low" } else { "high" }),
                    ys: c.into(),
                    dashed: true,
                });
            }
            Some(line_chart("Zone temperature and band", "°C", xs, &series))
        }
        "soc" => {
            let series: Vec<Series> = t
                .matching(|p| var(p) == "soc" && kind(p) == "state")
                .into_iter()
                .map(|(n, c)| Series {
                    label: owner(&n),
                    ys: c.into(),
                    dashed: false,
                })
                .collect();
            (!series.is_empty()).then(|| line_chart("State of charge", "fraction", xs, &series))
        }
        "load_stack" => {
            // component-level loads summed by component name across buildings
            let mut by: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for (n, c) in
                t.matching(|p| p.len() == 6 && p[1] == "electrical" && var(p) == "power" && kind(p) == "state")
            {
                let comp = n.split('.').nth(3).unwrap_or("?").to_string();
                let acc = by.entry(comp).or_insert_with(|| vec![0.0; c.len()]);
                for (a, v) in acc.iter_mut().zip(c) {
                    *a += if v.is_finite() { *v } else { 0.0 };
                }
            }
            let layers: Vec<(String, Vec<f64>)> = by.into_iter().collect();
            (!layers.is_empty()).then(|| stack_chart("Load by end use", "W", xs, &layers))
        }
        "cumulative_energy" => {
            let series: Vec<Series> = t
                .matching(|p| p.len() == 5 && p[1] == "electrical" && var(p) == "power" && kind(p) == "observation")
                .into_iter()
                .map(|(n, c)| {
                    let mut acc = 0.0;
                    let ys: Vec<f64> = c
                        .iter()
                        .map(|v| {
                            acc += v * dt_h / 1000.0;
                            acc
                        })
                        .collect();
                    Series {
                        label: owner(&n),
                        ys: ys.into(),
                        dashed: false,
                    }
                })
                .filter(|s| !s.label.ends_with(".utility"))
                .collect();
            (!series.is_empty()).then(|| line_chart("Cumulative energy", "kWh", xs, &series))
        }
        _ => None,
    }
}

/// Writes `<name>.svg` into `run_dir` for each plot. With `only`, a plot
/// whose columns are missing is an error; otherwise it is skipped with a
/// notice.
pub fn emit_plots(run_dir: &Path, only: Option<&[&str]>) -> Result<PlotReport, ScenarioError> {
    let ts = run_dir.join("timeseries.csv");
    if !ts.exists() {
        return Err(ScenarioError::Plot(format!("{} does not exist", ts.display())));
    }
    let table = Table::read(&ts)?;
    let dt_h = dt_hours(run_dir, &table);
    let xs: Vec<f64> = (0..table.rows()).map(|i| (i + 1) as f64 * dt_h).collect();
    let mut report = PlotReport::default();
    let names: Vec<&str> = only.map_or(PLOTS.to_vec(), <[&str]>::to_vec);
    for name in names {
        if !PLOTS.contains(&name) {
            return Err(ScenarioError::Plot(format!("unknown plot '{name}'")));
        }
        match build(name, &table, &xs, dt_h) {
            Some(svg) => {
                let p = run_dir.join(format!("{name}.svg"));
                std::fs::write(&p, svg).map_err(|e| ScenarioError::io(&p, e))?;
                report.written.push(p);
            }
            None if only.is_some() => {
                return Err(ScenarioError::Plot(format!("{name}: required columns are missing")));
            }
            None => {
                let msg = format!("{name}: no matching columns, plot skipped");
                log::info!("{msg}");
                report.skipped.push(msg);
            }
        }
    }
    Ok(report)
}
