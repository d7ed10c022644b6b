#![allow(dead_code)]

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use hiersim::scenario::{bundled, run_scenario, validate_text, RunMetrics, ScenarioConfig};

/// `timeseries.csv` loaded column-wise.
pub struct Table {
    pub header: Vec<String>,
    pub cols: HashMap<String, Vec<f64>>,
    pub rows: usize,
}

impl Table {
    pub fn read(path: &Path) -> Table {
        let mut r = csv::Reader::from_path(path).expect("open timeseries");
        let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
        let mut cols: HashMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec.unwrap();
            for (h, v) in header.iter().zip(rec.iter()) {
                if h == "time" {
                    continue;
                }
                cols.get_mut(h).unwrap().push(v.parse().unwrap_or(f64::NAN));
            }
            rows += 1;
        }
        Table { header, cols, rows }
    }

    pub fn col(&self, name: &str) -> &[f64] {
        self.cols.get(name).unwrap_or_else(|| panic!("no column {name}"))
    }

    pub fn has(&self, name: &str) -> bool {
        self.cols.contains_key(name)
    }
}

pub fn bundled_config(name: &str) -> ScenarioConfig {
    let b = bundled(name).unwrap_or_else(|| panic!("no bundled scenario {name}"));
    validate_text(b.text, &hiersim::scenario::bundled_dir(), None).expect("bundled scenario validates")
}

pub fn run_bundled(name: &str, out: &Path) -> (ScenarioConfig, RunMetrics, Table) {
    let cfg = bundled_config(name);
    let m = run_scenario(&cfg, out).expect("run");
    let t = Table::read(&out.join("timeseries.csv"));
    (cfg, m, t)
}

/// Writes past the test harness capture so the line shows in plain
/// `cargo test` output.
pub fn report(n: u32, name: &str, outcome: &Result<String, String>) {
    let line = match outcome {
        Ok(d) => format!("criterion {n:>2} {name}: PASS ({d})\n"),
        Err(d) => format!("criterion {n:>2} {name}: FAIL ({d})\n"),
    };
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

pub fn check(n: u32, name: &str, f: impl FnOnce() -> Result<String, String>) {
    let outcome = f();
    report(n, name, &outcome);
    if let Err(e) = outcome {
        panic!("criterion {n} {name} failed: {e}");
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
