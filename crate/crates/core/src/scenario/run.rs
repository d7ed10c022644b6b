use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::build::{build_environment, BuildingPaths};
use super::config::ScenarioConfig;
use super::ScenarioError;
use crate::runtime::{DataKind, HierPath, SignalFrame, SignalKey};

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingMetrics {
    pub id: String,
    /// Σ building power · dt
    pub energy_kwh: f64,
    pub grid_import_kwh: f64,
    pub grid_export_kwh: f64,
    /// Imports at the step price; exports are not credited.
    pub cost_usd: f64,
    /// Time with the zone outside its controller's published band.
    pub comfort_violation_h: f64,
    pub peak_w: f64,
    /// PV used on site over PV generated; `None` without generation.
    pub self_consumption: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub name: String,
    pub steps: u64,
    pub dt_s: f64,
    pub buildings: Vec<BuildingMetrics>,
    pub cluster_energy_kwh: f64,
    pub cluster_peak_w: f64,
}

impl RunMetrics {
    /// Flat `key = value` text, one line per metric.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "dt_s = {}", self.dt_s);
        let _ = writeln!(s, "cluster.energy_kwh = {}", self.cluster_energy_kwh);
        let _ = writeln!(s, "cluster.peak_w = {}", self.cluster_peak_w);
        for b in &self.buildings {
            let p = &b.id;
            let _ = writeln!(s, "{p}.energy_kwh = {}", b.energy_kwh);
            let _ = writeln!(s, "{p}.grid_import_kwh = {}", b.grid_import_kwh);
            let _ = writeln!(s, "{p}.grid_export_kwh = {}", b.grid_export_kwh);
            let _ = writeln!(s, "{p}.cost_usd = {}", b.cost_usd);
            let _ = writeln!(s, "{p}.comfort_violation_h = {}", b.comfort_violation_h);
            let _ = writeln!(s, "{p}.peak_w = {}", b.peak_w);
            match b.self_consumption {
                Some(x) => {
                    let _ = writeln!(s, "{p}.self_consumption = {x}");
                }
                None => {
                    let _ = writeln!(s, "{p}.self_consumption = none");
                }
            }
        }
        s
    }
}

/// What a run directory records about its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub name: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    /// Directory relative scenario paths resolved against.
    pub base_dir: PathBuf,
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Reads `manifest.txt` and the `scenario.cfg` beside it, checking the hash.
/// Returns the manifest and the scenario text.
pub fn read_manifest(path: &Path) -> Result<(Manifest, String), ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
    let get = |k: &str| -> Result<String, ScenarioError> {
        text.lines()
            .find_map(|l| {
                l.split_once(" = ")
                    .filter(|(a, _)| a.trim() == k)
                    .map(|(_, v)| v.to_string())
            })
            .ok_or_else(|| ScenarioError::Build(format!("{}: missing '{k}'", path.display())))
    };
    let m = Manifest {
        name: get("name")?,
        config_sha256: get("config_sha256")?,
        seed: get("seed")?
            .parse()
            .map_err(|_| ScenarioError::Build(format!("{}: bad seed", path.display())))?,
        version: get("version")?,
        base_dir: PathBuf::from(get("base_dir")?),
    };
    let cfg_path = path.with_file_name("scenario.cfg");
    let cfg = std::fs::read_to_string(&cfg_path).map_err(|e| ScenarioError::io(&cfg_path, e))?;
    if sha256_hex(&cfg) != m.config_sha256 {
        return Err(ScenarioError::Build(format!(
            "{} does not match the manifest hash",
            cfg_path.display()
        )));
    }
    Ok((m, cfg))
}

struct Acc {
    energy_wh: f64,
    import_wh: f64,
    export_wh: f64,
    cost: f64,
    violation_steps: u64,
    peak: f64,
    pv_wh: f64,
    pv_local_wh: f64,
}

fn key(p: &HierPath, var: &str, kind: DataKind) -> SignalKey {
    SignalKey::new(p.clone(), var, kind)
}

fn val(f: &SignalFrame, k: &SignalKey) -> Result<f64, ScenarioError> {
    f.value(k)
        .ok_or_else(|| ScenarioError::Build(format!("frame {} lacks {k}", f.timestep)))
}

fn accumulate(a: &mut Acc, b: &BuildingPaths, f: &SignalFrame, price: f64, dt_h: f64) -> Result<(), ScenarioError> {
    let p = val(f, &key(&b.electrical, "power", DataKind::Observation))?;
    let g = val(f, &key(&b.grid, "grid", DataKind::State))?;
    a.energy_wh += p * dt_h;
    a.peak = a.peak.max(p);
    a.import_wh += g.max(0.0) * dt_h;
    a.export_wh += (-g).max(0.0) * dt_h;
    a.cost += g.max(0.0) * dt_h / 1000.0 * price;
    if let Some(ctl) = &b.zone_controller {
        let t = val(f, &key(&b.zone, "t_zone", DataKind::State))?;
        let lo = val(f, &key(ctl, "t_lo", DataKind::Observation))?;
        let hi = val(f, &key(ctl, "t_hi", DataKind::Observation))?;
        if t < lo - 1e-9 || t > hi + 1e-9 {
            a.violation_steps += 1;
        }
    }
    if let Some(pv) = &b.pv {
        a.pv_wh += val(f, &key(pv, "generation", DataKind::State))? * dt_h;
        let local: f64 = ["pv_to_load", "pv_to_ev", "pv_to_battery"]
            .iter()
            .map(|v| val(f, &key(&b.bus, v, DataKind::State)))
            .sum::<Result<f64, _>>()?;
        a.pv_local_wh += local * dt_h;
    }
    Ok(())
}

fn selected(cfg: &ScenarioConfig, frame: &SignalFrame) -> Vec<(SignalKey, String)> {
    frame
        .iter()
        .map(|(k, _)| (k.clone(), k.column_name()))
        .filter(|(_, n)| cfg.output.include.is_empty() || cfg.output.include.iter().any(|p| n.starts_with(p.as_str())))
        .collect()
}

/// Runs the scenario, writing `timeseries.csv`, `metrics.txt`,
/// `manifest.txt` and a copy of the scenario text into `out_dir`.
///
/// Rows are the frames of steps 1..=N; `time` is the start of each step.
/// Columns are fixed by the first stepped frame (the initial frame when
/// the run has no steps).
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunMetrics, ScenarioError> {
    let s = &cfg.simulation;
    let mut built = build_environment(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| ScenarioError::io(out_dir, e))?;
    let started = std::time::Instant::now();
    built.env.initialize()?;
    let clock = *built.env.clock();
    let dt_h = clock.dt_hours();
    let price_key = key(
        &HierPath::new(
            &s.cluster,
            Some(crate::runtime::Domain::Electrical),
            Some("utility"),
            None,
        )?,
        "price",
        DataKind::Disturbance,
    );
    let cluster_power = key(&built.cluster, "power", DataKind::Observation);

    let ts_path = out_dir.join("timeseries.csv");
    let file = std::fs::File::create(&ts_path).map_err(|e| ScenarioError::io(&ts_path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let csv_err = |e: csv::Error| ScenarioError::Build(format!("{}: {e}", ts_path.display()));

    let mut accs: Vec<Acc> = built
        .buildings
        .iter()
        .map(|_| Acc {
            energy_wh: 0.0,
            import_wh: 0.0,
            export_wh: 0.0,
            cost: 0.0,
            violation_steps: 0,
            peak: 0.0,
            pv_wh: 0.0,
            pv_local_wh: 0.0,
        })
        .collect();
    let mut cluster_wh = 0.0;
    let mut cluster_peak = 0.0f64;
    let mut columns: Option<Vec<(SignalKey, String)>> = None;
    let write_header = |w: &mut csv::Writer<_>, cols: &[(SignalKey, String)]| {
        let mut header = vec!["t".to_string(), "time".to_string()];
        header.extend(cols.iter().map(|(_, n)| n.clone()));
        w.write_record(&header)
    };
    if s.steps == 0 {
        let cols = selected(cfg, built.env.latest());
        write_header(&mut w, &cols).map_err(csv_err)?;
    }
    for _ in 0..s.steps {
        let frame = built.env.step()?;
        let cols = columns.get_or_insert_with(|| selected(cfg, &frame));
        if frame.timestep == 1 {
            write_header(&mut w, cols).map_err(csv_err)?;
        }
        let mut row = Vec::with_capacity(cols.len() + 2);
        row.push(frame.timestep.to_string());
        row.push(clock.at(frame.timestep - 1).format("%Y-%m-%dT%H:%M:%S").to_string());
        for (k, _) in cols.iter() {
            row.push(match frame.value(k) {
                Some(v) => v.to_string(),
                None => String::new(),
            });
        }
        w.write_record(&row).map_err(csv_err)?;

        let price = frame.value(&price_key).unwrap_or(0.0);
        for (a, b) in accs.iter_mut().zip(&built.buildings) {
            accumulate(a, b, &frame, price, dt_h)?;
        }
        if let Some(p) = frame.value(&cluster_power) {
            cluster_wh += p * dt_h;
            cluster_peak = cluster_peak.max(p);
        }
    }
    w.flush().map_err(|e| ScenarioError::io(&ts_path, e))?;
    log::info!(
        "{}: {} steps in {:.3} s",
        s.name,
        s.steps,
        started.elapsed().as_secs_f64()
    );

    let metrics = RunMetrics {
        name: s.name.clone(),
        steps: s.steps,
        dt_s: s.dt,
        buildings: accs
            .iter()
            .zip(&built.buildings)
            .map(|(a, b)| BuildingMetrics {
                id: b.id.clone(),
                energy_kwh: a.energy_wh / 1000.0,
                grid_import_kwh: a.import_wh / 1000.0,
                grid_export_kwh: a.export_wh / 1000.0,
                cost_usd: a.cost,
                comfort_violation_h: a.violation_steps as f64 * dt_h,
                peak_w: a.peak,
                self_consumption: (a.pv_wh > 0.0).then(|| a.pv_local_wh / a.pv_wh),
            })
            .collect(),
        cluster_energy_kwh: cluster_wh / 1000.0,
        cluster_peak_w: cluster_peak,
    };
    let write = |name: &str, body: &str| {
        let p = out_dir.join(name);
        std::fs::File::create(&p)
            .and_then(|mut f| f.write_all(body.as_bytes()))
            .map_err(|e| ScenarioError::io(&p, e))
    };
    write("metrics.txt", &metrics.to_text())?;
    write("scenario.cfg", &cfg.source)?;
    let base = std::fs::canonicalize(&cfg.base_dir).unwrap_or_else(|_| cfg.base_dir.clone());
    write(
        "manifest.txt",
        &format!(
            "name = {}\nconfig_sha256 = {}\nseed = {}\nversion = {} {}\nbase_dir = {}\n",
            s.name,
            sha256_hex(&cfg.source),
            s.seed,
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            base.display()
        ),
    )?;
    Ok(metrics)
}
