use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};

use super::text::{parse_sections, ConfigError, Section};
use crate::control::{DeadbandConfig, HvacMode, MpcConfig, PidConfig, TouDispatchConfig};
use crate::der::{daily_schedule, load_ev_schedule_csv, BatterySpec, EvSpec, PvSpec};
use crate::disturbance::{DayParams, OccupancyParams, PriceSchedule};
use crate::hvac::{
    ChillerMode, ChillerSpec, CoilSpec, CoolingTowerSpec, FanKind, FanSpec, FcuAssembly, IceStorageSpec, TowerLoop,
};
use crate::networks::{ElectricalNetworkSpec, WaterTankSpec};
use crate::sim::{FanProfile, FcuRealization};
use crate::thermal::{read_model, RcZoneSpec, ThermalModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub name: String,
    pub start: NaiveDateTime,
    pub steps: u64,
    pub dt: f64,
    pub seed: u64,
    pub cluster: String,
}

#[derive(Debug, Clone)]
pub enum WeatherConfig {
    Synthetic { day: DayParams, t_mean_jitter: f64 },
    Csv(PathBuf),
    Epw(PathBuf),
}

#[derive(Debug, Clone)]
pub enum PriceConfig {
    Schedule(PriceSchedule),
    Csv(PathBuf),
}

#[derive(Debug, Clone)]
pub enum OccupancyConfig {
    Synthetic(OccupancyParams),
    Csv(PathBuf),
}

#[derive(Debug, Clone)]
pub enum ZoneConfig {
    Rc(RcZoneSpec),
    Learned(ThermalModelParams),
}

#[derive(Debug, Clone)]
pub struct FcuConfig {
    pub assembly: FcuAssembly,
    pub off_after_h: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EvConfig {
    pub id: String,
    pub spec: EvSpec,
    pub soc0: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone)]
pub struct TankConfig {
    pub spec: WaterTankSpec,
    pub t0: f64,
    pub draws: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct BuildingConfig {
    pub id: String,
    pub line: usize,
    pub zone: ZoneConfig,
    /// The RC spec behind `zone` when it is an RC zone.
    pub t0: f64,
    pub occupancy: OccupancyConfig,
    pub electrical: ElectricalNetworkSpec,
    /// Open-loop model run alongside the zone on the same inputs.
    pub predictor: Option<ThermalModelParams>,
    pub fcu: Option<FcuConfig>,
    pub pv: Option<(PvSpec, f64)>,
    pub battery: Option<(BatterySpec, f64)>,
    pub evs: Vec<EvConfig>,
    pub tank: Option<TankConfig>,
}

#[derive(Debug, Clone)]
pub struct FanSystemConfig {
    pub id: String,
    pub fans: Vec<(String, FanSpec)>,
}

#[derive(Debug, Clone)]
pub enum ControllerKind {
    DeadbandFcu {
        cfg: DeadbandConfig,
        switch_margin: f64,
        fcu: FcuRealization,
        comfort_offset: bool,
    },
    MpcFcu {
        cfg: MpcConfig,
        model: Option<ThermalModelParams>,
        q_min: f64,
        fcu: FcuRealization,
        seasonal_naive: bool,
    },
    FanProfile(FanProfile),
    TouDer {
        tou: TouDispatchConfig,
        ev_target_soc: f64,
    },
    Tank(crate::sim::TankControl),
    ClusterPeak {
        cap: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    pub name: String,
    pub line: usize,
    pub target: String,
    pub kind: ControllerKind,
}

#[derive(Debug, Clone, Default)]
pub struct OutputConfig {
    /// Column-name prefixes; empty selects every column.
    pub include: Vec<String>,
    pub plots: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub simulation: SimulationConfig,
    pub weather: WeatherConfig,
    pub price: PriceConfig,
    pub buildings: Vec<BuildingConfig>,
    pub fan_systems: Vec<FanSystemConfig>,
    pub controllers: Vec<ControllerConfig>,
    pub export: bool,
    pub output: OutputConfig,
    /// Exact source text, hashed into the run manifest.
    pub source: String,
    /// Directory relative paths were resolved against.
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn building(&self, id: &str) -> Option<&BuildingConfig> {
        self.buildings.iter().find(|b| b.id == id)
    }
}

fn parse_start(s: &str) -> Option<NaiveDateTime> {
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .or_else(|| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn check<E: std::fmt::Display>(r: Result<(), E>, line: usize, errs: &mut Vec<ConfigError>) {
    if let Err(e) = r {
        errs.push(ConfigError::at(line, e.to_string()));
    }
}

/// Component names the builder uses under each building.
const RESERVED_COMPONENTS: [&str; 8] = ["plug", "lighting", "hvac", "dhw", "pv", "battery", "bus", "grid"];
/// System names used by shared sources.
const RESERVED_SYSTEMS: [&str; 2] = ["outdoor", "utility"];

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Parses scenario text. `base` resolves relative file references.
/// Wiring is not checked here; see [`super::validate_scenario`].
pub fn parse_scenario_text(text: &str, base: &Path) -> Result<ScenarioConfig, Vec<ConfigError>> {
    parse_scenario_text_seeded(text, base, None)
}

/// As [`parse_scenario_text`], with `seed` replacing `[simulation] seed`.
pub fn parse_scenario_text_seeded(
    text: &str,
    base: &Path,
    seed: Option<u64>,
) -> Result<ScenarioConfig, Vec<ConfigError>> {
    let mut sections = parse_sections(text)?;
    let mut errs = Vec::new();

    let mut take_one = |kind: &str, errs: &mut Vec<ConfigError>| -> Option<Section> {
        let idx = sections.iter().position(|s| s.kind == kind && s.args.is_empty());
        match idx {
            Some(i) => Some(sections.remove(i)),
            None => {
                if let Some(s) = sections.iter().find(|s| s.kind == kind) {
                    errs.push(ConfigError::at(s.line, format!("[{kind}] takes no sub-name")));
                }
                None
            }
        }
    };

    let simulation = match take_one("simulation", &mut errs) {
        Some(s) => simulation(s, &mut errs),
        None => {
            errs.push(ConfigError::global("missing [simulation] section"));
            None
        }
    };
    let weather = take_one("weather", &mut errs).map(|s| weather(s, base, &mut errs));
    let price = take_one("price", &mut errs).map(|s| price(s, base, &mut errs));
    let (export, output) = {
        let export = match take_one("cluster", &mut errs) {
            Some(mut s) => {
                let e = s.or("export", true, &mut errs);
                s.finish(&mut errs);
                e
            }
            None => true,
        };
        let output = match take_one("output", &mut errs) {
            Some(mut s) => {
                let include = s.list("include").map(|l| l.0).unwrap_or_default();
                let plots = s.or("plots", false, &mut errs);
                s.finish(&mut errs);
                OutputConfig { include, plots }
            }
            None => OutputConfig::default(),
        };
        (export, output)
    };
    let Some(mut simulation) = simulation else {
        return Err(errs);
    };
    if let Some(seed) = seed {
        simulation.seed = seed;
    }

    let mut buildings: Vec<BuildingConfig> = Vec::new();
    let mut fan_systems: Vec<FanSystemConfig> = Vec::new();
    let mut controllers = Vec::new();
    let mut attached = Vec::new();
    for s in sections {
        match (s.kind.as_str(), s.args.len()) {
            ("building", 1) => {
                let idx = buildings.len() as u64;
                if let Some(b) = building(s, base, simulation.seed, idx, &mut errs) {
                    buildings.push(b);
                }
            }
            ("fan", 2) => {
                let (sys, id, line) = (s.args[0].clone(), s.args[1].clone(), s.line);
                if !is_ident(&sys) || !is_ident(&id) {
                    errs.push(ConfigError::at(line, "fan system and id must be [A-Za-z0-9_-]"));
                    continue;
                }
                let spec = fan_spec(s, "", &mut errs);
                match fan_systems.iter_mut().find(|f| f.id == sys) {
                    Some(f) => f.fans.push((id, spec)),
                    None => fan_systems.push(FanSystemConfig {
                        id: sys,
                        fans: vec![(id, spec)],
                    }),
                }
            }
            ("controller", 1) => {
                if let Some(c) = controller(s, base, &simulation, &mut errs) {
                    controllers.push(c);
                }
            }
            ("fcu" | "pv" | "battery" | "tank", 1) | ("ev", 2) => attached.push(s),
            _ => errs.push(ConfigError::at(s.line, format!("unknown section [{}]", s.full_name()))),
        }
    }
    for s in attached {
        let Some(b) = buildings.iter_mut().find(|b| b.id == s.args[0]) else {
            errs.push(ConfigError::at(
                s.line,
                format!("[{}] refers to unknown building '{}'", s.full_name(), s.args[0]),
            ));
            continue;
        };
        attach(b, s, &simulation, base, &mut errs);
    }

    for (i, b) in buildings.iter().enumerate() {
        if buildings[..i].iter().any(|o| o.id == b.id) {
            errs.push(ConfigError::at(b.line, format!("duplicate building '{}'", b.id)));
        }
        if RESERVED_SYSTEMS.contains(&b.id.as_str()) {
            errs.push(ConfigError::at(b.line, format!("building id '{}' is reserved", b.id)));
        }
        if fan_systems.iter().any(|f| f.id == b.id) {
            errs.push(ConfigError::at(
                b.line,
                format!("'{}' is both a building and a fan system", b.id),
            ));
        }
    }
    for f in &fan_systems {
        if RESERVED_SYSTEMS.contains(&f.id.as_str()) {
            errs.push(ConfigError::global(format!("fan system id '{}' is reserved", f.id)));
        }
    }
    check_controllers(&controllers, &buildings, &fan_systems, &simulation, &mut errs);

    if !errs.is_empty() {
        return Err(errs);
    }
    Ok(ScenarioConfig {
        simulation,
        weather: weather.unwrap_or(WeatherConfig::Synthetic {
            day: DayParams::default(),
            t_mean_jitter: 0.0,
        }),
        price: price.unwrap_or(PriceConfig::Schedule(PriceSchedule::Tou {
            peak_start: 16,
            peak_end: 21,
            peak: 0.35,
            off_peak: 0.12,
        })),
        buildings,
        fan_systems,
        controllers,
        export,
        output,
        source: text.to_string(),
        base_dir: base.to_path_buf(),
    })
}

fn simulation(mut s: Section, errs: &mut Vec<ConfigError>) -> Option<SimulationConfig> {
    let line = s.line;
    let name = s.string("name").unwrap_or_else(|| "scenario".into());
    let start = match s.take("start") {
        Some((v, l)) => parse_start(&v).or_else(|| {
            errs.push(ConfigError::at(l, format!("start: cannot parse '{v}' as a date/time")));
            None
        }),
        None => {
            errs.push(ConfigError::at(line, "[simulation] is missing 'start'"));
            None
        }
    };
    let dt_line = s.line_of("dt_s");
    let dt = s.f64("dt_s", 900.0, errs);
    let dur_line = s.line_of("duration_h");
    let duration_h: f64 = s.required("duration_h", errs).unwrap_or(0.0);
    let seed = s.or("seed", 0u64, errs);
    let cluster = s.string("cluster").unwrap_or_else(|| "c1".into());
    s.finish(errs);
    let mut ok = true;
    if !(dt > 0.0 && (3600.0 / dt).fract() == 0.0) {
        errs.push(ConfigError::at(dt_line, format!("dt_s = {dt} must divide 3600 s")));
        ok = false;
    }
    let steps = duration_h * 3600.0 / dt;
    if ok && !(duration_h >= 0.0 && (steps - steps.round()).abs() < 1e-9) {
        errs.push(ConfigError::at(
            dur_line,
            "duration_h must be a nonnegative whole number of steps",
        ));
        ok = false;
    }
    if !is_ident(&cluster) {
        errs.push(ConfigError::at(
            line,
            format!("cluster id '{cluster}' must be [A-Za-z0-9_-]"),
        ));
        ok = false;
    }
    let start = start?;
    ok.then(|| SimulationConfig {
        name,
        start,
        steps: if ok { steps.round() as u64 } else { 0 },
        dt,
        seed,
        cluster,
    })
}

fn weather(mut s: Section, base: &Path, errs: &mut Vec<ConfigError>) -> WeatherConfig {
    let line = s.line;
    let source = s.string("source").unwrap_or_else(|| "synthetic".into());
    let w = match source.as_str() {
        "synthetic" => {
            let d = DayParams::default();
            let day = DayParams {
                t_mean: s.f64("t_mean", d.t_mean, errs),
                t_amp: s.f64("t_amp", d.t_amp, errs),
                ghi_peak: s.f64("ghi_peak", d.ghi_peak, errs),
                sunrise_h: s.f64("sunrise_h", d.sunrise_h, errs),
                sunset_h: s.f64("sunset_h", d.sunset_h, errs),
                wb_depression: s.f64("wb_depression", d.wb_depression, errs),
            };
            check(day.validate(), line, errs);
            WeatherConfig::Synthetic {
                day,
                t_mean_jitter: s.f64("t_mean_jitter", 0.0, errs),
            }
        }
        "csv" | "epw" => match s.string("path") {
            Some(p) if source == "csv" => WeatherConfig::Csv(resolve(base, &p)),
            Some(p) => WeatherConfig::Epw(resolve(base, &p)),
            None => {
                errs.push(ConfigError::at(line, "[weather] file sources need 'path'"));
                WeatherConfig::Csv(PathBuf::new())
            }
        },
        other => {
            errs.push(ConfigError::at(line, format!("[weather] unknown source '{other}'")));
            WeatherConfig::Csv(PathBuf::new())
        }
    };
    s.finish(errs);
    w
}

fn price(mut s: Section, base: &Path, errs: &mut Vec<ConfigError>) -> PriceConfig {
    let line = s.line;
    let source = s.string("source").unwrap_or_else(|| "tou".into());
    let p = match source.as_str() {
        "tou" => {
            let sched = PriceSchedule::Tou {
                peak_start: s.or("peak_start", 16u32, errs),
                peak_end: s.or("peak_end", 21u32, errs),
                peak: s.f64("peak", 0.35, errs),
                off_peak: s.f64("off_peak", 0.12, errs),
            };
            check(sched.validate(), line, errs);
            PriceConfig::Schedule(sched)
        }
        "csv" => match s.string("path") {
            Some(p) => PriceConfig::Csv(resolve(base, &p)),
            None => {
                errs.push(ConfigError::at(line, "[price] csv source needs 'path'"));
                PriceConfig::Csv(PathBuf::new())
            }
        },
        other => {
            errs.push(ConfigError::at(line, format!("[price] unknown source '{other}'")));
            PriceConfig::Csv(PathBuf::new())
        }
    };
    s.finish(errs);
    p
}

fn load_model(path: &Path, line: usize, errs: &mut Vec<ConfigError>) -> Option<ThermalModelParams> {
    let r = std::fs::File::open(path)
        .map_err(|e| e.to_string())
        .and_then(|f| read_model(std::io::BufReader::new(f)).map_err(|e| e.to_string()));
    match r {
        Ok(m) => Some(m),
        Err(e) => {
            errs.push(ConfigError::at(line, format!("model {}: {e}", path.display())));
            None
        }
    }
}

fn building(mut s: Section, base: &Path, seed: u64, index: u64, errs: &mut Vec<ConfigError>) -> Option<BuildingConfig> {
    let id = s.args[0].clone();
    let line = s.line;
    if !is_ident(&id) {
        errs.push(ConfigError::at(
            line,
            format!("building id '{id}' must be [A-Za-z0-9_-]"),
        ));
    }
    let zone_kind = s.string("zone").unwrap_or_else(|| "rc".into());
    let mut rc = RcZoneSpec::new(2e7, 0.004).expect("valid defaults");
    rc.capacitance = s.f64("capacitance", rc.capacitance, errs);
    rc.resistance = s.f64("resistance", rc.resistance, errs);
    rc.solar_aperture = s.f64("solar_aperture", 2.0, errs);
    rc.gain_per_occupant = s.f64("gain_per_occupant", 100.0, errs);
    rc.gain_per_activity = s.f64("gain_per_activity", 300.0, errs);
    check(rc.validate(), line, errs);
    let zone = match zone_kind.as_str() {
        "rc" => ZoneConfig::Rc(rc),
        "learned" => {
            let l = s.line_of("model");
            let m = s.string("model").and_then(|p| load_model(&resolve(base, &p), l, errs));
            if m.is_none() && !errs.iter().any(|e| e.line == Some(l)) {
                errs.push(ConfigError::at(line, "learned zones need 'model'"));
            }
            ZoneConfig::Learned(m?)
        }
        other => {
            errs.push(ConfigError::at(line, format!("unknown zone kind '{other}'")));
            return None;
        }
    };
    let predictor = match s.take("predictor") {
        None => None,
        Some((v, l)) => match v.as_str() {
            "rc" => match &zone {
                ZoneConfig::Rc(spec) => Some(ThermalModelParams::from_rc(spec, true)),
                _ => {
                    errs.push(ConfigError::at(l, "predictor = rc needs an rc zone"));
                    None
                }
            },
            p => load_model(&resolve(base, p), l, errs),
        },
    };
    let t0 = s.f64("t0", 24.0, errs);

    let occ_kind = s.string("occupancy").unwrap_or_else(|| "synthetic".into());
    let mut occ = OccupancyParams {
        seed: seed.wrapping_mul(1_000_003).wrapping_add(index),
        ..Default::default()
    };
    occ.occupants = s.f64("occupants", occ.occupants, errs);
    occ.occupied_offset_k = s.f64("occupied_offset_k", occ.occupied_offset_k, errs);
    occ.unoccupied_offset_k = s.f64("unoccupied_offset_k", occ.unoccupied_offset_k, errs);
    if let Some(w) = s.windows("weekday_windows", errs) {
        occ.weekday_windows = w;
    }
    if let Some(w) = s.windows("weekend_windows", errs) {
        occ.weekend_windows = w;
    }
    check(occ.validate(), line, errs);
    let occupancy = match occ_kind.as_str() {
        "synthetic" => OccupancyConfig::Synthetic(occ),
        "csv" => match s.string("occupancy_path") {
            Some(p) => OccupancyConfig::Csv(resolve(base, &p)),
            None => {
                errs.push(ConfigError::at(line, "csv occupancy needs 'occupancy_path'"));
                return None;
            }
        },
        other => {
            errs.push(ConfigError::at(line, format!("unknown occupancy source '{other}'")));
            return None;
        }
    };

    let electrical = ElectricalNetworkSpec {
        base: s.f64("base_load", 150.0, errs),
        appliances: s.pairs("appliances", errs).unwrap_or_else(|| {
            vec![
                ("cooking".into(), 2000.0),
                ("tv".into(), 150.0),
                ("laundry".into(), 500.0),
            ]
        }),
        lighting: s.f64("lighting", 200.0, errs),
    };
    check(electrical.validate(), line, errs);
    s.finish(errs);
    Some(BuildingConfig {
        id,
        line,
        zone,
        t0,
        occupancy,
        electrical,
        predictor,
        fcu: None,
        pv: None,
        battery: None,
        evs: Vec::new(),
        tank: None,
    })
}

fn fan_spec(mut s: Section, prefix: &str, errs: &mut Vec<ConfigError>) -> FanSpec {
    let k = |n: &str| format!("{prefix}{n}");
    let line = s.line;
    let kind = match s.string(&k("kind")).as_deref().unwrap_or("vfd") {
        "vfd" => FanKind::Vfd {
            turndown: s.f64(&k("turndown"), 0.2, errs),
        },
        "constant" => FanKind::Constant,
        "staged" => {
            let (stages, l) = s
                .list(&k("stages"))
                .unwrap_or_else(|| (vec!["0".into(), "0.5".into(), "1".into()], line));
            let parsed: Result<Vec<f64>, _> = stages.iter().map(|x| x.parse::<f64>()).collect();
            match parsed {
                Ok(v) => FanKind::Staged(v),
                Err(_) => {
                    errs.push(ConfigError::at(l, "stages must be numbers"));
                    FanKind::Constant
                }
            }
        }
        other => {
            errs.push(ConfigError::at(line, format!("unknown fan kind '{other}'")));
            FanKind::Constant
        }
    };
    let spec = FanSpec {
        kind,
        rated_flow: s.f64(&k("rated_flow"), 1.0, errs),
        rated_power: s.f64(&k("rated_power"), 500.0, errs),
    };
    check(spec.validate(), line, errs);
    if prefix.is_empty() {
        s.finish(errs);
    }
    spec
}

fn attach(b: &mut BuildingConfig, mut s: Section, sim: &SimulationConfig, base: &Path, errs: &mut Vec<ConfigError>) {
    let line = s.line;
    match s.kind.as_str() {
        "fcu" => {
            let d = FcuAssembly::default();
            let fan = fan_spec_prefixed(&mut s, "fan_", &d.fan, errs);
            let pump = FanSpec {
                kind: FanKind::Vfd { turndown: 0.0 },
                rated_flow: s.f64("pump_rated_flow", d.pump.rated_flow, errs),
                rated_power: s.f64("pump_rated_power", d.pump.rated_power, errs),
            };
            let coil = CoilSpec {
                effectiveness: s.f64("coil_effectiveness", d.coil.effectiveness, errs),
            };
            let capacity = s.f64("chiller_capacity", d.chiller.capacity, errs);
            let mode = match s.string("chiller").as_deref().unwrap_or("carnot") {
                "carnot" => ChillerMode::Carnot {
                    eta: s.f64("chiller_eta", 0.5, errs),
                },
                "curve" => {
                    let cop_ref = s.f64("cop_ref", 4.0, errs);
                    let a = match s.list("curve") {
                        Some((v, l)) => {
                            let p: Vec<f64> = v.iter().filter_map(|x| x.parse().ok()).collect();
                            if p.len() != 3 {
                                errs.push(ConfigError::at(l, "curve needs three coefficients"));
                                [1.0, 0.0, 0.0]
                            } else {
                                [p[0], p[1], p[2]]
                            }
                        }
                        None => [0.3, 1.1, -0.4],
                    };
                    ChillerMode::Curve { cop_ref, a }
                }
                other => {
                    errs.push(ConfigError::at(line, format!("unknown chiller '{other}'")));
                    ChillerMode::Carnot { eta: 0.5 }
                }
            };
            let tower = if s.or("tower", false, errs) {
                Some(TowerLoop {
                    tower: CoolingTowerSpec {
                        effectiveness: s.f64("tower_effectiveness", 0.6, errs),
                        fan_power: s.f64("tower_fan_power", 300.0, errs),
                    },
                    m_cw: s.f64("tower_flow", 1.0, errs),
                    approach: s.f64("tower_approach", 5.0, errs),
                })
            } else {
                None
            };
            let ice = if s.has("ice_capacity") {
                Some(IceStorageSpec {
                    capacity: s.f64("ice_capacity", 0.0, errs),
                    efficiency: s.f64("ice_efficiency", 0.9, errs),
                })
            } else {
                None
            };
            let assembly = FcuAssembly {
                fan,
                pump,
                coil,
                chiller: ChillerSpec { mode, capacity },
                t_chw: s.f64("t_chw", d.t_chw, errs),
                t_cond: s.f64("t_cond", d.t_cond, errs),
                tower,
                ice,
            };
            check(assembly.validate(), line, errs);
            let off_after_h = s.parsed("off_after_h", errs);
            b.fcu = Some(FcuConfig { assembly, off_after_h });
        }
        "pv" => {
            let d = PvSpec::default();
            let spec = PvSpec {
                rated_power: s.f64("rated_power", d.rated_power, errs),
                gamma: s.f64("gamma", d.gamma, errs),
                soiling: s.f64("soiling", d.soiling, errs),
                shading: s.f64("shading", d.shading, errs),
                inverter_eff: s.f64("inverter_eff", d.inverter_eff, errs),
                degradation: s.f64("degradation", d.degradation, errs),
                k_t: s.f64("k_t", d.k_t, errs),
            };
            check(spec.validate(), line, errs);
            let age = s.f64("age_years", 0.0, errs);
            b.pv = Some((spec, age));
        }
        "battery" => {
            let spec = battery_spec(&mut s, errs);
            let soc0 = s.f64("soc0", 0.5, errs);
            check(spec.validate(), line, errs);
            if !(spec.soc_min..=spec.soc_max).contains(&soc0) {
                errs.push(ConfigError::at(line, "soc0 must lie within [soc_min, soc_max]"));
            }
            b.battery = Some((spec, soc0));
        }
        "ev" => {
            let id = s.args[1].clone();
            if !is_ident(&id) {
                errs.push(ConfigError::at(line, format!("EV id '{id}' must be [A-Za-z0-9_-]")));
            }
            if RESERVED_COMPONENTS.contains(&id.as_str()) || b.evs.iter().any(|e| e.id == id) {
                errs.push(ConfigError::at(
                    line,
                    format!("EV id '{id}' is taken by another component"),
                ));
            }
            let mut battery = battery_spec(&mut s, errs);
            if !s.has("capacity") {
                battery.capacity = 60.0;
            }
            if !s.has("p_max_charge") {
                battery.p_max_charge = 7000.0;
            }
            let v2g = s.or("v2g", false, errs);
            let soc0 = s.f64("soc0", 0.5, errs);
            let days = (sim.steps as f64 * sim.dt / 86_400.0).ceil() as usize + 1;
            let schedule = match s.string("schedule") {
                Some(p) => match load_ev_schedule_csv(&resolve(base, &p)) {
                    Ok(v) => v,
                    Err(e) => {
                        errs.push(ConfigError::at(line, e.to_string()));
                        Vec::new()
                    }
                },
                None => daily_schedule(
                    sim.start.date(),
                    days,
                    s.f64("arrive_h", 18.0, errs),
                    s.f64("depart_h", 7.5, errs),
                    s.f64("trip_kwh", 8.0, errs),
                    s.f64("required_soc", 0.8, errs),
                ),
            };
            let spec = EvSpec { battery, v2g, schedule };
            check(spec.validate(), line, errs);
            let p_max = spec.battery.p_max_charge;
            b.evs.push(EvConfig { id, spec, soc0, p_max });
        }
        "tank" => {
            let spec = WaterTankSpec {
                mass: s.f64("mass", 200.0, errs),
                ua: s.f64("ua", 2.0, errs),
                heater: s.f64("heater", 4500.0, errs),
                t_inlet: s.f64("t_inlet", 15.0, errs),
                t_ambient: s.f64("t_ambient", 20.0, errs),
            };
            check(spec.validate(sim.dt), line, errs);
            let t0 = s.f64("t0", 55.0, errs);
            let draws = s
                .pairs("draws", errs)
                .unwrap_or_else(|| vec![("cooking".into(), 0.02), ("laundry".into(), 0.05)]);
            b.tank = Some(TankConfig { spec, t0, draws });
        }
        _ => unreachable!("dispatched on section kind"),
    }
    s.finish(errs);
}

/// Reads `fan_*` keys from `s` (consuming them) with defaults from `d`.
fn fan_spec_prefixed(s: &mut Section, prefix: &str, d: &FanSpec, errs: &mut Vec<ConfigError>) -> FanSpec {
    let k = |n: &str| format!("{prefix}{n}");
    let line = s.line;
    let default_turndown = match d.kind {
        FanKind::Vfd { turndown } => turndown,
        _ => 0.2,
    };
    let kind = match s.string(&k("kind")).as_deref().unwrap_or("vfd") {
        "vfd" => FanKind::Vfd {
            turndown: s.f64(&k("turndown"), default_turndown, errs),
        },
        "constant" => FanKind::Constant,
        "staged" => match s.list(&k("stages")) {
            Some((v, l)) => match v.iter().map(|x| x.parse::<f64>()).collect::<Result<Vec<_>, _>>() {
                Ok(v) => FanKind::Staged(v),
                Err(_) => {
                    errs.push(ConfigError::at(l, "stages must be numbers"));
                    FanKind::Constant
                }
            },
            None => FanKind::Staged(vec![0.0, 0.5, 1.0]),
        },
        other => {
            errs.push(ConfigError::at(line, format!("unknown fan kind '{other}'")));
            FanKind::Constant
        }
    };
    let spec = FanSpec {
        kind,
        rated_flow: s.f64(&k("rated_flow"), d.rated_flow, errs),
        rated_power: s.f64(&k("rated_power"), d.rated_power, errs),
    };
    check(spec.validate(), line, errs);
    spec
}

fn battery_spec(s: &mut Section, errs: &mut Vec<ConfigError>) -> BatterySpec {
    let d = BatterySpec::default();
    BatterySpec {
        capacity: s.f64("capacity", d.capacity, errs),
        soc_min: s.f64("soc_min", d.soc_min, errs),
        soc_max: s.f64("soc_max", d.soc_max, errs),
        eta_charge: s.f64("eta_charge", d.eta_charge, errs),
        eta_discharge: s.f64("eta_discharge", d.eta_discharge, errs),
        p_max_charge: s.f64("p_max_charge", d.p_max_charge, errs),
        p_max_discharge: s.f64("p_max_discharge", d.p_max_discharge, errs),
        derate: d.derate,
        k_cycle: s.f64("k_cycle", d.k_cycle, errs),
        k_calendar: s.f64("k_calendar", d.k_calendar, errs),
        soh_min: s.f64("soh_min", d.soh_min, errs),
    }
}

fn hvac_mode(s: &mut Section, default: HvacMode, errs: &mut Vec<ConfigError>) -> HvacMode {
    match s.take("mode") {
        None => default,
        Some((v, l)) => match v.as_str() {
            "cooling" => HvacMode::Cooling,
            "heating" => HvacMode::Heating,
            _ => {
                errs.push(ConfigError::at(
                    l,
                    format!("mode must be cooling or heating, found '{v}'"),
                ));
                default
            }
        },
    }
}

fn controller(
    mut s: Section,
    base: &Path,
    sim: &SimulationConfig,
    errs: &mut Vec<ConfigError>,
) -> Option<ControllerConfig> {
    let name = s.args[0].clone();
    let line = s.line;
    let ty: Option<String> = s.required("type", errs);
    let target: Option<String> = s.required("target", errs);
    let (ty, target) = (ty?, target?);
    let fcu = |s: &mut Section, errs: &mut Vec<ConfigError>, v_key: &str, v_default: f64| FcuRealization {
        t_sa: s.f64("t_sa", 13.0, errs),
        v_max: s.f64(v_key, v_default, errs),
    };
    let kind = match ty.as_str() {
        "deadband_fcu" => {
            let cfg = DeadbandConfig {
                setpoint: s.f64("setpoint", 24.0, errs),
                half_band: s.f64("half_band", 1.0, errs),
                mode: hvac_mode(&mut s, HvacMode::Cooling, errs),
            };
            check(cfg.validate(), line, errs);
            ControllerKind::DeadbandFcu {
                cfg,
                switch_margin: s.f64("switch_margin", 0.0, errs),
                fcu: fcu(&mut s, errs, "v_on", 0.5),
                comfort_offset: s.or("use_comfort_offset", false, errs),
            }
        }
        "mpc_fcu" => {
            let d = MpcConfig::default();
            let cfg = MpcConfig {
                horizon: s.or("horizon", 24usize, errs),
                t_lo: s.f64("t_lo", d.t_lo, errs),
                t_hi: s.f64("t_hi", d.t_hi, errs),
                comfort_weight: s.f64("comfort_weight", d.comfort_weight, errs),
                cop: s.f64("cop", d.cop, errs),
                dt: sim.dt,
                iterations: s.or("iterations", 100usize, errs),
                step_size: s.f64("step_size", d.step_size, errs),
                hinge_beta: s.f64("hinge_beta", d.hinge_beta, errs),
                abs_eps: s.f64("abs_eps", d.abs_eps, errs),
            };
            check(cfg.validate(), line, errs);
            let model = match s.take("model") {
                None => None,
                Some((v, l)) if v == "zone" => {
                    let _ = l;
                    None
                }
                Some((p, l)) => Some(load_model(&resolve(base, &p), l, errs)?),
            };
            let seasonal_naive = match s.take("forecast") {
                None => false,
                Some((v, l)) => match v.as_str() {
                    "perfect" => false,
                    "seasonal_naive" => true,
                    _ => {
                        errs.push(ConfigError::at(l, "forecast must be perfect or seasonal_naive"));
                        false
                    }
                },
            };
            ControllerKind::MpcFcu {
                cfg,
                model,
                q_min: s.f64("q_min", -6000.0, errs),
                fcu: fcu(&mut s, errs, "v_max", 1.0),
                seasonal_naive,
            }
        }
        "fan_profile" => ControllerKind::FanProfile(FanProfile {
            mean: s.f64("mean", 0.5, errs),
            amplitude: s.f64("amplitude", 0.5, errs),
            period_h: s.f64("period_h", 24.0, errs),
            phase_h: s.f64("phase_h", 0.0, errs),
        }),
        "tou_der" => {
            let tou = TouDispatchConfig {
                peak_start: s.or("peak_start", 16u32, errs),
                peak_end: s.or("peak_end", 21u32, errs),
                charge_target: s.f64("charge_target", 0.9, errs),
                reserve_floor: s.f64("reserve_floor", 0.2, errs),
                p_max_charge: s.f64("p_max_charge", 3000.0, errs),
                p_max_discharge: s.f64("p_max_discharge", 5000.0, errs),
            };
            ControllerKind::TouDer {
                tou,
                ev_target_soc: s.f64("ev_target_soc", 0.9, errs),
            }
        }
        "tank_deadband" => {
            let cfg = DeadbandConfig {
                setpoint: s.f64("setpoint", 55.0, errs),
                half_band: s.f64("half_band", 3.0, errs),
                mode: hvac_mode(&mut s, HvacMode::Heating, errs),
            };
            check(cfg.validate(), line, errs);
            ControllerKind::Tank(crate::sim::TankControl::Deadband(cfg))
        }
        "tank_pid" => {
            let cfg = PidConfig {
                kp: s.f64("kp", 0.5, errs),
                ki: s.f64("ki", 1e-4, errs),
                kd: s.f64("kd", 0.0, errs),
                u_min: 0.0,
                u_max: 1.0,
                i_clamp: s.f64("i_clamp", 1e4, errs),
            };
            check(cfg.validate(), line, errs);
            ControllerKind::Tank(crate::sim::TankControl::Pid {
                cfg,
                setpoint: s.f64("setpoint", 55.0, errs),
            })
        }
        "cluster_peak" => ControllerKind::ClusterPeak {
            cap: s.f64("cap", 20_000.0, errs),
        },
        other => {
            errs.push(ConfigError::at(
                s.line_of("type"),
                format!("unknown controller type '{other}'"),
            ));
            return None;
        }
    };
    s.finish(errs);
    Some(ControllerConfig {
        name,
        line,
        target,
        kind,
    })
}

fn check_controllers(
    ctrls: &[ControllerConfig],
    buildings: &[BuildingConfig],
    fans: &[FanSystemConfig],
    sim: &SimulationConfig,
    errs: &mut Vec<ConfigError>,
) {
    let mut zone_ctrl: Vec<&str> = Vec::new();
    let mut der_ctrl: Vec<&str> = Vec::new();
    let mut tank_ctrl: Vec<&str> = Vec::new();
    let mut fan_ctrl: Vec<&str> = Vec::new();
    let mut cluster_ctrl = 0;
    for c in ctrls {
        let b = buildings.iter().find(|b| b.id == c.target);
        let mut need_building = |what: &str| -> Option<&BuildingConfig> {
            if b.is_none() {
                errs.push(ConfigError::at(
                    c.line,
                    format!(
                        "controller '{}' ({what}) targets unknown building '{}'",
                        c.name, c.target
                    ),
                ));
            }
            b
        };
        match &c.kind {
            ControllerKind::DeadbandFcu { .. } | ControllerKind::MpcFcu { .. } => {
                if let Some(b) = need_building("zone") {
                    if b.fcu.is_none() {
                        errs.push(ConfigError::at(
                            c.line,
                            format!("building '{}' has no [fcu.{}]", b.id, b.id),
                        ));
                    }
                    if zone_ctrl.contains(&b.id.as_str()) {
                        errs.push(ConfigError::at(
                            c.line,
                            format!("second zone controller for '{}'", b.id),
                        ));
                    }
                    zone_ctrl.push(&b.id);
                }
                if let ControllerKind::DeadbandFcu { cfg, switch_margin, .. } = &c.kind {
                    if !(*switch_margin >= 0.0 && *switch_margin < cfg.half_band) {
                        errs.push(ConfigError::at(c.line, "switch_margin must lie in [0, half_band)"));
                    }
                }
            }
            ControllerKind::TouDer { tou, .. } => {
                if let Some(b) = need_building("der") {
                    if let Some((spec, _)) = &b.battery {
                        check(tou.validate(spec.soc_min, spec.soc_max), c.line, errs);
                    }
                    if der_ctrl.contains(&b.id.as_str()) {
                        errs.push(ConfigError::at(c.line, format!("second DER controller for '{}'", b.id)));
                    }
                    der_ctrl.push(&b.id);
                }
            }
            ControllerKind::Tank(_) => {
                if let Some(b) = need_building("tank") {
                    if b.tank.is_none() {
                        errs.push(ConfigError::at(
                            c.line,
                            format!("building '{}' has no [tank.{}]", b.id, b.id),
                        ));
                    }
                    if tank_ctrl.contains(&b.id.as_str()) {
                        errs.push(ConfigError::at(
                            c.line,
                            format!("second tank controller for '{}'", b.id),
                        ));
                    }
                    tank_ctrl.push(&b.id);
                }
            }
            ControllerKind::FanProfile(_) => {
                if !fans.iter().any(|f| f.id == c.target) {
                    errs.push(ConfigError::at(
                        c.line,
                        format!("controller '{}' targets unknown fan system '{}'", c.name, c.target),
                    ));
                } else if fan_ctrl.contains(&c.target.as_str()) {
                    errs.push(ConfigError::at(
                        c.line,
                        format!("second controller for fan system '{}'", c.target),
                    ));
                }
                fan_ctrl.push(&c.target);
            }
            ControllerKind::ClusterPeak { cap } => {
                if c.target != sim.cluster {
                    errs.push(ConfigError::at(
                        c.line,
                        format!("controller '{}' targets unknown cluster '{}'", c.name, c.target),
                    ));
                }
                if !(*cap > 0.0) {
                    errs.push(ConfigError::at(c.line, "cap must be > 0"));
                }
                cluster_ctrl += 1;
                if cluster_ctrl > 1 {
                    errs.push(ConfigError::at(c.line, "only one cluster controller is supported"));
                }
            }
        }
    }
    for b in buildings {
        if b.fcu.is_some() && !zone_ctrl.contains(&b.id.as_str()) {
            errs.push(ConfigError::at(
                b.line,
                format!("building '{}' has an FCU but no zone controller", b.id),
            ));
        }
        if (b.battery.is_some() || !b.evs.is_empty()) && !der_ctrl.contains(&b.id.as_str()) {
            errs.push(ConfigError::at(
                b.line,
                format!("building '{}' has storage but no tou_der controller", b.id),
            ));
        }
        if b.tank.is_some() && !tank_ctrl.contains(&b.id.as_str()) {
            errs.push(ConfigError::at(
                b.line,
                format!("building '{}' has a tank but no tank controller", b.id),
            ));
        }
    }
    for f in fans {
        if !fan_ctrl.contains(&f.id.as_str()) {
            errs.push(ConfigError::global(format!(
                "fan system '{}' has no fan_profile controller",
                f.id
            )));
        }
    }
}
