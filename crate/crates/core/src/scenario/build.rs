use std::path::Path;

use super::config::*;
use super::text::ConfigError;
use super::ScenarioError;
use crate::disturbance::{load_epw_subset, load_occupancy_csv, load_price_csv, load_weather_csv};
use crate::networks::ZoneModel;
use crate::runtime::{AggFn, Domain, Environment, HierPath, Module, SimClock};
use crate::sim::*;
use crate::thermal::ThermalModelParams;

/// Paths of one building's modules.
#[derive(Debug, Clone)]
pub struct BuildingPaths {
    pub id: String,
    pub zone: HierPath,
    pub zone_controller: Option<HierPath>,
    pub predictor: Option<HierPath>,
    pub fcu: Option<HierPath>,
    /// `c/electrical/<id>`; building `power` aggregates here.
    pub electrical: HierPath,
    pub bus: HierPath,
    pub grid: HierPath,
    pub pv: Option<HierPath>,
    pub battery: Option<HierPath>,
    pub evs: Vec<HierPath>,
    pub tank: Option<HierPath>,
}

#[derive(Debug, Clone)]
pub struct FanSystemPaths {
    pub id: String,
    pub controller: HierPath,
    pub fans: Vec<HierPath>,
}

pub struct BuiltScenario {
    pub env: Environment,
    pub cluster: HierPath,
    pub buildings: Vec<BuildingPaths>,
    pub fan_systems: Vec<FanSystemPaths>,
}

fn rt(e: crate::runtime::RuntimeError) -> ScenarioError {
    ScenarioError::Runtime(e)
}

fn sim(e: SimError) -> ScenarioError {
    ScenarioError::Build(e.to_string())
}

fn data(what: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Build(format!("{}: {e}", what.display()))
}

/// Assembles the environment. Wiring is checked but the environment is not
/// initialized.
pub fn build_environment(cfg: &ScenarioConfig) -> Result<BuiltScenario, ScenarioError> {
    let s = &cfg.simulation;
    let clock = SimClock::new(s.start, s.dt);
    let mut env = Environment::new(clock);
    for v in ["power", "generation", "grid"] {
        env.set_aggregation(v, AggFn::Sum);
    }
    let c = HierPath::cluster(&s.cluster).map_err(rt)?;
    let thermal = HierPath::new(&s.cluster, Some(Domain::Thermal), None, None).map_err(rt)?;
    let elec = HierPath::new(&s.cluster, Some(Domain::Electrical), None, None).map_err(rt)?;
    let water = HierPath::new(&s.cluster, Some(Domain::Water), None, None).map_err(rt)?;
    let sys = |d: &HierPath, id: &str| d.child(id).map_err(rt);
    let comp = |d: &HierPath, b: &str, id: &str| d.child(b).and_then(|p| p.child(id)).map_err(rt);
    let add = |env: &mut Environment, m: Box<dyn Module>| env.register_module(m).map_err(rt);

    let weather_src = match &cfg.weather {
        WeatherConfig::Synthetic { day, t_mean_jitter } => WeatherSource::Synthetic {
            day: *day,
            t_mean_jitter: *t_mean_jitter,
            seed: s.seed,
        },
        WeatherConfig::Csv(p) => WeatherSource::Table(load_weather_csv(p, s.dt).map_err(|e| data(p, e))?),
        WeatherConfig::Epw(p) => WeatherSource::Table(load_epw_subset(p, s.dt).map_err(|e| data(p, e))?),
    };
    if let WeatherSource::Table(rows) = &weather_src {
        if (rows.len() as u64) < s.steps + 1 {
            return Err(ScenarioError::Build(format!(
                "weather table has {} steps, run needs {}",
                rows.len(),
                s.steps + 1
            )));
        }
    }
    let prices = match &cfg.price {
        PriceConfig::Schedule(p) => p.clone(),
        PriceConfig::Csv(p) => load_price_csv(p, s.dt).map_err(|e| data(p, e))?,
    };
    let weather = sys(&thermal, "outdoor")?;
    let utility = sys(&elec, "utility")?;
    add(
        &mut env,
        Box::new(WeatherModule::new(weather.clone(), weather_src.clone())),
    )?;
    add(&mut env, Box::new(PriceModule::new(utility, prices.clone())))?;

    let cluster_ctrl = cfg
        .controllers
        .iter()
        .find(|k| matches!(k.kind, ControllerKind::ClusterPeak { .. }));
    let ctrl_for =
        |id: &str, pred: fn(&ControllerKind) -> bool| cfg.controllers.iter().find(|k| k.target == id && pred(&k.kind));

    let mut out_b = Vec::new();
    for b in &cfg.buildings {
        let id = b.id.as_str();
        let occ = comp(&thermal, id, "occupancy")?;
        let occ_src = match &b.occupancy {
            OccupancyConfig::Synthetic(p) => OccupancySource::Synthetic(p.clone()),
            OccupancyConfig::Csv(p) => OccupancySource::Table(load_occupancy_csv(p, s.dt).map_err(|e| data(p, e))?),
        };
        add(&mut env, Box::new(OccupancyModule::new(occ.clone(), occ_src.clone())))?;

        let zone = comp(&thermal, id, "zone")?;
        let zctl_path = sys(&thermal, id)?;
        let fcu_path = comp(&thermal, id, "fcu")?;
        let zone_model = match &b.zone {
            ZoneConfig::Rc(r) => ZoneModel::Rc(r.clone()),
            ZoneConfig::Learned(p) => ZoneModel::Learned(p.clone()),
        };
        let hvac = b.fcu.as_ref().map(|_| &fcu_path);
        add(
            &mut env,
            Box::new(ZoneModule::new(
                zone.clone(),
                zone_model,
                "t_zone",
                b.t0,
                &weather,
                &occ,
                hvac,
            )),
        )?;
        let predictor = match &b.predictor {
            Some(p) => {
                let path = comp(&thermal, id, "zone_pred")?;
                add(
                    &mut env,
                    Box::new(ZoneModule::new(
                        path.clone(),
                        ZoneModel::Learned(p.clone()),
                        "t_pred",
                        b.t0,
                        &weather,
                        &occ,
                        hvac,
                    )),
                )?;
                Some(path)
            }
            None => None,
        };

        let curtail_var = format!("curtail_{id}");
        let curtail = cluster_ctrl.map(|_| (&c, curtail_var.as_str()));
        let mut zone_controller = None;
        if let Some(f) = &b.fcu {
            let off_after = f.off_after_h.map(|h| (h * 3600.0 / s.dt).round() as u64);
            add(
                &mut env,
                Box::new(FcuModule::new(
                    fcu_path.clone(),
                    f.assembly.clone(),
                    &zctl_path,
                    &zone,
                    &weather,
                    off_after,
                )),
            )?;
            let k = ctrl_for(id, |k| {
                matches!(k, ControllerKind::DeadbandFcu { .. } | ControllerKind::MpcFcu { .. })
            })
            .ok_or_else(|| ScenarioError::Build(format!("building '{id}' has no zone controller")))?;
            let m: Box<dyn Module> = match &k.kind {
                ControllerKind::DeadbandFcu {
                    cfg: d,
                    switch_margin,
                    fcu,
                    comfort_offset,
                } => Box::new(
                    DeadbandFcuController::new(
                        zctl_path.clone(),
                        *d,
                        *switch_margin,
                        *fcu,
                        &zone,
                        curtail,
                        comfort_offset.then_some(&occ),
                    )
                    .map_err(sim)?,
                ),
                ControllerKind::MpcFcu {
                    cfg: m,
                    model,
                    q_min,
                    fcu,
                    seasonal_naive,
                } => {
                    let params = match (model, &b.zone) {
                        (Some(p), _) => p.clone(),
                        (None, ZoneConfig::Rc(r)) => ThermalModelParams::from_rc(r, true),
                        (None, ZoneConfig::Learned(p)) => p.clone(),
                    };
                    let forecast = if *seasonal_naive {
                        Forecast::SeasonalNaive
                    } else {
                        Forecast::Perfect {
                            weather: weather_src.clone(),
                            occupancy: occ_src.clone(),
                        }
                    };
                    Box::new(
                        MpcFcuController::new(
                            zctl_path.clone(),
                            m.clone(),
                            params,
                            forecast,
                            prices.clone(),
                            *q_min,
                            *fcu,
                            clock,
                            &zone,
                            &weather,
                            &occ,
                            curtail,
                        )
                        .map_err(sim)?,
                    )
                }
                _ => unreachable!(),
            };
            add(&mut env, m)?;
            zone_controller = Some(zctl_path.clone());
        }

        // electrical: loads, meters, DER, bus, grid
        let belec = sys(&elec, id)?;
        let mut loads = Vec::new();
        let plug = comp(&elec, id, "plug")?;
        add(
            &mut env,
            Box::new(LoadModule::new(
                plug.clone(),
                LoadKind::Plug,
                b.electrical.clone(),
                &occ,
            )),
        )?;
        loads.push(plug);
        let light = comp(&elec, id, "lighting")?;
        add(
            &mut env,
            Box::new(LoadModule::new(
                light.clone(),
                LoadKind::Lighting,
                b.electrical.clone(),
                &occ,
            )),
        )?;
        loads.push(light);
        if b.fcu.is_some() {
            let m = comp(&elec, id, "hvac")?;
            add(&mut env, Box::new(MeterModule::new(m.clone(), &fcu_path, "elec_power")))?;
            loads.push(m);
        }
        let tank = match &b.tank {
            Some(t) => {
                let tank_path = comp(&water, id, "tank")?;
                let tctl = sys(&water, id)?;
                let k = ctrl_for(id, |k| matches!(k, ControllerKind::Tank(_)))
                    .ok_or_else(|| ScenarioError::Build(format!("building '{id}' has no tank controller")))?;
                let ControllerKind::Tank(control) = &k.kind else {
                    unreachable!()
                };
                add(
                    &mut env,
                    Box::new(TankModule::new(
                        tank_path.clone(),
                        t.spec,
                        t.draws.clone(),
                        t.t0,
                        &tctl,
                        &occ,
                    )),
                )?;
                add(
                    &mut env,
                    Box::new(TankController::new(tctl, *control, &tank_path).map_err(sim)?),
                )?;
                let m = comp(&elec, id, "dhw")?;
                add(
                    &mut env,
                    Box::new(MeterModule::new(m.clone(), &tank_path, "heater_power")),
                )?;
                loads.push(m);
                Some(tank_path)
            }
            None => None,
        };

        let bus = comp(&elec, id, "bus")?;
        let pv = match &b.pv {
            Some((spec, age)) => {
                let p = comp(&elec, id, "pv")?;
                add(&mut env, Box::new(PvModule::new(p.clone(), *spec, *age, &weather)))?;
                Some(p)
            }
            None => None,
        };
        let der = ctrl_for(id, |k| matches!(k, ControllerKind::TouDer { .. }));
        let battery = match &b.battery {
            Some((spec, soc0)) => {
                let p = comp(&elec, id, "battery")?;
                add(
                    &mut env,
                    Box::new(BatteryModule::new(p.clone(), spec.clone(), *soc0, &bus, &weather)),
                )?;
                Some(p)
            }
            None => None,
        };
        let mut evs = Vec::new();
        for ev in &b.evs {
            let p = comp(&elec, id, &ev.id)?;
            add(
                &mut env,
                Box::new(EvModule::new(
                    p.clone(),
                    ev.spec.clone(),
                    ev.soc0,
                    clock,
                    &bus,
                    &format!("ev_setpoint_{}", ev.id),
                    &weather,
                )),
            )?;
            evs.push((ev.id.clone(), p));
        }
        let der_path = der.map(|_| belec.clone());
        if let Some(k) = der {
            let ControllerKind::TouDer { tou, ev_target_soc } = &k.kind else {
                unreachable!()
            };
            let batt = match (&battery, &b.battery) {
                (Some(p), Some((spec, _))) => Some((p, tou.clone(), spec.clone())),
                _ => None,
            };
            let ev_cfg = b
                .evs
                .iter()
                .zip(&evs)
                .map(|(e, (_, p))| {
                    (
                        EvRequestConfig {
                            id: e.id.clone(),
                            target_soc: *ev_target_soc,
                            p_max: e.p_max,
                        },
                        p.clone(),
                    )
                })
                .collect();
            add(
                &mut env,
                Box::new(DerController::new(belec.clone(), &bus, pv.as_ref(), batt, ev_cfg).map_err(sim)?),
            )?;
        }
        add(
            &mut env,
            Box::new(
                BusModule::new(
                    bus.clone(),
                    pv.as_ref(),
                    &loads,
                    der_path.as_ref(),
                    battery.as_ref(),
                    &evs,
                )
                .map_err(sim)?,
            ),
        )?;
        let grid = comp(&elec, id, "grid")?;
        let ev_paths: Vec<HierPath> = evs.iter().map(|(_, p)| p.clone()).collect();
        add(
            &mut env,
            Box::new(GridModule::new(
                grid.clone(),
                &bus,
                pv.as_ref(),
                battery.as_ref(),
                &ev_paths,
                cfg.export,
            )),
        )?;

        out_b.push(BuildingPaths {
            id: id.to_string(),
            zone,
            zone_controller,
            predictor,
            fcu: b.fcu.as_ref().map(|_| fcu_path),
            electrical: belec,
            bus,
            grid,
            pv,
            battery,
            evs: ev_paths,
            tank,
        });
    }

    let mut out_f = Vec::new();
    for f in &cfg.fan_systems {
        let ctl = sys(&thermal, &f.id)?;
        let k = ctrl_for(&f.id, |k| matches!(k, ControllerKind::FanProfile(_)))
            .ok_or_else(|| ScenarioError::Build(format!("fan system '{}' has no controller", f.id)))?;
        let ControllerKind::FanProfile(profile) = &k.kind else {
            unreachable!()
        };
        add(&mut env, Box::new(FanProfileController::new(ctl.clone(), *profile)))?;
        let mut fans = Vec::new();
        for (fid, spec) in &f.fans {
            let p = comp(&thermal, &f.id, fid)?;
            add(
                &mut env,
                Box::new(FanModule::new(p.clone(), spec.clone(), &ctl, "v_setpoint")),
            )?;
            fans.push(p);
        }
        out_f.push(FanSystemPaths {
            id: f.id.clone(),
            controller: ctl,
            fans,
        });
    }

    if let Some(k) = cluster_ctrl {
        let ControllerKind::ClusterPeak { cap } = k.kind else {
            unreachable!()
        };
        let targets: Vec<(String, HierPath)> = out_b.iter().map(|b| (b.id.clone(), b.electrical.clone())).collect();
        add(
            &mut env,
            Box::new(ClusterPeakController::new(c.clone(), cap, &targets).map_err(sim)?),
        )?;
    }

    let violations = env.validate_wiring();
    if !violations.is_empty() {
        return Err(ScenarioError::Config(
            violations
                .iter()
                .map(|v| ConfigError::global(format!("wiring: {v}")))
                .collect(),
        ));
    }
    Ok(BuiltScenario {
        env,
        cluster: c,
        buildings: out_b,
        fan_systems: out_f,
    })
}
