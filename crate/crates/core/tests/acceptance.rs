//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

mod common;

use std::time::Instant;

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bundled_config, check, rel, run_bundled};
use hiersim::autodiff::{Tape, Var};
use hiersim::control::{mpc_cost_tape, mpc_solve, MpcConfig};
use hiersim::der::{battery_step, BatterySpec, BatteryState};
use hiersim::hvac::{coil_step, CoilSpec, FanKind, CP_AIR, CP_WATER};
use hiersim::networks::{water_tank_step, WaterTankSpec};
use hiersim::runtime::{
    DataKind, Domain, Emitter, Environment, HierPath, InputDecl, Module, ModuleError, ModuleHandle, ModuleKind,
    SimClock, StepCtx, Unit, Violation,
};
use hiersim::scenario::{ControllerKind, BUNDLED};
use hiersim::thermal::{
    generate_rc_trace, physics_violation_metric, rollout_rmse, train, HeadKind, HvacPolicy, ModelKind, RcZoneSpec,
    ThermalModelParams, ThermalTrace, TraceGenConfig, TrainConfig, ZoneInputs,
};

fn day(y: i32, m: u32, d: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

fn reference_zone() -> RcZoneSpec {
    let mut spec = RcZoneSpec::new(1e7, 0.004).unwrap();
    spec.solar_aperture = 2.0;
    spec.gain_per_occupant = 100.0;
    spec.gain_per_activity = 300.0;
    spec
}

fn cycling() -> HvacPolicy {
    HvacPolicy::Deadband {
        setpoint: 24.0,
        band: 1.0,
        q_max: 4000.0,
    }
}

/// 90 summer days of the reference zone under deadband cooling.
fn training_trace() -> ThermalTrace {
    generate_rc_trace(&TraceGenConfig::summer(
        reference_zone(),
        day(2025, 6, 1),
        90,
        cycling(),
        1,
    ))
    .unwrap()
}

fn affine(projected: bool) -> ModelKind {
    ModelKind::Modnn {
        head: HeadKind::Affine,
        projected,
    }
}

#[test]
fn c01_fan_tracking() {
    check(1, "fan tracking", || {
        let dir = tempfile::tempdir().unwrap();
        let t0 = Instant::now();
        let (cfg, _, t) = run_bundled("s1_fan_tracking", dir.path());
        let secs = t0.elapsed().as_secs_f64();
        let sys = &cfg.fan_systems[0];
        let sp = t.col(&format!("c1.thermal.{}.v_setpoint.action", sys.id));
        let mut notes = Vec::new();
        for (id, spec) in &sys.fans {
            let flow = t.col(&format!("c1.thermal.{}.{id}.flow.state", sys.id));
            let rated = spec.rated_flow;
            match &spec.kind {
                FanKind::Vfd { turndown } => {
                    let err = sp
                        .iter()
                        .zip(flow)
                        .filter(|(s, _)| **s >= turndown * rated && **s <= rated)
                        .map(|(s, f)| (s - f).abs())
                        .fold(0.0, f64::max);
                    if err != 0.0 {
                        return Err(format!("vfd error {err}"));
                    }
                    notes.push("vfd err 0".to_string());
                }
                FanKind::Staged(stages) => {
                    let gap = stages.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max) * rated;
                    let err = sp.iter().zip(flow).map(|(s, f)| (s - f).abs()).fold(0.0, f64::max);
                    if err > gap / 2.0 + 1e-12 {
                        return Err(format!("staged error {err} > {}", gap / 2.0));
                    }
                    notes.push(format!("staged err {err:.3} <= {:.3}", gap / 2.0));
                }
                FanKind::Constant => {
                    if flow.iter().any(|f| *f != 0.0 && *f != rated) {
                        return Err("constant fan left {0, rated}".into());
                    }
                    notes.push("constant in {0, rated}".into());
                }
            }
        }
        if sp.len() != 96 {
            return Err(format!("{} steps", sp.len()));
        }
        if secs >= 1.0 {
            return Err(format!("took {secs:.2} s"));
        }
        Ok(format!("{}; {secs:.3} s", notes.join(", ")))
    });
}

#[test]
fn c02_generalization_hvac_off() {
    check(2, "constrained vs unconstrained generalization", || {
        let t0 = Instant::now();
        let fit = training_trace();
        let mut off = TraceGenConfig::summer(reference_zone(), day(2025, 9, 1), 7, HvacPolicy::Off, 99);
        off.t0 = 24.0;
        let test = generate_rc_trace(&off).unwrap();
        let mut out = Vec::new();
        for projected in [true, false] {
            let r = train(
                &fit,
                &TrainConfig {
                    kind: affine(projected),
                    ..TrainConfig::default()
                },
            )
            .map_err(|e| e.to_string())?;
            let rmse = rollout_rmse(&r.params, &test, 96).map_err(|e| e.to_string())?;
            let v = physics_violation_metric(&r.params, &test).map_err(|e| e.to_string())?;
            out.push((rmse, v.fraction, v.qualifying));
        }
        let secs = t0.elapsed().as_secs_f64();
        let ((rc, vc, q), (ru, vu, _)) = (out[0], out[1]);
        let detail = format!(
            "rmse96 constrained {rc:.4} vs unconstrained {ru:.4}; violation {vc} vs {vu:.3} over {q} steps; {secs:.1} s"
        );
        if q == 0 {
            return Err(format!("no qualifying steps; {detail}"));
        }
        if rc < ru && vc == 0.0 && vu > 0.0 && secs < 600.0 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c03_training_budget() {
    check(3, "training budget", || {
        let fit = training_trace();
        let t0 = Instant::now();
        let r = train(&fit, &TrainConfig::default()).map_err(|e| e.to_string())?;
        let secs = t0.elapsed().as_secs_f64();
        let held = generate_rc_trace(&TraceGenConfig::summer(
            reference_zone(),
            day(2025, 9, 1),
            7,
            cycling(),
            98,
        ))
        .unwrap();
        let rmse = rollout_rmse(&r.params, &held, 96).map_err(|e| e.to_string())?;
        let detail = format!("{} rows, {secs:.1} s, held-out rmse96 {rmse:.4} C", fit.len());
        if secs < 300.0 && rmse < 0.1 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c04_single_house_day() {
    check(4, "single-house day", || {
        let dir = tempfile::tempdir().unwrap();
        let t0 = Instant::now();
        let (cfg, m, t) = run_bundled("s3_house_der", dir.path());
        let secs = t0.elapsed().as_secs_f64();
        let (sp, hb) = cfg
            .controllers
            .iter()
            .find_map(|c| match &c.kind {
                ControllerKind::DeadbandFcu { cfg, .. } => Some((cfg.setpoint, cfg.half_band)),
                _ => None,
            })
            .ok_or("no deadband controller")?;
        let warm = (2.0 * 3600.0 / cfg.simulation.dt) as usize;
        let tz = t.col("c1.thermal.h1.zone.t_zone.state");
        for (i, z) in tz.iter().enumerate().skip(warm) {
            if (z - sp).abs() > hb {
                return Err(format!("row {i}: zone {z} outside {sp} +/- {hb}"));
            }
        }

        let e = "c1.electrical.h1";
        let pv = t.col(&format!("{e}.pv.generation.state"));
        let curtailed = t.col(&format!("{e}.grid.pv_curtailed.state"));
        let grid = t.col(&format!("{e}.grid.grid.state"));
        let load = t.col(&format!("{e}.bus.load.state"));
        let batt = t.col(&format!("{e}.battery.p_batt.state"));
        let ev = t.col(&format!("{e}.ev1.p_ev.state"));
        let mut worst = 0.0f64;
        for i in 0..t.rows {
            let (dis, ch) = ((-batt[i]).max(0.0), batt[i].max(0.0));
            let supply = pv[i] - curtailed[i];
            let terms = [supply, dis, grid[i].abs(), load[i], ch, ev[i].abs()];
            let max_term = terms.iter().cloned().fold(0.0, f64::max);
            let residual = supply + dis + grid[i] - load[i] - ch - ev[i];
            let r = residual.abs() / max_term.max(1.0);
            worst = worst.max(r);
            if residual.abs() >= 1e-6 * max_term.max(1.0) {
                return Err(format!("row {i}: bus residual {residual} W"));
            }
        }

        let b = cfg.building("h1").ok_or("no h1")?;
        let (bspec, _) = b.battery.as_ref().ok_or("no battery")?;
        let evspec = &b.evs[0].spec.battery;
        let socs = [
            (t.col(&format!("{e}.battery.soc.state")), bspec.soc_min, bspec.soc_max),
            (t.col(&format!("{e}.ev1.soc.state")), evspec.soc_min, evspec.soc_max),
        ];
        for (s, lo, hi) in socs {
            if s.iter().any(|v| *v < lo - 1e-12 || *v > hi + 1e-12) {
                return Err(format!("soc outside [{lo}, {hi}]"));
            }
        }

        let to_load = t.col(&format!("{e}.bus.pv_to_load.state"));
        let to_ev = t.col(&format!("{e}.bus.pv_to_ev.state"));
        let mut ev_pv_steps = 0;
        for i in 0..t.rows {
            if to_ev[i] > 0.0 {
                ev_pv_steps += 1;
                if to_load[i] < load[i] - 1e-9 {
                    return Err(format!("row {i}: EV got PV with building load unmet"));
                }
            }
            if to_load[i] > pv[i] + 1e-9 || to_load[i] > load[i] + 1e-9 {
                return Err(format!("row {i}: PV to load exceeds supply or demand"));
            }
        }
        if t.rows != 96 || m.buildings.iter().any(|b| !b.energy_kwh.is_finite()) {
            return Err("bad run shape".into());
        }
        if secs >= 5.0 {
            return Err(format!("took {secs:.2} s"));
        }
        Ok(format!(
            "zone in band after {warm} steps, worst bus residual {worst:.1e}, EV PV steps {ev_pv_steps}, {secs:.2} s"
        ))
    });
}

#[test]
fn c05_five_house_cluster() {
    check(5, "five-house cluster", || {
        let dir = tempfile::tempdir().unwrap();
        let t0 = Instant::now();
        let (cfg, m, t) = run_bundled("s4_cluster5", dir.path());
        let secs = t0.elapsed().as_secs_f64();
        if m.buildings.len() != 5 || t.rows != 192 {
            return Err(format!("{} buildings, {} rows", m.buildings.len(), t.rows));
        }
        let e: Vec<f64> = m.buildings.iter().map(|b| b.energy_kwh).collect();
        for i in 0..5 {
            for j in i + 1..5 {
                if rel(e[i], e[j]) < 1e-6 {
                    return Err(format!("energies {i} and {j} coincide: {e:?}"));
                }
            }
        }
        let warm = (2.0 * 3600.0 / cfg.simulation.dt) as usize;
        let mut worst_share = 1.0f64;
        for b in &cfg.buildings {
            let z = t.col(&format!("c1.thermal.{}.zone.t_zone.state", b.id));
            let lo = t.col(&format!("c1.thermal.{}.t_lo.observation", b.id));
            let hi = t.col(&format!("c1.thermal.{}.t_hi.observation", b.id));
            let n = t.rows - warm;
            let inside = (warm..t.rows)
                .filter(|&i| z[i] >= lo[i] - 1e-9 && z[i] <= hi[i] + 1e-9)
                .count();
            let share = inside as f64 / n as f64;
            worst_share = worst_share.min(share);
            if share < 0.95 {
                return Err(format!("{} in band {:.1}% of steps", b.id, share * 100.0));
            }
        }
        let total = t.col("c1.power.observation");
        let mut worst = 0.0f64;
        for (i, tot) in total.iter().enumerate() {
            let sum: f64 = cfg
                .buildings
                .iter()
                .map(|b| t.col(&format!("c1.electrical.{}.power.observation", b.id))[i])
                .sum();
            worst = worst.max(rel(*tot, sum));
        }
        if worst > 1e-12 {
            return Err(format!("cluster aggregation error {worst:e}"));
        }
        if secs >= 30.0 {
            return Err(format!("took {secs:.2} s"));
        }
        Ok(format!(
            "energies {:?} kWh, worst in-band share {:.1}%, aggregation error {worst:.1e}, {secs:.2} s",
            e.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
            worst_share * 100.0
        ))
    });
}

/// Random expression over `n` parameters. Values stay bounded: divisions
/// use strictly positive denominators and `exp` only sees squashed inputs.
fn random_tape(rng: &mut ChaCha8Rng, n: usize, ops: usize) -> Tape {
    let tape = Tape::new();
    {
        let mut pool: Vec<Var<'_>> = tape.params(0, n);
        for _ in 0..ops {
            let a = pool[rng.random_range(0..pool.len())];
            let b = pool[rng.random_range(0..pool.len())];
            let c: f64 = rng.random_range(-2.0..2.0);
            let v = match rng.random_range(0..10) {
                0 => a + b,
                1 => a - b,
                2 => a * b,
                3 => a / (b * b + 0.5),
                4 => -a + c,
                5 => a.tanh().exp(),
                6 => a.tanh(),
                7 => a.softplus(),
                8 => a.max0_smooth(rng.random_range(1.0..10.0)),
                _ => {
                    let k = rng.random_range(1..=pool.len().min(4));
                    let xs: Vec<_> = (0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect();
                    let ws: Vec<_> = (0..k).map(|_| tape.constant(rng.random_range(-1.0..1.0))).collect();
                    tape.affine(&ws, &xs, tape.constant(c))
                }
            };
            // keep magnitudes O(1) so products cannot blow up
            let v = if rng.random_bool(0.3) { v.tanh() * 3.0 } else { v };
            pool.push(v);
        }
        let out = pool[pool.len() - 3..].iter().fold(tape.constant(0.0), |s, v| s + *v);
        tape.set_output(out);
    }
    tape
}

/// Normwise relative error between the tape gradient and central differences.
fn fd_error(tape: &Tape, x: &[f64], h: f64) -> f64 {
    tape.forward(x).unwrap();
    let g = tape.backward().unwrap();
    let mut xp = x.to_vec();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = tape.forward(&xp).unwrap();
        xp[j] = x[j] - h;
        let fm = tape.forward(&xp).unwrap();
        xp[j] = x[j];
        let fd = (fp - fm) / (2.0 * h);
        num += (g[j] - fd).powi(2);
        den += fd * fd;
    }
    num.sqrt() / den.sqrt().max(1e-8)
}

fn mpc_model() -> ThermalModelParams {
    ThermalModelParams::from_rc(&reference_zone(), true)
}

fn hot(h: usize, rng: &mut ChaCha8Rng) -> Vec<ZoneInputs> {
    (0..h)
        .map(|_| ZoneInputs {
            t_out: rng.random_range(28.0..36.0),
            ghi: rng.random_range(0.0..800.0),
            occupancy: rng.random_range(0.0..3.0),
            activity: 0.0,
        })
        .collect()
}

#[test]
fn c06_gradient_engine() {
    check(6, "gradient engine", || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut worst_tape = 0.0f64;
        let mut worst_elem = 0.0f64;
        for _ in 0..100 {
            let n = rng.random_range(2..6);
            let ops = rng.random_range(5..40);
            let tape = random_tape(&mut rng, n, ops);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
            worst_tape = worst_tape.max(fd_error(&tape, &x, 1e-5));
            // per-component figure; near-zero components sit at the FD rounding floor
            worst_elem = worst_elem.max(tape.grad_check(&x, 1e-5).unwrap());
        }
        let mut worst_mpc = 0.0f64;
        for _ in 0..10 {
            let h = 12;
            let cfg = MpcConfig {
                horizon: h,
                t_hi: 24.5,
                comfort_weight: 5.0,
                ..Default::default()
            };
            let forecast = hot(h, &mut rng);
            let prices: Vec<f64> = (0..h).map(|_| rng.random_range(0.1..0.4)).collect();
            let tape = mpc_cost_tape(&cfg, &mpc_model(), 25.0, &forecast, &prices, (-5000.0, 0.0)).unwrap();
            let u: Vec<f64> = (0..h).map(|_| rng.random_range(-1.0..-0.01)).collect();
            worst_mpc = worst_mpc.max(fd_error(&tape, &u, 1e-6));
        }
        let detail = format!(
            "random tapes {worst_tape:.1e}, MPC cost {worst_mpc:.1e}, normwise; per-component tapes {worst_elem:.1e}"
        );
        if worst_tape < 1e-5 && worst_mpc < 1e-5 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

/// True MPC cost re-derived on the RC reference.
fn rc_cost(cfg: &MpcConfig, t0: f64, forecast: &[ZoneInputs], prices: &[f64], q: &[f64]) -> f64 {
    let spec = reference_zone();
    let mut t = t0;
    let mut cost = 0.0;
    for k in 0..q.len() {
        cost += q[k].abs() / cfg.cop * cfg.dt / 3.6e6 * prices[k];
        t = spec.step(t, &forecast[k], q[k], cfg.dt);
        let v = (t - cfg.t_hi).max(0.0) + (cfg.t_lo - t).max(0.0);
        cost += cfg.comfort_weight * v * v;
    }
    cost
}

#[test]
fn c07_mpc_oracle() {
    check(7, "MPC oracle equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let bounds = (-6000.0, 0.0);
        let levels: Vec<f64> = (0..5)
            .map(|i| bounds.0 + (bounds.1 - bounds.0) * i as f64 / 4.0)
            .collect();
        let mut worst_gap = f64::NEG_INFINITY;
        let mut interior = 0;
        for case in 0..5 {
            let cfg = MpcConfig {
                horizon: 2,
                t_hi: 24.0,
                comfort_weight: 0.02 * (case + 1) as f64,
                iterations: 400,
                ..Default::default()
            };
            let forecast = hot(2, &mut rng);
            let prices = [rng.random_range(0.1..0.4), rng.random_range(0.1..0.4)];
            let t0 = rng.random_range(24.5..26.0);
            let mut grid_min = f64::INFINITY;
            for a in &levels {
                for b in &levels {
                    grid_min = grid_min.min(rc_cost(&cfg, t0, &forecast, &prices, &[*a, *b]));
                }
            }
            let sol = mpc_solve(&cfg, &mpc_model(), t0, &forecast, &prices, bounds, None).map_err(|e| e.to_string())?;
            let c = rc_cost(&cfg, t0, &forecast, &prices, &sol.q);
            let gap = (c - grid_min) / grid_min.abs().max(1e-12);
            worst_gap = worst_gap.max(gap);
            if sol.q.iter().any(|q| *q > bounds.0 + 1.0 && *q < bounds.1 - 1.0) {
                interior += 1;
            }
            if gap > 1e-3 {
                return Err(format!("case {case}: descent {c} vs grid {grid_min}"));
            }
        }
        let cfg = MpcConfig {
            horizon: 16,
            t_lo: 5.0,
            t_hi: 45.0,
            ..Default::default()
        };
        let forecast = hot(16, &mut rng);
        let warm = vec![-3000.0; 16];
        let sol = mpc_solve(
            &cfg,
            &mpc_model(),
            24.0,
            &forecast,
            &[0.2; 16],
            (-6000.0, 0.0),
            Some(&warm),
        )
        .map_err(|e| e.to_string())?;
        let qmax = sol.q.iter().map(|q| q.abs()).fold(0.0, f64::max);
        if qmax >= 1.0 {
            return Err(format!("wide band |Q|max {qmax} W"));
        }
        Ok(format!(
            "worst (descent - grid)/grid {worst_gap:.2e}, {interior}/5 interior optima; wide band |Q|max {qmax:.2e} W"
        ))
    });
}

#[test]
fn c08_conservation() {
    check(8, "conservation suite", || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut coil_worst = 0.0f64;
        for _ in 0..10_000 {
            let spec = CoilSpec {
                effectiveness: rng.random_range(0.05..=1.0),
            };
            let m_a = rng.random_range(0.01..3.0);
            let m_w = rng.random_range(0.01..3.0);
            let ta = rng.random_range(-10.0..45.0);
            let tw = rng.random_range(2.0..80.0);
            let o = coil_step(&spec, m_a, ta, m_w, tw).unwrap();
            let q_air = m_a * CP_AIR * (ta - o.t_air_out);
            let q_water = m_w * CP_WATER * (o.t_water_out - tw);
            let scale = q_air.abs().max(q_water.abs());
            if scale > 0.0 {
                coil_worst = coil_worst.max((q_air - q_water).abs() / scale);
                coil_worst = coil_worst.max((o.q - q_air).abs() / scale);
            }
        }

        let mut batt_worst = 0.0f64;
        for _ in 0..1000 {
            let spec = BatterySpec {
                eta_charge: rng.random_range(0.8..=1.0),
                eta_discharge: rng.random_range(0.8..=1.0),
                ..Default::default()
            };
            let dt_h = 0.25;
            let s0 = BatteryState {
                soc: rng.random_range(0.2..0.6),
                soh: 1.0,
            };
            let p_in = rng.random_range(100.0..4000.0);
            let ch = battery_step(&spec, s0, p_in, 25.0, dt_h).unwrap();
            // bus power that draws back exactly what the cells gained
            let p_out = -ch.cell_energy * spec.eta_discharge * 1000.0 / dt_h;
            let dis = battery_step(&spec, ch.state, p_out, 25.0, dt_h).unwrap();
            let e_in = ch.p_actual * dt_h;
            let e_out = -dis.p_actual * dt_h;
            batt_worst = batt_worst.max(rel(e_out / e_in, spec.eta_charge * spec.eta_discharge));
            batt_worst = batt_worst.max((dis.state.soc - s0.soc).abs());
        }

        let tank = WaterTankSpec {
            mass: 200.0,
            ua: 2.0,
            heater: 4500.0,
            t_inlet: 10.0,
            t_ambient: 20.0,
        };
        let dt = 900.0;
        let mut t = 60.0;
        let t_start = t;
        let mut loss_j = 0.0;
        for _ in 0..96 * 3 {
            let next = water_tank_step(&tank, t, false, 0.0, dt).0;
            // trapezoid over the trajectory, independent of the update rule
            loss_j += tank.ua * ((t + next) / 2.0 - tank.t_ambient) * dt;
            t = next;
        }
        let stored = tank.mass * CP_WATER * (t - t_start);
        let tank_err = rel(stored, -loss_j);

        let detail =
            format!("coil {coil_worst:.1e}, battery round trip {batt_worst:.1e}, tank first law {tank_err:.2e}");
        if coil_worst < 1e-9 && batt_worst < 1e-9 && tank_err < 0.01 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

struct Stub(ModuleHandle);

impl Module for Stub {
    fn handle(&self) -> &ModuleHandle {
        &self.0
    }
    fn initialize(&mut self, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        for o in self.0.outputs.clone() {
            out.emit_kind(&o.var, o.kind, 0.0)?;
        }
        Ok(())
    }
    fn step(&mut self, _: &StepCtx<'_>, out: &mut Emitter<'_>) -> Result<(), ModuleError> {
        self.initialize(out)
    }
}

fn adversarial_env(upward: bool, foreign_read: bool) -> Environment {
    let p = |sys: Option<&str>, comp: Option<&str>| HierPath::new("c", Some(Domain::Thermal), sys, comp).unwrap();
    let mut env = Environment::new(SimClock::new(day(2023, 7, 1), 900.0));
    let fan_ctl_path = p(Some("ahu1"), Some("fan_ctl"));
    let sys_ctl = p(Some("ahu1"), None);
    let zone_b = p(Some("b2"), Some("zone"));

    // system-level controller commanding a component-level one: allowed
    let mut sys_handle = ModuleHandle::new(sys_ctl.clone(), ModuleKind::Controller)
        .output("v_setpoint", DataKind::Action, Unit::KgPerSecond)
        .input(InputDecl::new(
            &p(Some("ahu1"), Some("fan")),
            "flow",
            DataKind::Observation,
            Unit::KgPerSecond,
        ));
    if upward {
        sys_handle = sys_handle.input(InputDecl::new(&fan_ctl_path, "trim", DataKind::Action, Unit::Fraction));
    }
    if foreign_read {
        sys_handle = sys_handle.input(InputDecl::new(&zone_b, "t_zone", DataKind::Observation, Unit::Celsius));
    }
    let fan_ctl = ModuleHandle::new(fan_ctl_path, ModuleKind::Controller)
        .input(InputDecl::new(
            &sys_ctl,
            "v_setpoint",
            DataKind::Action,
            Unit::KgPerSecond,
        ))
        .output("trim", DataKind::Action, Unit::Fraction);
    let fan = ModuleHandle::new(p(Some("ahu1"), Some("fan")), ModuleKind::DynamicStateless)
        .input(InputDecl::new(
            &p(Some("ahu1"), Some("fan_ctl")),
            "trim",
            DataKind::Action,
            Unit::Fraction,
        ))
        .output("flow", DataKind::State, Unit::KgPerSecond)
        .output("flow", DataKind::Observation, Unit::KgPerSecond);
    let zone = ModuleHandle::new(zone_b, ModuleKind::DynamicStateful)
        .output("t_zone", DataKind::State, Unit::Celsius)
        .output("t_zone", DataKind::Observation, Unit::Celsius);
    for h in [sys_handle, fan_ctl, fan, zone] {
        env.register_module(Box::new(Stub(h))).unwrap();
    }
    env
}

#[test]
fn c09_wiring_validator() {
    check(9, "wiring validator", || {
        let clean = adversarial_env(false, false).validate_wiring();
        if !clean.is_empty() {
            return Err(format!("clean wiring rejected: {clean:?}"));
        }
        let v = adversarial_env(true, true).validate_wiring();
        let upward = v
            .iter()
            .any(|x| matches!(x, Violation::UpwardAction { var, .. } if var == "trim"));
        let scope = v
            .iter()
            .any(|x| matches!(x, Violation::ObservationOutOfScope { var, .. } if var == "t_zone"));
        if !(upward && scope) {
            return Err(format!("violations found: {v:?}"));
        }
        let mut bad = adversarial_env(true, false);
        if bad.initialize().is_ok() {
            return Err("initialize accepted an upward action".into());
        }
        for b in BUNDLED {
            let cfg = bundled_config(b.name);
            let built = hiersim::scenario::build_environment(&cfg).map_err(|e| format!("{}: {e}", b.name))?;
            let w = built.env.validate_wiring();
            if !w.is_empty() {
                return Err(format!("{}: {w:?}", b.name));
            }
        }
        Ok(format!(
            "{} violations on adversarial wiring; {} bundled scenarios clean",
            v.len(),
            BUNDLED.len()
        ))
    });
}

#[test]
fn c10_determinism() {
    check(10, "determinism", || {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_bundled("s4_cluster5", a.path());
        run_bundled("s4_cluster5", b.path());
        let x = std::fs::read(a.path().join("timeseries.csv")).unwrap();
        let y = std::fs::read(b.path().join("timeseries.csv")).unwrap();
        if x == y {
            Ok(format!("{} identical bytes", x.len()))
        } else {
            Err("timeseries differ".into())
        }
    });
}
