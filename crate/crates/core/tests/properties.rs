use chrono::NaiveDate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hiersim::autodiff::{Tape, Var};
use hiersim::control::{
    cluster_peak_coordinator, mpc_solve, onoff_deadband, pv_allocation, tou_battery_dispatch, DeadbandConfig, HvacMode,
    MpcConfig, TouDispatchConfig,
};
use hiersim::der::{battery_step, daily_schedule, ev_step, BatterySpec, BatteryState, EvSpec, EvState};
use hiersim::disturbance::seasonal_naive_forecast;
use hiersim::hvac::{
    chiller_step, coil_step, fan_step, fcu_system_step, ice_storage_step, ChillerMode, ChillerSpec, CoilSpec, FanKind,
    FanSpec, FcuAction, FcuAssembly, IceStorageSpec, IceStorageState, CP_AIR, CP_WATER,
};
use hiersim::networks::{water_tank_step, WaterTankSpec, TANK_T_MAX};
use hiersim::runtime::{disaggregate, Domain, HierLevel, HierPath, SimClock};
use hiersim::scenario::parse_scenario_text;
use hiersim::thermal::{modnn_step, HeadKind, ModelKind, Normalization, RcZoneSpec, ThermalModelParams, ZoneInputs};

fn random_tape(seed: u64, n: usize) -> Tape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tape = Tape::new();
    {
        let mut pool: Vec<Var<'_>> = tape.params(0, n);
        for _ in 0..rng.random_range(3..30) {
            let a = pool[rng.random_range(0..pool.len())];
            let b = pool[rng.random_range(0..pool.len())];
            let v = match rng.random_range(0..7) {
                0 => a + b,
                1 => a * b,
                2 => a / (b * b + 1.0),
                3 => a.tanh(),
                4 => a.softplus(),
                5 => a.max0_smooth(4.0),
                _ => (a * 0.5).tanh().exp() - b,
            };
            pool.push(v.tanh() * 2.0);
        }
        let out = pool[pool.len() - 1] + pool[n];
        tape.set_output(out);
    }
    tape
}

fn grad(t: &Tape, x: &[f64]) -> (f64, Vec<f64>) {
    let f = t.forward(x).unwrap();
    (f, t.backward().unwrap())
}

fn day(y: i32, m: u32, d: u32) -> chrono::NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

fn model_kind() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(HeadKind::Affine), Just(HeadKind::Mlp)].prop_map(|head| ModelKind::Modnn { head, projected: true })
}

fn random_params(kind: ModelKind, seed: u64) -> ThermalModelParams {
    let mut p = ThermalModelParams::init(kind, Normalization::default(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for t in p.theta.iter_mut() {
        *t = rng.random_range(-3.0..3.0);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64,
                          xs in prop::collection::vec(-1.5..1.5f64, 3)) {
        let f = random_tape(seed, 3);
        let g = random_tape(seed.wrapping_add(1), 3);
        let (_, gf) = grad(&f, &xs);
        let (_, gg) = grad(&g, &xs);
        let h = Tape::new();
        {
            let ps = h.params(0, 3);
            // rebuild a·f + b·g on one tape by re-recording both expressions
            let rec = |seed: u64| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut pool: Vec<Var<'_>> = ps.clone();
                for _ in 0..rng.random_range(3..30) {
                    let x = pool[rng.random_range(0..pool.len())];
                    let y = pool[rng.random_range(0..pool.len())];
                    let v = match rng.random_range(0..7) {
                        0 => x + y,
                        1 => x * y,
                        2 => x / (y * y + 1.0),
                        3 => x.tanh(),
                        4 => x.softplus(),
                        5 => x.max0_smooth(4.0),
                        _ => (x * 0.5).tanh().exp() - y,
                    };
                    pool.push(v.tanh() * 2.0);
                }
                pool[pool.len() - 1] + pool[3]
            };
            let out = rec(seed) * a + rec(seed.wrapping_add(1)) * b;
            h.set_output(out);
        }
        let (_, gh) = grad(&h, &xs);
        for j in 0..3 {
            let want = a * gf[j] + b * gg[j];
            prop_assert!((gh[j] - want).abs() <= 1e-12 * (1.0 + want.abs()), "{} vs {}", gh[j], want);
        }
    }

    #[test]
    fn backward_visits_each_node_once(seed in any::<u64>(), xs in prop::collection::vec(-1.0..1.0f64, 4)) {
        let t = random_tape(seed, 4);
        grad(&t, &xs);
        prop_assert_eq!(t.backward_visits(), t.len());
    }

    #[test]
    fn free_float_never_cools_a_warm_day(kind in model_kind(), seed in any::<u64>(),
                                          tz in 15.0..35.0f64, dt_out in 0.01..15.0f64,
                                          ghi in 0.0..1000.0f64, occ in 0.0..5.0f64, act in 0.0..3.0f64) {
        let p = random_params(kind, seed);
        let d = ZoneInputs { t_out: tz + dt_out, ghi, occupancy: occ, activity: act };
        let next = modnn_step(&p, tz, &d, 0.0, 900.0).unwrap();
        prop_assert!(next >= tz);
    }

    #[test]
    fn more_cooling_is_never_warmer(kind in model_kind(), seed in any::<u64>(), tz in 15.0..35.0f64,
                                    t_out in 10.0..40.0f64, q1 in -6000.0..0.0f64, q2 in -6000.0..0.0f64) {
        let p = random_params(kind, seed);
        let d = ZoneInputs { t_out, ghi: 300.0, occupancy: 1.0, activity: 0.0 };
        let (lo, hi) = if q1 < q2 { (q1, q2) } else { (q2, q1) };
        let a = modnn_step(&p, tz, &d, lo, 900.0).unwrap();
        let b = modnn_step(&p, tz, &d, hi, 900.0).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn coil_balances(eps in 0.01..=1.0f64, m_a in 0.0..5.0f64, ta in -20.0..50.0f64,
                     m_w in 0.0..5.0f64, tw in 0.0..90.0f64) {
        let o = coil_step(&CoilSpec { effectiveness: eps }, m_a, ta, m_w, tw).unwrap();
        let air = m_a * CP_AIR * (ta - o.t_air_out);
        let water = m_w * CP_WATER * (o.t_water_out - tw);
        let scale = air.abs().max(water.abs()).max(1e-300);
        prop_assert!((air - water).abs() / scale < 1e-9);
        // never beyond the ideal exchanger
        let c_min = (m_a * CP_AIR).min(m_w * CP_WATER);
        prop_assert!(o.q.abs() <= c_min * (ta - tw).abs() * (1.0 + 1e-12));
    }

    #[test]
    fn fans_respect_their_envelope(sp in 0.0..3.0f64, rated in 0.1..2.0f64, p in 0.0..2000.0f64,
                                   turndown in 0.0..0.9f64, inner in prop::collection::btree_set(1u32..99, 0..4)) {
        let mut stages = vec![0.0];
        stages.extend(inner.iter().map(|s| *s as f64 / 100.0));
        stages.push(1.0);
        for kind in [FanKind::Constant, FanKind::Vfd { turndown }, FanKind::Staged(stages.clone())] {
            let spec = FanSpec { kind: kind.clone(), rated_flow: rated, rated_power: p };
            let (v, pw) = fan_step(&spec, sp).unwrap();
            prop_assert!((0.0..=rated).contains(&v));
            prop_assert!((pw - p * (v / rated).powi(3)).abs() <= 1e-9 * p.max(1.0));
            match kind {
                FanKind::Constant => prop_assert!(v == 0.0 || v == rated),
                FanKind::Vfd { turndown } => {
                    if sp >= turndown * rated && sp <= rated {
                        prop_assert_eq!(v, sp);
                    }
                }
                FanKind::Staged(_) => {
                    if sp <= rated {
                        prop_assert!((v - sp).abs() <= spec.max_tracking_error() + 1e-12);
                    }
                }
            }
        }
        let neg = fan_step(&FanSpec { kind: FanKind::Constant, rated_flow: rated, rated_power: p }, -sp - 1e-3);
        prop_assert!(neg.is_err());
    }

    #[test]
    fn chiller_cop_positive_and_capped(q in 0.0..20_000.0f64, cap in 100.0..10_000.0f64,
                                       te in 2.0..12.0f64, lift in 0.5..30.0f64, eta in 0.05..=1.0f64,
                                       a1 in -0.5..0.5f64, a2 in -0.2..0.2f64) {
        let modes = [
            ChillerMode::Carnot { eta },
            ChillerMode::Curve { cop_ref: 4.0, a: [1.0 - a1 - a2, a1, a2] },
        ];
        for mode in modes {
            let spec = ChillerSpec { mode, capacity: cap };
            if spec.validate().is_err() {
                continue;
            }
            let o = chiller_step(&spec, q, te, te + lift).unwrap();
            prop_assert!(o.cop > 0.0);
            prop_assert!(o.q_met <= cap && o.q_met <= q);
            prop_assert!(o.p_elec >= 0.0);
        }
    }

    #[test]
    fn fcu_power_adds_up(v in 0.0..1.5f64, t_sa in 8.0..20.0f64, tz in 18.0..32.0f64,
                         tower in any::<bool>(), ice in 0u8..3) {
        let mut asm = FcuAssembly::default();
        if !tower {
            asm.tower = None;
        }
        if ice > 0 {
            asm.ice = Some(IceStorageSpec { capacity: 5.0, efficiency: 0.9 });
        }
        let mut plant = asm.initial_plant();
        let action = FcuAction {
            t_sa_setpoint: t_sa,
            v_sa_setpoint: v,
            ice_charge: if ice == 1 { 500.0 } else { 0.0 },
            ice_discharge: 0.0,
        };
        let o = fcu_system_step(&asm, &action, tz, 20.0, 0.25, &mut plant).unwrap();
        prop_assert_eq!(o.p_total, o.p_fan + o.p_pump + o.p_chiller + o.p_tower);
        prop_assert!(o.q_zone <= 1e-9);
    }

    #[test]
    fn ice_stays_in_range(steps in prop::collection::vec((0.0..5000.0f64, 0.0..5000.0f64, any::<bool>()), 1..60)) {
        let spec = IceStorageSpec { capacity: 3.0, efficiency: 0.9 };
        let mut s = IceStorageState { energy: 1.0 };
        for (c, d, charging) in steps {
            let (c, d) = if charging { (c, 0.0) } else { (0.0, d) };
            s = ice_storage_step(&spec, s, c, d, 0.25).unwrap().state;
            prop_assert!((0.0..=spec.capacity).contains(&s.energy));
        }
    }

    #[test]
    fn battery_soc_stays_in_bounds(soc0 in 0.1..0.95f64, reqs in prop::collection::vec(-20_000.0..20_000.0f64, 1..200),
                                   t_amb in -20.0..50.0f64) {
        let spec = BatterySpec::default();
        let mut s = BatteryState { soc: soc0, soh: 1.0 };
        for r in reqs {
            let st = battery_step(&spec, s, r, t_amb, 0.25).unwrap();
            s = st.state;
            prop_assert!(s.soc >= spec.soc_min - 1e-12 && s.soc <= spec.soc_max + 1e-12, "{}", s.soc);
            prop_assert!(st.p_actual.abs() <= r.abs() + 1e-9);
            prop_assert!(st.p_loss >= 0.0);
        }
    }

    #[test]
    fn ev_energy_is_conserved(soc0 in 0.2..0.9f64, reqs in prop::collection::vec(0.0..11_000.0f64, 96..300),
                              arrive in 15.0..20.0f64, depart in 6.0..9.0f64, trip in 0.0..40.0f64) {
        let spec = EvSpec {
            battery: BatterySpec { capacity: 60.0, p_max_charge: 7000.0, ..Default::default() },
            v2g: false,
            schedule: daily_schedule(NaiveDate::from_ymd_opt(2023, 7, 1).unwrap(), 5, arrive, depart, trip, 0.8),
        };
        let mut clock = SimClock::new(day(2023, 7, 1), 900.0);
        let mut s = EvState::new(&spec, soc0, &clock);
        let (mut cell, mut trips) = (0.0, 0.0);
        for r in reqs {
            let st = ev_step(&spec, &s, r, 25.0, &clock, 0.25).unwrap();
            cell += st.cell_energy;
            trips += st.trip_energy;
            s = st.state;
            clock.t += 1;
            prop_assert!(s.battery.soc >= spec.battery.soc_min - 1e-12 && s.battery.soc <= spec.battery.soc_max + 1e-12);
        }
        let stored = (s.battery.soc - soc0) * spec.battery.capacity;
        prop_assert!((stored - (cell - trips)).abs() <= 1e-9 * stored.abs().max(cell + trips).max(1.0));
    }

    #[test]
    fn pv_waterfall(pv in 0.0..20_000.0f64, load in 0.0..10_000.0f64, ev in 0.0..10_000.0f64, batt in 0.0..10_000.0f64) {
        let a = pv_allocation(pv, load, ev, batt).unwrap();
        for v in [a.to_building, a.to_ev, a.to_battery, a.surplus] {
            prop_assert!(v >= 0.0);
        }
        prop_assert!(a.to_building <= load && a.to_ev <= ev && a.to_battery <= batt);
        prop_assert!((a.total() - pv).abs() <= 1e-12 * pv.max(1.0));
        if a.to_ev > 0.0 {
            prop_assert_eq!(a.to_building, load);
        }
        if a.to_battery > 0.0 {
            prop_assert_eq!(a.to_ev, ev);
        }
    }

    #[test]
    fn deadband_switches_once_per_crossing(sp in 18.0..28.0f64, hb in 0.2..3.0f64, amp in 0.0..6.0f64,
                                           heating in any::<bool>()) {
        let cfg = DeadbandConfig { setpoint: sp, half_band: hb, mode: if heating { HvacMode::Heating } else { HvacMode::Cooling } };
        let mut on = false;
        let mut switches = 0;
        let mut edge_crossings = 0;
        let mut last_side = 0i8;
        for i in 0..400 {
            // triangle ramp through the band
            let phase = (i % 200) as f64 / 100.0;
            let t = sp - amp + 2.0 * amp * if phase < 1.0 { phase } else { 2.0 - phase };
            let side = if t > sp + hb { 1 } else if t < sp - hb { -1 } else { 0 };
            if side != 0 && side != last_side {
                edge_crossings += 1;
                last_side = side;
            }
            let next = onoff_deadband(&cfg, t, on);
            if next != on {
                switches += 1;
            }
            on = next;
        }
        prop_assert!(switches <= edge_crossings);
    }

    #[test]
    fn tou_requests_stay_between_floor_and_target(soc in 0.1..0.95f64, unmet in 0.0..8000.0f64,
                                                  peak in any::<bool>(), eta_c in 0.8..=1.0f64, eta_d in 0.8..=1.0f64) {
        let cfg = TouDispatchConfig {
            peak_start: 16, peak_end: 21, charge_target: 0.9, reserve_floor: 0.2,
            p_max_charge: 5000.0, p_max_discharge: 5000.0,
        };
        let r = tou_battery_dispatch(&cfg, peak, soc, unmet, 10.0, eta_c, eta_d, 0.25);
        let next = if r >= 0.0 {
            soc + eta_c * r * 0.25 / 1000.0 / 10.0
        } else {
            soc + r * 0.25 / 1000.0 / eta_d / 10.0
        };
        if r > 0.0 {
            prop_assert!(next <= cfg.charge_target + 1e-12);
        }
        if r < 0.0 {
            prop_assert!(next >= cfg.reserve_floor - 1e-12);
            prop_assert!(-r <= unmet + 1e-9);
        }
    }

    #[test]
    fn peak_coordinator_respects_cap(loads in prop::collection::vec(0.0..10_000.0f64, 1..8), cap in 1.0..30_000.0f64) {
        let total: f64 = loads.iter().sum();
        prop_assume!(total > 0.0);
        let out = cluster_peak_coordinator(&loads, cap).unwrap();
        let sum: f64 = out.iter().sum();
        prop_assert!(sum <= cap.max(total) * (1.0 + 1e-12));
        if total > cap {
            prop_assert!((sum - cap).abs() <= 1e-9 * cap);
        } else {
            prop_assert_eq!(&out, &loads);
        }
        let w = disaggregate(cap, &loads).unwrap();
        prop_assert!((w.iter().sum::<f64>() - cap).abs() <= 1e-9 * cap);
    }

    #[test]
    fn tank_stays_physical(t in 10.0..95.0f64, on in any::<bool>(), draw in 0.0..0.2f64) {
        let spec = WaterTankSpec { mass: 200.0, ua: 2.0, heater: 4500.0, t_inlet: 10.0, t_ambient: 20.0 };
        let (next, p) = water_tank_step(&spec, t, on, draw, 900.0);
        prop_assert!((spec.t_inlet..=TANK_T_MAX).contains(&next));
        prop_assert_eq!(p, if on { 4500.0 } else { 0.0 });
    }

    #[test]
    fn forecaster_exact_on_periodic(day in prop::collection::vec(-10.0..40.0f64, 96), days in 1usize..4, h in 1usize..200) {
        let hist: Vec<f64> = day.iter().cycle().take(96 * days).copied().collect();
        let f = seasonal_naive_forecast(&hist, h, 96).unwrap();
        for (k, v) in f.iter().enumerate() {
            prop_assert_eq!(*v, day[k % 96]);
        }
    }

    #[test]
    fn path_prefix_rule(sys in "[a-z][a-z0-9]{0,5}", comp in "[a-z][a-z0-9]{0,5}") {
        prop_assert!(HierPath::new("c", None, Some(&sys), None).is_err());
        prop_assert!(HierPath::new("c", Some(Domain::Thermal), None, Some(&comp)).is_err());
        let p = HierPath::new("c", Some(Domain::Water), Some(&sys), Some(&comp)).unwrap();
        prop_assert_eq!(p.level(), HierLevel::Component);
        let up = p.parent().unwrap();
        prop_assert!(up.contains(&p) && !p.contains(&up));
        prop_assert!(up.level() > p.level());
    }

    #[test]
    fn unknown_keys_always_fail(key in "[a-z_]{3,12}", section in 0usize..3) {
        let known = ["start", "duration_h", "dt_s", "seed", "name", "cluster", "zone", "t0", "occupants",
                     "capacitance", "resistance", "solar_aperture", "gain_per_occupant", "gain_per_activity",
                     "occupancy", "weekday_windows", "weekend_windows", "occupied_offset_k", "unoccupied_offset_k",
                     "base_load", "lighting", "appliances", "predictor", "source", "t_mean", "t_amp", "ghi_peak",
                     "sunrise_h", "sunset_h", "wb_depression", "t_mean_jitter", "model", "occupancy_path"];
        prop_assume!(!known.contains(&key.as_str()));
        let mut lines = vec![
            "[simulation]", "start = 2023-07-01", "duration_h = 1",
            "[weather]", "source = synthetic",
            "[building.h1]", "zone = rc",
        ];
        let at = [3, 5, 7][section];
        let extra = format!("{key} = 1");
        lines.insert(at, &extra);
        let text = lines.join("\n");
        let res = parse_scenario_text(&text, std::path::Path::new("."));
        prop_assert!(res.is_err());
        let errs = res.err().unwrap();
        prop_assert!(errs.iter().any(|e| e.msg.contains(&key)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mpc_best_cost_never_rises(t0 in 23.0..27.0f64, t_out in 26.0..36.0f64, price in 0.05..0.5f64) {
        let cfg = MpcConfig { horizon: 8, t_hi: 24.5, iterations: 40, ..Default::default() };
        let mut rc = RcZoneSpec::new(1e7, 0.004).unwrap();
        rc.solar_aperture = 2.0;
        let p = ThermalModelParams::from_rc(&rc, true);
        let f = vec![ZoneInputs { t_out, ghi: 400.0, occupancy: 2.0, activity: 0.0 }; 8];
        let sol = mpc_solve(&cfg, &p, t0, &f, &[price; 8], (-5000.0, 0.0), None).unwrap();
        let h = &sol.diagnostics.best_cost_history;
        prop_assert!(h.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(*h.last().unwrap(), sol.diagnostics.final_cost);
        prop_assert!(sol.q.iter().all(|q| (-5000.0..=0.0).contains(q)));
    }
}
