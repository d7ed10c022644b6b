mod common;

use std::path::Path;

use common::{run_bundled, Table};
use hiersim::scenario::{
    emit_plots, parse_scenario, parse_scenario_text, read_manifest, run_scenario, validate_text, ScenarioError, BUNDLED,
};

const MINIMAL: &str = "\
[simulation]
start = 2023-07-03
duration_h = 6
seed = 2

[building.h1]
zone = rc
t0 = 25

[fcu.h1]

[controller.zone]
type = deadband_fcu
target = h1
";

fn errors(text: &str) -> Vec<String> {
    match parse_scenario_text(text, Path::new(".")) {
        Ok(_) => Vec::new(),
        Err(es) => es.iter().map(|e| e.to_string()).collect(),
    }
}

#[test]
fn every_bundled_scenario_validates() {
    for b in BUNDLED {
        validate_text(b.text, &hiersim::scenario::bundled_dir(), None).unwrap_or_else(|e| panic!("{}: {e}", b.name));
    }
}

#[test]
fn bundled_files_parse_from_disk() {
    let p = hiersim::scenario::bundled_dir().join("s3_house_der.cfg");
    let cfg = parse_scenario(&p).unwrap();
    assert_eq!(cfg.simulation.steps, 96);
    assert_eq!(cfg.buildings.len(), 1);
}

#[test]
fn minimal_scenario_parses() {
    let cfg = parse_scenario_text(MINIMAL, Path::new(".")).unwrap();
    assert_eq!(cfg.simulation.steps, 24);
    assert_eq!(cfg.simulation.dt, 900.0);
}

#[test]
fn unknown_key_is_rejected_with_line() {
    let text = MINIMAL.replace("t0 = 25", "t0 = 25\ncapacitence = 2e7");
    let e = errors(&text);
    assert!(
        e.iter().any(|m| m.contains("capacitence") && m.contains("line 9")),
        "{e:?}"
    );
}

#[test]
fn dangling_target_is_rejected() {
    let text = MINIMAL.replace("target = h1", "target = h9");
    let e = errors(&text);
    assert!(e.iter().any(|m| m.contains("h9")), "{e:?}");
}

#[test]
fn dt_must_divide_an_hour() {
    let text = MINIMAL.replace("seed = 2", "seed = 2\ndt_s = 1000");
    let e = errors(&text);
    assert!(e.iter().any(|m| m.contains("3600")), "{e:?}");
}

#[test]
fn equipment_without_controller_is_rejected() {
    let text = MINIMAL.replace("[controller.zone]\ntype = deadband_fcu\ntarget = h1\n", "");
    assert!(!errors(&text).is_empty());
}

#[test]
fn reserved_names_are_rejected() {
    let text = format!("{MINIMAL}\n[battery.h1]\n\n[ev.h1.pv]\n\n[controller.der]\ntype = tou_der\ntarget = h1\n");
    let e = errors(&text);
    assert!(e.iter().any(|m| m.contains("'pv'")), "{e:?}");
}

#[test]
fn syntax_errors_are_reported() {
    for bad in [
        "[simulation\nstart = 2023-01-01",
        "start = 2023-01-01",
        "[simulation]\nstart 2023",
    ] {
        assert!(!errors(bad).is_empty(), "{bad}");
    }
    let dup = format!("{MINIMAL}\n[building.h1]\nzone = rc\n");
    assert!(!errors(&dup).is_empty());
}

#[test]
fn zero_duration_writes_header_only() {
    let text = MINIMAL.replace("duration_h = 6", "duration_h = 0");
    let cfg = validate_text(&text, Path::new("."), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let m = run_scenario(&cfg, dir.path()).unwrap();
    let t = Table::read(&dir.path().join("timeseries.csv"));
    assert_eq!(t.rows, 0);
    assert!(t.header.len() > 2);
    assert_eq!(m.cluster_energy_kwh, 0.0);
    assert!(m.buildings.iter().all(|b| b.energy_kwh == 0.0 && b.cost_usd == 0.0));
}

#[test]
fn energy_metric_is_the_step_sum() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, m, t) = run_bundled("s3_house_der", dir.path());
    let dt_h = cfg.simulation.dt / 3600.0;
    let p = t.col("c1.electrical.h1.power.observation");
    let sum: f64 = p.iter().map(|w| w * dt_h / 1000.0).sum();
    assert!(common::rel(sum, m.buildings[0].energy_kwh) < 1e-9);
    let first_time = std::fs::read_to_string(dir.path().join("timeseries.csv"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .to_string();
    assert_eq!(first_time, "2023-07-03T00:00:00");
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    run_bundled("s2_model_generalization", a.path());
    let (m, text) = read_manifest(&a.path().join("manifest.txt")).unwrap();
    let cfg = validate_text(&text, &m.base_dir, Some(m.seed)).unwrap();
    let b = tempfile::tempdir().unwrap();
    run_scenario(&cfg, b.path()).unwrap();
    for f in ["timeseries.csv", "metrics.txt", "manifest.txt"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn tampered_scenario_copy_is_refused() {
    let a = tempfile::tempdir().unwrap();
    run_bundled("s1_fan_tracking", a.path());
    let cfg = a.path().join("scenario.cfg");
    let text = std::fs::read_to_string(&cfg).unwrap();
    std::fs::write(&cfg, text.replace("mean = 0.55", "mean = 0.60")).unwrap();
    assert!(matches!(
        read_manifest(&a.path().join("manifest.txt")),
        Err(ScenarioError::Build(_))
    ));
}

#[test]
fn seed_changes_stochastic_inputs() {
    let b = hiersim::scenario::bundled("s3_house_der").unwrap();
    let base = hiersim::scenario::bundled_dir();
    let run = |seed| {
        let cfg = validate_text(b.text, &base, Some(seed)).unwrap();
        let d = tempfile::tempdir().unwrap();
        run_scenario(&cfg, d.path()).unwrap();
        std::fs::read(d.path().join("timeseries.csv")).unwrap()
    };
    assert_ne!(run(1), run(2));
}

#[test]
fn include_filter_limits_columns() {
    let text = format!("{MINIMAL}\n[output]\ninclude = c1.thermal.h1.zone\n");
    let cfg = validate_text(&text, Path::new("."), None).unwrap();
    let d = tempfile::tempdir().unwrap();
    run_scenario(&cfg, d.path()).unwrap();
    let t = Table::read(&d.path().join("timeseries.csv"));
    assert_eq!(
        t.header,
        [
            "t",
            "time",
            "c1.thermal.h1.zone.t_zone.state",
            "c1.thermal.h1.zone.t_zone.observation"
        ]
    );
}

fn well_formed(path: &Path) -> roxmltree::Document<'static> {
    let text = std::fs::read_to_string(path).unwrap();
    let leaked: &'static str = Box::leak(text.into_boxed_str());
    let doc = roxmltree::Document::parse(leaked).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    doc
}

fn polylines(doc: &roxmltree::Document<'_>) -> usize {
    doc.descendants().filter(|n| n.has_tag_name("polyline")).count()
}

#[test]
fn fan_run_plots() {
    let d = tempfile::tempdir().unwrap();
    run_bundled("s1_fan_tracking", d.path());
    let r = emit_plots(d.path(), None).unwrap();
    let fan = d.path().join("fan_tracking.svg");
    assert!(r.written.contains(&fan));
    let doc = well_formed(&fan);
    // setpoint plus three fans
    assert_eq!(polylines(&doc), 4);
    assert!(r.skipped.iter().any(|s| s.starts_with("soc")), "{:?}", r.skipped);
    assert!(!d.path().join("soc.svg").exists());
}

#[test]
fn requested_plot_without_data_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    run_bundled("s1_fan_tracking", d.path());
    assert!(matches!(
        emit_plots(d.path(), Some(&["soc"])),
        Err(ScenarioError::Plot(_))
    ));
    assert!(emit_plots(d.path(), Some(&["fan_tracking"])).is_ok());
    assert!(emit_plots(d.path(), Some(&["nope"])).is_err());
}

#[test]
fn plots_need_a_run() {
    let d = tempfile::tempdir().unwrap();
    assert!(emit_plots(d.path(), None).is_err());
}

#[test]
fn cluster_plots() {
    let d = tempfile::tempdir().unwrap();
    let (_, m, _) = run_bundled("s4_cluster5", d.path());
    let r = emit_plots(d.path(), None).unwrap();
    assert!(
        r.skipped.iter().all(|s| s.starts_with("fan_tracking")),
        "{:?}",
        r.skipped
    );
    for p in &r.written {
        well_formed(p);
    }
    let doc = well_formed(&d.path().join("cumulative_energy.svg"));
    assert_eq!(polylines(&doc), 5);
    let mut e: Vec<f64> = m.buildings.iter().map(|b| b.energy_kwh).collect();
    e.sort_by(f64::total_cmp);
    e.dedup();
    assert_eq!(e.len(), 5);
}

#[test]
fn tank_variant_heats_water() {
    let d = tempfile::tempdir().unwrap();
    let (_, _, t) = run_bundled("s3_house_der_tank", d.path());
    let temp = t.col("c1.water.h2.tank.t_tank.state");
    assert!(temp.iter().all(|v| (40.0..=95.0).contains(v)), "{temp:?}");
    assert!(t.col("c1.electrical.h2.dhw.power.state").iter().any(|p| *p > 0.0));
}

#[test]
fn hvac_shutoff_lets_the_zone_float() {
    let d = tempfile::tempdir().unwrap();
    let (_, _, t) = run_bundled("s2_model_generalization", d.path());
    let q = t.col("c1.thermal.h1.fcu.q_zone.state");
    let half = q.len() / 2;
    assert!(q[..half].iter().any(|v| *v < 0.0));
    assert!(q[half + 1..].iter().all(|v| *v == 0.0));
    let pred = t.col("c1.thermal.h1.zone_pred.t_pred.state");
    let real = t.col("c1.thermal.h1.zone.t_zone.state");
    let worst = pred.iter().zip(real).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.5, "predictor drift {worst}");
}

#[test]
fn comfort_offset_shifts_the_band() {
    let text = MINIMAL
        .replace("t0 = 25", "t0 = 25\nunoccupied_offset_k = 2")
        .replace("duration_h = 6", "duration_h = 24")
        .replace("target = h1", "target = h1\nuse_comfort_offset = true");
    let cfg = validate_text(&text, Path::new("."), None).unwrap();
    let d = tempfile::tempdir().unwrap();
    run_scenario(&cfg, d.path()).unwrap();
    let t = Table::read(&d.path().join("timeseries.csv"));
    let off = t.col("c1.thermal.h1.occupancy.comfort_offset.disturbance");
    assert!(off.contains(&0.0) && off.contains(&2.0), "{off:?}");
    for ((o, lo), hi) in off
        .iter()
        .zip(t.col("c1.thermal.h1.t_lo.observation"))
        .zip(t.col("c1.thermal.h1.t_hi.observation"))
    {
        assert_eq!(*lo, 23.0 + o);
        assert_eq!(*hi, 25.0 + o);
    }
}
