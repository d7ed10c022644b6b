use std::ffi::{CStr, CString};
use std::ptr;

use hiersim_ffi::*;

fn last_error() -> String {
    let p = hs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn bundled(name: &str) -> *mut HsScenario {
    let name = CString::new(name).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { hs_scenario_bundled(name.as_ptr(), &mut sc) }, HsStatus::Ok);
    sc
}

const MINIMAL: &str = "[simulation]\nstart = 2023-07-03\nduration_h = 2\n\n[building.h1]\nzone = rc\n\n[fcu.h1]\n\n[controller.zone]\ntype = deadband_fcu\ntarget = h1\n";

#[test]
fn stepping_matches_a_full_run() {
    let sc = bundled("s3_house_der");
    let steps = unsafe { hs_scenario_steps(sc) };
    assert_eq!(steps, 96);

    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut kwh = 0.0;
    assert_eq!(unsafe { hs_scenario_run(sc, out.as_ptr(), &mut kwh) }, HsStatus::Ok);
    assert!(kwh > 0.0);
    let csv = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();

    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { hs_sim_new(sc, &mut sim) }, HsStatus::Ok);
    unsafe { hs_scenario_free(sc) };
    while unsafe { hs_sim_step(sim) } == HsStatus::Ok {}
    assert_eq!(unsafe { hs_sim_step(sim) }, HsStatus::Finished);
    assert_eq!(unsafe { hs_sim_timestep(sim) }, steps);

    let n = unsafe { hs_sim_column_count(sim) };
    assert_eq!(n, header.len() - 2);
    for i in 0..n {
        let name = unsafe { CStr::from_ptr(hs_sim_column_name(sim, i)) }
            .to_str()
            .unwrap()
            .to_string();
        let j = header.iter().position(|h| *h == name).unwrap();
        let c = CString::new(name.clone()).unwrap();
        let mut v = f64::NAN;
        assert_eq!(unsafe { hs_sim_get(sim, c.as_ptr(), &mut v) }, HsStatus::Ok);
        assert_eq!(v.to_string(), last[j], "{name}");
    }
    assert!(unsafe { hs_sim_column_name(sim, n) }.is_null());
    unsafe { hs_sim_free(sim) };
}

#[test]
fn errors_carry_status_and_message() {
    let mut sc = ptr::null_mut();
    let bad = CString::new(MINIMAL.replace("zone = rc", "zone = rc\nfoo = 1")).unwrap();
    assert_eq!(
        unsafe { hs_scenario_from_text(bad.as_ptr(), ptr::null(), &mut sc) },
        HsStatus::InvalidScenario
    );
    assert!(sc.is_null());
    assert!(last_error().contains("foo"));

    let name = CString::new("missing").unwrap();
    assert_eq!(
        unsafe { hs_scenario_bundled(name.as_ptr(), &mut sc) },
        HsStatus::NotFound
    );
    assert_eq!(
        unsafe { hs_scenario_bundled(ptr::null(), &mut sc) },
        HsStatus::NullArgument
    );
    assert_eq!(unsafe { hs_sim_step(ptr::null_mut()) }, HsStatus::NullArgument);

    let bytes = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { hs_scenario_from_text(bytes.as_ptr().cast(), ptr::null(), &mut sc) },
        HsStatus::InvalidUtf8
    );

    // success clears the message
    let good = CString::new(MINIMAL).unwrap();
    assert_eq!(
        unsafe { hs_scenario_from_text(good.as_ptr(), ptr::null(), &mut sc) },
        HsStatus::Ok
    );
    assert!(hs_last_error().is_null());
    unsafe { hs_scenario_free(sc) };
    unsafe { hs_scenario_free(ptr::null_mut()) };
    unsafe { hs_sim_free(ptr::null_mut()) };
}

#[test]
fn seed_is_applied() {
    let run = |seed: u64| {
        let sc = bundled("s3_house_der");
        assert_eq!(unsafe { hs_scenario_set_seed(sc, seed) }, HsStatus::Ok);
        let d = tempfile::tempdir().unwrap();
        let out = CString::new(d.path().to_str().unwrap()).unwrap();
        let mut kwh = 0.0;
        assert_eq!(unsafe { hs_scenario_run(sc, out.as_ptr(), &mut kwh) }, HsStatus::Ok);
        unsafe { hs_scenario_free(sc) };
        kwh
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5), run(6));
}

#[test]
fn header_builds_and_links_from_c() {
    let crate_dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test exe>
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libhiersim_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("c_smoke");
    let status = std::process::Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-I"])
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c_smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")), "{text}");
}
