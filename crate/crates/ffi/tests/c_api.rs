use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use nurules_ffi::*;

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { nr_string_free(p) };
    s
}

fn builtin(name: &str) -> *mut NrScenario {
    let name = CString::new(name).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(
        unsafe { nr_scenario_builtin(name.as_ptr(), &mut sc) },
        NrStatus::Ok
    );
    sc
}

#[test]
fn toml_round_trip_through_handles() {
    let sc = builtin("two-observers");
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { nr_scenario_to_toml(sc, &mut text) }, NrStatus::Ok);
    let text = CString::new(take_string(text)).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { nr_scenario_from_toml(text.as_ptr(), &mut back) },
        NrStatus::Ok
    );
    let mut again = ptr::null_mut();
    assert_eq!(
        unsafe { nr_scenario_to_toml(back, &mut again) },
        NrStatus::Ok
    );
    assert_eq!(take_string(again).as_bytes(), text.as_bytes());
    unsafe {
        nr_scenario_free(sc);
        nr_scenario_free(back);
    }
}

#[test]
fn law_and_report_agree_on_observer() {
    let sc = builtin("observer");
    let mut law = ptr::null_mut();
    assert_eq!(unsafe { nr_outcome_law(sc, &mut law) }, NrStatus::Ok);
    let label = CString::new("ground-no-capture").unwrap();
    let mut p = f64::NAN;
    assert_eq!(
        unsafe { nr_law_probability(law, label.as_ptr(), &mut p) },
        NrStatus::Ok
    );
    assert!((p - 0.4).abs() < 1e-9, "{p}");
    let missing = CString::new("no-such-label").unwrap();
    assert_eq!(
        unsafe { nr_law_probability(law, missing.as_ptr(), &mut p) },
        NrStatus::NotFound
    );

    let n = 4000;
    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { nr_run_ensemble(sc, n, 11, 2, &mut report) },
        NrStatus::Ok
    );
    let mut f = f64::NAN;
    assert_eq!(
        unsafe { nr_report_frequency(report, label.as_ptr(), &mut f) },
        NrStatus::Ok
    );
    let se = (0.4f64 * 0.6 / n as f64).sqrt();
    assert!((f - 0.4).abs() <= 4.0 * se, "{f}");

    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { nr_report_to_json(report, &mut json) },
        NrStatus::Ok
    );
    let doc: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(doc["trials"], n);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { nr_law_to_json(law, &mut json) }, NrStatus::Ok);
    let doc: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert!((doc["capture-at-first-look"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    unsafe {
        nr_report_free(report);
        nr_law_free(law);
        nr_scenario_free(sc);
    }
}

#[test]
fn config_errors_set_status_and_message() {
    let text = CString::new("name = ").unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(
        unsafe { nr_scenario_from_toml(text.as_ptr(), &mut sc) },
        NrStatus::Config
    );
    assert!(sc.is_null());
    let msg = unsafe { CStr::from_ptr(nr_last_error()) }.to_str().unwrap();
    assert!(msg.contains("line 1"), "{msg}");
}

#[test]
fn freeing_null_is_harmless() {
    unsafe {
        nr_scenario_free(ptr::null_mut());
        nr_report_free(ptr::null_mut());
        nr_law_free(ptr::null_mut());
        nr_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/nurules.h"),
    )
    .unwrap();
    for name in [
        "nr_last_error",
        "nr_scenario_builtin",
        "nr_scenario_from_toml",
        "nr_scenario_to_toml",
        "nr_run_ensemble",
        "nr_outcome_law",
        "nr_law_probability",
        "nr_string_free",
        "NR_STATUS_NOT_FOUND",
        "typedef struct NrScenario NrScenario",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Builds the static library into its own target directory, so the outer
/// `cargo test` lock is not contended, then links a C program against it.
#[test]
fn c_program_links_against_the_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let scratch = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let target_dir = scratch.join("ffi-staticlib");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["build", "--offline", "--quiet", "--lib", "--manifest-path"])
        .arg(manifest.join("Cargo.toml"))
        .arg("--target-dir")
        .arg(&target_dir)
        .status()
        .expect("cargo runs");
    assert!(status.success());
    let lib = target_dir.join("debug/libnurules_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let exe = scratch.join("nurules_ffi_smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror"])
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = stdout.split_whitespace().collect();
    assert_eq!(fields.len(), 4, "{stdout}");
    assert!((fields[0].parse::<f64>().unwrap() - 0.5).abs() < 1e-9);
    let f: f64 = fields[1].parse().unwrap();
    assert!((f - 0.5).abs() < 4.0 * (0.25f64 / 2000.0).sqrt(), "{f}");
    assert_eq!(fields[2], (NrStatus::Config as i32).to_string());
    assert_eq!(fields[3], "1");
}
