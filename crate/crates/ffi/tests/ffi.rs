use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use esln_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = esln_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(scenario: &str, pairs: &[(&str, &str)]) -> *mut EslnConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { esln_config_new(c(scenario).as_ptr(), &mut cfg) }, EslnStatus::Ok);
    for (k, v) in pairs {
        assert_eq!(unsafe { esln_config_set(cfg, c(k).as_ptr(), c(v).as_ptr()) }, EslnStatus::Ok, "{k}");
    }
    cfg
}

#[test]
fn ensemble_round_trip_through_handles() {
    let cfg = config("stationary", &[("samples", "24"), ("t_max", "0.2"), ("workers", "1")]);
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { esln_run_ensemble(cfg, &mut res) }, EslnStatus::Ok);
    let n = unsafe { esln_result_len(res) };
    assert_eq!(n, 201);
    assert_eq!(unsafe { esln_result_excluded(res) }, 0);

    let mut t = vec![0.0; n];
    let mut tr = vec![0.0; n];
    let mut err = vec![0.0; n];
    unsafe {
        assert_eq!(esln_result_copy(res, EslnSeries::Time, t.as_mut_ptr(), n), EslnStatus::Ok);
        assert_eq!(esln_result_copy(res, EslnSeries::TraceRe, tr.as_mut_ptr(), n), EslnStatus::Ok);
        assert_eq!(esln_result_copy(res, EslnSeries::SzErr, err.as_mut_ptr(), n), EslnStatus::Ok);
    }
    assert_eq!(t[0], 0.0);
    assert!((t[n - 1] - 0.2).abs() < 1e-12);
    assert!((tr[0] - 1.0).abs() < 1e-14);
    assert!(err.iter().all(|e| e.is_finite() && *e >= 0.0));

    let mut short = vec![0.0; n - 1];
    let status = unsafe { esln_result_copy(res, EslnSeries::Sz, short.as_mut_ptr(), n - 1) };
    assert_eq!(status, EslnStatus::BufferTooSmall);
    assert!(last_error().contains("201"));

    unsafe {
        esln_result_free(res);
        esln_config_free(cfg);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { esln_config_new(c("fig9").as_ptr(), &mut cfg) }, EslnStatus::UnknownScenario);
    assert!(cfg.is_null());
    assert_eq!(unsafe { esln_config_new(ptr::null(), &mut cfg) }, EslnStatus::NullPointer);

    let cfg = config("stationary", &[]);
    let status = unsafe { esln_config_set(cfg, c("alpha").as_ptr(), c("strong").as_ptr()) };
    assert_eq!(status, EslnStatus::InvalidConfig);
    assert!(last_error().contains("alpha"));
    let status = unsafe { esln_config_set(cfg, c("batches").as_ptr(), c("2").as_ptr()) };
    assert_eq!(status, EslnStatus::Ok);
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { esln_run_ensemble(cfg, &mut res) }, EslnStatus::InvalidConfig);
    assert!(res.is_null());
    assert_eq!(unsafe { esln_run_ensemble(ptr::null(), &mut res) }, EslnStatus::NullPointer);
    assert_eq!(unsafe { esln_result_len(ptr::null()) }, 0);
    unsafe {
        esln_config_free(cfg);
        esln_config_free(ptr::null_mut());
        esln_result_free(ptr::null_mut());
    }
}

#[test]
fn unreliable_results_are_still_returned() {
    let cfg = config("stationary", &[("samples", "8"), ("t_max", "0.01"), ("delta", "1e305")]);
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { esln_run_ensemble(cfg, &mut res) }, EslnStatus::Unreliable);
    assert!(!res.is_null());
    assert_eq!(unsafe { esln_result_excluded(res) }, 8);
    unsafe {
        esln_result_free(res);
        esln_config_free(cfg);
    }
}

#[test]
fn scenario_writes_files_and_lz_limit_is_exposed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal");
    let cfg = config("calibrate", &[("t0_list", "-10"), ("out", out.to_str().unwrap())]);
    assert_eq!(unsafe { esln_run_scenario(cfg) }, EslnStatus::Ok);
    assert!(out.join("calibration.csv").exists() && out.join("meta").exists());
    unsafe { esln_config_free(cfg) };

    let mut v = 0.0;
    assert_eq!(unsafe { esln_lz_limit(1.0, 5.0, &mut v) }, EslnStatus::Ok);
    assert!((v - 0.4608054).abs() < 1e-7);
    assert_eq!(unsafe { esln_lz_limit(1.0, -1.0, &mut v) }, EslnStatus::Domain);
    assert_eq!(unsafe { esln_lz_limit(1.0, 5.0, ptr::null_mut()) }, EslnStatus::NullPointer);
}

#[test]
fn header_declares_every_entry_point_and_compiles() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/include/esln.h");
    let header = std::fs::read_to_string(path).unwrap();
    for f in [
        "esln_last_error",
        "esln_config_new",
        "esln_config_set",
        "esln_config_free",
        "esln_run_ensemble",
        "esln_run_scenario",
        "esln_result_len",
        "esln_result_excluded",
        "esln_result_copy",
        "esln_result_free",
        "esln_lz_limit",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
    assert!(header.contains("typedef struct EslnConfig EslnConfig;"));
    assert!(header.contains("ESLN_STATUS_UNRELIABLE = 10"));
    // A C compiler is optional in build environments.
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", path]).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
