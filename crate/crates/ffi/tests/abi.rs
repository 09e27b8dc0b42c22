//! The exported functions called as a C client would call them.

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use gravpanel_ffi::*;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = gp_last_error();
    assert!(!p.is_null(), "no error recorded");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_string_lossy().into_owned();
    gp_string_free(s);
    out
}

#[test]
fn version_matches_the_package() {
    let v = unsafe { CStr::from_ptr(gp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn panel_handle_round_trip() {
    let path = c(data("synthetic_panel.csv").to_str().unwrap());
    let mut panel = ptr::null_mut();
    unsafe {
        assert_eq!(gp_panel_load(path.as_ptr(), &mut panel), GpStatus::Ok);
        assert!(gp_last_error().is_null());
        assert_eq!(gp_panel_reporter_count(panel), 4);
        let (mut code, mut n, mut t, mut missing) = (ptr::null_mut(), 0, 0, 0);
        assert_eq!(gp_panel_describe(panel, 0, &mut code, &mut n, &mut t, &mut missing), GpStatus::Ok);
        assert_eq!((take(code).as_str(), n, t, missing), ("CZ", 6, 14, 1));
        assert_eq!(gp_panel_describe(panel, 9, &mut code, &mut n, &mut t, &mut missing), GpStatus::NotFound);
        assert!(last_error().contains("reporter index 9"));
        gp_panel_free(panel);
        gp_panel_free(ptr::null_mut());
        assert_eq!(gp_panel_reporter_count(ptr::null()), 0);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut panel = ptr::null_mut();
    unsafe {
        assert_eq!(gp_panel_load(ptr::null(), &mut panel), GpStatus::NullArgument);
        let missing = c("/nonexistent/panel.csv");
        assert_eq!(gp_panel_load(missing.as_ptr(), &mut panel), GpStatus::Validation);
        assert!(panel.is_null());
        assert!(!last_error().is_empty());
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(gp_panel_load(bad.as_ptr().cast(), &mut panel), GpStatus::InvalidUtf8);
        let mut out = GpTestOutput { statistic: 0.0, p_value: 0.0 };
        let flat = [1.0, 2.0, 3.0, 4.0];
        // a single entity has no pairs to correlate
        assert_eq!(gp_cd_test(GpCdTest::Pesaran, flat.as_ptr(), 1, 4, &mut out), GpStatus::Validation);
        assert_eq!(gp_cd_test(GpCdTest::Pesaran, ptr::null(), 2, 2, &mut out), GpStatus::NullArgument);
    }
}

#[test]
fn cd_tests_on_identical_series() {
    let row: Vec<f64> = (1..=14).map(|k| (k as f64).sin()).collect();
    let mut both = row.clone();
    both.extend(&row);
    let mut out = GpTestOutput { statistic: 0.0, p_value: 0.0 };
    unsafe {
        assert_eq!(gp_cd_test(GpCdTest::Pesaran, both.as_ptr(), 2, 14, &mut out), GpStatus::Ok);
        assert!((out.statistic - 14f64.sqrt()).abs() < 1e-12);
        assert!(out.p_value < 0.001);
        assert_eq!(gp_cd_test(GpCdTest::Friedman, both.as_ptr(), 2, 14, &mut out), GpStatus::Ok);
        assert!((out.statistic - 26.0).abs() < 1e-12);
        assert_eq!(gp_cd_test(GpCdTest::Frees, both.as_ptr(), 2, 14, &mut out), GpStatus::Ok);
        assert!((out.statistic - 2.0 * (1.0 - 1.0 / 13.0)).abs() < 1e-12);
        assert!(out.p_value.is_nan());
    }
}

#[test]
fn pipeline_through_the_abi() {
    let cfg = c(data("synthetic.cfg").to_str().unwrap());
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(gp_pipeline_run(cfg.as_ptr(), true, 20_030_101, &mut report), GpStatus::Ok, "{:?}", {
            let p = gp_last_error();
            (!p.is_null()).then(|| CStr::from_ptr(p).to_string_lossy().into_owned())
        });
        assert_eq!(gp_report_table_count(report), 6);
        let mut keys = Vec::new();
        for i in 0..6 {
            let mut k = ptr::null_mut();
            assert_eq!(gp_report_table_key(report, i, &mut k), GpStatus::Ok);
            keys.push(take(k));
        }
        assert_eq!(keys[0], "cd_tests");
        assert_eq!(keys[1], "unit_roots");
        let mut csv = ptr::null_mut();
        let key = c("reg_imports_infdi");
        assert_eq!(gp_report_table_csv(report, key.as_ptr(), &mut csv), GpStatus::Ok);
        assert!(take(csv).starts_with("section,row,reporter,column,value,se,p_value,display\n"));
        let nope = c("reg_nothing");
        assert_eq!(gp_report_table_csv(report, nope.as_ptr(), &mut csv), GpStatus::NotFound);
        let mut md = ptr::null_mut();
        assert_eq!(gp_report_markdown(report, &mut md), GpStatus::Ok);
        assert!(take(md).contains("### Table 1. Cross-sectional dependence tests"));
        let dir = tempfile::tempdir().unwrap();
        let d = c(dir.path().to_str().unwrap());
        assert_eq!(gp_report_write(report, d.as_ptr()), GpStatus::Ok);
        assert!(dir.path().join("report.md").exists());
        gp_report_free(report);
    }
}
