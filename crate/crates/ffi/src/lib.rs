//! C ABI over `gravpanel`.
//!
//! Every fallible call returns a [`GpStatus`]; on failure the message is
//! kept per thread and read with [`gp_last_error`]. Handles are opaque and
//! released with their `_free` function. Strings returned through `out`
//! parameters are owned by the caller and released with [`gp_string_free`].
//! Panics never cross the boundary: they surface as `GP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use gravpanel::ingest::{load_panel, SchemaConfig};
use gravpanel::report::{run_pipeline, PipelineConfig, PipelineReport};
use gravpanel::xsdep::{frees_cd, friedman_cd, pesaran_cd, ResidualPanel};
use gravpanel::{BilateralPanel, Error};
use nalgebra::DMatrix;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Bad input: config, schema, data or argument values.
    Validation = 3,
    /// Numerical failure during estimation or testing.
    Estimation = 4,
    /// Index or key out of range.
    NotFound = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

/// Cross-sectional dependence test selector for [`gp_cd_test`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpCdTest {
    Pesaran = 0,
    Friedman = 1,
    Frees = 2,
}

/// Statistic and p-value; `p_value` is NaN when the test has none (Frees).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpTestOutput {
    pub statistic: f64,
    pub p_value: f64,
}

/// Loaded bilateral panels, one per reporter.
pub struct GpPanel {
    panels: Vec<BilateralPanel>,
}

/// Result of a full pipeline run.
pub struct GpReport {
    report: PipelineReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: GpStatus, msg: impl Into<String>) -> GpStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> GpStatus {
    let status = if e.is_validation() {
        GpStatus::Validation
    } else {
        GpStatus::Estimation
    };
    fail(status, e.to_string())
}

/// Runs `f`, converting panics into `GP_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> GpStatus) -> GpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(GpStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `s` is NULL or a NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, GpStatus> {
    if s.is_null() {
        return Err(fail(GpStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(GpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `out` is NULL or writable.
unsafe fn give_string(text: String, out: *mut *mut c_char) -> GpStatus {
    if out.is_null() {
        return fail(GpStatus::NullArgument, "out is NULL");
    }
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            GpStatus::Ok
        }
        Err(_) => fail(GpStatus::Estimation, "text contains an interior NUL"),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn gp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` is NULL or came from this library and has not been freed.
#[no_mangle]
pub unsafe extern "C" fn gp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a long-format bilateral CSV.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gp_panel_load(path: *const c_char, out: *mut *mut GpPanel) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return fail(GpStatus::NullArgument, "out is NULL");
        }
        *out = ptr::null_mut();
        let path = match read_str(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_panel(path, &SchemaConfig::default()) {
            Ok(panels) => {
                *out = Box::into_raw(Box::new(GpPanel { panels }));
                GpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of reporters in the panel; 0 for NULL.
///
/// # Safety
/// `panel` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_panel_reporter_count(panel: *const GpPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.panels.len())
}

/// Reporter code, partner count, year count and missing cells of reporter `i`.
///
/// # Safety
/// `panel` is a live handle; every out pointer is writable.
#[no_mangle]
pub unsafe extern "C" fn gp_panel_describe(
    panel: *const GpPanel,
    i: usize,
    reporter: *mut *mut c_char,
    n_partners: *mut usize,
    n_years: *mut usize,
    n_missing: *mut usize,
) -> GpStatus {
    guard(|| {
        let Some(p) = panel.as_ref() else {
            return fail(GpStatus::NullArgument, "panel is NULL");
        };
        if n_partners.is_null() || n_years.is_null() || n_missing.is_null() {
            return fail(GpStatus::NullArgument, "out is NULL");
        }
        let Some(b) = p.panels.get(i) else {
            return fail(GpStatus::NotFound, format!("reporter index {i} of {}", p.panels.len()));
        };
        let idx = b.index();
        *n_partners = idx.n_entities();
        *n_years = idx.n_periods();
        *n_missing = gravpanel::ingest::RawVariable::ALL
            .iter()
            .map(|v| b.get(*v).missing_count())
            .sum();
        give_string(b.reporter().to_string(), reporter)
    })
}

/// Releases a panel handle. NULL is ignored.
///
/// # Safety
/// `panel` is NULL or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_panel_free(panel: *mut GpPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Runs every stage for the config file at `config_path`. When `has_seed`
/// is true, `seed` replaces the configured master seed.
///
/// # Safety
/// `config_path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gp_pipeline_run(
    config_path: *const c_char,
    has_seed: bool,
    seed: u64,
    out: *mut *mut GpReport,
) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return fail(GpStatus::NullArgument, "out is NULL");
        }
        *out = ptr::null_mut();
        let path = match read_str(config_path, "config_path") {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        let mut cfg = match PipelineConfig::load(&path) {
            Ok((c, _)) => c,
            Err(e) => return from_error(e),
        };
        if has_seed {
            cfg.seed = seed;
        }
        match run_pipeline(&cfg) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(GpReport { report }));
                GpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of tables in the report; 0 for NULL.
///
/// # Safety
/// `report` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gp_report_table_count(report: *const GpReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.tables().len())
}

/// Key (CSV file stem) of table `i`, e.g. `cd_tests` or `reg_exports_outfdi`.
///
/// # Safety
/// `report` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gp_report_table_key(report: *const GpReport, i: usize, out: *mut *mut c_char) -> GpStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            return fail(GpStatus::NullArgument, "report is NULL");
        };
        let tables = r.report.tables();
        match tables.get(i) {
            Some(t) => give_string(t.key.clone(), out),
            None => fail(GpStatus::NotFound, format!("table index {i} of {}", tables.len())),
        }
    })
}

/// Long-format CSV of the table with the given key.
///
/// # Safety
/// `report` is a live handle; `key` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gp_report_table_csv(
    report: *const GpReport,
    key: *const c_char,
    out: *mut *mut c_char,
) -> GpStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            return fail(GpStatus::NullArgument, "report is NULL");
        };
        let key = match read_str(key, "key") {
            Ok(k) => k,
            Err(s) => return s,
        };
        let Some(t) = r.report.tables().into_iter().find(|t| t.key == key) else {
            return fail(GpStatus::NotFound, format!("no table `{key}`"));
        };
        let mut buf = Vec::new();
        if let Err(e) = t.write_csv(&mut buf) {
            return from_error(e);
        }
        give_string(String::from_utf8_lossy(&buf).into_owned(), out)
    })
}

/// The full Markdown report.
///
/// # Safety
/// `report` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gp_report_markdown(report: *const GpReport, out: *mut *mut c_char) -> GpStatus {
    guard(|| match report.as_ref() {
        Some(r) => give_string(r.report.to_markdown(), out),
        None => fail(GpStatus::NullArgument, "report is NULL"),
    })
}

/// Writes every CSV plus `report.md` into `dir`, creating it if needed.
///
/// # Safety
/// `report` is a live handle; `dir` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gp_report_write(report: *const GpReport, dir: *const c_char) -> GpStatus {
    guard(|| {
        let Some(r) = report.as_ref() else {
            return fail(GpStatus::NullArgument, "report is NULL");
        };
        let dir = match read_str(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match r.report.write_to(Path::new(dir)) {
            Ok(_) => GpStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Releases a report handle. NULL is ignored.
///
/// # Safety
/// `report` is NULL or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_report_free(report: *mut GpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Cross-sectional dependence test on an `n x t` residual matrix stored
/// row-major (one row per entity).
///
/// # Safety
/// `residuals` points to `n * t` readable doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gp_cd_test(
    test: GpCdTest,
    residuals: *const f64,
    n: usize,
    t: usize,
    out: *mut GpTestOutput,
) -> GpStatus {
    guard(|| {
        if residuals.is_null() || out.is_null() {
            return fail(GpStatus::NullArgument, "residuals or out is NULL");
        }
        let Some(len) = n.checked_mul(t) else {
            return fail(GpStatus::Validation, "n * t overflows");
        };
        let data = std::slice::from_raw_parts(residuals, len);
        let panel = match ResidualPanel::from_matrix(DMatrix::from_row_slice(n, t, data)) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        let res = match test {
            GpCdTest::Pesaran => pesaran_cd(&panel),
            GpCdTest::Friedman => friedman_cd(&panel),
            GpCdTest::Frees => frees_cd(&panel),
        };
        match res {
            Ok(r) => {
                *out = GpTestOutput {
                    statistic: r.statistic,
                    p_value: r.p_value.unwrap_or(f64::NAN),
                };
                GpStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
