//! C ABI for the loschmidt library.
//!
//! The surface mirrors the CLI workflow: parse or load a config into an
//! opaque experiment handle, optionally override the seed, run it, then read
//! the time-series records or write them as CSV. Every fallible call returns
//! an `lsch_status`; on any non-OK status a human-readable message for the
//! calling thread is available from `lsch_last_error` until the next
//! failing call on that thread.
//!
//! Records are plain structs of eight doubles in the same order as the CSV
//! columns, so a caller can treat a record buffer as a row-major matrix.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use loschmidt::config::ExperimentConfig;
use loschmidt::harness::{self, TimeSeriesRecord};
use loschmidt::Error;

/// Status codes returned by every fallible function.
#[allow(non_camel_case_types)]
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum lsch_status {
    /// Success.
    LSCH_OK = 0,
    /// Invalid configuration (parse error, bad value, missing seed).
    LSCH_ERR_CONFIG = 1,
    /// A numerical invariant was violated during the run.
    LSCH_ERR_NUMERIC = 2,
    /// File I/O failed.
    LSCH_ERR_IO = 3,
    /// A required pointer argument was null.
    LSCH_ERR_NULL_ARG = 4,
    /// The caller-provided buffer is too small.
    LSCH_ERR_BUFFER_TOO_SMALL = 5,
    /// A string argument was not valid UTF-8.
    LSCH_ERR_UTF8 = 6,
    /// Unexpected internal failure.
    LSCH_ERR_INTERNAL = 7,
}

use lsch_status::*;

/// One sample of the computed time series; field order matches the CSV
/// columns emitted by the CLI.
#[allow(non_camel_case_types)]
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct lsch_record {
    pub t: f64,
    pub coherence_re: f64,
    pub coherence_im: f64,
    pub coherence_abs: f64,
    pub fidelity_re: f64,
    pub fidelity_im: f64,
    pub fidelity_abs: f64,
    pub identity_residual: f64,
}

impl From<&TimeSeriesRecord> for lsch_record {
    fn from(r: &TimeSeriesRecord) -> Self {
        lsch_record {
            t: r.t,
            coherence_re: r.coherence_re,
            coherence_im: r.coherence_im,
            coherence_abs: r.coherence_abs,
            fidelity_re: r.fidelity_re,
            fidelity_im: r.fidelity_im,
            fidelity_abs: r.fidelity_abs,
            identity_residual: r.identity_residual,
        }
    }
}

/// Opaque experiment handle; create with `lsch_experiment_parse` or
/// `lsch_experiment_load`, release with `lsch_experiment_free`.
#[allow(non_camel_case_types)]
pub struct lsch_experiment {
    config: ExperimentConfig,
    records: Vec<TimeSeriesRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> lsch_status {
    match err.exit_code() {
        2 => LSCH_ERR_NUMERIC,
        3 => LSCH_ERR_IO,
        _ => LSCH_ERR_CONFIG,
    }
}

fn fail(status: lsch_status, message: &str) -> lsch_status {
    set_error(message);
    status
}

fn fail_with(err: &Error) -> lsch_status {
    fail(status_of(err), &err.to_string())
}

fn guarded(f: impl FnOnce() -> lsch_status) -> lsch_status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(LSCH_ERR_INTERNAL, "internal panic"),
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, lsch_status> {
    if ptr.is_null() {
        return Err(fail(LSCH_ERR_NULL_ARG, &format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(LSCH_ERR_UTF8, &format!("{name} is not valid UTF-8")))
}

unsafe fn handle_arg<'a>(
    exp: *const lsch_experiment,
) -> Result<&'a lsch_experiment, lsch_status> {
    if exp.is_null() {
        return Err(fail(LSCH_ERR_NULL_ARG, "experiment handle is null"));
    }
    Ok(&*exp)
}

fn boxed(config: ExperimentConfig, out: *mut *mut lsch_experiment) -> lsch_status {
    let handle = Box::new(lsch_experiment { config, records: Vec::new() });
    unsafe { *out = Box::into_raw(handle) };
    LSCH_OK
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lsch_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns the message for the most recent non-OK status on this thread,
/// or an empty string if none. The pointer stays valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn lsch_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses a configuration from text into a new experiment handle.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_parse(
    text: *const c_char,
    out: *mut *mut lsch_experiment,
) -> lsch_status {
    guarded(|| {
        if out.is_null() {
            return fail(LSCH_ERR_NULL_ARG, "out is null");
        }
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(status) => return status,
        };
        match ExperimentConfig::parse(text) {
            Ok(config) => boxed(config, out),
            Err(e) => fail_with(&e),
        }
    })
}

/// Loads a configuration file into a new experiment handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_load(
    path: *const c_char,
    out: *mut *mut lsch_experiment,
) -> lsch_status {
    guarded(|| {
        if out.is_null() {
            return fail(LSCH_ERR_NULL_ARG, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match ExperimentConfig::load(Path::new(path)) {
            Ok(config) => boxed(config, out),
            Err(e) => fail_with(&e),
        }
    })
}

/// Overrides the experiment seed, as the CLI `--seed` flag does.
///
/// # Safety
/// `exp` must be a live handle from `lsch_experiment_parse` or
/// `lsch_experiment_load`.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_set_seed(
    exp: *mut lsch_experiment,
    seed: u64,
) -> lsch_status {
    guarded(|| {
        if exp.is_null() {
            return fail(LSCH_ERR_NULL_ARG, "experiment handle is null");
        }
        (*exp).config.seed = Some(seed);
        (*exp).records.clear();
        LSCH_OK
    })
}

/// Computes the time series for the experiment and stores it in the handle.
/// On success the records are available through `lsch_experiment_points`
/// and `lsch_experiment_records`.
///
/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_run(exp: *mut lsch_experiment) -> lsch_status {
    guarded(|| {
        if exp.is_null() {
            return fail(LSCH_ERR_NULL_ARG, "experiment handle is null");
        }
        let handle = &mut *exp;
        let records = match harness::compute_records(&handle.config) {
            Ok(records) => records,
            Err(e) => return fail_with(&e),
        };
        if let Err(e) = harness::validate_records(&records, handle.config.residual_tol) {
            return fail_with(&e);
        }
        handle.records = records;
        LSCH_OK
    })
}

/// Returns the number of records produced by the last successful run,
/// or 0 if the experiment has not run (or `exp` is null).
///
/// # Safety
/// `exp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_points(exp: *const lsch_experiment) -> usize {
    if exp.is_null() {
        return 0;
    }
    (*exp).records.len()
}

/// Copies the records of the last successful run into `buf`. `capacity` is
/// the number of `lsch_record` slots in `buf`; it must be at least
/// `lsch_experiment_points(exp)`.
///
/// # Safety
/// `exp` must be a live handle and `buf` must point to at least `capacity`
/// writable `lsch_record` slots.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_records(
    exp: *const lsch_experiment,
    buf: *mut lsch_record,
    capacity: usize,
) -> lsch_status {
    guarded(|| {
        let handle = match handle_arg(exp) {
            Ok(h) => h,
            Err(status) => return status,
        };
        if buf.is_null() {
            return fail(LSCH_ERR_NULL_ARG, "buf is null");
        }
        let n = handle.records.len();
        if capacity < n {
            return fail(
                LSCH_ERR_BUFFER_TOO_SMALL,
                &format!("buffer holds {capacity} records, {n} required"),
            );
        }
        for (i, record) in handle.records.iter().enumerate() {
            *buf.add(i) = lsch_record::from(record);
        }
        LSCH_OK
    })
}

/// Returns summary statistics of the last successful run: the largest
/// identity residual and the fitted decay rate. Either output pointer may
/// be null to skip that value.
///
/// # Safety
/// `exp` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_summary(
    exp: *const lsch_experiment,
    max_residual: *mut f64,
    fitted_decay_rate: *mut f64,
) -> lsch_status {
    guarded(|| {
        let handle = match handle_arg(exp) {
            Ok(h) => h,
            Err(status) => return status,
        };
        if handle.records.is_empty() {
            return fail(LSCH_ERR_CONFIG, "experiment has not been run");
        }
        if !max_residual.is_null() {
            *max_residual = handle
                .records
                .iter()
                .map(|r| r.identity_residual)
                .fold(0.0f64, f64::max);
        }
        if !fitted_decay_rate.is_null() {
            *fitted_decay_rate = harness::fitted_decay_rate(&handle.config, &handle.records);
        }
        LSCH_OK
    })
}

/// Runs the experiment and writes the time series as CSV to `path`,
/// equivalent to `loschmidt run --quiet --out <path>`. The handle's stored
/// records are refreshed on success.
///
/// # Safety
/// `exp` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_run_csv(
    exp: *mut lsch_experiment,
    path: *const c_char,
) -> lsch_status {
    guarded(|| {
        if exp.is_null() {
            return fail(LSCH_ERR_NULL_ARG, "experiment handle is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let handle = &mut *exp;
        let records = match harness::compute_records(&handle.config) {
            Ok(records) => records,
            Err(e) => return fail_with(&e),
        };
        if let Err(e) = harness::write_csv(Path::new(path), &records) {
            return fail_with(&e);
        }
        if let Err(e) = harness::validate_records(&records, handle.config.residual_tol) {
            return fail_with(&e);
        }
        handle.records = records;
        LSCH_OK
    })
}

/// Releases an experiment handle. Passing null is a no-op.
///
/// # Safety
/// `exp` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn lsch_experiment_free(exp: *mut lsch_experiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    const DEPHASING: &str = "kind = dephasing\n\
        dim_env = 12\n\
        coupling_scale = 0.8\n\
        t_max = 2.0\n\
        n_points = 9\n\
        seed = 7\n";

    fn cstring(text: &str) -> CString {
        CString::new(text).unwrap()
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(lsch_last_error()).to_str().unwrap().to_owned() }
    }

    fn parse(text: &str) -> *mut lsch_experiment {
        let text = cstring(text);
        let mut handle: *mut lsch_experiment = ptr::null_mut();
        let status = unsafe { lsch_experiment_parse(text.as_ptr(), &mut handle) };
        assert_eq!(status, LSCH_OK, "{}", last_error());
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn version_is_package_version() {
        let version = unsafe { CStr::from_ptr(lsch_version()) };
        assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn parse_run_records_roundtrip() {
        let handle = parse(DEPHASING);
        unsafe {
            assert_eq!(lsch_experiment_points(handle), 0);
            assert_eq!(lsch_experiment_run(handle), LSCH_OK);
            let n = lsch_experiment_points(handle);
            assert_eq!(n, 9);

            let mut buf = vec![lsch_record::default(); n];
            assert_eq!(lsch_experiment_records(handle, buf.as_mut_ptr(), n), LSCH_OK);

            let config = ExperimentConfig::parse(DEPHASING).unwrap();
            let direct = harness::compute_records(&config).unwrap();
            for (got, want) in buf.iter().zip(&direct) {
                assert_eq!(got.t, want.t);
                assert_eq!(got.coherence_re, want.coherence_re);
                assert_eq!(got.coherence_im, want.coherence_im);
                assert_eq!(got.coherence_abs, want.coherence_abs);
                assert_eq!(got.fidelity_re, want.fidelity_re);
                assert_eq!(got.fidelity_im, want.fidelity_im);
                assert_eq!(got.fidelity_abs, want.fidelity_abs);
                assert_eq!(got.identity_residual, want.identity_residual);
            }

            lsch_experiment_free(handle);
        }
    }

    #[test]
    fn set_seed_overrides_config() {
        let handle_a = parse(DEPHASING);
        let handle_b = parse(DEPHASING);
        unsafe {
            assert_eq!(lsch_experiment_set_seed(handle_b, 8), LSCH_OK);
            assert_eq!(lsch_experiment_run(handle_a), LSCH_OK);
            assert_eq!(lsch_experiment_run(handle_b), LSCH_OK);
            let n = lsch_experiment_points(handle_a);
            let mut a = vec![lsch_record::default(); n];
            let mut b = vec![lsch_record::default(); n];
            assert_eq!(lsch_experiment_records(handle_a, a.as_mut_ptr(), n), LSCH_OK);
            assert_eq!(lsch_experiment_records(handle_b, b.as_mut_ptr(), n), LSCH_OK);
            assert!(a.iter().zip(&b).any(|(x, y)| x.coherence_re != y.coherence_re));
            lsch_experiment_free(handle_a);
            lsch_experiment_free(handle_b);
        }
    }

    #[test]
    fn seed_can_arrive_after_parse() {
        let seedless = DEPHASING.replace("seed = 7\n", "");
        let handle = parse(&seedless);
        unsafe {
            assert_eq!(lsch_experiment_run(handle), LSCH_ERR_CONFIG);
            assert!(last_error().contains("seed"), "{}", last_error());
            assert_eq!(lsch_experiment_set_seed(handle, 7), LSCH_OK);
            assert_eq!(lsch_experiment_run(handle), LSCH_OK);
            lsch_experiment_free(handle);
        }
    }

    #[test]
    fn parse_errors_report_config_status() {
        let text = cstring(&format!("{DEPHASING}bogus = 1\n"));
        let mut handle: *mut lsch_experiment = ptr::null_mut();
        let status = unsafe { lsch_experiment_parse(text.as_ptr(), &mut handle) };
        assert_eq!(status, LSCH_ERR_CONFIG);
        assert!(handle.is_null());
        assert!(last_error().contains("bogus"), "{}", last_error());
    }

    #[test]
    fn null_arguments_are_rejected() {
        let text = cstring(DEPHASING);
        let mut handle: *mut lsch_experiment = ptr::null_mut();
        unsafe {
            assert_eq!(
                lsch_experiment_parse(ptr::null(), &mut handle),
                LSCH_ERR_NULL_ARG
            );
            assert_eq!(
                lsch_experiment_parse(text.as_ptr(), ptr::null_mut()),
                LSCH_ERR_NULL_ARG
            );
            assert_eq!(lsch_experiment_run(ptr::null_mut()), LSCH_ERR_NULL_ARG);
            assert_eq!(lsch_experiment_points(ptr::null()), 0);
            assert_eq!(
                lsch_experiment_set_seed(ptr::null_mut(), 1),
                LSCH_ERR_NULL_ARG
            );
        }
    }

    #[test]
    fn short_buffer_is_reported() {
        let handle = parse(DEPHASING);
        unsafe {
            assert_eq!(lsch_experiment_run(handle), LSCH_OK);
            let mut buf = vec![lsch_record::default(); 2];
            assert_eq!(
                lsch_experiment_records(handle, buf.as_mut_ptr(), buf.len()),
                LSCH_ERR_BUFFER_TOO_SMALL
            );
            assert!(last_error().contains("9 required"), "{}", last_error());
            lsch_experiment_free(handle);
        }
    }

    #[test]
    fn summary_matches_direct_computation() {
        let handle = parse(DEPHASING);
        unsafe {
            let mut residual = -1.0;
            let mut rate = 0.0;
            assert_eq!(
                lsch_experiment_summary(handle, &mut residual, &mut rate),
                LSCH_ERR_CONFIG
            );
            assert_eq!(lsch_experiment_run(handle), LSCH_OK);
            assert_eq!(
                lsch_experiment_summary(handle, &mut residual, &mut rate),
                LSCH_OK
            );
            let config = ExperimentConfig::parse(DEPHASING).unwrap();
            let direct = harness::compute_records(&config).unwrap();
            let want_rate = harness::fitted_decay_rate(&config, &direct);
            let want_residual = direct
                .iter()
                .map(|r| r.identity_residual)
                .fold(0.0f64, f64::max);
            assert_eq!(rate, want_rate);
            assert_eq!(residual, want_residual);
            lsch_experiment_free(handle);
        }
    }

    #[test]
    fn run_csv_writes_rows() {
        let dir = std::env::temp_dir().join(format!("lsch-ffi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("series.csv");
        let cpath = cstring(path.to_str().unwrap());
        let handle = parse(DEPHASING);
        unsafe {
            assert_eq!(lsch_experiment_run_csv(handle, cpath.as_ptr()), LSCH_OK);
            assert_eq!(lsch_experiment_points(handle), 9);
            lsch_experiment_free(handle);
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,coherence_re"));
        assert_eq!(text.lines().count(), 10);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn residual_gate_maps_to_numeric_status() {
        let strict = format!("{DEPHASING}residual_tol = 1e-18\n");
        let handle = parse(&strict);
        unsafe {
            assert_eq!(lsch_experiment_run(handle), LSCH_ERR_NUMERIC);
            assert!(last_error().contains("residual"), "{}", last_error());
            assert_eq!(lsch_experiment_points(handle), 0);
            lsch_experiment_free(handle);
        }
    }

    #[test]
    fn load_missing_file_reports_io() {
        let path = cstring("/nonexistent/loschmidt.conf");
        let mut handle: *mut lsch_experiment = ptr::null_mut();
        let status = unsafe { lsch_experiment_load(path.as_ptr(), &mut handle) };
        assert_eq!(status, LSCH_ERR_IO);
        assert!(handle.is_null());
    }
}
