//! C ABI over `sipipe`.
//!
//! Objects are opaque handles created by `sip_*_new`/`sip_*_from_*` and
//! released by the matching `sip_*_free`. Every fallible call returns a
//! [`SipStatus`]; on failure `sip_last_error` describes the error on the
//! calling thread. Panics never cross the boundary.

use sipipe::data::{Covariance, DataMatrix};
use sipipe::engine::{run_pipeline, SweepConfig};
use sipipe::error::Error;
use sipipe::graph::PipelineGraph;
use sipipe::inference::{default_pair, test_with_result, TestSpec};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SipStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad pipeline configuration or graph.
    ConfigError = 3,
    /// Bad data or covariance.
    InvalidData = 4,
    /// The requested hypothesis cannot be formed from the pipeline output.
    Untestable = 5,
    /// Degenerate direction, precision loss or sweep failure.
    NumericalError = 6,
    /// A Rust panic was caught.
    Panic = 7,
}

/// Opaque pipeline handle.
pub struct SipPipeline(PipelineGraph);

/// Opaque data handle (row-major `n x d`).
pub struct SipData(DataMatrix);

/// Outcome of one selective test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SipTestResult {
    pub cluster_a: i32,
    pub cluster_b: i32,
    pub z_obs: f64,
    pub sigma_t: f64,
    pub p_selective: f64,
    pub p_naive: f64,
    pub p_bonferroni: f64,
    pub p_wopp: f64,
    /// Pieces of the truncation region.
    pub n_intervals: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SipStatus {
    match e {
        Error::Component { source, .. } => status_of(source),
        Error::Config(_) | Error::GraphInvalid(_) | Error::Json(_) => SipStatus::ConfigError,
        Error::InvalidData(_) | Error::Io(_) | Error::Csv(_) => SipStatus::InvalidData,
        Error::Untestable(_) => SipStatus::Untestable,
        _ => SipStatus::NumericalError,
    }
}

/// Run `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (SipStatus, String)>) -> SipStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SipStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SipStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (SipStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SipStatus, String) {
    (SipStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sip_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a pipeline from its JSON configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sip_pipeline_from_json(json: *const c_char, out: *mut *mut SipPipeline) -> SipStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|_| (SipStatus::InvalidArgument, "json is not valid UTF-8".to_string()))?;
        let g = PipelineGraph::from_json(text).map_err(lib_err)?;
        unsafe { *out = Box::into_raw(Box::new(SipPipeline(g))) };
        Ok(())
    })
}

/// # Safety
/// `p` must come from `sip_pipeline_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sip_pipeline_free(p: *mut SipPipeline) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Copy `n * d` row-major values into a new data handle.
///
/// # Safety
/// `values` must point to `n * d` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sip_data_new(values: *const f64, n: usize, d: usize, out: *mut *mut SipData) -> SipStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n
            .checked_mul(d)
            .ok_or_else(|| (SipStatus::InvalidArgument, format!("{n} x {d} overflows")))?;
        let v = unsafe { std::slice::from_raw_parts(values, len) }.to_vec();
        let x = DataMatrix::new(n, d, v).map_err(lib_err)?;
        unsafe { *out = Box::into_raw(Box::new(SipData(x))) };
        Ok(())
    })
}

/// # Safety
/// `x` must come from `sip_data_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sip_data_free(x: *mut SipData) {
    if !x.is_null() {
        drop(unsafe { Box::from_raw(x) });
    }
}

/// Run the pipeline. Writes one label per row into `labels` (`-1`
/// outlier or noise, `0` unclustered, `1..K` cluster) and one 0/1 flag
/// per feature into `features`.
///
/// # Safety
/// Handles must be live; `labels` must hold `n` and `features` `d` entries.
#[no_mangle]
pub unsafe extern "C" fn sip_run_pipeline(
    p: *const SipPipeline,
    x: *const SipData,
    labels: *mut i32,
    features: *mut u8,
) -> SipStatus {
    guard(|| {
        if p.is_null() || x.is_null() {
            return Err(null("handle"));
        }
        if labels.is_null() || features.is_null() {
            return Err(null("output buffer"));
        }
        let (g, x) = unsafe { (&(*p).0, &(*x).0) };
        let r = run_pipeline(g, x).map_err(lib_err)?;
        let lab = unsafe { std::slice::from_raw_parts_mut(labels, x.rows()) };
        lab.copy_from_slice(&r.labels);
        let fs = unsafe { std::slice::from_raw_parts_mut(features, x.cols()) };
        fs.fill(0);
        for &j in &r.features {
            fs[j] = 1;
        }
        Ok(())
    })
}

/// Selective test of the mean difference of `feature` between clusters
/// `cluster_a` and `cluster_b` under `Sigma = sigma2 * I`. Passing 0 for
/// both clusters tests the two largest.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sip_selective_test(
    p: *const SipPipeline,
    x: *const SipData,
    sigma2: f64,
    cluster_a: i32,
    cluster_b: i32,
    feature: usize,
    out: *mut SipTestResult,
) -> SipStatus {
    guard(|| {
        if p.is_null() || x.is_null() {
            return Err(null("handle"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let (g, x) = unsafe { (&(*p).0, &(*x).0) };
        if feature >= x.cols() {
            return Err((
                SipStatus::InvalidArgument,
                format!("feature {feature} out of range for {} columns", x.cols()),
            ));
        }
        let sigma = Covariance::IdentityScaled(sigma2);
        sigma.validate(x.rows(), x.cols()).map_err(lib_err)?;
        let observed = run_pipeline(g, x).map_err(lib_err)?;
        let (a, b) = if cluster_a == 0 && cluster_b == 0 {
            default_pair(&observed).map_err(lib_err)?
        } else {
            (cluster_a, cluster_b)
        };
        let spec = TestSpec {
            cluster_a: a,
            cluster_b: b,
            feature,
        };
        let t = test_with_result(g, x, &sigma, &observed, &spec, &SweepConfig::default()).map_err(lib_err)?;
        let r = &t.record;
        unsafe {
            *out = SipTestResult {
                cluster_a: a,
                cluster_b: b,
                z_obs: r.z_obs,
                sigma_t: r.sigma_t,
                p_selective: r.p_selective,
                p_naive: r.p_naive,
                p_bonferroni: r.p_bonferroni,
                p_wopp: r.p_wopp,
                n_intervals: r.n_intervals,
            }
        };
        Ok(())
    })
}
