//! C ABI for the laboratory.
//!
//! Every entry point returns a [`ZcritStatus`]; results go through out
//! pointers. Models and Bergman data are opaque handles that must be
//! released with the matching `_free` function. On failure the message is
//! kept per thread and available through [`zcrit_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use zcrit::charforms::z_integral_check;
use zcrit::config::ExperimentConfig;
use zcrit::curvature::scalar_and_laplacian_field;
use zcrit::quantization::{bergman, Bergman};
use zcrit::{Error, KahlerModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZcritStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    /// Non-positive metric, ill-conditioned or singular Gram matrix, failed fit or flow.
    Numerical = 4,
    /// Dimension, degree or model not supported.
    Unsupported = 5,
    /// Output buffer length does not match.
    BufferSize = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque Kähler model.
pub struct ZcritModel(KahlerModel);

/// Opaque Bergman data (section basis, Gram matrix and density) at one `k`.
pub struct ZcritBergman(Bergman);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ZcritStatus {
    match e {
        Error::InvalidArgument(_) | Error::NodeMismatch { .. } => ZcritStatus::InvalidArgument,
        Error::Config(_) => ZcritStatus::Config,
        Error::NonPositiveMetric { .. }
        | Error::IllConditioned(_)
        | Error::SingularGram
        | Error::Fit(_)
        | Error::FlowAborted(_) => ZcritStatus::Numerical,
        Error::DimensionOutOfRange(_)
        | Error::DegenerateDimension { .. }
        | Error::OrderOutOfRange(_)
        | Error::Unsupported(_) => ZcritStatus::Unsupported,
        Error::Io(_) => ZcritStatus::Io,
    }
}

struct Fail(ZcritStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ZcritStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ZcritStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ZcritStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            ZcritStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(ZcritStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_to(buf: *mut f64, len: usize, values: &[f64]) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len != values.len() {
        return Err(Fail(
            ZcritStatus::BufferSize,
            format!("buffer holds {len} values, {} required", values.len()),
        ));
    }
    std::slice::from_raw_parts_mut(buf, len).copy_from_slice(values);
    Ok(())
}

unsafe fn model_ref<'a>(m: *const ZcritModel) -> Result<&'a KahlerModel, Fail> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

unsafe fn bergman_ref<'a>(b: *const ZcritBergman) -> Result<&'a Bergman, Fail> {
    b.as_ref().map(|b| &b.0).ok_or_else(|| null("bergman handle"))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zcrit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn zcrit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Fubini–Study metric on ℂPⁿ in the class `scale·H`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zcrit_model_fubini_study(
    n: u32,
    scale: f64,
    level: u32,
    out: *mut *mut ZcritModel,
) -> ZcritStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = KahlerModel::fubini_study_with_level(n as usize, scale, level as usize)?;
        write_out(out, Box::into_raw(Box::new(ZcritModel(m))), "out")
    })
}

/// Builds the model described by the `[model]` table of a TOML config.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zcrit_model_from_config(
    config: *const c_char,
    out: *mut *mut ZcritModel,
) -> ZcritStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut c = ExperimentConfig::parse(str_arg(config, "config")?)?;
        c.fill_defaults();
        let m = c.build_model()?;
        write_out(out, Box::into_raw(Box::new(ZcritModel(m))), "out")
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn zcrit_model_free(model: *mut ZcritModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zcrit_model_dimension(model: *const ZcritModel, out: *mut u32) -> ZcritStatus {
    guard(|| write_out(out, model_ref(model)?.complex_dimension as u32, "out"))
}

/// Number of radial quadrature nodes, the length of per-node outputs.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zcrit_model_node_count(model: *const ZcritModel, out: *mut usize) -> ZcritStatus {
    guard(|| write_out(out, model_ref(model)?.quadrature.radial_len(), "out"))
}

/// Scalar curvature at the radial nodes; `len` must equal the node count.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn zcrit_model_scalar_curvature(
    model: *const ZcritModel,
    buf: *mut f64,
    len: usize,
) -> ZcritStatus {
    guard(|| {
        let (s, _) = scalar_and_laplacian_field(model_ref(model)?);
        copy_to(buf, len, &s)
    })
}

/// `∫ Z̃_j ωⁿ` by quadrature and its topological value.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zcrit_model_z_integral(
    model: *const ZcritModel,
    j: u32,
    integral: *mut f64,
    topological: *mut f64,
) -> ZcritStatus {
    guard(|| {
        if integral.is_null() || topological.is_null() {
            return Err(null("output"));
        }
        let r = z_integral_check(model_ref(model)?, j as usize)?;
        write_out(integral, r.integral, "integral")?;
        write_out(topological, r.topological_value, "topological")
    })
}

/// Section basis, Gram matrix and Bergman density at level `k`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zcrit_bergman_new(
    model: *const ZcritModel,
    k: u32,
    out: *mut *mut ZcritBergman,
) -> ZcritStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let b = bergman(model_ref(model)?, k)?;
        write_out(out, Box::into_raw(Box::new(ZcritBergman(b))), "out")
    })
}

/// # Safety
/// `b` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn zcrit_bergman_free(b: *mut ZcritBergman) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Dimension of the space of holomorphic sections.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zcrit_bergman_dimension(b: *const ZcritBergman, out: *mut usize) -> ZcritStatus {
    guard(|| write_out(out, bergman_ref(b)?.basis.dimension(), "out"))
}

/// Condition number of the scaled Gram matrix.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zcrit_bergman_condition(b: *const ZcritBergman, out: *mut f64) -> ZcritStatus {
    guard(|| write_out(out, bergman_ref(b)?.gram.condition, "out"))
}

/// Number of samples of the density (radial or full grid, depending on the basis).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zcrit_bergman_density_len(b: *const ZcritBergman, out: *mut usize) -> ZcritStatus {
    guard(|| write_out(out, bergman_ref(b)?.density.values.len(), "out"))
}

/// Bergman density `ρ_k` at the sample nodes.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn zcrit_bergman_density(b: *const ZcritBergman, buf: *mut f64, len: usize) -> ZcritStatus {
    guard(|| copy_to(buf, len, &bergman_ref(b)?.density.real_parts()))
}

/// Runs the experiment in a TOML config and returns the report as JSON.
/// `passed` receives whether every check passed. Free the string with
/// [`zcrit_string_free`].
///
/// # Safety
/// `config` must be a NUL-terminated string; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn zcrit_run(
    config: *const c_char,
    report_json: *mut *mut c_char,
    passed: *mut bool,
) -> ZcritStatus {
    guard(|| {
        if report_json.is_null() || passed.is_null() {
            return Err(null("output"));
        }
        let mut c = ExperimentConfig::parse(str_arg(config, "config")?)?;
        if c.verb.is_none() {
            return Err(Error::Config("config has no verb".into()).into());
        }
        c.fill_defaults();
        let output = zcrit::experiment::run(&c)?;
        let json = CString::new(output.report.to_json_string()).expect("JSON has no NUL");
        write_out(passed, output.report.passed(), "passed")?;
        write_out(report_json, json.into_raw(), "report_json")
    })
}

/// # Safety
/// `s` must come from this library. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn zcrit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
