//! C interface. Every fallible call returns an `NrStatus`; on failure the message is
//! available from `nr_last_error_message` on the same thread. Handles are opaque and
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use noisereg::acceptance::run_criterion;
use noisereg::coefficients;
use noisereg::config::RunConfig;
use noisereg::integrator::{power_blowup_time, Scheme, SchemeConfig};
use noisereg::linalg::Vector;
use noisereg::lyapunov::LyapunovProfile;
use noisereg::model::{Dynamics, Model};
use noisereg::montecarlo::{explosion_probability, EnsembleConfig};
use noisereg::params::ModelParams;
use noisereg::transform;
use noisereg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidParams = 3,
    Domain = 4,
    Numerical = 5,
    Experiment = 6,
    Io = 7,
    Panic = 8,
}

/// Integration scheme selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrScheme {
    TamedEulerIto = 0,
    EulerIto = 1,
    HeunStratonovich = 2,
    YEulerAdditive = 3,
    OdeAdaptive = 4,
    HybridTamedY = 5,
}

impl From<NrScheme> for Scheme {
    fn from(s: NrScheme) -> Self {
        match s {
            NrScheme::TamedEulerIto => Scheme::TamedEulerIto,
            NrScheme::EulerIto => Scheme::EulerIto,
            NrScheme::HeunStratonovich => Scheme::HeunStratonovich,
            NrScheme::YEulerAdditive => Scheme::YEulerAdditive,
            NrScheme::OdeAdaptive => Scheme::OdeAdaptive,
            NrScheme::HybridTamedY => Scheme::HybridTamedY,
        }
    }
}

/// Opaque model handle: parameters plus the power drift `κ|x|^{m-1}x`.
pub struct NrModel {
    model: Model,
}

/// Explosion fraction with its Wilson 95% interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NrFraction {
    pub count: usize,
    pub n: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NrStatus {
    match err {
        Error::InvalidParams(_) | Error::Config(_) | Error::Precondition(_) => NrStatus::InvalidParams,
        Error::Domain(_) => NrStatus::Domain,
        Error::Quadrature { .. } | Error::RootFinding(_) | Error::Fit(_) | Error::GridMismatch(_) => NrStatus::Numerical,
        Error::Experiment(_) => NrStatus::Experiment,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => NrStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NrStatus, String)>) -> NrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside noisereg".into());
            NrStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (NrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NrStatus, String) {
    (NrStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (NrStatus, String) {
    (NrStatus::InvalidArgument, msg.into())
}

unsafe fn model_ref<'a>(h: *const NrModel) -> Result<&'a Model, (NrStatus, String)> {
    h.as_ref().map(|m| &m.model).ok_or_else(|| null("model"))
}

unsafe fn input(x: *const f64, len: usize, what: &str) -> Result<Vector, (NrStatus, String)> {
    if x.is_null() {
        return Err(null(what));
    }
    Ok(Vector::from_column_slice(std::slice::from_raw_parts(x, len)))
}

unsafe fn output<'a>(out: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (NrStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(out, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated, truncated
/// to `len`). Returns the full message length without the terminator, 0 if none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn nr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a model with the power drift. Other parameters take their defaults
/// (`C = 1`, `λ = 1`, `x_max = 1e8`). Fails with `InvalidParams` when the admissibility
/// conditions do not hold.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn nr_model_new(
    d: usize,
    m: f64,
    eta: f64,
    kappa: f64,
    r_switch: f64,
    out: *mut *mut NrModel,
) -> NrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = ModelParams::new(d, m, eta).with_kappa(kappa).with_r_switch(r_switch);
        let report = p.validate();
        if !report.is_ok() {
            return Err((NrStatus::InvalidParams, report.to_string()));
        }
        *out = Box::into_raw(Box::new(NrModel { model: Model::power(p) }));
        Ok(())
    })
}

/// Creates a model from a TOML run configuration (the `model` and `drift` sections).
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn nr_model_from_config(toml: *const c_char, out: *mut *mut NrModel) -> NrStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(toml).to_str().map_err(|e| invalid(format!("config is not UTF-8: {e}")))?;
        let cfg = RunConfig::parse(text, &[]).map_err(lib_err)?;
        if let Some(p) = cfg.problems().first() {
            return Err((NrStatus::InvalidParams, p.clone()));
        }
        *out = Box::into_raw(Box::new(NrModel { model: cfg.build_model() }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nr_model_free(model: *mut NrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nr_model_dim(model: *const NrModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.params.d)
}

unsafe fn check_dim(model: &Model, d: usize) -> Result<(), (NrStatus, String)> {
    if d != model.params.d {
        return Err(invalid(format!("expected dimension {}, got {d}", model.params.d)));
    }
    Ok(())
}

/// Writes `σ(x)` row-major into `out` (`d·d` values).
///
/// # Safety
/// `x` must hold `d` values and `out` room for `d·d`.
#[no_mangle]
pub unsafe extern "C" fn nr_model_sigma(model: *const NrModel, x: *const f64, d: usize, out: *mut f64) -> NrStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_dim(m, d)?;
        let x = input(x, d, "x")?;
        let out = output(out, d * d, "out")?;
        let s = coefficients::sigma(&m.params, &x);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = s[(i, j)];
            }
        }
        Ok(())
    })
}

/// Writes the Itô drift `b + ½ Σ (∂σ)σ` at `x` into `out`.
///
/// # Safety
/// `x` and `out` must each hold `d` values.
#[no_mangle]
pub unsafe extern "C" fn nr_model_ito_drift(model: *const NrModel, x: *const f64, d: usize, out: *mut f64) -> NrStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_dim(m, d)?;
        let x = input(x, d, "x")?;
        let out = output(out, d, "out")?;
        out.copy_from_slice(m.ito_drift(&x).as_slice());
        Ok(())
    })
}

/// `φ(x) = x/|x|^{η+1}`; `Domain` at the origin.
///
/// # Safety
/// `x` and `out` must each hold `d` values.
#[no_mangle]
pub unsafe extern "C" fn nr_phi(eta: f64, x: *const f64, d: usize, out: *mut f64) -> NrStatus {
    guard(|| {
        let x = input(x, d, "x")?;
        let out = output(out, d, "out")?;
        out.copy_from_slice(transform::phi(eta, &x).map_err(lib_err)?.as_slice());
        Ok(())
    })
}

/// Inverse of `nr_phi`.
///
/// # Safety
/// `y` and `out` must each hold `d` values.
#[no_mangle]
pub unsafe extern "C" fn nr_phi_inv(eta: f64, y: *const f64, d: usize, out: *mut f64) -> NrStatus {
    guard(|| {
        let y = input(y, d, "y")?;
        let out = output(out, d, "out")?;
        out.copy_from_slice(transform::phi_inv(eta, &y).map_err(lib_err)?.as_slice());
        Ok(())
    })
}

/// Blow-up time `r0^{1-m}/(κ(m-1))` of `x' = κ|x|^{m-1}x`.
#[no_mangle]
pub extern "C" fn nr_power_blowup_time(kappa: f64, m: f64, r0: f64) -> f64 {
    power_blowup_time(kappa, m, r0)
}

/// Radius beyond which the generator applied to `V = (log|x|)^α` is negative.
///
/// # Safety
/// `model` must be a live handle and `r_star` writable.
#[no_mangle]
pub unsafe extern "C" fn nr_negativity_radius(model: *const NrModel, alpha: f64, r_star: *mut f64) -> NrStatus {
    guard(|| {
        let m = model_ref(model)?;
        if r_star.is_null() {
            return Err(null("r_star"));
        }
        let v = LyapunovProfile::new(alpha, m.params.r_switch).map_err(lib_err)?;
        *r_star = v.negativity_radius(&m.params, &m.drift).map_err(lib_err)?.r_star;
        Ok(())
    })
}

/// Fraction of `n_paths` paths from `x0` reaching `x_max` before `t_end`.
///
/// # Safety
/// `x0` must hold `d` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_explosion_probability(
    model: *const NrModel,
    scheme: NrScheme,
    dt0: f64,
    t_end: f64,
    x0: *const f64,
    d: usize,
    n_paths: usize,
    seed: u64,
    out: *mut NrFraction,
) -> NrStatus {
    guard(|| {
        let m = model_ref(model)?;
        check_dim(m, d)?;
        let x0 = input(x0, d, "x0")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SchemeConfig::new(scheme.into(), dt0, t_end, &m.params, seed);
        cfg.validate().map_err(lib_err)?;
        let stats = explosion_probability(m, &cfg, &EnsembleConfig::new(n_paths, x0.as_slice())).map_err(lib_err)?;
        let f = stats.explosion;
        *out = NrFraction { count: f.count, n: f.n, estimate: f.estimate, lo: f.lo, hi: f.hi };
        Ok(())
    })
}

/// Runs acceptance criterion `id` (1–13) and stores whether it passed.
///
/// # Safety
/// `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nr_run_criterion(id: u32, seed: u64, passed: *mut bool) -> NrStatus {
    guard(|| {
        if passed.is_null() {
            return Err(null("passed"));
        }
        *passed = run_criterion(id, seed).map_err(lib_err)?.passed;
        Ok(())
    })
}
