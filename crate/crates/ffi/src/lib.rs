//! C ABI for `phasesaddle`.
//!
//! Models and search results are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`PsStatus`]; on failure a description is available from
//! [`ps_last_error_message`] on the same thread. Field buffers are `double`
//! arrays in the library's point order (x fastest).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use phasesaddle::config::RunConfig;
use phasesaddle::minmode::{min_mode, Metric, MinModeOptions};
use phasesaddle::saddle::{search, verify_index1, InitialDirection, Method, SaddleResult, SearchConfig, Status};
use phasesaddle::{
    BackendKind, EnergyModel, Error, Field, GinzburgLandau, GinzburgLandauParams, Grid, LandauBrazovskii,
    LandauBrazovskiiParams,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    GridMismatch = 4,
    NonFinite = 5,
    Precondition = 6,
    NotConverged = 7,
    Breakdown = 8,
    DegenerateDirection = 9,
    Config = 10,
    Io = 11,
    Format = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsBackend {
    FiniteDifference = 0,
    Spectral = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsMetric {
    ProjectedL2 = 0,
    HMinus1 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsMethod {
    ImfProjected = 0,
    ImfH1 = 1,
    GadProjected = 2,
    GadL2 = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsSearchStatus {
    Converged = 0,
    MaxCycles = 1,
    Diverged = 2,
}

/// Search settings. Negative `stabilization` or `rank_one_shift` selects the
/// model default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsSearchConfig {
    pub method: PsMethod,
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    pub outer_tol: f64,
    pub max_cycles: usize,
    pub gad_gamma: f64,
    pub seed: u64,
    pub stabilization: f64,
    pub rank_one_shift: f64,
    pub minmode_tol: f64,
    pub minmode_max_iters: usize,
    /// GAD start direction: 0 seeded random, 1 min mode at φ0.
    pub v0_minmode: bool,
    pub wall_time: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsTraceRecord {
    pub cycle: usize,
    pub inner_iters: usize,
    pub residual_l2: f64,
    pub energy: f64,
    pub min_eig: f64,
    pub wall_s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsIndexReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub is_index1: bool,
    pub degenerate: bool,
    pub residual: f64,
    pub mean: f64,
    pub translation_modes: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsMinMode {
    pub eigenvalue: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Opaque energy model.
pub struct PsModel {
    inner: Box<dyn EnergyModel>,
}

/// Opaque search result.
pub struct PsResult {
    inner: SaddleResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> PsStatus {
    match e {
        Error::InvalidGrid(_) => PsStatus::InvalidGrid,
        Error::GridMismatch | Error::ValueCountMismatch { .. } => PsStatus::GridMismatch,
        Error::NonFinite(_) => PsStatus::NonFinite,
        Error::Precondition(_) | Error::UnsupportedBackend(_) => PsStatus::Precondition,
        Error::MinModeNotConverged(_) => PsStatus::NotConverged,
        Error::Breakdown(_) => PsStatus::Breakdown,
        Error::DegenerateDirection(_) => PsStatus::DegenerateDirection,
        Error::Config(_) | Error::Expr(_) => PsStatus::Config,
        Error::Io(_) => PsStatus::Io,
        Error::Format(_) => PsStatus::Format,
    }
}

struct Fail(PsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording its error and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            PsStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(m: *const PsModel) -> Result<&'a PsModel, Fail> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn field_in(model: &PsModel, data: *const f64, len: usize) -> Result<Field, Fail> {
    if data.is_null() {
        return Err(null("field buffer"));
    }
    let n = model.inner.grid().len();
    if len != n {
        return Err(Fail(PsStatus::GridMismatch, format!("buffer holds {len} values, grid has {n}")));
    }
    let values = std::slice::from_raw_parts(data, len).to_vec();
    Ok(Field::from_values(*model.inner.grid(), values)?)
}

unsafe fn field_out(f: &Field, out: *mut f64, len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len != f.values().len() {
        return Err(Fail(
            PsStatus::GridMismatch,
            format!("output buffer holds {len} values, field has {}", f.values().len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(f.values());
    Ok(())
}

unsafe fn str_in<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| Fail(PsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn backend(b: PsBackend) -> BackendKind {
    match b {
        PsBackend::FiniteDifference => BackendKind::FiniteDifference,
        PsBackend::Spectral => BackendKind::Spectral,
    }
}

fn metric(m: PsMetric) -> Metric {
    match m {
        PsMetric::ProjectedL2 => Metric::ProjectedL2,
        PsMetric::HMinus1 => Metric::HMinus1,
    }
}

fn method(m: PsMethod) -> Method {
    match m {
        PsMethod::ImfProjected => Method::ImfProjected,
        PsMethod::ImfH1 => Method::ImfH1,
        PsMethod::GadProjected => Method::GadProjected,
        PsMethod::GadL2 => Method::GadL2,
    }
}

unsafe fn store_model(out: *mut *mut PsModel, model: Box<dyn EnergyModel>) -> Result<(), Fail> {
    *out = Box::into_raw(Box::new(PsModel { inner: model }));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Ginzburg-Landau model on a 1D periodic grid of `n` points over `[0, length)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ps_model_gl_new(
    n: usize,
    length: f64,
    kappa: f64,
    mass: f64,
    backend_kind: PsBackend,
    out: *mut *mut PsModel,
) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = Grid::new_1d(n, length)?;
        let m = GinzburgLandau::new(grid, backend(backend_kind), GinzburgLandauParams { kappa, mass })?;
        store_model(out, Box::new(m))
    })
}

/// Landau-Brazovskii model on a 2D periodic `nx × ny` spectral grid.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ps_model_lb_new(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    tau: f64,
    xi: f64,
    gamma: f64,
    mass: f64,
    out: *mut *mut PsModel,
) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = Grid::new_2d(nx, ny, lx, ly)?;
        let m = LandauBrazovskii::new(grid, BackendKind::Spectral, LandauBrazovskiiParams { tau, xi, gamma, mass })?;
        store_model(out, Box::new(m))
    })
}

/// Model described by the `[model]` table of a TOML run config.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as for [`ps_model_gl_new`].
#[no_mangle]
pub unsafe extern "C" fn ps_model_from_config(path: *const c_char, out: *mut *mut PsModel) -> PsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = RunConfig::load(str_in(path, "path")?)?;
        store_model(out, cfg.build_model()?)
    })
}

/// # Safety
/// `model` must be null or a handle from a `ps_model_*` constructor that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn ps_model_free(model: *mut PsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of grid points, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_model_len(model: *const PsModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.grid().len())
}

/// `F(φ)`.
///
/// # Safety
/// `phi` must point to `len` doubles; `energy` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn ps_energy(model: *const PsModel, phi: *const f64, len: usize, energy: *mut f64) -> PsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let f = field_in(m, phi, len)?;
        if energy.is_null() {
            return Err(null("energy"));
        }
        *energy = m.inner.energy(&f)?;
        Ok(())
    })
}

/// The unprojected L² gradient `δF/δφ`.
///
/// # Safety
/// `phi` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_gradient(model: *const PsModel, phi: *const f64, len: usize, out: *mut f64) -> PsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let f = field_in(m, phi, len)?;
        field_out(&m.inner.gradient_l2(&f)?, out, len)
    })
}

/// Minimum mode of the Hessian at `phi`. On non-convergence the best
/// iterate is still written and `PsStatus::NotConverged` is returned.
///
/// # Safety
/// `phi` and `eigenvector` must each point to `len` doubles; `info` to one
/// writable [`PsMinMode`].
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ps_min_mode(
    model: *const PsModel,
    phi: *const f64,
    len: usize,
    which: PsMetric,
    tolerance: f64,
    max_iterations: usize,
    seed: u64,
    eigenvector: *mut f64,
    info: *mut PsMinMode,
) -> PsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let f = field_in(m, phi, len)?;
        if info.is_null() {
            return Err(null("info"));
        }
        let opts = MinModeOptions { tolerance, max_iterations, metric: metric(which), seed };
        let (r, err) = match min_mode(m.inner.as_ref(), &f, &opts) {
            Ok(r) => (r, None),
            Err(Error::MinModeNotConverged(best)) => {
                let e = Fail(PsStatus::NotConverged, format!("eigensolver residual {:.3e} after {} iterations", best.residual, best.iterations));
                (*best, Some(e))
            }
            Err(e) => return Err(e.into()),
        };
        field_out(&r.eigenvector, eigenvector, len)?;
        *info = PsMinMode { eigenvalue: r.eigenvalue, residual: r.residual, iterations: r.iterations, converged: err.is_none() };
        err.map_or(Ok(()), Err)
    })
}

/// Default settings for `which`.
#[no_mangle]
pub extern "C" fn ps_search_config_default(which: PsMethod) -> PsSearchConfig {
    let d = SearchConfig::with_method(method(which));
    PsSearchConfig {
        method: which,
        alpha: d.alpha,
        beta: d.beta,
        dt: d.dt,
        inner_iters: d.inner_iters,
        inner_tol: d.inner_tol,
        max_inner_iters: d.max_inner_iters,
        outer_tol: d.outer_tol,
        max_cycles: d.max_cycles,
        gad_gamma: d.gad_gamma,
        seed: d.seed,
        stabilization: -1.0,
        rank_one_shift: -1.0,
        minmode_tol: d.minmode_tol,
        minmode_max_iters: d.minmode_max_iters,
        v0_minmode: d.v0 == InitialDirection::MinMode,
        wall_time: d.wall_time,
    }
}

fn search_config(c: &PsSearchConfig) -> SearchConfig {
    let opt = |x: f64| (x >= 0.0).then_some(x);
    SearchConfig {
        method: method(c.method),
        alpha: c.alpha,
        beta: c.beta,
        dt: c.dt,
        inner_iters: c.inner_iters,
        inner_tol: c.inner_tol,
        max_inner_iters: c.max_inner_iters,
        outer_tol: c.outer_tol,
        max_cycles: c.max_cycles,
        gad_gamma: c.gad_gamma,
        seed: c.seed,
        stabilization: opt(c.stabilization),
        rank_one_shift: opt(c.rank_one_shift),
        minmode_tol: c.minmode_tol,
        minmode_max_iters: c.minmode_max_iters,
        v0: if c.v0_minmode { InitialDirection::MinMode } else { InitialDirection::Random },
        wall_time: c.wall_time,
    }
}

/// Runs a saddle search from `phi0`. A diverged search still yields a result
/// handle; inspect it with [`ps_result_status`].
///
/// # Safety
/// `phi0` must point to `len` doubles, `config` to one [`PsSearchConfig`],
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ps_search(
    model: *const PsModel,
    phi0: *const f64,
    len: usize,
    config: *const PsSearchConfig,
    out: *mut *mut PsResult,
) -> PsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let f = field_in(m, phi0, len)?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = search(m.inner.as_ref(), &f, &search_config(c))?;
        *out = Box::into_raw(Box::new(PsResult { inner: r }));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a live handle from [`ps_search`].
#[no_mangle]
pub unsafe extern "C" fn ps_result_free(result: *mut PsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_result_status(result: *const PsResult) -> PsSearchStatus {
    match result.as_ref().map(|r| r.inner.status) {
        Some(Status::Converged) => PsSearchStatus::Converged,
        Some(Status::MaxCycles) => PsSearchStatus::MaxCycles,
        Some(Status::Diverged) | None => PsSearchStatus::Diverged,
    }
}

/// Final eigenvalue estimate, NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_result_lambda(result: *const PsResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.lambda)
}

/// Final ‖PδF‖, NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_result_residual(result: *const PsResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.residual())
}

/// Largest mass drift over the run, NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_result_mass_drift(result: *const PsResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.max_mass_drift)
}

/// Copies the final state into `out`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_result_phi(result: *const PsResult, out: *mut f64, len: usize) -> PsStatus {
    guard(|| field_out(&result.as_ref().ok_or_else(|| null("result"))?.inner.phi, out, len))
}

/// Copies the final direction into `out`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_result_v(result: *const PsResult, out: *mut f64, len: usize) -> PsStatus {
    guard(|| field_out(&result.as_ref().ok_or_else(|| null("result"))?.inner.v, out, len))
}

/// Number of trace records, 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_result_trace_len(result: *const PsResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.trace.len())
}

/// # Safety
/// `out` must point to one writable [`PsTraceRecord`].
#[no_mangle]
pub unsafe extern "C" fn ps_result_trace_record(result: *const PsResult, index: usize, out: *mut PsTraceRecord) -> PsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rec = r.inner.trace.records.get(index).ok_or_else(|| {
            Fail(PsStatus::InvalidArgument, format!("trace index {index} out of range ({} records)", r.inner.trace.len()))
        })?;
        *out = PsTraceRecord {
            cycle: rec.cycle,
            inner_iters: rec.inner_iters,
            residual_l2: rec.residual_l2,
            energy: rec.energy,
            min_eig: rec.min_eig,
            wall_s: rec.wall_s,
        };
        Ok(())
    })
}

/// Writes the trace as CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ps_result_write_trace(result: *const PsResult, path: *const c_char) -> PsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        Ok(r.inner.trace.write_csv(str_in(path, "path")?)?)
    })
}

/// Index-1 check of `phi` with the projected-L² Hessian.
///
/// # Safety
/// `phi` must point to `len` doubles; `report` to one writable [`PsIndexReport`].
#[no_mangle]
pub unsafe extern "C" fn ps_verify_index1(
    model: *const PsModel,
    phi: *const f64,
    len: usize,
    tolerance: f64,
    report: *mut PsIndexReport,
) -> PsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let f = field_in(m, phi, len)?;
        if report.is_null() {
            return Err(null("report"));
        }
        let opts = MinModeOptions { tolerance, ..MinModeOptions::default() };
        let r = verify_index1(m.inner.as_ref(), &f, &opts)?;
        *report = PsIndexReport {
            lambda1: r.lambda1,
            lambda2: r.lambda2,
            is_index1: r.is_index1,
            degenerate: r.degenerate,
            residual: r.residual,
            mean: r.mean,
            translation_modes: r.translation_modes.len(),
        };
        Ok(())
    })
}
