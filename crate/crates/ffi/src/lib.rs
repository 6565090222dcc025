//! C ABI over `qdopt`.
//!
//! Meshes and optimization reports are opaque heap handles released with
//! their `_free` function. Every fallible call returns a [`QdStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`qd_last_error_message`]. Arrays are passed as pointer + length and are
//! never retained.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qdopt::admissibility::{bessel_j0, check_admissibility};
use qdopt::nlep::{solve_nonlinear, SolverOptions};
use qdopt::optimize::{minimize_ground_state, OptimizationReport, OptimizeOptions, StartPolicy};
use qdopt::{Distribution, Error, Mesh};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdStatus {
    Ok = 0,
    InvalidArgument = 1,
    LengthMismatch = 2,
    NotConverged = 3,
    ConditionsViolated = 4,
    Io = 5,
    NullPointer = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdStart {
    Adversarial = 0,
    Schwarz = 1,
    Random = 2,
}

/// Opaque mesh handle.
pub struct QdMesh(Mesh);

/// Opaque optimization result.
pub struct QdReport(OptimizationReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> QdStatus {
    match err {
        Error::LengthMismatch { .. } => QdStatus::LengthMismatch,
        Error::NotConverged { .. } => QdStatus::NotConverged,
        Error::ConditionsViolated(_) => QdStatus::ConditionsViolated,
        Error::Iterate { source, .. } => status_of(source),
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => QdStatus::Io,
        _ => QdStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), QdStatus>) -> QdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QdStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            QdStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, QdStatus>;
}

impl<T> OrStatus<T> for qdopt::Result<T> {
    fn or_status(self) -> Result<T, QdStatus> {
        self.map_err(|e| {
            set_error(&e.to_string());
            status_of(&e)
        })
    }
}

fn null(what: &str) -> QdStatus {
    set_error(&format!("{what} is null"));
    QdStatus::NullPointer
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], QdStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), QdStatus> {
    if dst.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        set_error(&format!("buffer holds {len} values, {} needed", src.len()));
        return Err(QdStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

unsafe fn mesh_ref<'a>(mesh: *const QdMesh) -> Result<&'a Mesh, QdStatus> {
    mesh.as_ref().map(|m| &m.0).ok_or_else(|| null("mesh"))
}

unsafe fn report_ref<'a>(report: *const QdReport) -> Result<&'a OptimizationReport, QdStatus> {
    report.as_ref().map(|r| &r.0).ok_or_else(|| null("report"))
}

unsafe fn store_mesh(out: *mut *mut QdMesh, mesh: qdopt::Result<Mesh>) -> Result<(), QdStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(QdMesh(mesh.or_status()?)));
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be a valid pointer to a `QdMesh*`.
#[no_mangle]
pub unsafe extern "C" fn qd_mesh_disk_radial(radius: f64, n: usize, out: *mut *mut QdMesh) -> QdStatus {
    guard(|| store_mesh(out, Mesh::disk_radial(radius, n)))
}

/// # Safety
/// `out` must be a valid pointer to a `QdMesh*`.
#[no_mangle]
pub unsafe extern "C" fn qd_mesh_disk_polar(radius: f64, n_r: usize, n_t: usize, out: *mut *mut QdMesh) -> QdStatus {
    guard(|| store_mesh(out, Mesh::disk_polar(radius, n_r, n_t)))
}

/// # Safety
/// `out` must be a valid pointer to a `QdMesh*`.
#[no_mangle]
pub unsafe extern "C" fn qd_mesh_rectangle(a: f64, b: f64, nx: usize, ny: usize, out: *mut *mut QdMesh) -> QdStatus {
    guard(|| store_mesh(out, Mesh::rectangle(a, b, nx, ny)))
}

/// # Safety
/// `mesh` must be null or a handle returned by a mesh constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn qd_mesh_free(mesh: *mut QdMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of cells; 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn qd_mesh_len(mesh: *const QdMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.len())
}

/// # Safety
/// `mesh` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_mesh_measures(mesh: *const QdMesh, out: *mut f64, len: usize) -> QdStatus {
    guard(|| copy_out(mesh_ref(mesh)?.measures(), out, len))
}

/// Distance of each cell center from the domain center.
///
/// # Safety
/// `mesh` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_mesh_radial_distance(mesh: *const QdMesh, out: *mut f64, len: usize) -> QdStatus {
    guard(|| {
        let m = mesh_ref(mesh)?;
        let r: Vec<f64> = (0..m.len()).map(|i| m.radial_distance(i)).collect();
        copy_out(&r, out, len)
    })
}

/// Nonlinear ground state for fixed `p`, `q` (one value per cell).
/// `u_out` may be null; otherwise it receives the normalized state.
///
/// # Safety
/// `p`, `q` and a non-null `u_out` must each hold `len` doubles; `lambda_out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_solve(
    mesh: *const QdMesh,
    p: *const f64,
    q: *const f64,
    len: usize,
    gamma: f64,
    lambda_out: *mut f64,
    u_out: *mut f64,
) -> QdStatus {
    guard(|| {
        let mesh = mesh_ref(mesh)?;
        let (p, q) = (slice(p, len, "p")?, slice(q, len, "q")?);
        if lambda_out.is_null() {
            return Err(null("lambda_out"));
        }
        let gs = solve_nonlinear(mesh, p, q, &SolverOptions::with_gamma(gamma)).or_status()?;
        if !u_out.is_null() {
            copy_out(&gs.u, u_out, len)?;
        }
        *lambda_out = gs.lambda;
        Ok(())
    })
}

unsafe fn class(mesh: &Mesh, values: *const f64, measures: *const f64, n: usize) -> Result<Distribution, QdStatus> {
    let values = slice(values, n, "level values")?;
    let measures = slice(measures, n, "level measures")?;
    let pairs: Vec<(f64, f64)> = values.iter().copied().zip(measures.iter().copied()).collect();
    Distribution::with_zero_remainder(&pairs, mesh.area()).or_status()
}

/// Evaluates both admissibility conditions for classes given by their
/// nonzero levels (the rest of the domain is zero).
///
/// # Safety
/// Level arrays must hold `p_n` / `q_n` doubles; `p_ok`, `q_ok` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_check_admissibility(
    mesh: *const QdMesh,
    p_values: *const f64,
    p_measures: *const f64,
    p_n: usize,
    q_values: *const f64,
    q_measures: *const f64,
    q_n: usize,
    gamma: f64,
    p_ok: *mut bool,
    q_ok: *mut bool,
) -> QdStatus {
    guard(|| {
        let mesh = mesh_ref(mesh)?;
        if p_ok.is_null() || q_ok.is_null() {
            return Err(null("p_ok/q_ok"));
        }
        let p0 = class(mesh, p_values, p_measures, p_n)?;
        let q0 = class(mesh, q_values, q_measures, q_n)?;
        let r = check_admissibility(mesh, &p0, &q0, gamma, SolverOptions::default().eig_tol).or_status()?;
        *p_ok = r.cond_p_ok;
        *q_ok = r.cond_q_ok;
        Ok(())
    })
}

/// Alternating minimization over the classes of p₀ and q₀. `seed` is used
/// by the random start only. Admissibility is not checked here.
///
/// # Safety
/// Level arrays must hold `p_n` / `q_n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_optimize(
    mesh: *const QdMesh,
    p_values: *const f64,
    p_measures: *const f64,
    p_n: usize,
    q_values: *const f64,
    q_measures: *const f64,
    q_n: usize,
    gamma: f64,
    max_iters: usize,
    tol: f64,
    start: QdStart,
    seed: u64,
    out: *mut *mut QdReport,
) -> QdStatus {
    guard(|| {
        let mesh = mesh_ref(mesh)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p0 = class(mesh, p_values, p_measures, p_n)?;
        let q0 = class(mesh, q_values, q_measures, q_n)?;
        let start = match start {
            QdStart::Adversarial => StartPolicy::Adversarial,
            QdStart::Schwarz => StartPolicy::Schwarz,
            QdStart::Random => StartPolicy::Random { seed },
        };
        let opts = OptimizeOptions { max_iters, tol, start, record_snapshots: false };
        let report = minimize_ground_state(mesh, &p0, &q0, &SolverOptions::with_gamma(gamma), &opts).or_status()?;
        *out = Box::into_raw(Box::new(QdReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a handle from [`qd_optimize`], freed once.
#[no_mangle]
pub unsafe extern "C" fn qd_report_free(report: *mut QdReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Final λ; NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn qd_report_lambda(report: *const QdReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.lambda())
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn qd_report_iterations(report: *const QdReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.iterations)
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn qd_report_converged(report: *const QdReport) -> bool {
    report.as_ref().is_some_and(|r| r.0.converged)
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn qd_report_monotone(report: *const QdReport) -> bool {
    report.as_ref().is_some_and(|r| r.0.monotone)
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn qd_report_history_len(report: *const QdReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.lambda_history.len())
}

/// # Safety
/// `report` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_report_history(report: *const QdReport, out: *mut f64, len: usize) -> QdStatus {
    guard(|| copy_out(&report_ref(report)?.lambda_history, out, len))
}

/// # Safety
/// `report` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_report_p(report: *const QdReport, out: *mut f64, len: usize) -> QdStatus {
    guard(|| copy_out(&report_ref(report)?.p_final, out, len))
}

/// # Safety
/// `report` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_report_q(report: *const QdReport, out: *mut f64, len: usize) -> QdStatus {
    guard(|| copy_out(&report_ref(report)?.q_final, out, len))
}

/// # Safety
/// `report` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_report_u(report: *const QdReport, out: *mut f64, len: usize) -> QdStatus {
    guard(|| copy_out(&report_ref(report)?.u_final, out, len))
}

#[no_mangle]
pub extern "C" fn qd_bessel_j0(x: f64) -> f64 {
    bessel_j0(x)
}
