//! C ABI over the `mfmd` library.
//!
//! Conventions:
//!
//! * Every function returns an [`MfmdStatus`]. Results come back through
//!   out-pointers, which are only written on success.
//! * Objects are opaque handles created by `*_new` functions and released
//!   with the matching `*_free`. Freeing `NULL` is a no-op.
//! * On failure a message is stored per thread and can be read with
//!   [`mfmd_last_error`]. It stays valid until the next failing call on
//!   the same thread.
//! * Panics never cross the boundary; they are reported as
//!   [`MfmdStatus::Panic`].
//! * Buffers are caller-allocated; sizes are passed explicitly and checked.
//!
//! # Safety
//!
//! Every pointer argument must be `NULL` or valid for the access its
//! documentation describes: handles must come from this library and not
//! have been freed, and buffers must hold the stated number of `double`s.
//! A handle may be shared between threads for reading.

// the crate-level section above covers every exported function
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mfmd::classical::{correlation_classical, correlation_excited, FlowConfig};
use mfmd::cli::CasePreset;
use mfmd::diagnostics::{epsilon1_sq, epsilon2_sq, gamma_lambda};
use mfmd::gibbs_symbol::{estimate_symbol_correction, PathConfig};
use mfmd::grid::{PhaseGrid, SpatialGrid};
use mfmd::model::{eigenvalues, mean_field_gradient, mean_field_potential, state_probabilities, ModelContext, PotentialParams, Surface};
use mfmd::quantum::{
    build_hamiltonian, correlation_qm, eigendecompose, equilibrium_density, observable_matrices, EigenSystem,
    Observable, ObservableMatrices,
};
use mfmd::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfmdStatus {
    Ok = 0,
    /// A parameter was out of range or inconsistent.
    InvalidArgument = 1,
    /// An iterative method failed or a consistency audit tripped.
    NumericalFailure = 2,
    /// The computational domain is too small, or the model is singular there.
    DomainError = 3,
    /// A required pointer was `NULL`.
    NullPointer = 4,
    /// An internal panic was caught.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfmdObservable {
    Momentum = 0,
    Position = 1,
}

/// Classical dynamics used by [`mfmd_classical_correlation`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfmdDynamics {
    MeanField = 0,
    ExcitedState = 1,
    GroundState = 2,
}

/// Two-state model parameters: `beta`, `c`, `delta` and the mass ratio `M`.
pub struct MfmdModel {
    ctx: ModelContext,
}

/// Eigendecomposition of the discretized Hamiltonian of a model on a grid.
pub struct MfmdQuantum {
    ctx: ModelContext,
    grid: SpatialGrid,
    eig: EigenSystem,
    ops: ObservableMatrices,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MfmdStatus {
    match e {
        Error::NonConvergence { .. } | Error::ImaginaryResidueTooLarge { .. } => MfmdStatus::NumericalFailure,
        Error::DomainTooSmall { .. } | Error::SingularGradient { .. } | Error::DegenerateEigenvectors { .. } => {
            MfmdStatus::DomainError
        }
        _ => MfmdStatus::InvalidArgument,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult = Result<(), Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> MfmdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfmdStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} must not be NULL"));
            MfmdStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            MfmdStatus::InvalidArgument
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            MfmdStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: the caller promises that non-null handles come from this library.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

fn out<T>(p: *mut T, what: &'static str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(p)
    }
}

fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller guarantees `len` readable values at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller guarantees `len` writable values at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn write<T>(p: *mut T, v: T) {
    // SAFETY: `p` was checked by `out`.
    unsafe { p.write(v) }
}

// Enum arguments arrive as plain integers so that out-of-range values from
// C are rejected instead of being undefined behavior.
fn observable(o: i32) -> Result<Observable, Failure> {
    match o {
        x if x == MfmdObservable::Momentum as i32 => Ok(Observable::Momentum),
        x if x == MfmdObservable::Position as i32 => Ok(Observable::Position),
        other => Err(Failure::Arg(format!("unknown observable code {other}"))),
    }
}

fn dynamics(d: i32) -> Result<MfmdDynamics, Failure> {
    [MfmdDynamics::MeanField, MfmdDynamics::ExcitedState, MfmdDynamics::GroundState]
        .into_iter()
        .find(|k| *k as i32 == d)
        .ok_or_else(|| Failure::Arg(format!("unknown dynamics code {d}")))
}

/// Message describing the most recent failure on this thread, or an empty
/// string. The pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn mfmd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfmd_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string has an interior NUL"),
    };
    VERSION.as_ptr()
}

/// Creates a model from explicit parameters.
#[no_mangle]
pub unsafe extern "C" fn mfmd_model_new(
    beta: f64,
    c: f64,
    delta: f64,
    mass_ratio: f64,
    out_model: *mut *mut MfmdModel,
) -> MfmdStatus {
    guard(|| {
        let o = out(out_model, "out_model")?;
        let ctx = ModelContext::new(PotentialParams::new(c, delta)?, beta, mass_ratio)?;
        write(o, Box::into_raw(Box::new(MfmdModel { ctx })));
        Ok(())
    })
}

/// Creates a model from one of the presets `'A'` to `'E'`.
#[no_mangle]
pub unsafe extern "C" fn mfmd_model_from_case(label: c_char, mass_ratio: f64, out_model: *mut *mut MfmdModel) -> MfmdStatus {
    guard(|| {
        let o = out(out_model, "out_model")?;
        let ch = char::from(label as u8);
        let ctx = CasePreset::by_label(&ch.to_string())
            .map_err(|_| Failure::Arg(format!("unknown case label '{ch}'")))?
            .context(mass_ratio)?;
        write(o, Box::into_raw(Box::new(MfmdModel { ctx })));
        Ok(())
    })
}

/// Releases a model. `NULL` is accepted.
#[no_mangle]
pub unsafe extern "C" fn mfmd_model_free(model: *mut MfmdModel) {
    if !model.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Eigenvalues `lambda_0 <= lambda_1` of the potential matrix at `x`.
#[no_mangle]
pub unsafe extern "C" fn mfmd_model_eigenvalues(model: *const MfmdModel, x: f64, out_l0: *mut f64, out_l1: *mut f64) -> MfmdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let (a, b) = (out(out_l0, "out_l0")?, out(out_l1, "out_l1")?);
        let (l0, l1) = eigenvalues(x, &m.ctx.params);
        write(a, l0);
        write(b, l1);
        Ok(())
    })
}

/// Mean-field potential and its derivative at `x`.
#[no_mangle]
pub unsafe extern "C" fn mfmd_model_mean_field(
    model: *const MfmdModel,
    x: f64,
    out_value: *mut f64,
    out_gradient: *mut f64,
) -> MfmdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let (a, b) = (out(out_value, "out_value")?, out(out_gradient, "out_gradient")?);
        let g = mean_field_gradient(x, &m.ctx)?;
        write(a, mean_field_potential(x, &m.ctx));
        write(b, g);
        Ok(())
    })
}

/// Ground and excited state probabilities `q0`, `q1` and the error
/// functionals `eps1^2`, `eps2^2`, `gamma_lambda` on `[x_min, x_max]` with
/// `k` segments. Any of the out-pointers may be `NULL` to skip that value.
#[no_mangle]
pub unsafe extern "C" fn mfmd_model_diagnostics(
    model: *const MfmdModel,
    x_min: f64,
    x_max: f64,
    k: usize,
    out_q1: *mut f64,
    out_eps1_sq: *mut f64,
    out_eps2_sq: *mut f64,
    out_gamma_lambda: *mut f64,
) -> MfmdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let grid = SpatialGrid::new(x_min, x_max, k)?;
        let values = [
            (out_q1, state_probabilities(&m.ctx, &grid).map(|q| q.1)),
            (out_eps1_sq, epsilon1_sq(&m.ctx, &grid)),
            (out_eps2_sq, epsilon2_sq(&m.ctx, &grid)),
            (out_gamma_lambda, gamma_lambda(&m.ctx, &grid)),
        ];
        let mut resolved = [0.0; 4];
        for (slot, (ptr, v)) in resolved.iter_mut().zip(values.iter()) {
            if !ptr.is_null() {
                *slot = v.clone()?;
            }
        }
        for ((ptr, _), v) in values.iter().zip(resolved) {
            if !ptr.is_null() {
                write(*ptr, v);
            }
        }
        Ok(())
    })
}

/// Builds and diagonalizes the finite-difference Hamiltonian of `model` on
/// `[x_min, x_max]` with `k` segments. The cost grows like `k^2` in memory
/// and `k^3` in time.
#[no_mangle]
pub unsafe extern "C" fn mfmd_quantum_new(
    model: *const MfmdModel,
    x_min: f64,
    x_max: f64,
    k: usize,
    out_quantum: *mut *mut MfmdQuantum,
) -> MfmdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let o = out(out_quantum, "out_quantum")?;
        let grid = SpatialGrid::new(x_min, x_max, k)?;
        let h = build_hamiltonian(&grid, &m.ctx);
        let eig = eigendecompose(&h)?;
        let ops = observable_matrices(&grid, &h)?;
        write(o, Box::into_raw(Box::new(MfmdQuantum { ctx: m.ctx, grid, eig, ops })));
        Ok(())
    })
}

/// Releases a quantum solver. `NULL` is accepted.
#[no_mangle]
pub unsafe extern "C" fn mfmd_quantum_free(quantum: *mut MfmdQuantum) {
    if !quantum.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(quantum) });
    }
}

/// Matrix dimension (twice the number of grid nodes).
#[no_mangle]
pub unsafe extern "C" fn mfmd_quantum_dim(quantum: *const MfmdQuantum, out_dim: *mut usize) -> MfmdStatus {
    guard(|| {
        let q = non_null(quantum, "quantum")?;
        write(out(out_dim, "out_dim")?, q.eig.eigenvalues.len());
        Ok(())
    })
}

/// Copies the lowest `len` eigenvalues (ascending) into `out_values`.
#[no_mangle]
pub unsafe extern "C" fn mfmd_quantum_eigenvalues(quantum: *const MfmdQuantum, out_values: *mut f64, len: usize) -> MfmdStatus {
    guard(|| {
        let q = non_null(quantum, "quantum")?;
        if len > q.eig.eigenvalues.len() {
            return Err(Failure::Arg(format!("requested {len} eigenvalues, only {} exist", q.eig.eigenvalues.len())));
        }
        slice_mut(out_values, len, "out_values")?.copy_from_slice(&q.eig.eigenvalues[..len]);
        Ok(())
    })
}

/// Normalized equilibrium position density at the `k + 1` grid nodes;
/// `len` must equal `k + 1`.
#[no_mangle]
pub unsafe extern "C" fn mfmd_quantum_density(quantum: *const MfmdQuantum, out_values: *mut f64, len: usize) -> MfmdStatus {
    guard(|| {
        let q = non_null(quantum, "quantum")?;
        if len != q.grid.n_nodes() {
            return Err(Failure::Arg(format!("density needs {} values, buffer holds {len}", q.grid.n_nodes())));
        }
        let d = equilibrium_density(&q.eig, q.ctx.beta, &q.grid)?;
        slice_mut(out_values, len, "out_values")?.copy_from_slice(&d.values);
        Ok(())
    })
}

/// Symmetrized quantum auto-correlation at `n` times; `which` is an
/// [`MfmdObservable`] code. `taus` must start at
/// 0 and increase strictly.
#[no_mangle]
pub unsafe extern "C" fn mfmd_quantum_correlation(
    quantum: *const MfmdQuantum,
    which: i32,
    taus: *const f64,
    n: usize,
    out_values: *mut f64,
) -> MfmdStatus {
    guard(|| {
        let q = non_null(quantum, "quantum")?;
        let taus = slice(taus, n, "taus")?;
        let dst = slice_mut(out_values, n, "out_values")?;
        let s = correlation_qm(&q.eig, &q.ops, observable(which)?, q.ctx.beta, q.ctx.mass_ratio, taus)?;
        dst.copy_from_slice(&s.values);
        Ok(())
    })
}

/// Classical auto-correlation for an [`MfmdDynamics`] code and an
/// [`MfmdObservable`] code, on the phase grid `[x_min, x_max] x [-p_max, p_max]`
/// with `segments` (even) intervals per axis and Verlet step `dt`. Every tau
/// must be a multiple of `dt`.
#[no_mangle]
pub unsafe extern "C" fn mfmd_classical_correlation(
    model: *const MfmdModel,
    dynamics_code: i32,
    which: i32,
    x_min: f64,
    x_max: f64,
    p_max: f64,
    segments: usize,
    dt: f64,
    taus: *const f64,
    n: usize,
    out_values: *mut f64,
) -> MfmdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let taus = slice(taus, n, "taus")?;
        let dst = slice_mut(out_values, n, "out_values")?;
        let pgrid = PhaseGrid::symmetric(x_min, x_max, p_max, segments)?;
        let flow = FlowConfig::new(dt)?;
        let obs = observable(which)?;
        let s = match dynamics(dynamics_code)? {
            MfmdDynamics::MeanField => correlation_classical(Surface::MeanField, &m.ctx, &pgrid, &flow, obs, taus)?,
            MfmdDynamics::ExcitedState => correlation_excited(&m.ctx, &pgrid, &flow, obs, taus)?,
            MfmdDynamics::GroundState => correlation_classical(Surface::Ground, &m.ctx, &pgrid, &flow, obs, taus)?,
        };
        dst.copy_from_slice(&s.values);
        Ok(())
    })
}

/// Monte Carlo estimate of `M (rho - exp(-beta H))` at `(x, p)`. The three
/// output arrays receive 4 entries each in row-major order (11, 12, 21, 22):
/// real part, imaginary part and standard error.
#[no_mangle]
pub unsafe extern "C" fn mfmd_gibbs_correction(
    model: *const MfmdModel,
    x: f64,
    p: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    out_re: *mut f64,
    out_im: *mut f64,
    out_std_err: *mut f64,
) -> MfmdStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let re = slice_mut(out_re, 4, "out_re")?;
        let im = slice_mut(out_im, 4, "out_im")?;
        let se = slice_mut(out_std_err, 4, "out_std_err")?;
        if !(x.is_finite() && p.is_finite()) {
            return Err(Failure::Arg("phase-space point must be finite".into()));
        }
        let cfg = PathConfig::new(n_paths, n_steps, seed)?;
        let est = estimate_symbol_correction(x, p, &m.ctx, &cfg);
        for i in 0..2 {
            for j in 0..2 {
                re[2 * i + j] = est.mean_re.0[i][j];
                im[2 * i + j] = est.mean_im.0[i][j];
                se[2 * i + j] = est.std_err(i, j);
            }
        }
        Ok(())
    })
}
