//! C ABI over `spectral_mixing`.
//!
//! Objects are opaque handles created by `sm_*_new`/`sm_*_build` and released
//! with the matching `sm_*_free`. Every fallible call returns an
//! [`SmStatus`]; on failure the message is available from
//! [`sm_last_error_message`] on the same thread. Matrices are row-major,
//! velocity coefficients are `alpha_kl` in row-major `(k, l)` order with
//! `beta` implied by the stream-function linkage.

use std::cell::RefCell;
use std::ffi::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use spectral_mixing::bounds::{compute_k, compute_k_hat, verify_entry_bounds};
use spectral_mixing::optimizer::greedy_instantaneous;
use spectral_mixing::simulator::{simulate, AdvectionSchedule, LinearSystem, SimOptions, TimeGrid};
use spectral_mixing::tensors::DEFAULT_ENTRY_BUDGET;
use spectral_mixing::{BasisKind, Constraint, CouplingTensors, Error, OdeOperator, SpectralField, VelocityCoefficients};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    BasisMismatch = 4,
    Capacity = 5,
    Linkage = 6,
    InfeasibleInit = 7,
    Unstable = 8,
    StepTooLarge = 9,
    BoundViolation = 10,
    Io = 11,
    Panic = 12,
}

/// Basis codes.
pub const SM_BASIS_SINE: c_int = 0;
pub const SM_BASIS_COSINE: c_int = 1;
/// Velocity norm held at one.
pub const SM_CONSTRAINT_L2: c_int = 0;
pub const SM_CONSTRAINT_H1: c_int = 1;

/// Coupling tensors for one basis and truncation.
pub struct SmTensors(Arc<CouplingTensors>);

/// Diffusion plus tensor-driven advection.
pub struct SmOperator(OdeOperator);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> SmStatus {
    match err {
        Error::Capacity { .. } => SmStatus::Capacity,
        Error::DimensionMismatch { .. } => SmStatus::DimensionMismatch,
        Error::BasisMismatch(_) => SmStatus::BasisMismatch,
        Error::Linkage { .. } => SmStatus::Linkage,
        Error::InfeasibleInit { .. } => SmStatus::InfeasibleInit,
        Error::Unstable { .. } => SmStatus::Unstable,
        Error::StepTooLarge { .. } => SmStatus::StepTooLarge,
        Error::BoundViolation { .. } => SmStatus::BoundViolation,
        Error::InvalidInput(_) | Error::Config { .. } => SmStatus::InvalidInput,
        Error::Io(_) => SmStatus::Io,
    }
}

struct Failure(SmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SmStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SmStatus::Panic
        }
    }
}

fn basis_of(code: c_int) -> Result<BasisKind, Failure> {
    match code {
        SM_BASIS_SINE => Ok(BasisKind::SineSine),
        SM_BASIS_COSINE => Ok(BasisKind::CosineCosine),
        _ => Err(Failure(SmStatus::InvalidInput, format!("unknown basis code {code}"))),
    }
}

fn constraint_of(code: c_int) -> Result<Constraint, Failure> {
    match code {
        SM_CONSTRAINT_L2 => Ok(Constraint::L2Unit),
        SM_CONSTRAINT_H1 => Ok(Constraint::H1Unit),
        _ => Err(Failure(SmStatus::InvalidInput, format!("unknown constraint code {code}"))),
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, want: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err(Error::DimensionMismatch { what, expected: want, got: len }.into());
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    *p = v;
    Ok(())
}

unsafe fn operator<'a>(op: *const SmOperator) -> Result<&'a OdeOperator, Failure> {
    op.as_ref().map(|o| &o.0).ok_or_else(|| null("operator"))
}

unsafe fn field(op: &OdeOperator, a: *const f64, len: usize) -> Result<SpectralField, Failure> {
    let coeffs = input(a, len, "state")?;
    Ok(SpectralField::from_coeffs(op.modes(), coeffs.to_vec().into())?)
}

unsafe fn velocity(op: &OdeOperator, alpha: *const f64, len: usize) -> Result<VelocityCoefficients, Failure> {
    Ok(VelocityCoefficients::from_alpha(op.velocity_modes(), input(alpha, len, "alpha")?)?)
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds the coupling tensors for `n` scalar and `m` velocity modes per axis.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with [`sm_tensors_free`].
#[no_mangle]
pub unsafe extern "C" fn sm_tensors_build(basis: c_int, n: usize, m: usize, out: *mut *mut SmTensors) -> SmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 || m == 0 {
            return Err(Failure(SmStatus::InvalidInput, "n and m must be at least 1".into()));
        }
        let t = CouplingTensors::build_for(basis_of(basis)?, n, m, DEFAULT_ENTRY_BUDGET)?;
        *out = Box::into_raw(Box::new(SmTensors(Arc::new(t))));
        Ok(())
    })
}

/// Number of stored (nonzero) tensor entries.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_tensors_len(t: *const SmTensors) -> usize {
    t.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sm_tensors_free(t: *mut SmTensors) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Computes `K` and `K_hat`.
///
/// # Safety
/// `t` must be a live handle, `k` and `k_hat` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sm_tensors_bound_constants(t: *const SmTensors, k: *mut f64, k_hat: *mut f64) -> SmStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensors"))?;
        write_out(k, compute_k(&t.0).k, "k")?;
        write_out(k_hat, compute_k_hat(&t.0).k, "k_hat")
    })
}

/// Samples `trials` feasible velocities and checks every advection entry
/// against its bound. Fails with `SM_STATUS_BOUND_VIOLATION` on a violation.
///
/// # Safety
/// `t` must be a live handle, the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sm_tensors_verify_bounds(
    t: *const SmTensors,
    trials: usize,
    constraint: c_int,
    seed: u64,
    observed_max: *mut f64,
    bound: *mut f64,
) -> SmStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensors"))?;
        let check = verify_entry_bounds(&t.0, trials, constraint_of(constraint)?, seed)?;
        write_out(observed_max, check.observed_max_entry, "observed_max")?;
        write_out(bound, check.bound, "bound")
    })
}

/// Operator over shared tensors with diffusivity `kappa`. The tensors handle
/// may be freed afterwards.
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sm_operator_new(t: *const SmTensors, kappa: f64, out: *mut *mut SmOperator) -> SmStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tensors"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let op = OdeOperator::new(Arc::clone(&t.0), kappa)?;
        *out = Box::into_raw(Box::new(SmOperator(op)));
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sm_operator_free(op: *mut SmOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Length of the state vector.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_operator_dim(op: *const SmOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.modes().len())
}

/// Length of the `alpha` vector (`M * M`).
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sm_operator_control_len(op: *const SmOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.velocity_modes().pow(2))
}

/// Writes the `dim x dim` advection matrix for `alpha` into `out` (row-major).
///
/// # Safety
/// `alpha` must hold `alpha_len` values and `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sm_operator_advection(
    op: *const SmOperator,
    alpha: *const f64,
    alpha_len: usize,
    out: *mut f64,
    out_len: usize,
) -> SmStatus {
    guard(|| {
        let op = operator(op)?;
        let vel = velocity(op, alpha, alpha_len)?;
        let mat = op.advection(&vel)?;
        let dim = mat.nrows();
        let dst = output(out, out_len, dim * dim, "advection matrix")?;
        for r in 0..dim {
            for c in 0..dim {
                dst[r * dim + c] = mat[(r, c)];
            }
        }
        Ok(())
    })
}

/// Integrates from `a0` over `[0, t_final]` with step `dt` under the constant
/// velocity `alpha` and writes the final state into `out`.
///
/// # Safety
/// `alpha`, `a0` and `out` must hold `alpha_len`, `dim` and `dim` values.
#[no_mangle]
pub unsafe extern "C" fn sm_simulate(
    op: *const SmOperator,
    alpha: *const f64,
    alpha_len: usize,
    a0: *const f64,
    out: *mut f64,
    dim: usize,
    t_final: f64,
    dt: f64,
) -> SmStatus {
    guard(|| {
        let op = operator(op)?;
        let vel = velocity(op, alpha, alpha_len)?;
        let start = field(op, a0, dim)?;
        let sys = LinearSystem::new(op.modes(), op.kappa(), AdvectionSchedule::Constant(op.advection(&vel)?));
        let grid = TimeGrid::new(0.0, t_final, dt)?;
        let opts = SimOptions {
            record_every: grid.steps.max(1),
            ..SimOptions::default()
        };
        let traj = simulate(&sys, start, &grid, opts)?;
        output(out, dim, dim, "final state")?.copy_from_slice(traj.last().coeffs().as_slice());
        Ok(())
    })
}

/// The feasible `alpha` maximizing the instantaneous decay of the gradient
/// energy at state `a`. `degenerate` is set to 1 when the decay does not
/// depend on the velocity at this state.
///
/// # Safety
/// `a` must hold `dim` values, `alpha_out` `alpha_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sm_greedy_control(
    op: *const SmOperator,
    a: *const f64,
    dim: usize,
    constraint: c_int,
    alpha_out: *mut f64,
    alpha_len: usize,
    degenerate: *mut c_int,
) -> SmStatus {
    guard(|| {
        let op = operator(op)?;
        let state = field(op, a, dim)?;
        let g = greedy_instantaneous(op, &state, constraint_of(constraint)?)?;
        output(alpha_out, alpha_len, g.vel.alpha().len(), "alpha")?.copy_from_slice(g.vel.alpha());
        write_out(degenerate, g.degenerate as c_int, "degenerate")
    })
}

/// Gradient energy `||grad phi||^2` of a state.
///
/// # Safety
/// `a` must hold `dim` values and `q` be valid.
#[no_mangle]
pub unsafe extern "C" fn sm_gradient_energy(op: *const SmOperator, a: *const f64, dim: usize, q: *mut f64) -> SmStatus {
    guard(|| {
        let op = operator(op)?;
        write_out(q, field(op, a, dim)?.gradient_energy(), "q")
    })
}
