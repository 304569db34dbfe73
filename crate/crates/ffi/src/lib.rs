//! C ABI over `muon-core`.
//!
//! Objects are opaque heap handles created by `*_new` and released by the
//! matching `*_free`. Every fallible call returns a [`MuonStatus`]; on failure
//! a message is kept per thread and read with [`muon_last_error_message`].
//! Matrices are row-major `double` buffers.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use muon_core::msign::{msign_exact, msign_newton_schulz, CoeffPreset, Diagnostics, PresetName};
use muon_core::optim::{adamw_step, muon_step, AdamWHyper, AdamWState, MuonHyper, MuonState};
use muon_core::{Error, Matrix};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuonStatus {
    Ok = 0,
    NullPointer = 1,
    Shape = 2,
    NonFinite = 3,
    Degenerate = 4,
    NoConvergence = 5,
    Range = 6,
    Config = 7,
    InvalidArgument = 8,
    Panic = 9,
}

/// Newton–Schulz coefficient set.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuonPreset {
    Optimized = 0,
    Taylor = 1,
}

fn preset(raw: u32) -> Result<CoeffPreset, (MuonStatus, String)> {
    match raw {
        x if x == MuonPreset::Optimized as u32 => Ok(CoeffPreset::Named(PresetName::Optimized)),
        x if x == MuonPreset::Taylor as u32 => Ok(CoeffPreset::Named(PresetName::Taylor)),
        other => Err((MuonStatus::InvalidArgument, format!("unknown preset {other}"))),
    }
}

/// Muon hyperparameters. Obtain defaults with [`muon_hyper_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuonHyperParams {
    pub eta0: f64,
    pub lambda: f64,
    pub beta: f64,
    pub k_iters: usize,
    /// A `MuonPreset` value.
    pub preset: u32,
    pub rms_factor: f64,
    pub rms_matching: bool,
}

/// AdamW hyperparameters. Obtain defaults with [`muon_adamw_hyper_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuonAdamWParams {
    pub eta0: f64,
    pub lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// Opaque dense matrix.
pub struct MuonMatrix(Matrix);

/// Opaque Muon optimizer state for one matrix parameter.
pub struct MuonOptimizer {
    state: MuonState,
    hyper: MuonHyper,
}

/// Opaque AdamW optimizer state for one parameter.
pub struct MuonAdamW {
    state: AdamWState,
    lambda: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> MuonStatus {
    match e {
        Error::Shape { .. } => MuonStatus::Shape,
        Error::InvalidMatrix(_) => MuonStatus::InvalidArgument,
        Error::NonFinite(_) => MuonStatus::NonFinite,
        Error::Degenerate(_) => MuonStatus::Degenerate,
        Error::NoConvergence { .. } => MuonStatus::NoConvergence,
        Error::Range(_) => MuonStatus::Range,
        _ => MuonStatus::Config,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MuonStatus, String)>) -> MuonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MuonStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MuonStatus::Panic
        }
    }
}

fn core<T>(r: muon_core::Result<T>) -> Result<T, (MuonStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MuonStatus, String) {
    (MuonStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (MuonStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (MuonStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), (MuonStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `buf_len`). Returns the full message length excluding the NUL.
/// `buf` may be null to query the length.
#[no_mangle]
pub unsafe extern "C" fn muon_last_error_message(buf: *mut c_char, buf_len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && buf_len > 0 {
            let n = msg.len().min(buf_len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a `rows × cols` matrix from `rows * cols` row-major values.
#[no_mangle]
pub unsafe extern "C" fn muon_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut MuonMatrix,
) -> MuonStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or((MuonStatus::InvalidArgument, "shape overflows".to_string()))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let m = core(Matrix::new(rows, cols, values))?;
        emit(out, MuonMatrix(m))
    })
}

#[no_mangle]
pub unsafe extern "C" fn muon_matrix_zeros(
    rows: usize,
    cols: usize,
    out: *mut *mut MuonMatrix,
) -> MuonStatus {
    guard(|| {
        if rows == 0 || cols == 0 {
            return Err((MuonStatus::InvalidArgument, "dimensions must be positive".into()));
        }
        emit(out, MuonMatrix(Matrix::zeros(rows, cols)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn muon_matrix_free(m: *mut MuonMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Rows of `m`, or 0 when `m` is null.
#[no_mangle]
pub unsafe extern "C" fn muon_matrix_rows(m: *const MuonMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// Columns of `m`, or 0 when `m` is null.
#[no_mangle]
pub unsafe extern "C" fn muon_matrix_cols(m: *const MuonMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// Copies the row-major values into `dst`, which must hold `len >= rows * cols`.
#[no_mangle]
pub unsafe extern "C" fn muon_matrix_read(
    m: *const MuonMatrix,
    dst: *mut f64,
    len: usize,
) -> MuonStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        if dst.is_null() {
            return Err(null("dst"));
        }
        let src = m.0.as_slice();
        if len < src.len() {
            return Err((
                MuonStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", src.len()),
            ));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
        Ok(())
    })
}

/// Exact polar factor `U Vᵀ` via SVD.
#[no_mangle]
pub unsafe extern "C" fn muon_msign_exact(
    m: *const MuonMatrix,
    out: *mut *mut MuonMatrix,
) -> MuonStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let r = core(msign_exact(&m.0, None))?;
        emit(out, MuonMatrix(r))
    })
}

/// `k` Newton–Schulz iterations from the Frobenius-normalized input;
/// `preset` is a `MuonPreset` value.
#[no_mangle]
pub unsafe extern "C" fn muon_msign_newton_schulz(
    m: *const MuonMatrix,
    preset: u32,
    k: usize,
    out: *mut *mut MuonMatrix,
) -> MuonStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let coeffs = self::preset(preset)?.coefficients();
        let r = core(msign_newton_schulz(&m.0, &coeffs, k, Diagnostics::None))?;
        emit(out, MuonMatrix(r.result))
    })
}

#[no_mangle]
pub unsafe extern "C" fn muon_hyper_default(out: *mut MuonHyperParams) -> MuonStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let h = MuonHyper::default();
        *out = MuonHyperParams {
            eta0: h.eta0,
            lambda: h.lambda,
            beta: h.beta,
            k_iters: h.k_iters,
            preset: MuonPreset::Optimized as u32,
            rms_factor: h.rms_factor,
            rms_matching: h.rms_matching,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn muon_adamw_hyper_default(out: *mut MuonAdamWParams) -> MuonStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let h = AdamWHyper::default();
        *out = MuonAdamWParams {
            eta0: h.eta0,
            lambda: h.lambda,
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.eps,
        };
        Ok(())
    })
}

/// Zero-momentum Muon state for a `rows × cols` parameter.
#[no_mangle]
pub unsafe extern "C" fn muon_optimizer_new(
    rows: usize,
    cols: usize,
    params: *const MuonHyperParams,
    out: *mut *mut MuonOptimizer,
) -> MuonStatus {
    guard(|| {
        let p = deref(params, "params")?;
        if rows == 0 || cols == 0 {
            return Err((MuonStatus::InvalidArgument, "dimensions must be positive".into()));
        }
        let hyper = MuonHyper {
            eta0: p.eta0,
            lambda: p.lambda,
            beta: p.beta,
            k_iters: p.k_iters,
            coeffs: preset(p.preset)?,
            rms_factor: p.rms_factor,
            rms_matching: p.rms_matching,
            ..MuonHyper::default()
        };
        core(hyper.validate())?;
        emit(
            out,
            MuonOptimizer {
                state: MuonState::new("ffi", rows, cols),
                hyper,
            },
        )
    })
}

/// One Muon step at learning rate `eta_t`, updating `w` in place.
/// On error neither `w` nor the state changes.
#[no_mangle]
pub unsafe extern "C" fn muon_optimizer_step(
    opt: *mut MuonOptimizer,
    w: *mut MuonMatrix,
    g: *const MuonMatrix,
    eta_t: f64,
) -> MuonStatus {
    guard(|| {
        let opt = deref_mut(opt, "optimizer")?;
        let w = deref_mut(w, "w")?;
        let g = deref(g, "g")?;
        w.0 = core(muon_step(&w.0, &g.0, &mut opt.state, &opt.hyper, eta_t))?;
        Ok(())
    })
}

/// Auxiliary scalars held by the optimizer (the momentum buffer).
#[no_mangle]
pub unsafe extern "C" fn muon_optimizer_state_size(opt: *const MuonOptimizer) -> usize {
    opt.as_ref().map_or(0, |o| o.state.aux_scalars())
}

#[no_mangle]
pub unsafe extern "C" fn muon_optimizer_free(opt: *mut MuonOptimizer) {
    if !opt.is_null() {
        drop(Box::from_raw(opt));
    }
}

#[no_mangle]
pub unsafe extern "C" fn muon_adamw_new(
    rows: usize,
    cols: usize,
    params: *const MuonAdamWParams,
    out: *mut *mut MuonAdamW,
) -> MuonStatus {
    guard(|| {
        let p = deref(params, "params")?;
        if rows == 0 || cols == 0 {
            return Err((MuonStatus::InvalidArgument, "dimensions must be positive".into()));
        }
        let hyper = AdamWHyper {
            eta0: p.eta0,
            lambda: p.lambda,
            beta1: p.beta1,
            beta2: p.beta2,
            eps: p.eps,
        };
        core(hyper.validate())?;
        emit(
            out,
            MuonAdamW {
                state: AdamWState::new("ffi", rows, cols, &hyper),
                lambda: hyper.lambda,
            },
        )
    })
}

/// One AdamW step at learning rate `eta_t`, updating `w` in place.
#[no_mangle]
pub unsafe extern "C" fn muon_adamw_step(
    opt: *mut MuonAdamW,
    w: *mut MuonMatrix,
    g: *const MuonMatrix,
    eta_t: f64,
) -> MuonStatus {
    guard(|| {
        let opt = deref_mut(opt, "optimizer")?;
        let w = deref_mut(w, "w")?;
        let g = deref(g, "g")?;
        w.0 = core(adamw_step(&w.0, &g.0, &mut opt.state, eta_t, opt.lambda))?;
        Ok(())
    })
}

/// Auxiliary scalars held by the optimizer (both moment buffers).
#[no_mangle]
pub unsafe extern "C" fn muon_adamw_state_size(opt: *const MuonAdamW) -> usize {
    opt.as_ref().map_or(0, |o| o.state.aux_scalars())
}

#[no_mangle]
pub unsafe extern "C" fn muon_adamw_free(opt: *mut MuonAdamW) {
    if !opt.is_null() {
        drop(Box::from_raw(opt));
    }
}
