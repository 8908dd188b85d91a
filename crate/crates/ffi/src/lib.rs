//! C ABI for laplace-forge.
//!
//! Signals and edge selections cross the boundary as opaque handles owned by
//! the caller and released with the matching `*_free` function. Every fallible
//! call returns an `LfStatus`; on failure `lf_last_error_message` describes the
//! most recent error on the calling thread. Signal buffers are row-major with
//! one row per node and one column per snapshot.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use laplace_forge::altmin::{alt_min, AltMinConfig};
use laplace_forge::denoise::{tikhonov_denoise, RegularizationConfig};
use laplace_forge::noiseless::learn_noiseless;
use laplace_forge::relax::{learn_relax, RelaxConfig};
use laplace_forge::{CandidateGraph, EdgeSelection, Error, SignalMatrix};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    LfOk = 0,
    /// A required pointer argument was null.
    LfNullPointer = 1,
    /// Invalid input: bad dimensions, infeasible budget, non-finite data, short buffer.
    LfDomain = 2,
    /// An iterative solver stopped before reaching its tolerance.
    LfNotConverged = 3,
    /// An internal panic was caught at the boundary.
    LfPanic = 4,
}

/// Opaque N x L signal matrix.
pub struct LfSignal(SignalMatrix);

/// Opaque edge selection over the complete graph on `n` nodes.
pub struct LfSelection {
    n: usize,
    selection: EdgeSelection,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> LfStatus {
    if err.is_not_converged() {
        LfStatus::LfNotConverged
    } else {
        LfStatus::LfDomain
    }
}

// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (LfStatus, String)>) -> LfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LfStatus::LfOk,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LfStatus::LfPanic
        }
    }
}

fn lib_err(e: Error) -> (LfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (LfStatus, String) {
    (LfStatus::LfNullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (LfStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write_out<T>(p: *mut T, value: T) {
    if !p.is_null() {
        *p = value;
    }
}

unsafe fn write_signal(p: *mut *mut LfSignal, x: SignalMatrix) {
    if !p.is_null() {
        *p = Box::into_raw(Box::new(LfSignal(x)));
    }
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn lf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `n * l` row-major values into a new signal handle.
///
/// # Safety
/// `data` must point to `n * l` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_signal_new(data: *const f64, n: usize, l: usize, out: *mut *mut LfSignal) -> LfStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(l).ok_or((LfStatus::LfDomain, "n * l overflows".to_owned()))?;
        let values = std::slice::from_raw_parts(data, len);
        let x = SignalMatrix::from_row_major(n, l, values).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LfSignal(x)));
        Ok(())
    })
}

/// # Safety
/// `signal` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_signal_free(signal: *mut LfSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_signal_rows(signal: *const LfSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.n())
}

/// Snapshot count, or 0 for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_signal_cols(signal: *const LfSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.l())
}

/// Writes the signal row-major into `out`, which holds `len` doubles.
///
/// # Safety
/// `signal` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lf_signal_copy(signal: *const LfSignal, out: *mut f64, len: usize) -> LfStatus {
    guard(|| {
        let s = deref(signal, "signal")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (n, l) = (s.0.n(), s.0.l());
        if len < n * l {
            return Err((LfStatus::LfDomain, format!("buffer holds {len} values, need {}", n * l)));
        }
        let dst = std::slice::from_raw_parts_mut(out, n * l);
        let m = s.0.as_matrix();
        for i in 0..n {
            for t in 0..l {
                dst[i * l + t] = m[(i, t)];
            }
        }
        Ok(())
    })
}

fn selection_handle(n: usize, selection: EdgeSelection) -> *mut LfSelection {
    Box::into_raw(Box::new(LfSelection { n, selection }))
}

/// Rank-ordering learner: the `k` pairs with the smallest squared differences.
///
/// # Safety
/// `signal` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_learn_noiseless(signal: *const LfSignal, k: usize, out: *mut *mut LfSelection) -> LfStatus {
    guard(|| {
        let s = deref(signal, "signal")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let fit = learn_noiseless(&s.0, k).map_err(lib_err)?;
        *out = selection_handle(s.0.n(), fit.selection);
        Ok(())
    })
}

/// Alternating minimization from a seeded random start. `max_iter` of 0 keeps
/// the default. `out_denoised` and `out_converged` may be null.
///
/// # Safety
/// `signal` must be a live handle; non-null output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_learn_altmin(
    signal: *const LfSignal,
    k: usize,
    gamma: f64,
    seed: u64,
    max_iter: usize,
    out: *mut *mut LfSelection,
    out_denoised: *mut *mut LfSignal,
    out_converged: *mut bool,
) -> LfStatus {
    guard(|| {
        let s = deref(signal, "signal")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = AltMinConfig::new(k, gamma, seed);
        if max_iter > 0 {
            cfg.max_iter = max_iter;
        }
        let res = alt_min(&s.0, &cfg).map_err(lib_err)?;
        write_out(out_converged, res.trace.converged);
        write_signal(out_denoised, res.denoised);
        *out = selection_handle(s.0.n(), res.selection);
        Ok(())
    })
}

/// Convex relaxation with top-K rounding. `out_denoised`, `out_gap` and
/// `out_converged` may be null.
///
/// # Safety
/// `signal` must be a live handle; non-null output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_learn_relax(
    signal: *const LfSignal,
    k: usize,
    gamma: f64,
    out: *mut *mut LfSelection,
    out_denoised: *mut *mut LfSignal,
    out_gap: *mut f64,
    out_converged: *mut bool,
) -> LfStatus {
    guard(|| {
        let s = deref(signal, "signal")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let fit = learn_relax(&s.0, &RelaxConfig::new(k, gamma)).map_err(lib_err)?;
        write_out(out_gap, fit.diagnostics.gap);
        write_out(out_converged, fit.diagnostics.converged);
        write_signal(out_denoised, fit.denoised);
        *out = selection_handle(s.0.n(), fit.selection);
        Ok(())
    })
}

/// Tikhonov denoising of `signal` on `selection`.
///
/// # Safety
/// `signal` and `selection` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_denoise(
    signal: *const LfSignal,
    selection: *const LfSelection,
    gamma: f64,
    out: *mut *mut LfSignal,
) -> LfStatus {
    guard(|| {
        let s = deref(signal, "signal")?;
        let w = deref(selection, "selection")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if w.n != s.0.n() {
            return Err((LfStatus::LfDomain, format!("graph has {} nodes but signal has {}", w.n, s.0.n())));
        }
        let x = tikhonov_denoise(&s.0, &w.selection, &RegularizationConfig::with_gamma(gamma)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LfSignal(x)));
        Ok(())
    })
}

/// # Safety
/// `selection` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_selection_free(selection: *mut LfSelection) {
    if !selection.is_null() {
        drop(Box::from_raw(selection));
    }
}

/// Number of edges with non-zero weight, or 0 for a null handle.
///
/// # Safety
/// `selection` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_selection_num_edges(selection: *const LfSelection) -> usize {
    selection.as_ref().map_or(0, |s| s.selection.support().len())
}

/// Writes the selected edges as endpoint pairs `i < j` with weights, in edge
/// index order. `weights` may be null; the arrays hold `capacity` entries.
///
/// # Safety
/// `selection` must be a live handle; the arrays must hold `capacity` writable entries.
#[no_mangle]
pub unsafe extern "C" fn lf_selection_edges(
    selection: *const LfSelection,
    first: *mut usize,
    second: *mut usize,
    weights: *mut f64,
    capacity: usize,
) -> LfStatus {
    guard(|| {
        let s = deref(selection, "selection")?;
        if first.is_null() || second.is_null() {
            return Err(null("endpoint buffer"));
        }
        let support = s.selection.support();
        if capacity < support.len() {
            return Err((LfStatus::LfDomain, format!("capacity {capacity} below {} edges", support.len())));
        }
        let graph = CandidateGraph::new(s.n).map_err(lib_err)?;
        for (slot, m) in support.into_iter().enumerate() {
            let e = graph.edge_from_index(m).map_err(lib_err)?;
            *first.add(slot) = e.i;
            *second.add(slot) = e.j;
            if !weights.is_null() {
                *weights.add(slot) = s.selection.weights()[m];
            }
        }
        Ok(())
    })
}

/// Lexicographic index of the pair `(i, j)`, `i < j`, among the `n (n - 1) / 2`
/// candidate edges.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lf_edge_index(n: usize, i: usize, j: usize, out: *mut usize) -> LfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let graph = CandidateGraph::new(n).map_err(lib_err)?;
        *out = graph.edge_index(i, j).map_err(lib_err)?;
        Ok(())
    })
}
