//! C ABI over `fastchain`.
//!
//! Objects are opaque handles created by `fc_*_new` and released by the
//! matching `fc_*_free`. Every fallible call returns an [`FcStatus`]; on
//! failure `fc_last_error_message` describes the error on the calling thread.
//! Matrices are row-major.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fastchain::dp::{discrete_value_function, full_mask, MAX_DP_VERTICES};
use fastchain::eigentime::{eigentime_spectral, expected_hitting_times, inverse_speed};
use fastchain::error::Error;
use fastchain::experiments::s2_closed_form;
use fastchain::generator::{cycle_generator, invariant_measure, Generator, ProbabilityVector};
use fastchain::graph::{Cycle, DirectedGraph};
use fastchain::linalg::Matrix;
use fastchain::optimizer::{frank_wolfe_minimize, OptimizeOptions};

pub struct FcGraph(DirectedGraph);
pub struct FcProbability(ProbabilityVector);
pub struct FcGenerator(Generator);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    InvalidInput = 1,
    NumericFailure = 2,
    BudgetExceeded = 3,
    NullPointer = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FcStatus {
    match e.exit_code() {
        4 => FcStatus::BudgetExceeded,
        3 => FcStatus::NumericFailure,
        _ => FcStatus::InvalidInput,
    }
}

struct Fail(FcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null() -> Fail {
    Fail(FcStatus::NullPointer, "null pointer argument".into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FcStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            FcStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    out.write(v);
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `edges` holds `edge_count` pairs `(from, to)`.
#[no_mangle]
pub unsafe extern "C" fn fc_graph_new(n: usize, edges: *const usize, edge_count: usize, out: *mut *mut FcGraph) -> FcStatus {
    guard(|| {
        let e = slice(edges, 2 * edge_count)?;
        let g = DirectedGraph::new(n, e.chunks_exact(2).map(|p| (p[0], p[1])))?;
        put(out, Box::into_raw(Box::new(FcGraph(g))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fc_graph_free(g: *mut FcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fc_pi_new(weights: *const f64, n: usize, out: *mut *mut FcProbability) -> FcStatus {
    guard(|| {
        let w = slice(weights, n)?;
        let p = ProbabilityVector::new(w.to_vec())?;
        put(out, Box::into_raw(Box::new(FcProbability(p))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fc_pi_free(p: *mut FcProbability) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// `rates` is an `n x n` row-major generator matrix.
#[no_mangle]
pub unsafe extern "C" fn fc_generator_new(n: usize, rates: *const f64, out: *mut *mut FcGenerator) -> FcStatus {
    guard(|| {
        let r = slice(rates, n * n)?;
        let l = Generator::new(Matrix::from_row_slice(n, n, r))?;
        put(out, Box::into_raw(Box::new(FcGenerator(l))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fc_generator_free(l: *mut FcGenerator) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

/// Number of states, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fc_generator_dim(l: *const FcGenerator) -> usize {
    l.as_ref().map_or(0, |l| l.0.n())
}

/// Copies the `n x n` rates into `out`, which must hold `len >= n*n` values.
#[no_mangle]
pub unsafe extern "C" fn fc_generator_rates(l: *const FcGenerator, out: *mut f64, len: usize) -> FcStatus {
    guard(|| {
        let l = &handle(l)?.0;
        let n = l.n();
        if len < n * n {
            return Err(Fail(FcStatus::InvalidInput, format!("buffer holds {len} values, need {}", n * n)));
        }
        if out.is_null() {
            return Err(null());
        }
        let dst = std::slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = l.rate(i, j);
            }
        }
        Ok(())
    })
}

/// The generator moving along `cycle` with rates `1 / (len * pi(a))`.
#[no_mangle]
pub unsafe extern "C" fn fc_cycle_generator(
    pi: *const FcProbability,
    cycle: *const usize,
    len: usize,
    out: *mut *mut FcGenerator,
) -> FcStatus {
    guard(|| {
        let pi = &handle(pi)?.0;
        let c = Cycle::new(slice(cycle, len)?.to_vec())?;
        let l = cycle_generator(pi, &c)?;
        put(out, Box::into_raw(Box::new(FcGenerator(l))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn fc_invariant_measure(l: *const FcGenerator, out: *mut *mut FcProbability) -> FcStatus {
    guard(|| {
        let p = invariant_measure(&handle(l)?.0)?;
        put(out, Box::into_raw(Box::new(FcProbability(p))))
    })
}

/// Expected hitting time between two independent `pi`-distributed states.
#[no_mangle]
pub unsafe extern "C" fn fc_inverse_speed(l: *const FcGenerator, pi: *const FcProbability, out: *mut f64) -> FcStatus {
    guard(|| put(out, inverse_speed(&handle(l)?.0, &handle(pi)?.0)?))
}

/// Sum of `1 / lambda` over the nonzero eigenvalues of `-L`.
#[no_mangle]
pub unsafe extern "C" fn fc_eigentime_spectral(l: *const FcGenerator, out: *mut f64) -> FcStatus {
    guard(|| put(out, eigentime_spectral(&handle(l)?.0)?))
}

/// `out[x * n + y] = E_x[tau_y]`; `out` must hold `len >= n*n` values.
#[no_mangle]
pub unsafe extern "C" fn fc_expected_hitting_times(
    l: *const FcGenerator,
    pi: *const FcProbability,
    out: *mut f64,
    len: usize,
) -> FcStatus {
    guard(|| {
        let e = expected_hitting_times(&handle(l)?.0, &handle(pi)?.0)?;
        let n = e.nrows();
        if len < n * n {
            return Err(Fail(FcStatus::InvalidInput, format!("buffer holds {len} values, need {}", n * n)));
        }
        if out.is_null() {
            return Err(null());
        }
        let dst = std::slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = e[(i, j)];
            }
        }
        Ok(())
    })
}

/// Minimizes the inverse speed over normalized `pi`-invariant generators
/// supported on `g`. `out_generator` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn fc_optimize(
    g: *const FcGraph,
    pi: *const FcProbability,
    seed: u64,
    out_f: *mut f64,
    out_generator: *mut *mut FcGenerator,
) -> FcStatus {
    guard(|| {
        let opts = OptimizeOptions { seed, ..OptimizeOptions::default() };
        let rep = frank_wolfe_minimize(&handle(g)?.0, &handle(pi)?.0, &opts)?;
        if !rep.converged {
            return Err(Error::NotConverged(rep.iterations).into());
        }
        put(out_f, rep.f_min)?;
        if !out_generator.is_null() {
            out_generator.write(Box::into_raw(Box::new(FcGenerator(rep.minimizer))));
        }
        Ok(())
    })
}

/// Closed-form optimum on the path `0 - 1 - 2`; `pi` has three entries.
/// `out_p` receives the weight on the two-cycle `(0, 1)`.
#[no_mangle]
pub unsafe extern "C" fn fc_s2_closed_form(pi: *const f64, out_f: *mut f64, out_p: *mut f64) -> FcStatus {
    guard(|| {
        let r = s2_closed_form(slice(pi, 3)?)?;
        put(out_f, r.f_min)?;
        put(out_p, r.p)
    })
}

/// Discrete covering cost from `start`; with `full_set` the walk must also
/// return to `start`.
#[no_mangle]
pub unsafe extern "C" fn fc_dp_discrete_value(g: *const FcGraph, start: usize, full_set: bool, out: *mut f64) -> FcStatus {
    guard(|| {
        let g = &handle(g)?.0;
        let n = g.n();
        if n > MAX_DP_VERTICES {
            return Err(Error::StateSpaceTooLarge(n).into());
        }
        if start >= n {
            return Err(Fail(FcStatus::InvalidInput, format!("start vertex {start} out of range")));
        }
        let target = if full_set { full_mask(n) } else { full_mask(n) & !(1 << start) };
        put(out, discrete_value_function(g, start, target)?.value())
    })
}
