//! C ABI for `gamow-core`.
//!
//! Every object is an opaque heap handle created by a `*_new`/`*_locate`/
//! `*_build` call and released by the matching `*_free`. Every fallible
//! call returns a [`GamowStatus`]; on failure the message is available from
//! [`gamow_last_error_message`] on the same thread until the next call.
//! Signed pole indices follow the core convention: `n ≥ 1` are fourth-quadrant
//! poles, `−n` their mirrors.

use gamow_core::asymptote::tail_coefficient_t1;
use gamow_core::dynamics::{nonescape_probability, NonescapeSeries, TimeGrid};
use gamow_core::gamow::{ExpansionData, OverlapMode};
use gamow_core::model::{InitialState, Potential, Segment};
use gamow_core::oracle::{evolve_tdse, Absorber, GridSpec};
use gamow_core::poles::{locate_poles, PoleSet, SearchWindow};
use gamow_core::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result codes. `GAMOW_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GamowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPotential = 3,
    InvalidState = 4,
    InvalidGrid = 5,
    /// Numerical failure inside the library (tolerance, overflow, audit, ...).
    Numerical = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

impl From<&Error> for GamowStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidPotential(_) => GamowStatus::InvalidPotential,
            Error::InvalidState(_) => GamowStatus::InvalidState,
            Error::InvalidGrid(_) => GamowStatus::InvalidGrid,
            Error::InvalidArgument(_) | Error::Config(_) => GamowStatus::InvalidArgument,
            _ => GamowStatus::Numerical,
        }
    }
}

/// Overlap evaluation used by the double sum.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GamowOverlapMode {
    Closed = 0,
    Quadrature = 1,
}

/// Oracle grid. `absorber_width <= 0` disables the absorbing mask and
/// `energy_cutoff <= 0` disables the spectral filter; `analysis_end <= 0`
/// means no analysis window.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GamowGridSpec {
    pub box_length: f64,
    pub intervals_per_range: usize,
    pub time_step: f64,
    pub final_time: f64,
    pub leak_threshold: f64,
    pub max_wavenumber: f64,
    pub record_every: usize,
    pub absorber_width: f64,
    pub absorber_strength: f64,
    pub energy_cutoff: f64,
    pub analysis_end: f64,
}

impl From<&GamowGridSpec> for GridSpec {
    fn from(g: &GamowGridSpec) -> Self {
        GridSpec {
            box_length: g.box_length,
            intervals_per_range: g.intervals_per_range,
            time_step: g.time_step,
            final_time: g.final_time,
            leak_threshold: g.leak_threshold,
            max_wavenumber: g.max_wavenumber,
            record_every: g.record_every,
            absorber: (g.absorber_width > 0.0)
                .then_some(Absorber { width: g.absorber_width, strength: g.absorber_strength }),
            energy_cutoff: (g.energy_cutoff > 0.0).then_some(g.energy_cutoff),
            analysis_end: (g.analysis_end > 0.0).then_some(g.analysis_end),
        }
    }
}

pub struct GamowPotential(Potential);
pub struct GamowInitialState(InitialState);
pub struct GamowPoleSet(PoleSet);
pub struct GamowExpansion(ExpansionData);
pub struct GamowSeries(NonescapeSeries);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f` behind `catch_unwind` and turns its outcome into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GamowStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GamowStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GamowStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(format!("{}: {e}", e.kind()));
            GamowStatus::from(&e)
        }
        Err(_) => {
            set_error("panic inside gamow".into());
            GamowStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn gamow_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gamow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Delta shell `λ δ(r − R)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gamow_potential_delta_shell(strength: f64, radius: f64, out: *mut *mut GamowPotential) -> GamowStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(GamowPotential(Potential::delta_shell(strength, radius)?));
        Ok(())
    })
}

/// Piecewise-constant potential from `count` contiguous segments
/// `[r_lo[i], r_hi[i]]` with value `v[i]`, starting at 0.
///
/// # Safety
/// The three arrays must hold `count` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_potential_piecewise(
    r_lo: *const f64,
    r_hi: *const f64,
    v: *const f64,
    count: usize,
    out: *mut *mut GamowPotential,
) -> GamowStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (a, b, c) = (slice(r_lo, count, "r_lo")?, slice(r_hi, count, "r_hi")?, slice(v, count, "v")?);
        let segments = (0..count).map(|i| Segment { r_lo: a[i], r_hi: b[i], v: c[i] }).collect();
        *out = boxed(GamowPotential(Potential::piecewise_constant(segments)?));
        Ok(())
    })
}

/// # Safety
/// `p` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gamow_potential_free(p: *mut GamowPotential) {
    release(p)
}

/// Box mode `√(2/R) sin(mπr/R)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_initial_box_mode(m: u32, radius: f64, out: *mut *mut GamowInitialState) -> GamowStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(GamowInitialState(InitialState::box_mode(m, radius)?));
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gamow_initial_free(s: *mut GamowInitialState) {
    release(s)
}

/// Locates fourth-quadrant poles in `(0, re_max] × [im_min, 0]`.
///
/// # Safety
/// `p` must be a live potential handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_poles_locate(
    p: *const GamowPotential,
    re_max: f64,
    im_min: f64,
    tol: f64,
    out: *mut *mut GamowPoleSet,
) -> GamowStatus {
    guard(|| {
        let p = borrow(p, "potential")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(GamowPoleSet(locate_poles(&p.0, SearchWindow { re_max, im_min }, tol)?));
        Ok(())
    })
}

/// Number of fourth-quadrant poles (mirrors not counted).
///
/// # Safety
/// `s` must be a live handle; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_poles_len(s: *const GamowPoleSet, out_len: *mut usize) -> GamowStatus {
    guard(|| {
        *out_ptr(out_len, "out_len")? = borrow(s, "pole set")?.0.len();
        Ok(())
    })
}

/// Pole `k_n` for a signed index `n`.
///
/// # Safety
/// `s` must be a live handle; `re`, `im` writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_poles_get(s: *const GamowPoleSet, n: i64, re: *mut f64, im: *mut f64) -> GamowStatus {
    guard(|| {
        let s = borrow(s, "pole set")?;
        let pole = s.0.pole(n).ok_or_else(|| Error::InvalidArgument(format!("no pole with index {n}")))?;
        *out_ptr(re, "re")? = pole.k.re;
        *out_ptr(im, "im")? = pole.k.im;
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gamow_poles_free(s: *mut GamowPoleSet) {
    release(s)
}

/// Gamow states, coefficients and overlaps for `|n| ≤ n_max`.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_expansion_build(
    poles: *const GamowPoleSet,
    psi0: *const GamowInitialState,
    n_max: usize,
    with_quadrature: bool,
    out: *mut *mut GamowExpansion,
) -> GamowStatus {
    guard(|| {
        let poles = borrow(poles, "pole set")?;
        let psi0 = borrow(psi0, "initial state")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(GamowExpansion(ExpansionData::build(&poles.0, &psi0.0, n_max, with_quadrature)?));
        Ok(())
    })
}

/// Expansion coefficient `C_n` for a signed index.
///
/// # Safety
/// `e` must be live; `re`, `im` writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_expansion_coefficient(e: *const GamowExpansion, n: i64, re: *mut f64, im: *mut f64) -> GamowStatus {
    guard(|| {
        let e = borrow(e, "expansion")?;
        let c = e.0.coefficient(n).ok_or_else(|| Error::InvalidArgument(format!("no coefficient with index {n}")))?;
        *out_ptr(re, "re")? = c.re;
        *out_ptr(im, "im")? = c.im;
        Ok(())
    })
}

/// Truncated `P_N(t)` at `count` strictly ascending times, written to `out_p`.
///
/// # Safety
/// `times` and `out_p` must hold `count` elements; `e` must be live.
#[no_mangle]
pub unsafe extern "C" fn gamow_expansion_nonescape(
    e: *const GamowExpansion,
    times: *const f64,
    count: usize,
    n: usize,
    mode: GamowOverlapMode,
    out_p: *mut f64,
) -> GamowStatus {
    guard(|| {
        let e = borrow(e, "expansion")?;
        let ts = slice(times, count, "times")?;
        if count > 0 && out_p.is_null() {
            return Err(Failure::Null("out_p"));
        }
        let mode = match mode {
            GamowOverlapMode::Closed => OverlapMode::Closed,
            GamowOverlapMode::Quadrature => OverlapMode::Quadrature,
        };
        let s = nonescape_probability(&e.0, &TimeGrid::from_points(ts.to_vec())?, n, mode)?;
        std::slice::from_raw_parts_mut(out_p, count).copy_from_slice(&s.p);
        Ok(())
    })
}

/// `t⁻¹` tail coefficient `D1(N)` by the double sum and by `∫|S_N|²`.
///
/// # Safety
/// `e` must be live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_expansion_tail_t1(
    e: *const GamowExpansion,
    n: usize,
    double_sum: *mut f64,
    integral: *mut f64,
) -> GamowStatus {
    guard(|| {
        let e = borrow(e, "expansion")?;
        let d = tail_coefficient_t1(&e.0, n)?;
        *out_ptr(double_sum, "double_sum")? = d.double_sum;
        *out_ptr(integral, "integral")? = d.integral;
        Ok(())
    })
}

/// # Safety
/// `e` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gamow_expansion_free(e: *mut GamowExpansion) {
    release(e)
}

/// Direct Crank–Nicolson `P(t)`.
///
/// # Safety
/// Handles and `grid` must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_oracle_evolve(
    p: *const GamowPotential,
    psi0: *const GamowInitialState,
    grid: *const GamowGridSpec,
    out: *mut *mut GamowSeries,
) -> GamowStatus {
    guard(|| {
        let p = borrow(p, "potential")?;
        let psi0 = borrow(psi0, "initial state")?;
        let g = GridSpec::from(borrow(grid, "grid")?);
        let out = out_ptr(out, "out")?;
        *out = boxed(GamowSeries(evolve_tdse(&p.0, &psi0.0, &g)?));
        Ok(())
    })
}

/// Number of recorded times.
///
/// # Safety
/// `s` must be live; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_series_len(s: *const GamowSeries, out_len: *mut usize) -> GamowStatus {
    guard(|| {
        *out_ptr(out_len, "out_len")? = borrow(s, "series")?.0.len();
        Ok(())
    })
}

/// Copies times and `P` into caller buffers of length `capacity`
/// (at least the series length). Either buffer may be NULL to skip it.
///
/// # Safety
/// Non-NULL buffers must hold `capacity` elements; `s` must be live.
#[no_mangle]
pub unsafe extern "C" fn gamow_series_copy(s: *const GamowSeries, times: *mut f64, p: *mut f64, capacity: usize) -> GamowStatus {
    guard(|| {
        let s = &borrow(s, "series")?.0;
        if capacity < s.len() {
            return Err(Error::InvalidArgument(format!("capacity {capacity} below series length {}", s.len())).into());
        }
        if !times.is_null() {
            std::slice::from_raw_parts_mut(times, s.len()).copy_from_slice(&s.times);
        }
        if !p.is_null() {
            std::slice::from_raw_parts_mut(p, s.len()).copy_from_slice(&s.p);
        }
        Ok(())
    })
}

/// First contaminated time, or a negative value when the run stayed clean.
///
/// # Safety
/// `s` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gamow_series_horizon(s: *const GamowSeries, out: *mut f64) -> GamowStatus {
    guard(|| {
        *out_ptr(out, "out")? = borrow(s, "series")?.0.horizon().unwrap_or(-1.0);
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gamow_series_free(s: *mut GamowSeries) {
    release(s)
}
