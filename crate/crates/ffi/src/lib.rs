//! C interface to `diffharm`.
//!
//! Every function returns a [`DhStatus`]. On failure, [`dh_last_error`] gives a
//! message for the calling thread. Handles are opaque and must be released
//! with the matching `*_free` function. Complex samples cross the boundary as
//! split real/imaginary arrays; a null imaginary input means zero.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use diffharm::digraph::{self, DirectedPair};
use diffharm::filters::{self, LowPassFilter};
use diffharm::system::{AdmissibleSystem, FunctionSamples};
use diffharm::{io, jacobi, Complex64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    Numeric = 4,
    Parse = 5,
    Panic = 6,
}

/// Smoothing filter handle.
pub struct DhFilter(LowPassFilter);

/// Admissible system handle.
pub struct DhSystem(AdmissibleSystem);

/// Directed pair handle.
pub struct DhPair(DirectedPair);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DhFrameCheck {
    pub sum_sq: f64,
    pub energy: f64,
    pub full_energy: f64,
    pub levels: u32,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn status_of(e: &Error) -> DhStatus {
    match e {
        Error::LengthMismatch { .. } => DhStatus::LengthMismatch,
        Error::Numeric(_) | Error::InsufficientLevels { .. } => DhStatus::Numeric,
        Error::Parse(_) | Error::Io(_) => DhStatus::Parse,
        _ => DhStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DhStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DhStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DhStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn samples(re: *const f64, im: *const f64, len: usize) -> Result<FunctionSamples, Fail> {
    let re = slice(re, len, "re")?;
    let im = if im.is_null() { None } else { Some(slice(im, len, "im")?) };
    Ok(FunctionSamples::from_iterator(len, (0..len).map(|i| Complex64::new(re[i], im.map_or(0.0, |v| v[i])))))
}

unsafe fn write_samples(v: &[Complex64], re: *mut f64, im: *mut f64) -> Result<(), Fail> {
    let re = slice_mut(re, v.len(), "out_re")?;
    for (r, z) in re.iter_mut().zip(v) {
        *r = z.re;
    }
    if !im.is_null() {
        let im = slice_mut(im, v.len(), "out_im")?;
        for (r, z) in im.iter_mut().zip(v) {
            *r = z.im;
        }
    }
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<(), Fail> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got }.into());
    }
    Ok(())
}

unsafe fn real_matrix(data: *const f64, n: usize) -> Result<nalgebra::DMatrix<Complex64>, Fail> {
    let d = slice(data, n * n, "data")?;
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| Complex64::new(d[i * n + j], 0.0)))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dh_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Binomial smoothstep filter of the given order (>= 1).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_filter_new(order: u32, out_filter: *mut *mut DhFilter) -> DhStatus {
    guard(|| {
        let slot = out(out_filter, "out_filter")?;
        *slot = Box::into_raw(Box::new(DhFilter(filters::make_filter(order)?)));
        Ok(())
    })
}

/// Sharp cutoff filter.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_filter_cutoff_new(out_filter: *mut *mut DhFilter) -> DhStatus {
    guard(|| {
        let slot = out(out_filter, "out_filter")?;
        *slot = Box::into_raw(Box::new(DhFilter(filters::make_cutoff_filter())));
        Ok(())
    })
}

/// # Safety
/// `filter` must be a live handle and `out_value` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_filter_eval(filter: *const DhFilter, u: f64, out_value: *mut f64) -> DhStatus {
    guard(|| {
        let h = deref(filter, "filter")?;
        *out(out_value, "out_value")? = h.0.eval(u)?;
        Ok(())
    })
}

/// # Safety
/// `filter` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dh_filter_free(filter: *mut DhFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Trigonometric system on `n` equispaced circle points with frequencies up to `max_freq`.
///
/// # Safety
/// `out_system` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_system_circle_new(n: usize, max_freq: usize, out_system: *mut *mut DhSystem) -> DhStatus {
    guard(|| {
        let slot = out(out_system, "out_system")?;
        *slot = Box::into_raw(Box::new(DhSystem(jacobi::build_circle_system(n, max_freq)?)));
        Ok(())
    })
}

/// Parses a system from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_system` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_system_from_json(json: *const c_char, out_system: *mut *mut DhSystem) -> DhStatus {
    guard(|| {
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Error::Parse(format!("invalid UTF-8: {e}")))?;
        let slot = out(out_system, "out_system")?;
        *slot = Box::into_raw(Box::new(DhSystem(io::system_from_json(text)?)));
        Ok(())
    })
}

/// Serializes a system. Release the string with [`dh_string_free`].
///
/// # Safety
/// `system` must be a live handle; `out_json` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_system_to_json(system: *const DhSystem, out_json: *mut *mut c_char) -> DhStatus {
    guard(|| {
        let s = deref(system, "system")?;
        let text = io::system_to_json(&s.0)?;
        let c = CString::new(text).map_err(|e| Error::Numeric(e.to_string()))?;
        *out(out_json, "out_json")? = c.into_raw();
        Ok(())
    })
}

/// Number of points and number of stored modes.
///
/// # Safety
/// `system` must be a live handle; outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_system_dims(
    system: *const DhSystem,
    out_points: *mut usize,
    out_modes: *mut usize,
) -> DhStatus {
    guard(|| {
        let s = deref(system, "system")?;
        *out(out_points, "out_points")? = s.0.len();
        *out(out_modes, "out_modes")? = s.0.num_modes();
        Ok(())
    })
}

/// Copies the eigenvalues into `buf`, which must hold exactly the number of modes.
///
/// # Safety
/// `system` must be a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dh_system_eigenvalues(system: *const DhSystem, buf: *mut f64, len: usize) -> DhStatus {
    guard(|| {
        let s = deref(system, "system")?;
        let ev = s.0.eigenvalues();
        check_len(ev.len(), len)?;
        slice_mut(buf, len, "buf")?.copy_from_slice(ev);
        Ok(())
    })
}

/// Filtered approximation `sigma_n(h, f)` on a system.
///
/// # Safety
/// Handles must be live; `f_re`/`out_re` hold `len` values, `f_im`/`out_im` may be null.
#[no_mangle]
pub unsafe extern "C" fn dh_system_sigma(
    system: *const DhSystem,
    filter: *const DhFilter,
    n: f64,
    f_re: *const f64,
    f_im: *const f64,
    len: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> DhStatus {
    guard(|| {
        let s = deref(system, "system")?;
        let h = deref(filter, "filter")?;
        check_len(s.0.len(), len)?;
        let f = samples(f_re, f_im, len)?;
        let g = diffharm::approx::sigma_on(&s.0, &h.0, n, &f)?;
        write_samples(g.as_slice(), out_re, out_im)
    })
}

/// # Safety
/// `system` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dh_system_free(system: *mut DhSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Builds a directed pair from a real `n x n` row-major weight matrix, keeping `k` modes.
///
/// # Safety
/// `data` holds `n * n` values; `out_pair` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_pair_from_matrix(
    data: *const f64,
    n: usize,
    k: usize,
    out_pair: *mut *mut DhPair,
) -> DhStatus {
    guard(|| {
        let w = real_matrix(data, n)?;
        let slot = out(out_pair, "out_pair")?;
        *slot = Box::into_raw(Box::new(DhPair(digraph::build_directed_pair(&w, k)?)));
        Ok(())
    })
}

/// Whether the pair came from an undirected (symmetric) matrix.
///
/// # Safety
/// `pair` must be a live handle; `out_flag` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_pair_is_degenerate(pair: *const DhPair, tol: f64, out_flag: *mut bool) -> DhStatus {
    guard(|| {
        let p = deref(pair, "pair")?;
        *out(out_flag, "out_flag")? = p.0.is_degenerate(tol);
        Ok(())
    })
}

/// Filtered approximation of `U f` on the base system of a pair.
///
/// # Safety
/// As for [`dh_system_sigma`].
#[no_mangle]
pub unsafe extern "C" fn dh_pair_sigma(
    pair: *const DhPair,
    filter: *const DhFilter,
    n: f64,
    f_re: *const f64,
    f_im: *const f64,
    len: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> DhStatus {
    guard(|| {
        let p = deref(pair, "pair")?;
        let h = deref(filter, "filter")?;
        check_len(p.0.len(), len)?;
        let f = samples(f_re, f_im, len)?;
        let g = digraph::sigma(&p.0, &h.0, n, &f)?;
        write_samples(g.as_slice(), out_re, out_im)
    })
}

/// Frame-inequality check for one function.
///
/// # Safety
/// As for [`dh_pair_sigma`]; `out_check` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_pair_frame_check(
    pair: *const DhPair,
    filter: *const DhFilter,
    f_re: *const f64,
    f_im: *const f64,
    len: usize,
    out_check: *mut DhFrameCheck,
) -> DhStatus {
    guard(|| {
        let p = deref(pair, "pair")?;
        let h = deref(filter, "filter")?;
        check_len(p.0.len(), len)?;
        let f = samples(f_re, f_im, len)?;
        let c = digraph::frame_check(&p.0, &h.0, &f)?;
        *out(out_check, "out_check")? = DhFrameCheck {
            sum_sq: c.sum_sq,
            energy: c.energy,
            full_energy: c.full_energy,
            levels: c.levels,
            lower_ok: c.lower_ok,
            upper_ok: c.upper_ok,
        };
        Ok(())
    })
}

/// # Safety
/// `pair` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dh_pair_free(pair: *mut DhPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Polar decomposition `W = P U` of a real row-major `n x n` matrix.
/// Both factors are real for real input and are written row-major.
///
/// # Safety
/// `data`, `out_p`, `out_u` hold `n * n` values; `out_rank` may be null.
#[no_mangle]
pub unsafe extern "C" fn dh_polar_decompose(
    data: *const f64,
    n: usize,
    out_p: *mut f64,
    out_u: *mut f64,
    out_rank: *mut usize,
) -> DhStatus {
    guard(|| {
        let w = real_matrix(data, n)?;
        let pd = digraph::polar_decompose(&w)?;
        let p = slice_mut(out_p, n * n, "out_p")?;
        let u = slice_mut(out_u, n * n, "out_u")?;
        for i in 0..n {
            for j in 0..n {
                p[i * n + j] = pd.p[(i, j)].re;
                u[i * n + j] = pd.u[(i, j)].re;
            }
        }
        if let Some(r) = out_rank.as_mut() {
            *r = pd.rank;
        }
        Ok(())
    })
}

/// Orthonormal Jacobi polynomial of degree `k` for weight `(1-x)^alpha (1+x)^beta`.
///
/// # Safety
/// `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dh_jacobi_eval(alpha: f64, beta: f64, k: usize, x: f64, out_value: *mut f64) -> DhStatus {
    guard(|| {
        let basis = jacobi::JacobiBasis::new(alpha, beta, k)?;
        *out(out_value, "out_value")? = jacobi::jacobi_eval(&basis, k, x)?;
        Ok(())
    })
}
