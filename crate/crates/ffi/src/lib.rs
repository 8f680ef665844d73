//! C ABI for anisolag.
//!
//! Objects are opaque handles created by `anisolag_*_new`/`_parse`/`_build`
//! functions and released with the matching `_free`. Every fallible function
//! returns an [`AnisolagStatus`]; on failure the message is available from
//! [`anisolag_last_error`] on the same thread. Strings returned through
//! `char **` out-parameters are owned by the caller and released with
//! [`anisolag_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use anisolag::cc::DEFAULT_TAU_SPAN;
use anisolag::checks::{check_convexity, check_kernel_constancy, Sampling};
use anisolag::pseudoinverse::{matrix_from_rows, matrix_rows};
use anisolag::{
    cc_distance, lift, pinv, project, pushforward, Anisotropy, AnisotropyConfig, CatalogParams, Error, Grid,
    HorizontalGraph, Lagrangian,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnisolagStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Dimension = 4,
    OutsideDomain = 5,
    InvalidParam = 6,
    NonFinite = 7,
    Config = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnisolagKind {
    Euclidean = 0,
    Anisotropic = 1,
}

/// Opaque anisotropy handle.
pub struct AnisolagAnisotropy(Anisotropy);

/// Opaque Lagrangian handle.
pub struct AnisolagLagrangian(Lagrangian);

/// Opaque horizontal-graph handle.
pub struct AnisolagGraph(HorizontalGraph);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Fail(AnisolagStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } => AnisolagStatus::Parse,
            Error::Dimension { .. } => AnisolagStatus::Dimension,
            Error::OutsideDomain(_) => AnisolagStatus::OutsideDomain,
            Error::UnknownCatalog(_) | Error::InvalidParam(_) | Error::NonDifferentiable(_) => {
                AnisolagStatus::InvalidParam
            }
            Error::NonFinite(_) => AnisolagStatus::NonFinite,
            Error::Config(_) => AnisolagStatus::Config,
            Error::Io(_) => AnisolagStatus::Io,
        };
        Fail(code, e.to_string())
    }
}

type FfiResult<T> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> AnisolagStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            AnisolagStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            AnisolagStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(AnisolagStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AnisolagStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let c = CString::new(s).map_err(|_| Fail(AnisolagStatus::InvalidParam, "string contains NUL".into()))?;
    put(out, c.into_raw(), "out")
}

fn json<T: serde::Serialize>(v: &T) -> FfiResult<String> {
    serde_json::to_string(v).map_err(|e| Fail(AnisolagStatus::Io, e.to_string()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn anisolag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn anisolag_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer returned through a `char **` out-parameter
/// of this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn anisolag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Catalog anisotropy with default parameters.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_anisotropy_builtin(
    name: *const c_char,
    out: *mut *mut AnisolagAnisotropy,
) -> AnisolagStatus {
    guard(|| {
        let a = Anisotropy::builtin(text(name, "name")?, &CatalogParams::default())?;
        put(out, Box::into_raw(Box::new(AnisolagAnisotropy(a))), "out")
    })
}

/// Anisotropy from a JSON config block, e.g. `{"name": "grushin"}` or
/// `{"n": 2, "m": 1, "box": [[0,1],[0,1]], "coeffs": [["1","0"]]}`.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_anisotropy_from_json(
    config: *const c_char,
    out: *mut *mut AnisolagAnisotropy,
) -> AnisolagStatus {
    guard(|| {
        let cfg: AnisotropyConfig = serde_json::from_str(text(config, "config")?)
            .map_err(|e| Fail(AnisolagStatus::Config, e.to_string()))?;
        let a = cfg.build()?;
        put(out, Box::into_raw(Box::new(AnisolagAnisotropy(a))), "out")
    })
}

/// # Safety
/// `a` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn anisolag_anisotropy_free(a: *mut AnisolagAnisotropy) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Writes the ambient dimension `n` and field count `m`.
///
/// # Safety
/// `a` must be a live handle; `n` and `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_anisotropy_dims(
    a: *const AnisolagAnisotropy,
    n: *mut usize,
    m: *mut usize,
) -> AnisolagStatus {
    guard(|| {
        let a = &handle(a, "a")?.0;
        put(n, a.n(), "n")?;
        put(m, a.m(), "m")
    })
}

/// Coefficient matrix `C(x)`, `m x n` row-major, into `out[0..out_len]`.
///
/// # Safety
/// `x` must hold `x_len` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn anisolag_coefficient_matrix(
    a: *const AnisolagAnisotropy,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> AnisolagStatus {
    guard(|| {
        let a = &handle(a, "a")?.0;
        let c = a.coefficient_matrix(slice(x, x_len, "x")?)?;
        write_row_major(&matrix_rows(&c), out, out_len)
    })
}

unsafe fn write_row_major(rows: &[Vec<f64>], out: *mut f64, out_len: usize) -> FfiResult<()> {
    let need: usize = rows.iter().map(Vec::len).sum();
    if out_len < need {
        return Err(Fail(
            AnisolagStatus::BufferTooSmall,
            format!("output needs {need} doubles, got {out_len}"),
        ));
    }
    if out.is_null() {
        return Err(null("out"));
    }
    for (k, v) in rows.iter().flatten().enumerate() {
        *out.add(k) = *v;
    }
    Ok(())
}

/// Moore-Penrose pseudo-inverse of the `rows x cols` row-major matrix `c`.
/// Writes the `cols x rows` result row-major into `out` and the numerical
/// rank into `rank`.
///
/// # Safety
/// `c` must hold `rows * cols` doubles, `out` `out_len` doubles, and `rank`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_pinv(
    c: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
    rank: *mut usize,
) -> AnisolagStatus {
    guard(|| {
        let data = slice(c, rows * cols, "c")?;
        let m: Vec<Vec<f64>> = data.chunks(cols.max(1)).map(<[f64]>::to_vec).collect();
        let m = if rows == 0 || cols == 0 { Vec::new() } else { m };
        let p = pinv(&matrix_from_rows(&m)?)?;
        write_row_major(&matrix_rows(&p.c_p), out, out_len)?;
        put(rank, p.rank, "rank")
    })
}

/// Parses a Lagrangian `f(x, q)` over `a`. Euclidean Lagrangians take `n`
/// arguments, anisotropic ones `m`.
///
/// # Safety
/// `a` must be a live handle, `expr` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_lagrangian_parse(
    a: *const AnisolagAnisotropy,
    kind: AnisolagKind,
    expr: *const c_char,
    out: *mut *mut AnisolagLagrangian,
) -> AnisolagStatus {
    guard(|| {
        let a = &handle(a, "a")?.0;
        let src = text(expr, "expr")?;
        let f = match kind {
            AnisolagKind::Euclidean => Lagrangian::euclidean(a, src)?,
            AnisolagKind::Anisotropic => Lagrangian::anisotropic(a, src)?,
        };
        put(out, Box::into_raw(Box::new(AnisolagLagrangian(f))), "out")
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnisolagTransform {
    Lift = 0,
    Pushforward = 1,
    Project = 2,
}

/// Lift, pushforward or projection of `f` through `a` as a new handle.
///
/// # Safety
/// `f` and `a` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_lagrangian_transform(
    f: *const AnisolagLagrangian,
    a: *const AnisolagAnisotropy,
    transform: AnisolagTransform,
    out: *mut *mut AnisolagLagrangian,
) -> AnisolagStatus {
    guard(|| {
        let (f, a) = (&handle(f, "f")?.0, &handle(a, "a")?.0);
        let g = match transform {
            AnisolagTransform::Lift => lift(f, a)?,
            AnisolagTransform::Pushforward => pushforward(f, a)?,
            AnisolagTransform::Project => project(f, a)?,
        };
        put(out, Box::into_raw(Box::new(AnisolagLagrangian(g))), "out")
    })
}

/// `f(x, arg)`.
///
/// # Safety
/// `x` and `arg` must hold `x_len` and `arg_len` doubles; `value` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_lagrangian_eval(
    f: *const AnisolagLagrangian,
    x: *const f64,
    x_len: usize,
    arg: *const f64,
    arg_len: usize,
    value: *mut f64,
) -> AnisolagStatus {
    guard(|| {
        let f = &handle(f, "f")?.0;
        let v = f.eval(slice(x, x_len, "x")?, slice(arg, arg_len, "arg")?)?;
        put(value, v, "value")
    })
}

/// JSON description `{kind, arg_dim, expr}` of `f`.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_lagrangian_describe(
    f: *const AnisolagLagrangian,
    out: *mut *mut c_char,
) -> AnisolagStatus {
    guard(|| {
        let f = &handle(f, "f")?.0;
        put_string(out, json(f)?)
    })
}

/// # Safety
/// `f` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn anisolag_lagrangian_free(f: *mut AnisolagLagrangian) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnisolagCheck {
    KernelConstancy = 0,
    Convexity = 1,
}

/// Runs a sampled check with about `samples` draws and writes the JSON report
/// to `report`. The status is `Ok` whether or not the check passes; read
/// `"pass"` from the report.
///
/// # Safety
/// `f` and `a` must be live handles; `report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_check(
    f: *const AnisolagLagrangian,
    a: *const AnisolagAnisotropy,
    check: AnisolagCheck,
    samples: usize,
    seed: u64,
    tol: f64,
    report: *mut *mut c_char,
) -> AnisolagStatus {
    guard(|| {
        let (f, a) = (&handle(f, "f")?.0, &handle(a, "a")?.0);
        let sampling = Sampling::with_total(samples, seed);
        let rep = match check {
            AnisolagCheck::KernelConstancy => check_kernel_constancy(f, a, &sampling, tol)?,
            AnisolagCheck::Convexity => check_convexity(f, a.domain(), &sampling, tol)?,
        };
        put_string(report, json(&rep)?)
    })
}

/// Horizontal graph over `resolution` cells per axis of the anisotropy
/// domain. `tau_span <= 0` selects the default.
///
/// # Safety
/// `a` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_graph_build(
    a: *const AnisolagAnisotropy,
    resolution: usize,
    radius: usize,
    tau_span: f64,
    out: *mut *mut AnisolagGraph,
) -> AnisolagStatus {
    guard(|| {
        let a = &handle(a, "a")?.0;
        let grid = Grid::uniform(a.domain().clone(), resolution)?;
        let tau = if tau_span > 0.0 { tau_span } else { DEFAULT_TAU_SPAN };
        let g = HorizontalGraph::build(a, &grid, radius, tau)?;
        put(out, Box::into_raw(Box::new(AnisolagGraph(g))), "out")
    })
}

/// Graph distance between the cells nearest `x` and `y` (both of length
/// `dim`). `finite` is set to 0 and `distance` to infinity when `y` is
/// unreachable.
///
/// # Safety
/// `x`, `y` must hold `dim` doubles; `distance` and `finite` must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_cc_distance(
    g: *const AnisolagGraph,
    x: *const f64,
    y: *const f64,
    dim: usize,
    distance: *mut f64,
    finite: *mut i32,
) -> AnisolagStatus {
    guard(|| {
        let g = &handle(g, "g")?.0;
        let q = cc_distance(g, slice(x, dim, "x")?, slice(y, dim, "y")?)?;
        let d = q.distance.finite();
        put(distance, d.unwrap_or(f64::INFINITY), "distance")?;
        put(finite, d.is_some() as i32, "finite")
    })
}

/// # Safety
/// `g` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn anisolag_graph_free(g: *mut AnisolagGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Runs the command line `anisolag argv[0] argv[1] ...` (without the program
/// name) in-process. Writes the report to `output` and the exit code to
/// `exit_code`.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings; `output` and `exit_code`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn anisolag_run(
    argc: usize,
    argv: *const *const c_char,
    output: *mut *mut c_char,
    exit_code: *mut i32,
) -> AnisolagStatus {
    guard(|| {
        let mut args = vec!["anisolag".to_owned()];
        if argc > 0 {
            if argv.is_null() {
                return Err(null("argv"));
            }
            for i in 0..argc {
                args.push(text(*argv.add(i), "argv[i]")?.to_owned());
            }
        }
        let out = anisolag::cli::run(args);
        put(exit_code, out.code, "exit_code")?;
        let text = if out.stdout.is_empty() { out.stderr } else { out.stdout };
        put_string(output, text)
    })
}
