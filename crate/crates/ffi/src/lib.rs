//! C ABI for partypes.
//!
//! Parsed protocols, programs and bindings live behind opaque handles that
//! the caller frees with the matching `*_free` function. Every entry point
//! returns a [`PtStatus`]; on failure [`pt_last_error`] describes the
//! problem. Reports are returned as JSON strings that the caller releases
//! with [`pt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use partypes::bindings::BindingsFile;
use partypes::conform::{check_conformance, ConformError, ConformanceReport, Verdict};
use partypes::parser::{parse_program, parse_protocol};
use partypes::program::Program;
use partypes::project::expansion_table;
use partypes::protocol::GlobalProtocol;
use partypes::simulate;
use partypes::value::Env;
use partypes::wellformed::{admits_size, check_protocol, SizeRange};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    BindingError = 4,
    /// Size excluded by the protocol header, or protocol ill-formed at it.
    Precondition = 5,
    ProjectionError = 6,
    InvalidArgument = 7,
    Panic = 99,
}

pub struct PtProtocol {
    inner: GlobalProtocol,
}

pub struct PtProgram {
    inner: Program,
}

pub struct PtBindings {
    inner: BindingsFile,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("NUL bytes were replaced"));
}

/// Message for the most recent failed call on this thread. The pointer stays
/// valid until the next call from the same thread.
#[no_mangle]
pub extern "C" fn pt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn guard(f: impl FnOnce() -> Result<(), (PtStatus, String)>) -> PtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PtStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            PtStatus::Panic
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, (PtStatus, String)> {
    if s.is_null() {
        return Err((PtStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(s).to_str().map_err(|e| (PtStatus::InvalidUtf8, e.to_string()))
}

/// # Safety
/// `h` must be null or a live handle of type `T`.
unsafe fn handle<'a, T>(h: *const T) -> Result<&'a T, (PtStatus, String)> {
    h.as_ref().ok_or((PtStatus::NullArgument, "null handle".into()))
}

/// # Safety
/// `out` must be null or valid for a pointer write.
unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), (PtStatus, String)> {
    if out.is_null() {
        return Err((PtStatus::NullArgument, "null output pointer".into()));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// # Safety
/// `out` must be null or valid for a pointer write.
unsafe fn put_json(out: *mut *mut c_char, v: &serde_json::Value) -> Result<(), (PtStatus, String)> {
    if out.is_null() {
        return Err((PtStatus::NullArgument, "null output pointer".into()));
    }
    let s = CString::new(v.to_string()).expect("JSON text has no NUL bytes");
    *out = s.into_raw();
    Ok(())
}

/// Parses protocol text into `*out`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pt_protocol_parse(source: *const c_char, out: *mut *mut PtProtocol) -> PtStatus {
    guard(|| {
        let inner = parse_protocol(text(source)?).map_err(|e| (PtStatus::ParseError, e.to_string()))?;
        put(out, PtProtocol { inner })
    })
}

/// # Safety
/// `p` must be null or a handle from [`pt_protocol_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pt_protocol_free(p: *mut PtProtocol) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Parses program text into `*out`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pt_program_parse(source: *const c_char, out: *mut *mut PtProgram) -> PtStatus {
    guard(|| {
        let inner = parse_program(text(source)?).map_err(|e| (PtStatus::ParseError, e.to_string()))?;
        put(out, PtProgram { inner })
    })
}

/// # Safety
/// `p` must be null or a handle from [`pt_program_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pt_program_free(p: *mut PtProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Parses a bindings JSON document into `*out`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pt_bindings_parse(source: *const c_char, out: *mut *mut PtBindings) -> PtStatus {
    guard(|| {
        let inner = BindingsFile::parse(text(source)?).map_err(|e| (PtStatus::BindingError, e.to_string()))?;
        put(out, PtBindings { inner })
    })
}

/// # Safety
/// `b` must be null or a handle from [`pt_bindings_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pt_bindings_free(b: *mut PtBindings) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Well-formedness report over sizes `min..=max`, as JSON. `*ok` is set to
/// whether every admitted size is free of errors.
///
/// # Safety
/// `proto` must be a live handle; `ok` and `out_json` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pt_check(
    proto: *const PtProtocol,
    min: i64,
    max: i64,
    ok: *mut bool,
    out_json: *mut *mut c_char,
) -> PtStatus {
    guard(|| {
        let p = &handle(proto)?.inner;
        let range = SizeRange::new(min, max).map_err(|e| (PtStatus::InvalidArgument, e))?;
        let report = check_protocol(p, range);
        if ok.is_null() {
            return Err((PtStatus::NullArgument, "null output pointer".into()));
        }
        *ok = report.is_ok();
        put_json(out_json, &report.to_json())
    })
}

/// Projection of every rank at `size`, as JSON.
///
/// # Safety
/// `proto` must be a live handle and `out_json` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pt_project(proto: *const PtProtocol, size: i64, out_json: *mut *mut c_char) -> PtStatus {
    guard(|| {
        let p = &handle(proto)?.inner;
        if size < 1 {
            return Err((PtStatus::InvalidArgument, format!("size must be positive, got {size}")));
        }
        match admits_size(p, size) {
            Ok(true) => {}
            Ok(false) => {
                return Err((PtStatus::Precondition, format!("size {size} is excluded by the protocol header")))
            }
            Err(e) => return Err((PtStatus::Precondition, e.to_string())),
        }
        let table =
            expansion_table(p, size, &Env::new(size)).map_err(|e| (PtStatus::ProjectionError, e.to_string()))?;
        let ranks: Vec<serde_json::Value> = table
            .iter()
            .enumerate()
            .map(|(r, actions)| {
                serde_json::json!({ "rank": r, "actions": actions.iter().map(|a| a.to_json()).collect::<Vec<_>>() })
            })
            .collect();
        put_json(out_json, &serde_json::json!({ "protocol": p.name, "size": size, "ranks": ranks }))
    })
}

/// Conformance of `prog` to `proto` at `size`. `bindings` may be null when
/// the program declares no externs. `*passed` receives the verdict.
///
/// # Safety
/// Handles must be live (or null for `bindings`); `passed` and `out_json`
/// valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pt_verify(
    prog: *const PtProgram,
    proto: *const PtProtocol,
    bindings: *const PtBindings,
    size: i64,
    passed: *mut bool,
    out_json: *mut *mut c_char,
) -> PtStatus {
    guard(|| {
        let prog = &handle(prog)?.inner;
        let p = &handle(proto)?.inner;
        let b =
            bindings.as_ref().map(|b| b.inner.for_size(size)).unwrap_or_else(|| BindingsFile::default().for_size(size));
        if passed.is_null() {
            return Err((PtStatus::NullArgument, "null output pointer".into()));
        }
        let report = match check_conformance(prog, p, &b) {
            Ok(r) => r,
            Err(ConformError::Binding(e)) => return Err((PtStatus::BindingError, e.to_string())),
            Err(ConformError::Excluded { size }) => {
                ConformanceReport { size, verdict: Verdict::Excluded, collective_log: Vec::new() }
            }
            Err(e) => return Err((PtStatus::Precondition, e.to_string())),
        };
        *passed = report.passed();
        put_json(out_json, &report.to_json())
    })
}

/// Runs `prog` at `size` ranks under synchronous communication. `*ok` is
/// true when every rank terminated without deadlock or fault.
///
/// # Safety
/// `prog` must be a live handle, `bindings` live or null; `ok` and
/// `out_json` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn pt_simulate(
    prog: *const PtProgram,
    bindings: *const PtBindings,
    size: i64,
    ok: *mut bool,
    out_json: *mut *mut c_char,
) -> PtStatus {
    guard(|| {
        let prog = &handle(prog)?.inner;
        if size < 1 {
            return Err((PtStatus::InvalidArgument, format!("size must be positive, got {size}")));
        }
        let b =
            bindings.as_ref().map(|b| b.inner.for_size(size)).unwrap_or_else(|| BindingsFile::default().for_size(size));
        if ok.is_null() {
            return Err((PtStatus::NullArgument, "null output pointer".into()));
        }
        let report = simulate::run(prog, &b).map_err(|e| (PtStatus::BindingError, e.to_string()))?;
        *ok = report.is_ok();
        put_json(out_json, &report.to_json())
    })
}
