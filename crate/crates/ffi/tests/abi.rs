use std::ffi::{c_char, CStr, CString};
use std::ptr;

use partypes_ffi::*;

const FDIFF: &str = include_str!("../../core/examples/fdiff.pt");
const FDIFF_PROG: &str = include_str!("../../core/examples/fdiff.mpp");
const FDIFF_NAIVE: &str = include_str!("../../core/examples/fdiff_naive.mpp");
const FDIFF_BINDINGS: &str = include_str!("../../core/examples/fdiff.json");

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pt_last_error()) }.to_string_lossy().into_owned()
}

fn take_json(s: *mut c_char) -> serde_json::Value {
    assert!(!s.is_null());
    let v = serde_json::from_str(unsafe { CStr::from_ptr(s) }.to_str().unwrap()).unwrap();
    unsafe { pt_string_free(s) };
    v
}

fn protocol(src: &str) -> *mut PtProtocol {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pt_protocol_parse(c(src).as_ptr(), &mut p) }, PtStatus::Ok);
    p
}

fn program(src: &str) -> *mut PtProgram {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pt_program_parse(c(src).as_ptr(), &mut p) }, PtStatus::Ok);
    p
}

fn bindings(src: &str) -> *mut PtBindings {
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { pt_bindings_parse(c(src).as_ptr(), &mut b) }, PtStatus::Ok);
    b
}

#[test]
fn parse_errors_set_status_and_message() {
    let mut p = ptr::null_mut();
    let status = unsafe { pt_protocol_parse(c("protocol P (true) { message 0 }").as_ptr(), &mut p) };
    assert_eq!(status, PtStatus::ParseError);
    assert!(p.is_null());
    assert!(!last_error().is_empty());

    let mut b = ptr::null_mut();
    assert_eq!(unsafe { pt_bindings_parse(c("[1]").as_ptr(), &mut b) }, PtStatus::BindingError);
}

#[test]
fn null_arguments_are_rejected() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pt_protocol_parse(ptr::null(), &mut p) }, PtStatus::NullArgument);
    assert_eq!(
        unsafe { pt_protocol_parse(c("protocol P (true) { }").as_ptr(), ptr::null_mut()) },
        PtStatus::NullArgument
    );
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pt_project(ptr::null(), 2, &mut out) }, PtStatus::NullArgument);
    unsafe {
        pt_protocol_free(ptr::null_mut());
        pt_program_free(ptr::null_mut());
        pt_bindings_free(ptr::null_mut());
        pt_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_utf8() {
    let bytes = [0xffu8, 0xfe, 0];
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { pt_protocol_parse(bytes.as_ptr().cast(), &mut p) }, PtStatus::InvalidUtf8);
}

#[test]
fn check_and_project() {
    let p = protocol(FDIFF);
    let (mut ok, mut out) = (false, ptr::null_mut());
    assert_eq!(unsafe { pt_check(p, 1, 4, &mut ok, &mut out) }, PtStatus::Ok);
    assert!(ok);
    assert_eq!(take_json(out)["inferredMinSize"], 2);

    assert_eq!(unsafe { pt_project(p, 5, &mut out) }, PtStatus::Ok);
    let v = take_json(out);
    let rank0: Vec<String> = v["ranks"][0]["actions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["kind"] == "send" || a["kind"] == "recv")
        .map(|a| format!("{} {}", a["kind"].as_str().unwrap(), a["peer"]))
        .collect();
    assert_eq!(rank0, ["send 4", "send 1", "recv 1", "recv 4"]);

    assert_eq!(unsafe { pt_project(p, 1, &mut out) }, PtStatus::Precondition);
    assert_eq!(unsafe { pt_check(p, 3, 2, &mut ok, &mut out) }, PtStatus::InvalidArgument);
    unsafe { pt_protocol_free(p) };
}

#[test]
fn verify_and_simulate() {
    let p = protocol(FDIFF);
    let good = program(FDIFF_PROG);
    let naive = program(FDIFF_NAIVE);
    let b = bindings(FDIFF_BINDINGS);
    let (mut flag, mut out) = (false, ptr::null_mut());

    assert_eq!(unsafe { pt_verify(good, p, b, 3, &mut flag, &mut out) }, PtStatus::Ok);
    assert!(flag);
    assert_eq!(take_json(out)["verdict"], "pass");

    assert_eq!(unsafe { pt_verify(naive, p, b, 3, &mut flag, &mut out) }, PtStatus::Ok);
    assert!(!flag);
    let v = take_json(out);
    assert_eq!(v["violation"]["kind"], "ProtocolMismatch");
    assert_eq!(v["violation"]["rank"], 1);

    assert_eq!(unsafe { pt_simulate(naive, b, 3, &mut flag, &mut out) }, PtStatus::Ok);
    assert!(!flag);
    assert_eq!(take_json(out)["deadlocked"], true);

    assert_eq!(unsafe { pt_verify(good, p, ptr::null(), 3, &mut flag, &mut out) }, PtStatus::BindingError);
    assert!(last_error().contains("iterations"), "{}", last_error());

    unsafe {
        pt_program_free(good);
        pt_program_free(naive);
        pt_bindings_free(b);
        pt_protocol_free(p);
    }
}
