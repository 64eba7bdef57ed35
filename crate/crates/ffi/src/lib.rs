//! C ABI over the simulator, replay and binary layer.
//!
//! Every function returns a [`VlStatus`]; on failure the message is kept per
//! thread and read with [`vl_last_error`]. Handles are opaque and must be
//! released with their `_free` function. Strings returned to the caller are
//! released with [`vl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use veclab::binary::{binary_from_async, commutativity_check, BinaryError};
use veclab::explore::{check_properties, run_case_suite, Property};
use veclab::sim::{replay, run_scenario, ScenarioConfig, SimError, Trace};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Protocol = 4,
    TraceFormat = 5,
    ReplayMismatch = 6,
    Binary = 7,
    Panic = 8,
}

/// A recorded run.
pub struct VlTrace {
    trace: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn fail(status: VlStatus, msg: impl Into<String>) -> VlStatus {
    set_error(msg);
    status
}

fn sim_status(e: &SimError) -> VlStatus {
    match e {
        SimError::Config { .. } | SimError::Script { .. } | SimError::NotEnabled(_) => VlStatus::Config,
        SimError::Protocol { .. } => VlStatus::Protocol,
        SimError::TraceFormat { .. } => VlStatus::TraceFormat,
        SimError::ReplayMismatch(_) => VlStatus::ReplayMismatch,
    }
}

fn from_sim(e: SimError) -> VlStatus {
    fail(sim_status(&e), e.to_string())
}

fn from_binary(e: BinaryError) -> VlStatus {
    fail(VlStatus::Binary, e.to_string())
}

fn guard(f: impl FnOnce() -> VlStatus) -> VlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == VlStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(VlStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `s` must be null or a nul-terminated string.
unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, VlStatus> {
    if s.is_null() {
        return Err(fail(VlStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(VlStatus::InvalidUtf8, "argument is not UTF-8"))
}

/// # Safety
/// `t` must be null or a live handle.
unsafe fn trace_ref<'a>(t: *const VlTrace) -> Result<&'a Trace, VlStatus> {
    t.as_ref().map(|h| &h.trace).ok_or_else(|| fail(VlStatus::NullArgument, "null trace handle"))
}

macro_rules! try_vl {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(VlStatus::NullArgument, concat!("null output pointer `", stringify!($p), "`"));
        }
    };
}

/// Message of the last failed call on this thread. Empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn vl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, nul-terminated crate version.
#[no_mangle]
pub extern "C" fn vl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Run a scenario given as TOML or JSON text.
///
/// # Safety
/// `scenario` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vl_run_scenario(scenario: *const c_char, out: *mut *mut VlTrace) -> VlStatus {
    guard(|| {
        out_ptr!(out);
        *out = ptr::null_mut();
        let text = try_vl!(read_str(scenario));
        let cfg = try_vl!(ScenarioConfig::parse(text).map_err(from_sim));
        let trace = try_vl!(run_scenario(&cfg).map_err(from_sim));
        *out = Box::into_raw(Box::new(VlTrace { trace }));
        VlStatus::Ok
    })
}

/// Parse a JSONL trace.
///
/// # Safety
/// `jsonl` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vl_trace_from_jsonl(jsonl: *const c_char, out: *mut *mut VlTrace) -> VlStatus {
    guard(|| {
        out_ptr!(out);
        *out = ptr::null_mut();
        let text = try_vl!(read_str(jsonl));
        let trace = try_vl!(Trace::from_jsonl(text).map_err(from_sim));
        *out = Box::into_raw(Box::new(VlTrace { trace }));
        VlStatus::Ok
    })
}

/// Serialize to JSONL. Release the string with [`vl_string_free`].
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vl_trace_to_jsonl(trace: *const VlTrace, out: *mut *mut c_char) -> VlStatus {
    guard(|| {
        out_ptr!(out);
        *out = ptr::null_mut();
        let t = try_vl!(trace_ref(trace));
        let s = CString::new(t.to_jsonl()).expect("JSON has no nul bytes");
        *out = s.into_raw();
        VlStatus::Ok
    })
}

/// Re-execute and check the recorded verdict; `ReplayMismatch` if it differs.
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vl_trace_replay(trace: *const VlTrace) -> VlStatus {
    guard(|| {
        let t = try_vl!(trace_ref(trace));
        try_vl!(replay(t).map_err(from_sim));
        VlStatus::Ok
    })
}

/// Recorded 64-bit configuration hash of the final configuration.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vl_trace_config_hash(trace: *const VlTrace, out: *mut u64) -> VlStatus {
    guard(|| {
        out_ptr!(out);
        let t = try_vl!(trace_ref(trace));
        match veclab::canonical::parse_hash_hex(&t.verdict.config_hash) {
            Some(h) => {
                *out = h;
                VlStatus::Ok
            }
            None => fail(VlStatus::TraceFormat, "config hash is not hex"),
        }
    })
}

/// Number of recorded events.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vl_trace_event_count(trace: *const VlTrace, out: *mut u64) -> VlStatus {
    guard(|| {
        out_ptr!(out);
        let t = try_vl!(trace_ref(trace));
        *out = t.events.len() as u64;
        VlStatus::Ok
    })
}

pub const VL_AGREEMENT: u32 = 1;
pub const VL_VALIDITY: u32 = 1 << 1;
pub const VL_TERMINATION: u32 = 1 << 2;
pub const VL_SAME_NULL_INDEX: u32 = 1 << 3;
pub const VL_NOT_EXACTLY_ONE_FULL: u32 = 1 << 4;

fn property_bit(p: Property) -> u32 {
    match p {
        Property::Agreement => VL_AGREEMENT,
        Property::Validity => VL_VALIDITY,
        Property::Termination => VL_TERMINATION,
        Property::SameNullIndex => VL_SAME_NULL_INDEX,
        Property::NotExactlyOneFull => VL_NOT_EXACTLY_ONE_FULL,
    }
}

/// Replay and evaluate every property; `failed` gets one `VL_*` bit per
/// failing property.
///
/// # Safety
/// `trace` must be a live handle and `failed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vl_trace_check(trace: *const VlTrace, failed: *mut u32) -> VlStatus {
    guard(|| {
        out_ptr!(failed);
        let t = try_vl!(trace_ref(trace));
        let report = try_vl!(check_properties(t).map_err(from_sim));
        *failed =
            Property::ALL.into_iter().filter(|p| report.status(*p).is_fail()).map(property_bit).fold(0, |a, b| a | b);
        VlStatus::Ok
    })
}

/// Binary decision of an agreeing trace whose initial values are bits.
///
/// # Safety
/// `trace` must be a live handle and `bit` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vl_trace_binary(trace: *const VlTrace, tie_rule: u8, bit: *mut u8) -> VlStatus {
    guard(|| {
        out_ptr!(bit);
        let t = try_vl!(trace_ref(trace));
        let lift = try_vl!(binary_from_async(t, tie_rule).map_err(from_binary));
        *bit = lift.bit;
        VlStatus::Ok
    })
}

/// # Safety
/// `trace` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vl_trace_free(trace: *mut VlTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Run the scripted cases; `failed` counts cases that did not match.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn vl_case_suite(cases: *mut u32, failed: *mut u32) -> VlStatus {
    guard(|| {
        out_ptr!(cases);
        out_ptr!(failed);
        let results = try_vl!(run_case_suite().map_err(from_sim));
        *cases = results.len() as u32;
        *failed = results.iter().filter(|r| !r.passed()).count() as u32;
        VlStatus::Ok
    })
}

/// Compare both termination paradigms over every instance for `n` in 5..=7.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn vl_commute(n: u32, tie_rule: u8, instances: *mut u64, mismatches: *mut u64) -> VlStatus {
    guard(|| {
        out_ptr!(instances);
        out_ptr!(mismatches);
        let r = try_vl!(commutativity_check(n as usize, tie_rule).map_err(from_binary));
        *instances = r.instances as u64;
        *mismatches = r.mismatches.len() as u64;
        VlStatus::Ok
    })
}
