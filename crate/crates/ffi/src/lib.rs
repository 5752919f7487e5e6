//! C ABI over the CFG classifier toolkit.
//!
//! Conventions, mirrored in `include/cfgadv.h`:
//! - Opaque handles (`CfgadvGraph`, `CfgadvClassifier`) own their Rust
//!   values; release them with the matching `_free` function exactly once.
//! - Every fallible function returns a `CFGADV_*` status code and writes
//!   results through out-pointers, which are only valid when the call
//!   returned `CFGADV_OK`.
//! - Strings returned through out-pointers are NUL-terminated, allocated by
//!   this library, and must be released with `cfgadv_string_free`.
//! - `cfgadv_last_error()` returns a thread-local message describing the
//!   most recent failure on the calling thread.
//!
//! The header is maintained by hand and checked against this surface by
//! the crate's tests.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use cfgadv_core::features::{extract_features, FeatureVector, Normalizer, FEATURE_COUNT};
use cfgadv_core::graph::Cfg;
use cfgadv_core::model::Model;
use cfgadv_core::splice::splice;

/// Status codes shared with the C header.
pub const CFGADV_OK: i32 = 0;
pub const CFGADV_ERR_NULL_ARGUMENT: i32 = 1;
pub const CFGADV_ERR_UTF8: i32 = 2;
pub const CFGADV_ERR_PARSE: i32 = 3;
pub const CFGADV_ERR_INVALID_GRAPH: i32 = 4;
pub const CFGADV_ERR_IO: i32 = 5;
pub const CFGADV_ERR_BAD_MODEL: i32 = 6;
pub const CFGADV_ERR_SPLICE: i32 = 7;
pub const CFGADV_ERR_PANIC: i32 = 8;

/// Opaque graph handle.
pub struct CfgadvGraph(Cfg);

/// Opaque classifier handle bundling the model with its normalizer.
pub struct CfgadvClassifier {
    model: Model,
    normalizer: Normalizer,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).unwrap_or_default();
    });
}

/// Message describing the most recent error on this thread. The pointer
/// stays valid until the next failing call on the same thread; do not free
/// it.
#[no_mangle]
pub extern "C" fn cfgadv_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn cfgadv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Number of features in a feature vector (23).
#[no_mangle]
pub extern "C" fn cfgadv_feature_count() -> usize {
    FEATURE_COUNT
}

fn guard<F: FnOnce() -> i32>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_last_error("internal panic");
            CFGADV_ERR_PANIC
        }
    }
}

/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
unsafe fn read_str<'a>(text: *const c_char) -> Result<&'a str, i32> {
    if text.is_null() {
        set_last_error("null string argument");
        return Err(CFGADV_ERR_NULL_ARGUMENT);
    }
    CStr::from_ptr(text).to_str().map_err(|e| {
        set_last_error(format!("invalid UTF-8: {e}"));
        CFGADV_ERR_UTF8
    })
}

/// Parses a graph from the text format into a new handle.
///
/// # Safety
/// `text` must point to a NUL-terminated string and `out` to a writable
/// `CfgadvGraph*` slot; both must stay valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_graph_parse(
    text: *const c_char,
    out: *mut *mut CfgadvGraph,
) -> i32 {
    guard(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return CFGADV_ERR_NULL_ARGUMENT;
        }
        let text = match read_str(text) {
            Ok(t) => t,
            Err(code) => return code,
        };
        match cfgadv_core::graph::parse_cfg(text) {
            Ok(graph) => {
                *out = Box::into_raw(Box::new(CfgadvGraph(graph)));
                CFGADV_OK
            }
            Err(e) => {
                set_last_error(e.to_string());
                CFGADV_ERR_PARSE
            }
        }
    })
}

/// Releases a graph handle. Null is a no-op.
///
/// # Safety
/// `graph` must be a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_graph_free(graph: *mut CfgadvGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_graph_node_count(graph: *const CfgadvGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    (*graph).0.node_count()
}

/// # Safety
/// `graph` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_graph_edge_count(graph: *const CfgadvGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    (*graph).0.edge_count()
}

/// Serializes a graph to the text format. The returned string must be
/// released with `cfgadv_string_free`.
///
/// # Safety
/// `graph` must be a live handle and `out` a writable `char*` slot.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_graph_serialize(
    graph: *const CfgadvGraph,
    out: *mut *mut c_char,
) -> i32 {
    guard(|| {
        if graph.is_null() || out.is_null() {
            set_last_error("null argument");
            return CFGADV_ERR_NULL_ARGUMENT;
        }
        let text = (*graph).0.to_text();
        match CString::new(text) {
            Ok(s) => {
                *out = s.into_raw();
                CFGADV_OK
            }
            Err(_) => {
                set_last_error("serialized text contained NUL");
                CFGADV_ERR_INVALID_GRAPH
            }
        }
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by a `cfgadv_*` function and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Extracts the 23 raw (unnormalized) features of a graph into `out`.
///
/// # Safety
/// `graph` must be a live handle; `out` must point to at least
/// `cfgadv_feature_count()` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_graph_features(
    graph: *const CfgadvGraph,
    out: *mut f64,
) -> i32 {
    guard(|| {
        if graph.is_null() || out.is_null() {
            set_last_error("null argument");
            return CFGADV_ERR_NULL_ARGUMENT;
        }
        let features = extract_features(&(*graph).0);
        std::ptr::copy_nonoverlapping(features.as_slice().as_ptr(), out, FEATURE_COUNT);
        CFGADV_OK
    })
}

/// Splices `target` into `original` (glue entry branching to both entries,
/// all exits rejoined at a glue exit) and returns the combined graph.
///
/// # Safety
/// Both handles must be live; `out` must be a writable `CfgadvGraph*` slot.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_graph_splice(
    original: *const CfgadvGraph,
    target: *const CfgadvGraph,
    out: *mut *mut CfgadvGraph,
) -> i32 {
    guard(|| {
        if original.is_null() || target.is_null() || out.is_null() {
            set_last_error("null argument");
            return CFGADV_ERR_NULL_ARGUMENT;
        }
        match splice(&(*original).0, &(*target).0) {
            Ok(spliced) => {
                *out = Box::into_raw(Box::new(CfgadvGraph(spliced.combined)));
                CFGADV_OK
            }
            Err(e) => {
                set_last_error(e.to_string());
                CFGADV_ERR_SPLICE
            }
        }
    })
}

/// Loads a classifier from a model JSON file and its normalizer JSON file.
///
/// # Safety
/// Both paths must be NUL-terminated strings; `out` must be a writable
/// `CfgadvClassifier*` slot.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_classifier_load(
    model_path: *const c_char,
    normalizer_path: *const c_char,
    out: *mut *mut CfgadvClassifier,
) -> i32 {
    guard(|| {
        if out.is_null() {
            set_last_error("null out pointer");
            return CFGADV_ERR_NULL_ARGUMENT;
        }
        let model_path = match read_str(model_path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        let normalizer_path = match read_str(normalizer_path) {
            Ok(p) => p,
            Err(code) => return code,
        };
        let model_text = match std::fs::read_to_string(model_path) {
            Ok(t) => t,
            Err(e) => {
                set_last_error(format!("{model_path}: {e}"));
                return CFGADV_ERR_IO;
            }
        };
        let normalizer_text = match std::fs::read_to_string(normalizer_path) {
            Ok(t) => t,
            Err(e) => {
                set_last_error(format!("{normalizer_path}: {e}"));
                return CFGADV_ERR_IO;
            }
        };
        let model = match Model::from_json(&model_text) {
            Ok(m) => m,
            Err(e) => {
                set_last_error(e.to_string());
                return CFGADV_ERR_BAD_MODEL;
            }
        };
        let normalizer = match Normalizer::from_json(&normalizer_text) {
            Ok(n) => n,
            Err(e) => {
                set_last_error(e.to_string());
                return CFGADV_ERR_BAD_MODEL;
            }
        };
        *out = Box::into_raw(Box::new(CfgadvClassifier { model, normalizer }));
        CFGADV_OK
    })
}

/// Releases a classifier handle. Null is a no-op.
///
/// # Safety
/// `classifier` must be a pointer returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_classifier_free(classifier: *mut CfgadvClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

/// Classifies a graph: extracts features, normalizes, runs the forward
/// pass. Writes P(benign) and P(malicious).
///
/// # Safety
/// Handles must be live; probability out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_classify_graph(
    classifier: *const CfgadvClassifier,
    graph: *const CfgadvGraph,
    p_benign: *mut f64,
    p_malicious: *mut f64,
) -> i32 {
    guard(|| {
        if classifier.is_null() || graph.is_null() || p_benign.is_null() || p_malicious.is_null()
        {
            set_last_error("null argument");
            return CFGADV_ERR_NULL_ARGUMENT;
        }
        let c = &*classifier;
        let features = extract_features(&(*graph).0);
        let probs = c.model.forward(&c.normalizer.apply(&features));
        *p_benign = probs.benign();
        *p_malicious = probs.malicious();
        CFGADV_OK
    })
}

/// Classifies an already-normalized feature vector of length
/// `cfgadv_feature_count()`.
///
/// # Safety
/// `classifier` must be live; `features` must point to 23 readable doubles;
/// probability out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfgadv_classify_features(
    classifier: *const CfgadvClassifier,
    features: *const f64,
    p_benign: *mut f64,
    p_malicious: *mut f64,
) -> i32 {
    guard(|| {
        if classifier.is_null() || features.is_null() || p_benign.is_null() || p_malicious.is_null()
        {
            set_last_error("null argument");
            return CFGADV_ERR_NULL_ARGUMENT;
        }
        let mut values = [0.0; FEATURE_COUNT];
        std::ptr::copy_nonoverlapping(features, values.as_mut_ptr(), FEATURE_COUNT);
        let probs = (*classifier).model.forward(&FeatureVector(values));
        *p_benign = probs.benign();
        *p_malicious = probs.malicious();
        CFGADV_OK
    })
}
