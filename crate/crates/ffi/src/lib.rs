//! C ABI for loading tcner models and running them.
//!
//! Every fallible function returns a [`TcnerStatus`]. On failure a message
//! is kept per thread and can be read with [`tcner_last_error`]. Strings
//! returned through out-pointers are owned by the caller and must be
//! released with [`tcner_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tcner::metrics;
use tcner::ner::NerModel;
use tcner::truecaser::{self, TruecaserModel};
use tcner::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcnerStatus {
    Ok = 0,
    NullArg = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Format = 5,
    Input = 6,
    Alignment = 7,
    Config = 8,
    Numeric = 9,
    Internal = 10,
    Panic = 11,
}

/// Opaque truecaser handle.
pub struct TcnerTruecaser(TruecaserModel);

/// Opaque tagger handle.
pub struct TcnerNerModel(NerModel);

/// Precision, recall and F1 as fractions in [0, 1], plus raw counts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TcnerScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TcnerStatus {
    match e {
        Error::Io { .. } => TcnerStatus::Io,
        Error::Parse { .. } => TcnerStatus::Parse,
        Error::Format(_) => TcnerStatus::Format,
        Error::Input(_) | Error::Shape(_) => TcnerStatus::Input,
        Error::Alignment(_) => TcnerStatus::Alignment,
        Error::Config(_) => TcnerStatus::Config,
        Error::Numeric(_) => TcnerStatus::Numeric,
        Error::Usage(_) => TcnerStatus::Internal,
    }
}

enum Failure {
    Status(TcnerStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TcnerStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TcnerStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TcnerStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Status(TcnerStatus::NullArg, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::Status(TcnerStatus::InvalidUtf8, format!("{name}: {e}")))
}

fn null_arg(name: &str) -> Failure {
    Failure::Status(TcnerStatus::NullArg, format!("{name} is null"))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tcner_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tcner_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a truecaser model file into `*out`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcner_truecaser_load(path: *const c_char, out: *mut *mut TcnerTruecaser) -> TcnerStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let path = str_arg(path, "path")?;
        let model = TruecaserModel::load(path)?;
        *out = Box::into_raw(Box::new(TcnerTruecaser(model)));
        Ok(())
    })
}

/// Restores case in `text`; the result is written to `*out`.
///
/// # Safety
/// `model` must come from [`tcner_truecaser_load`]; `text` must be a
/// nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcner_truecaser_apply(
    model: *const TcnerTruecaser,
    text: *const c_char,
    out: *mut *mut c_char,
) -> TcnerStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null_arg("model"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let text = str_arg(text, "text")?;
        *out = to_c_string(truecaser::apply_truecaser(&model.0, text)?);
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`tcner_truecaser_load`] and not have been freed.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tcner_truecaser_free(model: *mut TcnerTruecaser) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Loads a tagger model file into `*out`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcner_ner_load(path: *const c_char, out: *mut *mut TcnerNerModel) -> TcnerStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let path = str_arg(path, "path")?;
        let model = NerModel::load(path)?;
        *out = Box::into_raw(Box::new(TcnerNerModel(model)));
        Ok(())
    })
}

/// Tags a space-separated sentence. `*out` receives one tag per token,
/// separated by single spaces.
///
/// # Safety
/// `model` must come from [`tcner_ner_load`]; `sentence` must be a
/// nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tcner_ner_tag(
    model: *const TcnerNerModel,
    sentence: *const c_char,
    out: *mut *mut c_char,
) -> TcnerStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null_arg("model"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let tokens: Vec<&str> = str_arg(sentence, "sentence")?.split_whitespace().collect();
        let tags = model.0.predict_tags(&tokens)?;
        *out = to_c_string(tags.join(" "));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`tcner_ner_load`] and not have been freed. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn tcner_ner_free(model: *mut TcnerNerModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Character-level truecasing score of `pred` against `gold`, both given
/// as newline-separated lines.
///
/// # Safety
/// `gold` and `pred` must be nul-terminated strings and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn tcner_char_f1(gold: *const c_char, pred: *const c_char, out: *mut TcnerScore) -> TcnerStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let gold: Vec<&str> = str_arg(gold, "gold")?.lines().collect();
        let pred: Vec<&str> = str_arg(pred, "pred")?.lines().collect();
        let s = metrics::char_f1(&gold, &pred)?;
        *out = TcnerScore {
            precision: s.precision(),
            recall: s.recall(),
            f1: s.f1(),
            tp: s.tp,
            fp: s.fp,
            fn_: s.fn_,
        };
        Ok(())
    })
}
