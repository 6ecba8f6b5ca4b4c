//! C interface to the uniwalk recommender.
//!
//! Every fallible function returns a [`UwStatus`]; on failure the message is
//! available from [`uw_last_error_message`] on the same thread. Models are
//! opaque [`UwModel`] handles released with [`uw_model_free`]. Strings
//! returned by the library are released with [`uw_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use uniwalk::config::RunConfig;
use uniwalk::eval::train_uniwalk;
use uniwalk::recommender::{Explainer, Thresholds};
use uniwalk::trainer::{CoocScope, Hyperparams, TrainMode};
use uniwalk::{Delimiter, EntityKind, Error, TrainedModel};

/// Result of a call. Nonzero values match the exit codes of the command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwStatus {
    Ok = 0,
    /// A panic was caught at the boundary.
    Internal = 1,
    /// Null pointer, invalid UTF-8 or an out-of-range value.
    Argument = 2,
    Io = 3,
    Parse = 4,
    Divergence = 5,
    /// Unknown user or item.
    Lookup = 6,
    /// Unreadable or incompatible model file.
    Format = 7,
}

impl UwStatus {
    fn of(e: &Error) -> Self {
        match e.exit_code() {
            2 => UwStatus::Argument,
            3 => UwStatus::Io,
            4 => UwStatus::Parse,
            5 => UwStatus::Divergence,
            6 => UwStatus::Lookup,
            7 => UwStatus::Format,
            _ => UwStatus::Internal,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwEntityKind {
    User = 0,
    Item = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwCoocScope {
    All = 0,
    Last = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UwTrainMode {
    Reference = 0,
    Performance = 1,
}

/// Training hyperparameters; fill with [`uw_hyperparams_default`] or
/// [`uw_hyperparams_preset`] before changing fields.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UwHyperparams {
    pub c: f64,
    pub walk_length: usize,
    pub window: usize,
    pub alpha: f64,
    pub beta: f64,
    pub dim: usize,
    pub lambda_b: f64,
    pub lambda_z: f64,
    pub eta: f64,
    pub gamma: f64,
    pub walks_per_node: usize,
    pub iterations: usize,
    pub seed: u64,
    pub grad_clip: f64,
    pub clamp_predictions: bool,
    pub patience: usize,
    pub validation_fraction: f64,
    pub cooc_scope: UwCoocScope,
    pub mode: UwTrainMode,
}

impl From<&Hyperparams> for UwHyperparams {
    fn from(h: &Hyperparams) -> Self {
        Self {
            c: h.c,
            walk_length: h.walk_length,
            window: h.window,
            alpha: h.alpha,
            beta: h.beta,
            dim: h.dim,
            lambda_b: h.lambda_b,
            lambda_z: h.lambda_z,
            eta: h.eta,
            gamma: h.gamma,
            walks_per_node: h.walks_per_node,
            iterations: h.iterations,
            seed: h.seed,
            grad_clip: h.grad_clip,
            clamp_predictions: h.clamp_predictions,
            patience: h.patience,
            validation_fraction: h.validation_fraction,
            cooc_scope: match h.cooc_scope {
                CoocScope::All => UwCoocScope::All,
                CoocScope::Last => UwCoocScope::Last,
            },
            mode: match h.mode {
                TrainMode::Reference => UwTrainMode::Reference,
                TrainMode::Performance => UwTrainMode::Performance,
            },
        }
    }
}

impl From<&UwHyperparams> for Hyperparams {
    fn from(h: &UwHyperparams) -> Self {
        Self {
            c: h.c,
            walk_length: h.walk_length,
            window: h.window,
            alpha: h.alpha,
            beta: h.beta,
            dim: h.dim,
            lambda_b: h.lambda_b,
            lambda_z: h.lambda_z,
            eta: h.eta,
            gamma: h.gamma,
            walks_per_node: h.walks_per_node,
            iterations: h.iterations,
            seed: h.seed,
            grad_clip: h.grad_clip,
            clamp_predictions: h.clamp_predictions,
            patience: h.patience,
            validation_fraction: h.validation_fraction,
            cooc_scope: match h.cooc_scope {
                UwCoocScope::All => CoocScope::All,
                UwCoocScope::Last => CoocScope::Last,
            },
            mode: match h.mode {
                UwTrainMode::Reference => TrainMode::Reference,
                UwTrainMode::Performance => TrainMode::Performance,
            },
        }
    }
}

/// A trained model.
pub struct UwModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(UwStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(UwStatus::of(&e), e.to_string())
    }
}

fn arg_failure(msg: impl Into<String>) -> Failure {
    Failure(UwStatus::Argument, msg.into())
}

/// Run `f`, converting errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UwStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| (*s).to_owned())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_owned());
            set_error(format!("internal error: {msg}"));
            UwStatus::Internal
        }
    }
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn text<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(arg_failure(format!("{name} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| arg_failure(format!("{name} is not valid UTF-8")))
}

/// # Safety
/// `m` is null or a handle from this library that has not been freed.
unsafe fn model<'a>(m: *const UwModel) -> Result<&'a TrainedModel, Failure> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| arg_failure("model is null"))
}

fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass null or pointers documented as writable.
    unsafe { p.as_mut() }.ok_or_else(|| arg_failure("out is null"))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(UwStatus::Internal, "string contains a NUL byte".to_owned()))
}

/// Version of the library as a static string.
#[no_mangle]
pub extern "C" fn uw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn uw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Default hyperparameters (the `filmtrust` preset).
///
/// # Safety
/// `out` is null or points to writable memory for one `UwHyperparams`.
#[no_mangle]
pub unsafe extern "C" fn uw_hyperparams_default(out: *mut UwHyperparams) -> UwStatus {
    guard(|| {
        *out_ptr(out)? = UwHyperparams::from(&Hyperparams::default());
        Ok(())
    })
}

/// Hyperparameters of a named preset: `filmtrust`, `epinions` or `flixster`.
///
/// # Safety
/// `name` is a NUL-terminated string; `out` points to writable memory for one `UwHyperparams`.
#[no_mangle]
pub unsafe extern "C" fn uw_hyperparams_preset(name: *const c_char, out: *mut UwHyperparams) -> UwStatus {
    guard(|| {
        let cfg = RunConfig::with_preset(text(name, "name")?)?;
        *out_ptr(out)? = UwHyperparams::from(&cfg.hp);
        Ok(())
    })
}

/// Train a model from a ratings file and an optional trust file.
///
/// `delimiter` is null for whitespace-separated files, or one of
/// `whitespace`, `tab`, `comma` or a single character. `hp` may be null for
/// the defaults. On success `*out` receives a new handle.
///
/// # Safety
/// String arguments are null (where allowed) or NUL-terminated; `hp` is null
/// or points to a `UwHyperparams`; `out` points to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn uw_train(
    ratings_path: *const c_char,
    trust_path: *const c_char,
    delimiter: *const c_char,
    hp: *const UwHyperparams,
    out: *mut *mut UwModel,
) -> UwStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let ratings = text(ratings_path, "ratings_path")?;
        let trust = if trust_path.is_null() { None } else { Some(text(trust_path, "trust_path")?) };
        let delimiter: Delimiter = if delimiter.is_null() {
            Delimiter::Whitespace
        } else {
            text(delimiter, "delimiter")?.parse()?
        };
        let hp = hp.as_ref().map_or_else(Hyperparams::default, Hyperparams::from);
        let (r, s) = uniwalk::cli::read_dataset(Path::new(ratings), trust.map(Path::new), delimiter)?;
        let (inner, _) = train_uniwalk(&r, &s, &hp, 0)?;
        *out = Box::into_raw(Box::new(UwModel { inner }));
        Ok(())
    })
}

/// Load a model file.
///
/// # Safety
/// `path` is NUL-terminated; `out` points to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn uw_model_load(path: *const c_char, out: *mut *mut UwModel) -> UwStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let inner = TrainedModel::load(Path::new(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(UwModel { inner }));
        Ok(())
    })
}

/// Write a model file.
///
/// # Safety
/// `model` is a live handle; `path` is NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn uw_model_save(model: *const UwModel, path: *const c_char) -> UwStatus {
    guard(|| {
        self::model(model)?.save(Path::new(text(path, "path")?))?;
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `model` is null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn uw_model_free(model: *mut UwModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of users or items known to the model; 0 for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uw_model_entity_count(model: *const UwModel, kind: UwEntityKind) -> usize {
    model.as_ref().map_or(0, |m| m.inner.index.count(entity_kind(kind)))
}

/// Latent dimension; 0 for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uw_model_dim(model: *const UwModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.params.dim)
}

fn entity_kind(k: UwEntityKind) -> EntityKind {
    match k {
        UwEntityKind::User => EntityKind::User,
        UwEntityKind::Item => EntityKind::Item,
    }
}

/// Predicted rating of `item` by `user`. Unknown entities fall back toward
/// the global mean rather than failing.
///
/// # Safety
/// `model` is a live handle; `user` and `item` are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn uw_predict(
    model: *const UwModel,
    user: *const c_char,
    item: *const c_char,
    clamp: bool,
    out: *mut f64,
) -> UwStatus {
    guard(|| {
        let m = self::model(model)?;
        let p = uniwalk::predict(m, text(user, "user")?, text(item, "item")?, clamp);
        *out_ptr(out)? = p;
        Ok(())
    })
}

/// Co-occurrence similarity of two entities, in `[0, 1]`.
///
/// # Safety
/// `model` is a live handle; ids are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn uw_similarity(
    model: *const UwModel,
    kind_a: UwEntityKind,
    id_a: *const c_char,
    kind_b: UwEntityKind,
    id_b: *const c_char,
    out: *mut f64,
) -> UwStatus {
    guard(|| {
        let m = self::model(model)?;
        let resolve = |kind: UwEntityKind, id: &str| {
            let kind = entity_kind(kind);
            m.index.get(kind, id).ok_or_else(|| Error::UnknownEntity { kind: kind.as_str(), id: id.to_owned() })
        };
        let a = resolve(kind_a, text(id_a, "id_a")?)?;
        let b = resolve(kind_b, text(id_b, "id_b")?)?;
        *out_ptr(out)? = uniwalk::similarity(&m.cooc, a, b)?;
        Ok(())
    })
}

/// Top-`n` recommendations for `user` with `k` explanations each, as a JSON
/// report. A negative threshold selects the midpoint of the rating scale.
/// `*out` receives a string to release with [`uw_string_free`].
///
/// # Safety
/// `model` is a live handle; `user` is NUL-terminated; `out` points to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn uw_explain_json(
    model: *const UwModel,
    user: *const c_char,
    n: usize,
    k: usize,
    high_threshold: f64,
    low_threshold: f64,
    out: *mut *mut c_char,
) -> UwStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let m = self::model(model)?;
        let user = text(user, "user")?;
        if m.index.user(user).is_none() {
            return Err(Error::UnknownEntity { kind: "user", id: user.to_owned() }.into());
        }
        let mid = Thresholds::midpoint(m.stats.min_r, m.stats.max_r);
        let t = Thresholds {
            high: if high_threshold < 0.0 { mid.high } else { high_threshold },
            low: if low_threshold < 0.0 { mid.low } else { low_threshold },
        };
        let report = Explainer::new(m)?.build_report(user, n, k, t)?;
        *out = into_c_string(report.to_json())?;
        Ok(())
    })
}

/// Release a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` is null or a string from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn uw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
