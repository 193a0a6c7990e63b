//! C ABI over the hlab toolkit.
//!
//! Objects are opaque handles created by `*_load` / `*_compute` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`HlabStatus`]; on failure, [`hlab_last_error`] describes the cause for
//! the calling thread. Array outputs use caller buffers: pass the capacity,
//! receive the required length, and get [`HlabStatus::BufferTooSmall`] when
//! the buffer is short.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use hlab::dynamics::{
    aggregate_ensemble, compute_aum, compute_el2n, compute_forgetting, parse_dynamics, DynamicsLog,
    EnsembleHardness, Estimator, ForgettingMode,
};
use hlab::geometry::FeatureSet;
use hlab::pruning::{clp_plan, dlp_plan};
use hlab::resampling::{resampling_targets, weight_function};
use hlab::HlabError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Validation = 5,
    Incompatible = 6,
    Domain = 7,
    Degenerate = 8,
    Undefined = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlabEstimator {
    Aum = 0,
    El2n = 1,
    Forgetting = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlabForgettingMode {
    EventCount = 0,
    NeverLearnedMax = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HlabPruneMode {
    Dlp = 0,
    Clp = 1,
}

/// Parsed HDYN training-dynamics log.
pub struct HlabDynamics(DynamicsLog);

/// Per-sample ensemble hardness.
pub struct HlabHardness(EnsembleHardness);

/// Labelled feature set from an HFEA file.
pub struct HlabFeatures(FeatureSet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &HlabError) -> HlabStatus {
    match e {
        HlabError::Io { .. } => HlabStatus::Io,
        HlabError::Format(_) | HlabError::Corruption(_) | HlabError::Json(_) | HlabError::Csv(_) => {
            HlabStatus::Format
        }
        HlabError::Validation { .. } | HlabError::MissingChannel(_) => HlabStatus::Validation,
        HlabError::Incompatible(_) | HlabError::IndexOutOfRange { .. } => HlabStatus::Incompatible,
        HlabError::Parameter(_) | HlabError::OverScaling { .. } => HlabStatus::InvalidArgument,
        HlabError::Domain(_) => HlabStatus::Domain,
        HlabError::Degenerate(_) | HlabError::DegenerateClass { .. } | HlabError::NoElbow => {
            HlabStatus::Degenerate
        }
        HlabError::Undefined(_) | HlabError::Training { .. } => HlabStatus::Undefined,
    }
}

enum Fail {
    Null(&'static str),
    Small { need: usize },
    Core(HlabError),
}

impl From<HlabError> for Fail {
    fn from(e: HlabError) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HlabStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is NULL"));
            HlabStatus::NullPointer
        }
        Ok(Err(Fail::Small { need })) => {
            set_error(format!("output buffer too small, need {need} elements"));
            HlabStatus::BufferTooSmall
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            HlabStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(HlabError::Parameter("path is not UTF-8".into())))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(v);
    Ok(())
}

/// Copies `src` into `(buf, cap)` and stores `src.len()` in `len_out`.
unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, cap: usize, len_out: *mut usize) -> Result<(), Fail> {
    if !len_out.is_null() {
        len_out.write(src.len());
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(Fail::Null("buffer"));
    }
    if cap < src.len() {
        return Err(Fail::Small { need: src.len() });
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hlab_dynamics_load(path: *const c_char, out: *mut *mut HlabDynamics) -> HlabStatus {
    guard(|| {
        let log = parse_dynamics(path_arg(path)?)?;
        write_out(out, Box::into_raw(Box::new(HlabDynamics(log))), "out")
    })
}

/// # Safety
/// `h` must come from [`hlab_dynamics_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hlab_dynamics_free(h: *mut HlabDynamics) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hlab_dynamics_shape(
    h: *const HlabDynamics,
    n_samples: *mut usize,
    n_epochs: *mut usize,
    channel_flags: *mut u32,
) -> HlabStatus {
    guard(|| {
        let log = &as_ref(h, "dynamics")?.0;
        write_out(n_samples, log.n_samples(), "n_samples")?;
        write_out(n_epochs, log.n_epochs(), "n_epochs")?;
        write_out(channel_flags, log.channel_flags().0, "channel_flags")
    })
}

/// Ensemble hardness over `n_logs` dynamics handles.
///
/// # Safety
/// `logs` must point to `n_logs` live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hlab_hardness_compute(
    logs: *const *const HlabDynamics,
    n_logs: usize,
    estimator: HlabEstimator,
    probe_epoch: usize,
    forgetting_mode: HlabForgettingMode,
    out: *mut *mut HlabHardness,
) -> HlabStatus {
    guard(|| {
        if logs.is_null() {
            return Err(Fail::Null("logs"));
        }
        let mode = match forgetting_mode {
            HlabForgettingMode::EventCount => ForgettingMode::EventCount,
            HlabForgettingMode::NeverLearnedMax => ForgettingMode::NeverLearnedMax,
        };
        let mut per_model = Vec::with_capacity(n_logs);
        for i in 0..n_logs {
            let log = &as_ref(*logs.add(i), "log handle")?.0;
            per_model.push(match estimator {
                HlabEstimator::Aum => compute_aum(log)?,
                HlabEstimator::El2n => compute_el2n(log, probe_epoch)?,
                HlabEstimator::Forgetting => compute_forgetting(log, mode)?,
            });
        }
        let eh = aggregate_ensemble(&per_model)?;
        write_out(out, Box::into_raw(Box::new(HlabHardness(eh))), "out")
    })
}

/// # Safety
/// `h` must be a live handle; `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hlab_hardness_len(h: *const HlabHardness, len: *mut usize) -> HlabStatus {
    guard(|| write_out(len, as_ref(h, "hardness")?.0.values.len(), "len"))
}

/// Copies the per-sample values into `buf` (capacity `cap`).
///
/// # Safety
/// `h` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn hlab_hardness_values(
    h: *const HlabHardness,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> HlabStatus {
    guard(|| copy_out(&as_ref(h, "hardness")?.0.values, buf, cap, len))
}

/// # Safety
/// `h` must come from [`hlab_hardness_compute`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hlab_hardness_free(h: *mut HlabHardness) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hlab_features_load(path: *const c_char, out: *mut *mut HlabFeatures) -> HlabStatus {
    guard(|| {
        let fs = FeatureSet::load(path_arg(path)?)?;
        write_out(out, Box::into_raw(Box::new(HlabFeatures(fs))), "out")
    })
}

/// # Safety
/// `h` must be a live handle; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hlab_features_shape(
    h: *const HlabFeatures,
    n_samples: *mut usize,
    dim: *mut usize,
    k_classes: *mut usize,
) -> HlabStatus {
    guard(|| {
        let fs = &as_ref(h, "features")?.0;
        write_out(n_samples, fs.n_samples(), "n_samples")?;
        write_out(dim, fs.dim(), "dim")?;
        write_out(k_classes, fs.k_classes(), "k_classes")
    })
}

/// # Safety
/// `h` must come from [`hlab_features_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hlab_features_free(h: *mut HlabFeatures) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Resampling target count per class at scaling `alpha`.
///
/// # Safety
/// Handles must be live; `buf` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn hlab_target_counts(
    hardness: *const HlabHardness,
    features: *const HlabFeatures,
    alpha: f64,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> HlabStatus {
    guard(|| {
        let eh = &as_ref(hardness, "hardness")?.0;
        let fs = &as_ref(features, "features")?.0;
        let (_, _, _, counts) = resampling_targets(eh, fs.labels(), fs.k_classes(), alpha)?;
        copy_out(&counts.values, buf, cap, len)
    })
}

/// Oversampling weight `W(x)` for a rank position `x` in `[0, 1]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hlab_weight_function(x: f64, beta: f64, out: *mut f64) -> HlabStatus {
    guard(|| write_out(out, weight_function(x, beta)?, "out"))
}

/// Ascending ids removed by pruning a fraction `rate` of the samples.
///
/// # Safety
/// Handles must be live; `buf` must hold `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn hlab_prune(
    hardness: *const HlabHardness,
    features: *const HlabFeatures,
    mode: HlabPruneMode,
    rate: f64,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> HlabStatus {
    guard(|| {
        let eh = &as_ref(hardness, "hardness")?.0;
        let fs = &as_ref(features, "features")?.0;
        let plan = match mode {
            HlabPruneMode::Dlp => dlp_plan(eh, fs.labels(), rate)?,
            HlabPruneMode::Clp => clp_plan(eh, fs.labels(), fs.k_classes(), rate)?,
        };
        copy_out(&plan.pruned_ids, buf, cap, len)
    })
}

/// Estimator that produced `h`.
///
/// # Safety
/// `h` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hlab_hardness_estimator(h: *const HlabHardness, out: *mut HlabEstimator) -> HlabStatus {
    guard(|| {
        let e = match as_ref(h, "hardness")?.0.estimator {
            Estimator::Aum => HlabEstimator::Aum,
            Estimator::El2n => HlabEstimator::El2n,
            Estimator::Forgetting => HlabEstimator::Forgetting,
        };
        write_out(out, e, "out")
    })
}
