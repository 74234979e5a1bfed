//! C ABI for the sylrate syllable detector.
//!
//! Every fallible function returns a [`SylrateStatus`]; on failure a
//! human-readable message is kept per thread and can be fetched with
//! [`sylrate_last_error_message`]. Objects cross the boundary as opaque
//! handles that the caller releases with the matching `*_free` function.
//! Panics never unwind into C: they are caught and reported as
//! `SYLRATE_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sylrate::audio::{read_wav, AudioClip};
use sylrate::training::{detect_clip, ParamsFile, PipelineParams};
use sylrate::{DetectionResult, Error, PipelineConfig, WeightVector, NUM_BANDS};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylrateStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument was out of range (wrong weight count, bad sample rate, index past the end, ...).
    InvalidArgument = 2,
    /// A file could not be opened or read.
    Io = 3,
    /// Audio container or encoding not supported.
    Format = 4,
    /// A parameter or configuration file could not be parsed.
    Parse = 5,
    /// Unexpected failure inside the library, including caught panics.
    Internal = 6,
}

/// Trained detector parameters plus the analysis configuration they were trained with.
pub struct SylrateParams {
    inner: ParamsFile,
}

/// Nuclei found in one clip.
pub struct SylrateDetection {
    inner: DetectionResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(err: &Error) -> SylrateStatus {
    match err {
        Error::Utterance { source, .. } => status_of(source),
        Error::Io { .. } => SylrateStatus::Io,
        Error::Format { .. } => SylrateStatus::Format,
        Error::Parse { .. } | Error::Json(_) | Error::Toml(_) => SylrateStatus::Parse,
        Error::Internal(_) => SylrateStatus::Internal,
        _ => SylrateStatus::InvalidArgument,
    }
}

fn fail(status: SylrateStatus, msg: impl Into<String>) -> SylrateStatus {
    set_last_error(msg);
    status
}

/// Runs `f` with panics contained and errors recorded.
fn guarded(f: impl FnOnce() -> Result<(), SylrateStatus>) -> SylrateStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SylrateStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SylrateStatus::Internal, format!("panic: {what}"))
        }
    }
}

fn lift<T>(r: sylrate::Result<T>) -> Result<T, SylrateStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), SylrateStatus> {
    if p.is_null() {
        Err(fail(SylrateStatus::NullPointer, format!("{name} is NULL")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, SylrateStatus> {
    non_null(path, "path")?;
    CStr::from_ptr(path)
        .to_str()
        .map_err(|_| fail(SylrateStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sylrate_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on the calling thread, or NULL if the
/// last call succeeded. The pointer stays valid until the next sylrate call
/// on the same thread.
#[no_mangle]
pub extern "C" fn sylrate_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds parameters from `n_weights` (must be 7) band weights and a
/// prominence threshold, using the default analysis configuration.
///
/// # Safety
/// `weights` must point to `n_weights` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sylrate_params_new(
    weights: *const f64,
    n_weights: usize,
    prominence_threshold: f64,
    out: *mut *mut SylrateParams,
) -> SylrateStatus {
    guarded(|| {
        non_null(out, "out")?;
        non_null(weights, "weights")?;
        if n_weights != NUM_BANDS {
            return Err(fail(
                SylrateStatus::InvalidArgument,
                format!("expected {NUM_BANDS} weights, got {n_weights}"),
            ));
        }
        let mut w = [0.0; NUM_BANDS];
        w.copy_from_slice(std::slice::from_raw_parts(weights, n_weights));
        let params = PipelineParams {
            weights: WeightVector(w),
            prominence_threshold,
        };
        lift(params.validate())?;
        write_out(
            out,
            SylrateParams {
                inner: ParamsFile::new(&params, &PipelineConfig::default()),
            },
        );
        Ok(())
    })
}

/// Loads a parameter file written by `sylrate optimize`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sylrate_params_load(
    path: *const c_char,
    out: *mut *mut SylrateParams,
) -> SylrateStatus {
    guarded(|| {
        non_null(out, "out")?;
        let path = path_arg(path)?;
        let inner = lift(ParamsFile::read(path))?;
        write_out(out, SylrateParams { inner });
        Ok(())
    })
}

/// Copies the seven band weights into `weights_out`.
///
/// # Safety
/// `params` must be a live handle; `weights_out` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn sylrate_params_weights(
    params: *const SylrateParams,
    weights_out: *mut f64,
    n: usize,
) -> SylrateStatus {
    guarded(|| {
        non_null(params, "params")?;
        non_null(weights_out, "weights_out")?;
        if n < NUM_BANDS {
            return Err(fail(
                SylrateStatus::InvalidArgument,
                format!("buffer holds {n} values, need {NUM_BANDS}"),
            ));
        }
        let w = &(*params).inner.weights;
        std::slice::from_raw_parts_mut(weights_out, NUM_BANDS).copy_from_slice(w);
        Ok(())
    })
}

/// Prominence threshold of `params`, or NaN for a NULL handle.
///
/// # Safety
/// `params` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sylrate_params_threshold(params: *const SylrateParams) -> f64 {
    params
        .as_ref()
        .map_or(f64::NAN, |p| p.inner.prominence_threshold)
}

/// # Safety
/// `params` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sylrate_params_free(params: *mut SylrateParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Detects syllable nuclei in `len` mono samples scaled to [-1, 1].
///
/// # Safety
/// `params` must be a live handle, `samples` must point to `len` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sylrate_detect_samples(
    params: *const SylrateParams,
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut SylrateDetection,
) -> SylrateStatus {
    guarded(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        if len > 0 {
            non_null(samples, "samples")?;
        }
        let data = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(samples, len).to_vec()
        };
        let clip = lift(AudioClip::new(data, sample_rate))?;
        detect_into(&*params, &clip, out)
    })
}

/// Reads a 16-bit PCM mono WAV file and detects syllable nuclei in it.
///
/// # Safety
/// `params` must be a live handle, `path` a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sylrate_detect_wav(
    params: *const SylrateParams,
    path: *const c_char,
    out: *mut *mut SylrateDetection,
) -> SylrateStatus {
    guarded(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let path = path_arg(path)?;
        let clip = lift(read_wav(path))?;
        detect_into(&*params, &clip, out)
    })
}

unsafe fn detect_into(
    params: &SylrateParams,
    clip: &AudioClip,
    out: *mut *mut SylrateDetection,
) -> Result<(), SylrateStatus> {
    let p = &params.inner;
    let inner = lift(detect_clip(clip, &p.params(), &p.pipeline_config))?;
    write_out(out, SylrateDetection { inner });
    Ok(())
}

/// Number of detected nuclei; 0 for a NULL handle.
///
/// # Safety
/// `det` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sylrate_detection_count(det: *const SylrateDetection) -> usize {
    det.as_ref().map_or(0, |d| d.inner.count)
}

/// Syllables per second over the whole clip; NaN for a NULL handle.
///
/// # Safety
/// `det` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sylrate_detection_speech_rate(det: *const SylrateDetection) -> f64 {
    det.as_ref().map_or(f64::NAN, |d| d.inner.speech_rate_sps)
}

/// Time (seconds) and prominence of nucleus `index`. Either output pointer may be NULL.
///
/// # Safety
/// `det` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sylrate_detection_nucleus(
    det: *const SylrateDetection,
    index: usize,
    time_s: *mut f64,
    prominence: *mut f64,
) -> SylrateStatus {
    guarded(|| {
        non_null(det, "det")?;
        let nuclei = &(*det).inner.nuclei;
        let peak = nuclei.get(index).ok_or_else(|| {
            fail(
                SylrateStatus::InvalidArgument,
                format!(
                    "nucleus index {index} out of range (count {})",
                    nuclei.len()
                ),
            )
        })?;
        if !time_s.is_null() {
            *time_s = peak.time_s;
        }
        if !prominence.is_null() {
            *prominence = peak.prominence;
        }
        Ok(())
    })
}

/// # Safety
/// `det` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sylrate_detection_free(det: *mut SylrateDetection) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}
