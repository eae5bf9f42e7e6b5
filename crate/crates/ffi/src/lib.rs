//! C ABI over the cloudcast toolkit.
//!
//! Sequences and forecasts are opaque handles created and released through
//! this interface. Every fallible call returns a [`CcStatus`]; on failure
//! [`cc_last_error_message`] describes the problem for the calling thread.
//! Timestamps cross the boundary as Unix seconds (UTC).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use cloudcast::grids::{self, LabelGrid, LabelSequence, Taxonomy};
use cloudcast::nowcast::{self, ForecastSet, TvL1Params};
use cloudcast::segmentation::PixelThresholds;
use cloudcast::verify::{self, FieldKind, FlowKind, SyntheticSpec};
use cloudcast::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcStatus {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    Shape = 3,
    InvalidLabel = 4,
    Timestamps = 5,
    InsufficientFrames = 6,
    Format = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Label sequence handle.
pub struct CcSequence(LabelSequence);

/// Forecast handle: up to 16 predicted frames from one origin.
pub struct CcForecast(ForecastSet);

/// Flow solver settings; see [`cc_tvl1_default_params`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcTvL1Params {
    pub tau: f64,
    pub lambda: f64,
    pub theta: f64,
    pub nscales: usize,
    pub scale_step: f64,
    pub warps: usize,
    pub epsilon: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub gamma: f64,
    pub median_filter_radius: usize,
}

impl From<TvL1Params> for CcTvL1Params {
    fn from(p: TvL1Params) -> Self {
        CcTvL1Params {
            tau: p.tau,
            lambda: p.lambda,
            theta: p.theta,
            nscales: p.nscales,
            scale_step: p.scale_step,
            warps: p.warps,
            epsilon: p.epsilon,
            inner_iterations: p.inner_iterations,
            outer_iterations: p.outer_iterations,
            gamma: p.gamma,
            median_filter_radius: p.median_filter_radius,
        }
    }
}

impl From<CcTvL1Params> for TvL1Params {
    fn from(p: CcTvL1Params) -> Self {
        TvL1Params {
            tau: p.tau,
            lambda: p.lambda,
            theta: p.theta,
            nscales: p.nscales,
            scale_step: p.scale_step,
            warps: p.warps,
            epsilon: p.epsilon,
            inner_iterations: p.inner_iterations,
            outer_iterations: p.outer_iterations,
            gamma: p.gamma,
            median_filter_radius: p.median_filter_radius,
        }
    }
}

/// Cloud-top height thresholds (K), coldest first.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CcThresholds {
    pub very_high: f64,
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

pub const CC_MAX_CLASSES: usize = 11;
pub const CC_MAX_STEPS: usize = 16;

/// Scores of one forecast. Undefined entries (a class never observed, no
/// skill reference) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcMetrics {
    pub mean_accuracy: f64,
    pub classes: usize,
    pub per_class_accuracy: [f64; CC_MAX_CLASSES],
    pub steps: usize,
    pub per_step_accuracy: [f64; CC_MAX_STEPS],
    pub frequency_bias: f64,
    pub brier_score: f64,
    pub brier_skill_score: f64,
    pub ssim: f64,
    pub psnr: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcField {
    BandlimitedNoise = 0,
    GaussianBlobs = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let s = CString::new(bytes).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

struct Failure(CcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::Png(_) => CcStatus::Io,
            Error::Npy(_) | Error::Json { .. } => CcStatus::Format,
            Error::Shape(_) => CcStatus::Shape,
            Error::InvalidLabel { .. } => CcStatus::InvalidLabel,
            Error::Timestamps(_) => CcStatus::Timestamps,
            Error::InsufficientFrames { .. } => CcStatus::InsufficientFrames,
            _ => CcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CcStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> CcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            CcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            CcStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    // SAFETY: callers pass either NULL or a pointer obtained from this library
    // (or a valid caller-owned value) that outlives the call.
    unsafe { p.as_ref() }.ok_or_else(|| Failure(CcStatus::NullPointer, format!("{what} is NULL")))
}

fn out_ptr<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    // SAFETY: as in `non_null`, for a writable location.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(CcStatus::NullPointer, format!("{what} is NULL")))
}

fn path_arg(p: *const c_char, what: &str) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(Failure(CcStatus::NullPointer, format!("{what} is NULL")));
    }
    // SAFETY: non-null, NUL-terminated by contract.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn unix_to_utc(secs: i64) -> FfiResult<DateTime<Utc>> {
    DateTime::from_timestamp(secs, 0).ok_or_else(|| invalid(format!("timestamp {secs} out of range")))
}

fn copy_labels(frames: &[LabelGrid], out: *mut u8, len: usize) -> FfiResult<()> {
    let needed: usize = frames.iter().map(LabelGrid::len).sum();
    if out.is_null() {
        return Err(Failure(CcStatus::NullPointer, "output buffer is NULL".into()));
    }
    if len < needed {
        return Err(invalid(format!("buffer holds {len} labels, {needed} needed")));
    }
    // SAFETY: the caller guarantees `out` points to `len` writable bytes.
    let dst = unsafe { std::slice::from_raw_parts_mut(out, needed) };
    for (chunk, f) in dst.chunks_mut(frames[0].len()).zip(frames) {
        chunk.copy_from_slice(f.labels());
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a `T x H x W` label array and its timestamp sidecar.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_load(
    npy_path: *const c_char,
    sidecar_path: *const c_char,
    out: *mut *mut CcSequence,
) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let seq = grids::load_sequence(path_arg(npy_path, "npy_path")?, path_arg(sidecar_path, "sidecar_path")?, Taxonomy::Reduced4)?;
        *out = Box::into_raw(Box::new(CcSequence(seq)));
        Ok(())
    })
}

/// Builds a sequence from `frames * height * width` row-major labels and one
/// Unix timestamp per frame. `full_taxonomy` selects the 11-class codes.
///
/// # Safety
/// `labels` and `timestamps` must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_from_labels(
    frames: usize,
    height: usize,
    width: usize,
    labels: *const u8,
    timestamps: *const i64,
    full_taxonomy: bool,
    out: *mut *mut CcSequence,
) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if labels.is_null() || timestamps.is_null() {
            return Err(Failure(CcStatus::NullPointer, "labels or timestamps is NULL".into()));
        }
        let n = frames
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| invalid("array size overflows"))?;
        // SAFETY: sizes promised by the caller.
        let labels = unsafe { std::slice::from_raw_parts(labels, n) };
        let stamps = unsafe { std::slice::from_raw_parts(timestamps, frames) }
            .iter()
            .map(|&s| unix_to_utc(s))
            .collect::<FfiResult<Vec<_>>>()?;
        let taxonomy = if full_taxonomy { Taxonomy::Full11 } else { Taxonomy::Reduced4 };
        let seq = LabelSequence::from_raw(height, width, labels, taxonomy, &stamps)?;
        *out = Box::into_raw(Box::new(CcSequence(seq)));
        Ok(())
    })
}

/// Releases a sequence; NULL is ignored.
///
/// # Safety
/// `seq` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_free(seq: *mut CcSequence) {
    if !seq.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(seq) });
    }
}

/// # Safety
/// `seq` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_dims(
    seq: *const CcSequence,
    frames: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> CcStatus {
    guard(|| {
        let s = &non_null(seq, "seq")?.0;
        *out_ptr(frames, "frames")? = s.len();
        *out_ptr(height, "height")? = s.height();
        *out_ptr(width, "width")? = s.width();
        Ok(())
    })
}

/// Number of classes in the sequence's taxonomy (4 or 11).
///
/// # Safety
/// `seq` must be a live handle; `classes` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_classes(seq: *const CcSequence, classes: *mut usize) -> CcStatus {
    guard(|| {
        *out_ptr(classes, "classes")? = non_null(seq, "seq")?.0.taxonomy().cardinality();
        Ok(())
    })
}

/// Copies all labels (frame-major, row-major) into `out`.
///
/// # Safety
/// `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_labels(seq: *const CcSequence, out: *mut u8, len: usize) -> CcStatus {
    guard(|| copy_labels(non_null(seq, "seq")?.0.frames(), out, len))
}

/// Copies the frame timestamps (Unix seconds) into `out`.
///
/// # Safety
/// `out` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_timestamps(seq: *const CcSequence, out: *mut i64, len: usize) -> CcStatus {
    guard(|| {
        let s = &non_null(seq, "seq")?.0;
        if out.is_null() {
            return Err(Failure(CcStatus::NullPointer, "out is NULL".into()));
        }
        if len < s.len() {
            return Err(invalid(format!("buffer holds {len} timestamps, {} needed", s.len())));
        }
        // SAFETY: length checked above, writability promised by the caller.
        let dst = unsafe { std::slice::from_raw_parts_mut(out, s.len()) };
        for (d, f) in dst.iter_mut().zip(s.frames()) {
            *d = f.timestamp().timestamp();
        }
        Ok(())
    })
}

/// # Safety
/// `seq` must be a live handle; paths NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_save(
    seq: *const CcSequence,
    npy_path: *const c_char,
    sidecar_path: *const c_char,
) -> CcStatus {
    guard(|| {
        let s = &non_null(seq, "seq")?.0;
        grids::save_sequence(s, path_arg(npy_path, "npy_path")?, path_arg(sidecar_path, "sidecar_path")?)?;
        Ok(())
    })
}

/// Maps an 11-class sequence onto the 4-class taxonomy.
///
/// # Safety
/// `seq` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_sequence_reduce(seq: *const CcSequence, out: *mut *mut CcSequence) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let reduced = cloudcast::segmentation::reduce_sequence(&non_null(seq, "seq")?.0)?;
        *out = Box::into_raw(Box::new(CcSequence(reduced)));
        Ok(())
    })
}

/// Synthetic 4-class scene translated by (vx, vy) px per frame, starting at
/// 2017-01-01 00:00 UTC. The true flow is uniform (vx, vy).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_synthetic_translation(
    field: CcField,
    height: usize,
    width: usize,
    frames: usize,
    vx: f64,
    vy: f64,
    seed: u64,
    out: *mut *mut CcSequence,
) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec = SyntheticSpec {
            field: match field {
                CcField::BandlimitedNoise => FieldKind::BandlimitedNoise,
                CcField::GaussianBlobs => FieldKind::GaussianBlobs,
            },
            flow: FlowKind::Translation { vx, vy },
            height,
            width,
            frames,
            seed,
            ..SyntheticSpec::default()
        };
        let (seq, _) = verify::generate_synthetic(&spec)?;
        *out = Box::into_raw(Box::new(CcSequence(seq)));
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_tvl1_default_params(out: *mut CcTvL1Params) -> CcStatus {
    guard(|| {
        *out_ptr(out, "out")? = TvL1Params::default().into();
        Ok(())
    })
}

fn origin_frames(seq: &LabelSequence, origin: usize) -> FfiResult<&LabelGrid> {
    seq.frames()
        .get(origin)
        .ok_or_else(|| invalid(format!("origin {origin} outside a {}-frame sequence", seq.len())))
}

/// Flow extrapolation from frames `origin - 1` and `origin`. `params` may be
/// NULL for the defaults.
///
/// # Safety
/// `seq` must be a live handle; `params` NULL or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_forecast_tvl1(
    seq: *const CcSequence,
    origin: usize,
    params: *const CcTvL1Params,
    steps: usize,
    out: *mut *mut CcForecast,
) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let s = &non_null(seq, "seq")?.0;
        if origin == 0 {
            return Err(invalid("flow extrapolation needs a frame before the origin"));
        }
        let params: TvL1Params = if params.is_null() {
            TvL1Params::default()
        } else {
            (*non_null(params, "params")?).into()
        };
        let last = origin_frames(s, origin)?;
        let f = nowcast::invert_and_extrapolate(last, &s.frames()[origin - 1], &params, steps)?;
        *out = Box::into_raw(Box::new(CcForecast(f)));
        Ok(())
    })
}

/// Repeats frame `origin` for `steps` frames.
///
/// # Safety
/// `seq` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_forecast_persistence(
    seq: *const CcSequence,
    origin: usize,
    steps: usize,
    out: *mut *mut CcForecast,
) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let s = &non_null(seq, "seq")?.0;
        let f = nowcast::persistence_forecast(origin_frames(s, origin)?, steps)?;
        *out = Box::into_raw(Box::new(CcForecast(f)));
        Ok(())
    })
}

/// Releases a forecast; NULL is ignored.
///
/// # Safety
/// `forecast` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cc_forecast_free(forecast: *mut CcForecast) {
    if !forecast.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(forecast) });
    }
}

/// # Safety
/// `forecast` must be a live handle; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn cc_forecast_dims(
    forecast: *const CcForecast,
    steps: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> CcStatus {
    guard(|| {
        let f = &non_null(forecast, "forecast")?.0;
        let (h, w) = f.dims();
        *out_ptr(steps, "steps")? = f.steps();
        *out_ptr(height, "height")? = h;
        *out_ptr(width, "width")? = w;
        Ok(())
    })
}

/// # Safety
/// `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cc_forecast_labels(forecast: *const CcForecast, out: *mut u8, len: usize) -> CcStatus {
    guard(|| copy_labels(non_null(forecast, "forecast")?.0.frames(), out, len))
}

/// # Safety
/// `forecast` must be a live handle; paths NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cc_forecast_save(
    forecast: *const CcForecast,
    npy_path: *const c_char,
    sidecar_path: *const c_char,
) -> CcStatus {
    guard(|| {
        let f = &non_null(forecast, "forecast")?.0;
        f.save(path_arg(npy_path, "npy_path")?, path_arg(sidecar_path, "sidecar_path")?)?;
        Ok(())
    })
}

fn truth_for(f: &ForecastSet, observed: &LabelSequence) -> FfiResult<Vec<LabelGrid>> {
    f.frames()
        .iter()
        .map(|p| {
            observed
                .position(p.timestamp())
                .map(|i| observed.frames()[i].clone())
                .ok_or_else(|| {
                    Failure(
                        CcStatus::Timestamps,
                        format!("{} is not observed", grids::format_timestamp(&p.timestamp())),
                    )
                })
        })
        .collect()
}

/// Scores `forecast` against the frames of `observed` at the same times.
/// `reference` (may be NULL) enables the Brier skill score.
///
/// # Safety
/// Handles must be live (or NULL for `reference`); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cc_evaluate(
    forecast: *const CcForecast,
    observed: *const CcSequence,
    reference: *const CcForecast,
    out: *mut CcMetrics,
) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let f = &non_null(forecast, "forecast")?.0;
        let obs = &non_null(observed, "observed")?.0;
        let reference = if reference.is_null() {
            None
        } else {
            Some(&non_null(reference, "reference")?.0)
        };
        let truth = truth_for(f, obs)?;
        let r = verify::evaluate(f, &truth, reference)?;
        let mut m = CcMetrics {
            mean_accuracy: r.mean_accuracy,
            classes: r.per_class_accuracy.len(),
            per_class_accuracy: [f64::NAN; CC_MAX_CLASSES],
            steps: r.per_step_accuracy.len(),
            per_step_accuracy: [f64::NAN; CC_MAX_STEPS],
            frequency_bias: r.frequency_bias,
            brier_score: r.brier_score,
            brier_skill_score: r.brier_skill_score.unwrap_or(f64::NAN),
            ssim: r.ssim,
            psnr: r.psnr,
        };
        for (d, s) in m.per_class_accuracy.iter_mut().zip(&r.per_class_accuracy) {
            *d = s.unwrap_or(f64::NAN);
        }
        m.per_step_accuracy[..r.per_step_accuracy.len()].copy_from_slice(&r.per_step_accuracy);
        *out = m;
        Ok(())
    })
}

/// Height thresholds from 500/700/850 hPa and tropopause temperatures (K).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_height_thresholds(
    t500: f64,
    t700: f64,
    t850: f64,
    t_tropo: f64,
    out: *mut CcThresholds,
) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if ![t500, t700, t850, t_tropo].iter().all(|v| v.is_finite()) {
            return Err(invalid("temperatures must be finite"));
        }
        let p = PixelThresholds::from_temperatures(t500, t700, t850, t_tropo);
        *out = CcThresholds {
            very_high: p.vh,
            high: p.hi,
            medium: p.me,
            low: p.lo,
        };
        Ok(())
    })
}

/// `1 - model / reference`; fails when the reference score is not positive.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cc_brier_skill_score(bs_model: f64, bs_reference: f64, out: *mut f64) -> CcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = verify::brier_skill_score(bs_model, bs_reference)
            .ok_or_else(|| invalid("skill is undefined for a non-positive reference score"))?;
        Ok(())
    })
}
