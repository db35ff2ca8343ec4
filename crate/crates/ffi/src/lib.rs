//! C ABI over the slatbp engine.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`SlatStatus`]; on failure [`slat_last_error`] describes what went wrong
//! on the calling thread. Arrays are caller-owned and passed with lengths.
//! Nothing here is thread-safe per handle: use one engine from one thread at a time.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use slatbp::engine::{Range, SlotInput};
use slatbp::{CellMap, Error, Mode, Models, Pmf, Position3};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidCell = 3,
    InvalidModel = 4,
    InvalidInput = 5,
    BeliefCollapse = 6,
    Parse = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlatMode {
    Slat = 0,
    Tracking = 1,
    Localization = 2,
}

impl From<SlatMode> for Mode {
    fn from(m: SlatMode) -> Self {
        match m {
            SlatMode::Slat => Mode::Slat,
            SlatMode::Tracking => Mode::TrackingOnly,
            SlatMode::Localization => Mode::LocalizationOnly,
        }
    }
}

/// A cell map.
pub struct SlatMap {
    inner: Arc<CellMap>,
}

/// An engine with its beliefs.
pub struct SlatEngine {
    inner: slatbp::SlatEngine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SlatStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidCell { .. } => SlatStatus::InvalidCell,
            Error::InvalidMap(_) | Error::InvalidModel(_) | Error::InvalidConfig(_) => SlatStatus::InvalidModel,
            Error::InvalidInput(_) => SlatStatus::InvalidInput,
            Error::InvalidArgument(_) => SlatStatus::InvalidArgument,
            Error::BeliefCollapse { .. } => SlatStatus::BeliefCollapse,
            Error::Json { .. } | Error::Parse { .. } => SlatStatus::Parse,
            Error::Io { .. } => SlatStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: SlatStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SlatStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SlatStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SlatStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SlatStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SlatStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SlatStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(SlatStatus::NullPointer, format!("{name} is null")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(SlatStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(SlatStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn copy_into(src: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(SlatStatus::NullPointer, "output buffer is null"));
    }
    if len < src.len() {
        return Err(fail(
            SlatStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    Ok(())
}

fn write_position(p: Position3, out: *mut f64) -> Result<(), Failure> {
    copy_into(&p.to_array(), out, 3)
}

/// Message describing the last failed call on this thread, or null. The
/// pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn slat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn slat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a cell map from its JSON text. `default_extent` applies to records
/// without an extent; pass a negative value for none.
#[no_mangle]
pub unsafe extern "C" fn slat_map_from_json(
    json: *const c_char,
    default_extent: f64,
    out: *mut *mut SlatMap,
) -> SlatStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let extent = (default_extent >= 0.0).then_some(default_extent);
        let map = CellMap::from_json_str(text, extent)?;
        write_out(out, SlatMap { inner: Arc::new(map) })
    })
}

/// Builds a map from `n_cells` centers (`3 * n_cells` doubles, x y z per cell)
/// with the same extent in every dimension.
#[no_mangle]
pub unsafe extern "C" fn slat_map_from_centers(
    centers: *const f64,
    n_cells: usize,
    extent: f64,
    out: *mut *mut SlatMap,
) -> SlatStatus {
    guard(|| {
        let xyz = slice_arg(centers, n_cells.saturating_mul(3), "centers")?;
        let pts = xyz.chunks_exact(3).map(|c| Position3::new(c[0], c[1], c[2])).collect();
        let map = CellMap::with_uniform_extent(pts, extent)?;
        write_out(out, SlatMap { inner: Arc::new(map) })
    })
}

/// Number of cells, or 0 for a null map.
#[no_mangle]
pub unsafe extern "C" fn slat_map_num_cells(map: *const SlatMap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.len())
}

/// Cell size D, or NaN for a null map.
#[no_mangle]
pub unsafe extern "C" fn slat_map_quantization(map: *const SlatMap) -> f64 {
    map.as_ref().map_or(f64::NAN, |m| m.inner.quantization())
}

#[no_mangle]
pub unsafe extern "C" fn slat_map_free(map: *mut SlatMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Creates an engine.
///
/// `models_json` is `{"imu": {...}, "ranging": {...}}`. `target_prior` has
/// one weight per cell; `sensor_priors` holds `n_sensors` such rows back to
/// back. The map may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn slat_engine_new(
    map: *const SlatMap,
    models_json: *const c_char,
    target_prior: *const f64,
    sensor_priors: *const f64,
    n_sensors: usize,
    mode: SlatMode,
    epsilon_m: f64,
    k: usize,
    out: *mut *mut SlatEngine,
) -> SlatStatus {
    guard(|| {
        let map = ref_arg(map, "map")?;
        let n = map.inner.len();
        let models: Models = serde_json::from_str(str_arg(models_json, "models_json")?)
            .map_err(|e| fail(SlatStatus::Parse, format!("models: {e}")))?;
        models.imu.validate()?;
        models.ranging.validate()?;
        let target = Pmf::new(slice_arg(target_prior, n, "target_prior")?.to_vec())?;
        let rows = slice_arg(sensor_priors, n.saturating_mul(n_sensors), "sensor_priors")?;
        let sensors = rows.chunks_exact(n.max(1)).take(n_sensors).map(|r| Pmf::new(r.to_vec())).collect::<Result<Vec<_>, _>>()?;
        let engine = slatbp::SlatEngine::new(map.inner.clone(), models, target, sensors, mode.into(), epsilon_m, k)?;
        write_out(out, SlatEngine { inner: engine })
    })
}

#[no_mangle]
pub unsafe extern "C" fn slat_engine_free(engine: *mut SlatEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Advances one slot. `velocity` is 3 doubles or null when the IMU did not
/// report; `sensors[i]` measured distance `distances[i]` for `i < n_ranges`.
/// `work` (may be null) receives the number of summed terms. On failure the
/// engine is unchanged.
#[no_mangle]
pub unsafe extern "C" fn slat_engine_step(
    engine: *mut SlatEngine,
    velocity: *const f64,
    sensors: *const usize,
    distances: *const f64,
    n_ranges: usize,
    work: *mut u64,
) -> SlatStatus {
    guard(|| {
        let e = mut_arg(engine, "engine")?;
        let velocity = if velocity.is_null() {
            None
        } else {
            let v = slice_arg(velocity, 3, "velocity")?;
            Some([v[0], v[1], v[2]])
        };
        let ids = slice_arg(sensors, n_ranges, "sensors")?;
        let ds = slice_arg(distances, n_ranges, "distances")?;
        let ranges = ids.iter().zip(ds).map(|(&sensor, &d)| Range { sensor, d }).collect();
        let report = e.inner.step(&SlotInput { t: e.inner.t() + 1, velocity, ranges })?;
        if let Some(w) = work.as_mut() {
            *w = report.work;
        }
        Ok(())
    })
}

/// Advances one slot from a JSON object `{"velocity": [..] | null, "ranges": [{"sensor", "d"}]}`.
#[no_mangle]
pub unsafe extern "C" fn slat_engine_step_json(engine: *mut SlatEngine, slot_json: *const c_char) -> SlatStatus {
    guard(|| {
        let e = mut_arg(engine, "engine")?;
        let slot = SlotInput::from_json_line(str_arg(slot_json, "slot_json")?)?;
        e.inner.step(&slot)?;
        Ok(())
    })
}

/// Slots processed so far, or 0 for a null engine.
#[no_mangle]
pub unsafe extern "C" fn slat_engine_time(engine: *const SlatEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.inner.t())
}

#[no_mangle]
pub unsafe extern "C" fn slat_engine_num_cells(engine: *const SlatEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.inner.map().len())
}

#[no_mangle]
pub unsafe extern "C" fn slat_engine_num_sensors(engine: *const SlatEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.inner.num_sensors())
}

/// Summed work over all steps, or 0 for a null engine.
#[no_mangle]
pub unsafe extern "C" fn slat_engine_total_work(engine: *const SlatEngine) -> u64 {
    engine.as_ref().map_or(0, |e| e.inner.total_work())
}

/// Copies the normalized target belief into `out` (at least one slot per cell).
#[no_mangle]
pub unsafe extern "C" fn slat_engine_target_belief(engine: *const SlatEngine, out: *mut f64, len: usize) -> SlatStatus {
    guard(|| copy_into(ref_arg(engine, "engine")?.inner.target_belief().weights(), out, len))
}

/// Copies the normalized belief of sensor `n` into `out`.
#[no_mangle]
pub unsafe extern "C" fn slat_engine_sensor_belief(
    engine: *const SlatEngine,
    n: usize,
    out: *mut f64,
    len: usize,
) -> SlatStatus {
    guard(|| copy_into(ref_arg(engine, "engine")?.inner.sensor_belief(n)?.weights(), out, len))
}

/// Writes the kNN target position estimate (3 doubles) to `out`.
#[no_mangle]
pub unsafe extern "C" fn slat_engine_target_estimate(engine: *const SlatEngine, out: *mut f64) -> SlatStatus {
    guard(|| write_position(ref_arg(engine, "engine")?.inner.target_estimate(), out))
}

/// Writes the kNN position estimate of sensor `n` (3 doubles) to `out`.
#[no_mangle]
pub unsafe extern "C" fn slat_engine_sensor_estimate(engine: *const SlatEngine, n: usize, out: *mut f64) -> SlatStatus {
    guard(|| write_position(ref_arg(engine, "engine")?.inner.sensor_estimate(n)?, out))
}

/// All beliefs as JSON `{"t", "target", "sensors"}`. Release with [`slat_string_free`].
#[no_mangle]
pub unsafe extern "C" fn slat_engine_snapshot_json(engine: *const SlatEngine, out: *mut *mut c_char) -> SlatStatus {
    guard(|| {
        let e = ref_arg(engine, "engine")?;
        if out.is_null() {
            return Err(fail(SlatStatus::NullPointer, "output pointer is null"));
        }
        let json = serde_json::to_string(&e.inner.snapshot()).expect("snapshot serializes");
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn slat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
