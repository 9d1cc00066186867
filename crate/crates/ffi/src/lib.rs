//! C ABI for `embml`.
//!
//! Scenarios and data batches are opaque handles created and freed through
//! this interface. Every fallible call returns an [`EmbmlStatus`]; on failure
//! [`embml_last_error`] describes the most recent error on the calling
//! thread. Complex arrays are interleaved `re, im` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use embml::detectors::{sample_covariance, AdaptiveProducts, ClairvoyantProjection};
use embml::em::{em_statistics, run_em};
use embml::linalg::{ComplexVector, HermitianMatrix};
use embml::scenario::{build_covariance, inject_target, sample_batch, steering_vector, DataBatch};
use embml::{DetectorId, Error, Harness, ScenarioConfig};
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbmlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotPositiveDefinite = 4,
    InsufficientData = 5,
    InsufficientTrials = 6,
    Io = 7,
    Format = 8,
    Parse = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbmlDetector {
    Glrt = 0,
    Amf = 1,
    Rao = 2,
    Ace = 3,
    Benchmark = 4,
    /// EM-BML-D; the iteration count is passed separately.
    EmBmlD = 5,
}

/// Homogeneous Gaussian scene: covariance, steering vector and seed.
pub struct EmbmlScenario {
    cfg: ScenarioConfig,
    m: HermitianMatrix,
    v: ComplexVector,
}

/// One CUT plus its secondary snapshots.
pub struct EmbmlBatch {
    batch: DataBatch,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EmbmlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotPositiveDefinite { .. } => EmbmlStatus::NotPositiveDefinite,
            Error::DimensionMismatch { .. } => EmbmlStatus::DimensionMismatch,
            Error::InsufficientSecondaryData { .. } | Error::InsufficientData(_) => {
                EmbmlStatus::InsufficientData
            }
            Error::InsufficientTrials { .. } => EmbmlStatus::InsufficientTrials,
            Error::DegenerateDirection | Error::Validation { .. } => EmbmlStatus::InvalidArgument,
            Error::Parse { .. } => EmbmlStatus::Parse,
            Error::Format(_) => EmbmlStatus::Format,
            Error::Io(_) => EmbmlStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EmbmlStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(EmbmlStatus::InvalidArgument, message.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EmbmlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmbmlStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            EmbmlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn complex_slice(
    data: *const f64,
    count: usize,
    what: &str,
) -> Result<Vec<Complex64>, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    let raw = std::slice::from_raw_parts(data, 2 * count);
    let values: Vec<Complex64> = raw
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect();
    if values
        .iter()
        .any(|x| !(x.re.is_finite() && x.im.is_finite()))
    {
        return Err(invalid(format!("{what} contains non-finite values")));
    }
    Ok(values)
}

fn detector_id(detector: EmbmlDetector, l_max: u32) -> Result<DetectorId, Failure> {
    Ok(match detector {
        EmbmlDetector::Glrt => DetectorId::Glrt,
        EmbmlDetector::Amf => DetectorId::Amf,
        EmbmlDetector::Rao => DetectorId::Rao,
        EmbmlDetector::Ace => DetectorId::Ace,
        EmbmlDetector::Benchmark => DetectorId::Benchmark,
        EmbmlDetector::EmBmlD if l_max == 0 => return Err(invalid("EM-BML-D needs l_max >= 1")),
        EmbmlDetector::EmBmlD => DetectorId::EmBml { l_max },
    })
}

fn adaptive_statistic(
    batch: &DataBatch,
    v: &ComplexVector,
    id: DetectorId,
) -> Result<f64, Failure> {
    let s = sample_covariance(batch)?;
    let p = AdaptiveProducts::new(batch, v, &s)?;
    Ok(match id {
        DetectorId::Glrt => p.glrt(),
        DetectorId::Amf => p.amf(),
        DetectorId::Rao => p.rao(),
        DetectorId::Ace => p.ace(),
        DetectorId::EmBml { l_max } => em_statistics(batch, v, &s, &[l_max])?[0],
        DetectorId::Benchmark => return Err(invalid("the benchmark needs a scenario")),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn embml_version() -> *const c_char {
    static VERSION: &CStr =
        match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
            Ok(s) => s,
            Err(_) => panic!("version string"),
        };
    VERSION.as_ptr()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn embml_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a scene with `n` channels, `k` secondary snapshots, one-lag
/// clutter correlation `rho`, clutter-to-noise ratio `cnr_db` (unit noise
/// power), steering Doppler `doppler_norm` and master seed `seed`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn embml_scenario_new(
    n: usize,
    k: usize,
    rho: f64,
    cnr_db: f64,
    doppler_norm: f64,
    seed: u64,
    out: *mut *mut EmbmlScenario,
) -> EmbmlStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let cfg = ScenarioConfig {
            n,
            k,
            rho,
            cnr_db,
            doppler_norm,
            master_seed: seed,
            ..ScenarioConfig::default()
        };
        cfg.validate()?;
        let m = build_covariance(&cfg);
        m.cholesky()?;
        let v = steering_vector(n, doppler_norm);
        *out = Box::into_raw(Box::new(EmbmlScenario { cfg, m, v }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a handle from [`embml_scenario_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn embml_scenario_free(scenario: *mut EmbmlScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Draws target-free trial `trial` of the scene's evaluation stream.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for one handle.
#[no_mangle]
pub unsafe extern "C" fn embml_scenario_sample(
    scenario: *const EmbmlScenario,
    trial: u64,
    out: *mut *mut EmbmlBatch,
) -> EmbmlStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        let out = deref_mut(out, "out")?;
        let batch = sample_batch(&sc.cfg, &sc.m, trial)?;
        *out = Box::into_raw(Box::new(EmbmlBatch { batch }));
        Ok(())
    })
}

/// Adds a target along the scene's steering vector to the CUT of `batch`,
/// at `scnr_db` relative to the scene's covariance and amplitude phase
/// `phase` (radians).
///
/// # Safety
/// `scenario` and `batch` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn embml_scenario_inject(
    scenario: *const EmbmlScenario,
    batch: *mut EmbmlBatch,
    scnr_db: f64,
    phase: f64,
) -> EmbmlStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        let b = deref_mut(batch, "batch")?;
        if b.batch.n() != sc.cfg.n {
            return Err(Error::DimensionMismatch {
                expected: sc.cfg.n,
                actual: b.batch.n(),
            }
            .into());
        }
        b.batch = inject_target(&b.batch, &sc.v, &sc.m, scnr_db, phase)?;
        Ok(())
    })
}

/// Statistic of `detector` on `batch` with the scene's steering vector.
/// For the benchmark this is the clairvoyant matched filter
/// `Re(v†M⁻¹z) / √(v†M⁻¹v)` for a zero-phase target. `l_max` is only read
/// for EM-BML-D.
///
/// # Safety
/// `scenario` and `batch` must be live handles and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn embml_scenario_statistic(
    scenario: *const EmbmlScenario,
    batch: *const EmbmlBatch,
    detector: EmbmlDetector,
    l_max: u32,
    out: *mut f64,
) -> EmbmlStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        let b = deref(batch, "batch")?;
        let out = deref_mut(out, "out")?;
        let id = detector_id(detector, l_max)?;
        *out = match id {
            DetectorId::Benchmark => {
                ClairvoyantProjection::new(&b.batch, &sc.v, &sc.m)?.phase_matched(0.0)
            }
            _ => adaptive_statistic(&b.batch, &sc.v, id)?,
        };
        Ok(())
    })
}

/// Threshold at false-alarm probability `pfa` from `trials` null trials of
/// the scene's calibration stream, using `workers` threads (0 = all cores).
/// Needs `trials >= 100 / pfa`.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn embml_scenario_calibrate(
    scenario: *const EmbmlScenario,
    detector: EmbmlDetector,
    l_max: u32,
    pfa: f64,
    trials: usize,
    workers: usize,
    out: *mut f64,
) -> EmbmlStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        let out = deref_mut(out, "out")?;
        if !(pfa > 0.0 && pfa < 0.5) {
            return Err(invalid("pfa must lie in (0, 0.5)"));
        }
        let id = detector_id(detector, l_max)?;
        let cal = Harness::new(workers)?.calibrate(&sc.cfg, &[id], &[pfa], trials)?;
        *out = cal.threshold(id, pfa)?;
        Ok(())
    })
}

/// Builds a batch from `n * (k + 1)` interleaved complex samples: the CUT
/// first, then the `k` secondary snapshots, each `n` long.
///
/// # Safety
/// `data` must point to `2 * n * (k + 1)` readable doubles and `out` be
/// valid for one handle.
#[no_mangle]
pub unsafe extern "C" fn embml_batch_new(
    n: usize,
    k: usize,
    data: *const f64,
    out: *mut *mut EmbmlBatch,
) -> EmbmlStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        let count = n
            .checked_mul(k + 1)
            .ok_or_else(|| invalid("batch size overflows"))?;
        let values = complex_slice(data, count, "data")?;
        let mut chunks = values
            .chunks_exact(n)
            .map(|c| ComplexVector::new(c.to_vec()));
        let cut = chunks.next().expect("n > 0");
        let batch = DataBatch::new(cut, chunks.collect())?;
        *out = Box::into_raw(Box::new(EmbmlBatch { batch }));
        Ok(())
    })
}

/// # Safety
/// `batch` must be NULL or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn embml_batch_free(batch: *mut EmbmlBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// # Safety
/// `batch` must be a live handle; `n` and `k` valid for one `size_t` each.
#[no_mangle]
pub unsafe extern "C" fn embml_batch_dims(
    batch: *const EmbmlBatch,
    n: *mut usize,
    k: *mut usize,
) -> EmbmlStatus {
    guard(|| {
        let b = deref(batch, "batch")?;
        *deref_mut(n, "n")? = b.batch.n();
        *deref_mut(k, "k")? = b.batch.k();
        Ok(())
    })
}

/// Adaptive statistic of `detector` with a caller-supplied steering vector
/// of `n` interleaved complex entries. The benchmark is not available here.
///
/// # Safety
/// `batch` must be a live handle, `steering` point to `2 * n` doubles and
/// `out` be valid for one double.
#[no_mangle]
pub unsafe extern "C" fn embml_batch_statistic(
    batch: *const EmbmlBatch,
    steering: *const f64,
    n: usize,
    detector: EmbmlDetector,
    l_max: u32,
    out: *mut f64,
) -> EmbmlStatus {
    guard(|| {
        let b = deref(batch, "batch")?;
        let out = deref_mut(out, "out")?;
        let v = ComplexVector::new(complex_slice(steering, n, "steering")?);
        if n != b.batch.n() {
            return Err(Error::DimensionMismatch {
                expected: b.batch.n(),
                actual: n,
            }
            .into());
        }
        *out = adaptive_statistic(&b.batch, &v, detector_id(detector, l_max)?)?;
        Ok(())
    })
}

/// Runs `l_max` EM iterations. Writes the final log posterior ratio to
/// `statistic` and, when `delta_l` is not NULL, the convergence metric of
/// iterations `1..=l_max` to `delta_l[0..l_max]`.
///
/// # Safety
/// `batch` must be a live handle, `steering` point to `2 * n` doubles,
/// `statistic` be valid for one double and `delta_l` be NULL or valid for
/// `l_max` doubles.
#[no_mangle]
pub unsafe extern "C" fn embml_run_em(
    batch: *const EmbmlBatch,
    steering: *const f64,
    n: usize,
    l_max: u32,
    statistic: *mut f64,
    delta_l: *mut f64,
) -> EmbmlStatus {
    guard(|| {
        let b = deref(batch, "batch")?;
        let statistic = deref_mut(statistic, "statistic")?;
        if l_max == 0 {
            return Err(invalid("l_max must be at least 1"));
        }
        let v = ComplexVector::new(complex_slice(steering, n, "steering")?);
        let trace = run_em(&b.batch, &v, l_max)?;
        *statistic = trace.final_state().log_post_ratio;
        if !delta_l.is_null() {
            std::slice::from_raw_parts_mut(delta_l, l_max as usize).copy_from_slice(&trace.delta_l);
        }
        Ok(())
    })
}
