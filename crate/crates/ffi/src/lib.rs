//! C ABI over `photon_moments`.
//!
//! Objects are opaque heap handles created by `pm_*_new`-style constructors
//! and released with the matching `pm_*_free`. Every fallible call returns a
//! [`PmStatus`]; on failure a description is available from
//! [`pm_last_error_message`] on the same thread. Output arrays are caller
//! allocated, with their capacity passed alongside.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use photon_moments::detection::{apply_loss, klyshko_efficiency, tmd_estimate_g, TmdConfig, TwinBeamConfig};
use photon_moments::displaced::{exact_statistics, g_eff, g_ideal, mean_eff};
use photon_moments::fock::{displace_statistics, factorial_moments, make_coherent, make_fock, make_heralded_pdc};
use photon_moments::inference::{reliable_range, truncation_bound};
use photon_moments::moments::{mgf_from_statistics, normalize_moments, reconstruct_all};
use photon_moments::{DisplacedStateModel, Error, NormalizedMoments, PhotonStatistics};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside its domain, or malformed input.
    InvalidArgument = 2,
    InvalidStatistics = 3,
    /// A photon number exceeds the truncation.
    Truncation = 4,
    ZeroMean = 5,
    UndefinedEstimator = 6,
    NoHeralds = 7,
    /// The output buffer is shorter than required.
    BufferTooSmall = 8,
    Panic = 9,
}

/// Photon-number distribution.
pub struct PmStatistics {
    inner: PhotonStatistics,
}

/// Displaced-photon model with partial mode overlap.
pub struct PmModel {
    inner: DisplacedStateModel,
}

/// Result of a Klyshko calibration run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PmKlyshko {
    pub efficiency: f64,
    pub std_error: f64,
    pub heralds: u64,
    pub coincidences: u64,
    pub accidentals: u64,
    pub low_statistics: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(PmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidStatistics(_) => PmStatus::InvalidStatistics,
            Error::Truncation { .. } => PmStatus::Truncation,
            Error::ZeroMean => PmStatus::ZeroMean,
            Error::UndefinedEstimator(_) => PmStatus::UndefinedEstimator,
            Error::NoHeralds => PmStatus::NoHeralds,
            _ => PmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(PmStatus::NullPointer, format!("`{name}` is null"))
}

fn guard<F>(f: F) -> PmStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (PmStatus::Ok, String::new()),
        Ok(Err(Failure(status, message))) => (status, message),
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            (PmStatus::Panic, message)
        }
    };
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
    status
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn fill(buf: *mut f64, cap: usize, values: &[f64]) -> Result<(), Failure> {
    if cap < values.len() {
        return Err(Failure(
            PmStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} required", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

unsafe fn emit_statistics(out: *mut *mut PmStatistics, inner: PhotonStatistics) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(PmStatistics { inner })));
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn pm_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Statistics from `len` probabilities summing to one.
///
/// # Safety
/// `probs` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_new(probs: *const f64, len: usize, out: *mut *mut PmStatistics) -> PmStatus {
    guard(|| {
        let probs = slice(probs, len, "probs")?.to_vec();
        emit_statistics(out, PhotonStatistics::new(probs)?)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_fock(n: usize, n_max: usize, out: *mut *mut PmStatistics) -> PmStatus {
    guard(|| emit_statistics(out, make_fock(n, n_max)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_coherent(mean: f64, n_max: usize, out: *mut *mut PmStatistics) -> PmStatus {
    guard(|| emit_statistics(out, make_coherent(mean, n_max)?))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_heralded_pdc(
    squeeze: f64,
    herald_efficiency: f64,
    n_max: usize,
    out: *mut *mut PmStatistics,
) -> PmStatus {
    guard(|| emit_statistics(out, make_heralded_pdc(squeeze, herald_efficiency, n_max)?))
}

/// # Safety
/// `stats` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_free(stats: *mut PmStatistics) {
    if !stats.is_null() {
        drop(Box::from_raw(stats));
    }
}

/// Number of stored probabilities (n_max + 1), or 0 for a null handle.
///
/// # Safety
/// `stats` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_len(stats: *const PmStatistics) -> usize {
    stats.as_ref().map_or(0, |s| s.inner.probs().len())
}

/// # Safety
/// `stats` must be a valid handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_probs(stats: *const PmStatistics, buf: *mut f64, cap: usize) -> PmStatus {
    guard(|| fill(buf, cap, borrow(stats, "stats")?.inner.probs()))
}

/// # Safety
/// `stats` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_mean(stats: *const PmStatistics, out: *mut f64) -> PmStatus {
    guard(|| write(out, borrow(stats, "stats")?.inner.mean(), "out"))
}

/// Probability mass lost to truncation.
///
/// # Safety
/// `stats` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_statistics_truncation_deficit(stats: *const PmStatistics, out: *mut f64) -> PmStatus {
    guard(|| write(out, borrow(stats, "stats")?.inner.truncation_deficit(), "out"))
}

/// Binomial loss with transmission `eta`; returns a new handle.
///
/// # Safety
/// `stats` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_apply_loss(stats: *const PmStatistics, eta: f64, out: *mut *mut PmStatistics) -> PmStatus {
    guard(|| emit_statistics(out, apply_loss(&borrow(stats, "stats")?.inner, eta)?))
}

/// Coherent displacement by a real amplitude of squared modulus `disp_sq`,
/// truncated at `n_out`.
///
/// # Safety
/// `stats` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_displace(
    stats: *const PmStatistics,
    disp_sq: f64,
    n_out: usize,
    out: *mut *mut PmStatistics,
) -> PmStatus {
    guard(|| {
        let s = borrow(stats, "stats")?;
        if !(disp_sq.is_finite() && disp_sq >= 0.0) {
            return Err(Failure(
                PmStatus::InvalidArgument,
                format!("disp_sq = {disp_sq} must be >= 0"),
            ));
        }
        emit_statistics(out, displace_statistics(&s.inner, disp_sq.sqrt(), n_out)?)
    })
}

/// Factorial moments for m = 0..=m_max into `buf` (m_max + 1 values).
///
/// # Safety
/// `stats` must be a valid handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_factorial_moments(
    stats: *const PmStatistics,
    m_max: usize,
    buf: *mut f64,
    cap: usize,
) -> PmStatus {
    guard(|| {
        let raw = factorial_moments(&borrow(stats, "stats")?.inner, m_max)?;
        let values: Vec<f64> = (0..=m_max).map(|m| raw.get(m)).collect();
        fill(buf, cap, &values)
    })
}

/// Mean and g^(2)..g^(m_max) (m_max - 1 values into `g`).
///
/// # Safety
/// `stats` must be a valid handle; `mean` writable; `g` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn pm_normalized_moments(
    stats: *const PmStatistics,
    m_max: usize,
    mean: *mut f64,
    g: *mut f64,
    cap: usize,
) -> PmStatus {
    guard(|| {
        let norm = normalize_moments(&factorial_moments(&borrow(stats, "stats")?.inner, m_max)?)?;
        write(mean, norm.mean(), "mean")?;
        fill(g, cap, norm.values())
    })
}

/// Moment generating function sum_n rho(n) (1 - mu)^n for mu in [0, 2].
///
/// # Safety
/// `stats` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_mgf(stats: *const PmStatistics, mu: f64, out: *mut f64) -> PmStatus {
    guard(|| write(out, mgf_from_statistics(&borrow(stats, "stats")?.inner, mu)?, "out"))
}

/// Photon statistics rho(0..=m_max) from the mean and `g_len` normalized
/// moments g^(2)..; moments above m_max = g_len + 1 count as zero. Writes
/// g_len + 2 values and whether all of them lie in [0, 1].
///
/// # Safety
/// `g` must hold `g_len` doubles, `probs` `cap` doubles; `physical` writable.
#[no_mangle]
pub unsafe extern "C" fn pm_reconstruct(
    mean: f64,
    g: *const f64,
    g_len: usize,
    probs: *mut f64,
    cap: usize,
    physical: *mut bool,
) -> PmStatus {
    guard(|| {
        let moments = NormalizedMoments::new(mean, slice(g, g_len, "g")?.to_vec())?;
        let rec = reconstruct_all(&moments);
        fill(probs, cap, &rec.probs)?;
        write(physical, rec.is_physical(), "physical")
    })
}

/// g^(m) of an ideal displaced single photon at displacement `disp_sq`.
#[no_mangle]
pub extern "C" fn pm_g_ideal(m: usize, disp_sq: f64) -> f64 {
    g_ideal(m, disp_sq)
}

/// # Safety
/// `source` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_model_new(
    source: *const PmStatistics,
    overlap: f64,
    disp_sq: f64,
    out: *mut *mut PmModel,
) -> PmStatus {
    guard(|| {
        let inner = DisplacedStateModel::new(borrow(source, "source")?.inner.clone(), overlap, disp_sq)?;
        write(out, Box::into_raw(Box::new(PmModel { inner })), "out")
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pm_model_free(model: *mut PmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_model_g_eff(model: *const PmModel, m: usize, out: *mut f64) -> PmStatus {
    guard(|| write(out, g_eff(&borrow(model, "model")?.inner, m)?, "out"))
}

/// # Safety
/// `model` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_model_mean_eff(model: *const PmModel, out: *mut f64) -> PmStatus {
    guard(|| write(out, mean_eff(&borrow(model, "model")?.inner), "out"))
}

/// # Safety
/// `model` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_model_exact_statistics(model: *const PmModel, out: *mut *mut PmStatistics) -> PmStatus {
    guard(|| emit_statistics(out, exact_statistics(&borrow(model, "model")?.inner)?))
}

/// Mean photon number bounding the order-`m_max` reconstruction of the
/// model, and whether the scan hit its ceiling instead.
///
/// # Safety
/// `model` must be a valid handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_reliable_range(
    model: *const PmModel,
    m_max: usize,
    mean: *mut f64,
    reached_ceiling: *mut bool,
) -> PmStatus {
    guard(|| {
        let r = reliable_range(&borrow(model, "model")?.inner, m_max)?;
        write(mean, r.mean, "mean")?;
        write(reached_ceiling, r.reached_ceiling, "reached_ceiling")
    })
}

/// g3 / g4, with `unbounded` set (and an infinite bound) when g4 = 0.
///
/// # Safety
/// Outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_truncation_bound(g3: f64, g4: f64, bound: *mut f64, unbounded: *mut bool) -> PmStatus {
    guard(|| {
        let b = truncation_bound(g3, g4)?;
        write(bound, b.bound, "bound")?;
        write(unbounded, b.unbounded, "unbounded")
    })
}

/// Coincidence estimate of g^(m) for a uniform `bins`-bin detector with
/// per-photon efficiency `eta` and per-bin dark-click probability.
///
/// # Safety
/// `stats` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_tmd_estimate_g(
    stats: *const PmStatistics,
    bins: usize,
    eta: f64,
    dark_count: f64,
    m: usize,
    out: *mut f64,
) -> PmStatus {
    guard(|| {
        let cfg = TmdConfig::uniform(bins, eta)?.with_dark_count(dark_count)?;
        write(out, tmd_estimate_g(&borrow(stats, "stats")?.inner, &cfg, m)?, "out")
    })
}

/// Seeded Klyshko calibration on a simulated twin-beam run.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_klyshko(
    squeeze: f64,
    eta_signal: f64,
    eta_herald: f64,
    trials: u64,
    seed: u64,
    out: *mut PmKlyshko,
) -> PmStatus {
    guard(|| {
        let est = klyshko_efficiency(&TwinBeamConfig {
            squeeze,
            eta_signal,
            eta_herald,
            trials,
            seed,
        })?;
        write(
            out,
            PmKlyshko {
                efficiency: est.efficiency,
                std_error: est.stderr,
                heralds: est.heralds,
                coincidences: est.coincidences,
                accidentals: est.accidentals,
                low_statistics: est.low_statistics,
            },
            "out",
        )
    })
}
