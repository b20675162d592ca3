//! C ABI over the `lightgrating` simulator.
//!
//! Configurations and patterns live behind opaque handles that the caller
//! releases with the matching `_free` function. Every fallible call returns
//! an [`LgStatus`]; on failure [`lg_last_error_message`] describes the
//! cause on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lightgrating::beamline::{ensemble_pattern, DiffractionPattern};
use lightgrating::config::{load_config, parse_config, SimulationConfig};
use lightgrating::grating::{compute_phi, ComplexPhase};
use lightgrating::spectrum::{bessel_j, incoherent_order_intensities};
use lightgrating::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Pattern = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Parsed simulation configuration.
pub struct LgConfig {
    inner: SimulationConfig,
}

/// Detector-plane diffraction pattern.
pub struct LgPattern {
    inner: DiffractionPattern,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LgStatus {
    match err {
        Error::Config { .. } | Error::Domain { .. } => LgStatus::Config,
        Error::Numerical(_) | Error::Aliasing { .. } | Error::Grid(_) => LgStatus::Numerical,
        Error::Io(_) | Error::Data { .. } => LgStatus::Io,
        Error::Pattern(_) => LgStatus::Pattern,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (LgStatus, String)>) -> LgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LgStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LgStatus::Panic
        }
    }
}

fn lib(err: Error) -> (LgStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (LgStatus, String) {
    (LgStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LgStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (LgStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn lg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reference-apparatus configuration.
#[no_mangle]
pub extern "C" fn lg_config_default() -> *mut LgConfig {
    Box::into_raw(Box::new(LgConfig {
        inner: SimulationConfig::default(),
    }))
}

/// Parses TOML configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_config_parse(text: *const c_char, out: *mut *mut LgConfig) -> LgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = parse_config(text_arg(text)?).map_err(lib)?;
        *out = Box::into_raw(Box::new(LgConfig { inner }));
        Ok(())
    })
}

unsafe fn text_arg<'a>(p: *const c_char) -> Result<&'a str, (LgStatus, String)> {
    text(p, "text")
}

/// Reads a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_config_load(path: *const c_char, out: *mut *mut LgConfig) -> LgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = load_config(Path::new(text(path, "path")?)).map_err(lib)?;
        *out = Box::into_raw(Box::new(LgConfig { inner }));
        Ok(())
    })
}

/// Sets the power per beam in watts.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_config_set_power(config: *mut LgConfig, power_w: f64) -> LgStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        let mut next = cfg.inner.clone();
        next.grating.power_w = power_w;
        next.beam().map_err(lib)?;
        cfg.inner = next;
        Ok(())
    })
}

/// Sets the worker thread count; 0 uses all cores.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_config_set_threads(config: *mut LgConfig, threads: usize) -> LgStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.inner.run.threads = threads;
        Ok(())
    })
}

/// SHA-256 hex digest of the configuration. Free with [`lg_string_free`].
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_config_digest(
    config: *const LgConfig,
    out: *mut *mut c_char,
) -> LgStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let digest = cfg.inner.digest().map_err(lib)?;
        *out = CString::new(digest).expect("hex has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_config_free(config: *mut LgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Complex phase at velocity `v` (m/s) on the beam axis.
///
/// # Safety
/// `config` must be a live handle; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_compute_phi(
    config: *const LgConfig,
    v: f64,
    re: *mut f64,
    im: *mut f64,
) -> LgStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        let phi = compute_phi(
            &cfg.inner.species().map_err(lib)?,
            &cfg.inner.beam().map_err(lib)?,
            v,
        )
        .map_err(lib)?;
        *re = phi.re;
        *im = phi.im;
        Ok(())
    })
}

/// Incoherent order intensities for `|m| <= m_max`, written to
/// `out[m + m_max]`; `len` must be at least `2 m_max + 1`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_order_spectrum(
    phi_re: f64,
    phi_im: f64,
    m_max: usize,
    tail_eps: f64,
    out: *mut f64,
    len: usize,
) -> LgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if len < 2 * m_max + 1 {
            return Err((
                LgStatus::BufferTooSmall,
                format!("need {} slots, got {len}", 2 * m_max + 1),
            ));
        }
        if phi_im.is_nan() || phi_im < 0.0 || !phi_re.is_finite() || !phi_im.is_finite() {
            return Err((
                LgStatus::Config,
                format!("invalid phase {phi_re} + {phi_im}i"),
            ));
        }
        let s = incoherent_order_intensities(ComplexPhase::new(phi_re, phi_im), m_max, tail_eps)
            .map_err(lib)?;
        std::slice::from_raw_parts_mut(out, len)[..s.intensities.len()]
            .copy_from_slice(&s.intensities);
        Ok(())
    })
}

/// Bessel function of the first kind, integer order.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_bessel_j(m: u32, x: f64, out: *mut f64) -> LgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = bessel_j(m, x).map_err(lib)?;
        Ok(())
    })
}

/// Runs the ensemble simulation. Free the result with [`lg_pattern_free`].
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_simulate(
    config: *const LgConfig,
    out: *mut *mut LgPattern,
) -> LgStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sim = cfg.inner.resolve().map_err(lib)?;
        let inner = ensemble_pattern(&sim).map_err(lib)?;
        *out = Box::into_raw(Box::new(LgPattern { inner }));
        Ok(())
    })
}

/// Number of detector samples, 0 for a null handle.
///
/// # Safety
/// `pattern` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_pattern_len(pattern: *const LgPattern) -> usize {
    pattern.as_ref().map_or(0, |p| p.inner.positions.len())
}

/// Copies positions (m) and intensities into caller buffers of `len`
/// doubles each. Either buffer may be null to skip it.
///
/// # Safety
/// Non-null buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lg_pattern_copy(
    pattern: *const LgPattern,
    positions: *mut f64,
    intensity: *mut f64,
    len: usize,
) -> LgStatus {
    guard(|| {
        let p = &pattern.as_ref().ok_or_else(|| null("pattern"))?.inner;
        let n = p.positions.len();
        if len < n {
            return Err((
                LgStatus::BufferTooSmall,
                format!("need {n} slots, got {len}"),
            ));
        }
        if !positions.is_null() {
            std::slice::from_raw_parts_mut(positions, n).copy_from_slice(&p.positions);
        }
        if !intensity.is_null() {
            std::slice::from_raw_parts_mut(intensity, n).copy_from_slice(&p.intensity);
        }
        Ok(())
    })
}

/// Probability inside the detector span before normalization, NaN for a
/// null handle.
///
/// # Safety
/// `pattern` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_pattern_captured_probability(pattern: *const LgPattern) -> f64 {
    pattern
        .as_ref()
        .map_or(f64::NAN, |p| p.inner.metadata.captured_probability)
}

/// # Safety
/// `pattern` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_pattern_free(pattern: *mut LgPattern) {
    if !pattern.is_null() {
        drop(Box::from_raw(pattern));
    }
}
