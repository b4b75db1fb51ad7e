//! C ABI for `qprobe`.
//!
//! Every fallible function returns a [`QpStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be copied out with [`qp_last_error_message`]. Interrogation handles are
//! opaque: create them with `qp_interrogation_new` or
//! `qp_interrogation_prepared` and release them with `qp_interrogation_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qprobe::metrology::{self, QfiRoute, TemperatureVariant};
use qprobe::{thermo, Error, GadParams, Interrogation, MeasurementStrengths, ParameterTag};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    InvalidState = 4,
    NonPhysicalState = 5,
    Contract = 6,
    Singular = 7,
    Config = 8,
    OutOfModel = 9,
    Panic = 10,
}

/// Values accepted by `parameter` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpParameter {
    Gamma = 0,
    Temperature = 1,
}

/// Values accepted by `route` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpRoute {
    ClosedForm = 0,
    BlochFiniteDiff = 1,
    SldSpectral = 2,
    /// Closed-form temperature QFI with a single `sech^2` factor.
    ClosedFormAsPrinted = 3,
}

/// Opaque handle to a prepared probe, a channel, and an interrogation time.
pub struct QpInterrogation(Interrogation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> QpStatus {
    match e {
        Error::Domain(_) => QpStatus::Domain,
        Error::InvalidState(_) => QpStatus::InvalidState,
        Error::NonPhysicalState { .. } => QpStatus::NonPhysicalState,
        Error::Contract(_) => QpStatus::Contract,
        Error::Singular(_) => QpStatus::Singular,
        Error::Config(_) => QpStatus::Config,
        Error::OutOfModel(_) => QpStatus::OutOfModel,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> QpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("{name} is NULL"));
            QpStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            QpStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".to_string());
            QpStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut T, name: &'static str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a>(h: *const QpInterrogation) -> Result<&'a Interrogation, Failure> {
    h.as_ref().map(|h| &h.0).ok_or(Failure::Null("handle"))
}

fn parameter_tag(raw: u32) -> Result<ParameterTag, Failure> {
    match raw {
        0 => Ok(ParameterTag::DecayRate),
        1 => Ok(ParameterTag::Temperature),
        _ => Err(Failure::Arg(format!("unknown parameter {raw}"))),
    }
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL,
/// or 0 if no error has been recorded.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// NUL-terminated crate version; static storage.
#[no_mangle]
pub extern "C" fn qp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Prepared polarization `R_z(p, q)` of a thermal probe at `y0`.
///
/// # Safety
/// `out` must be NULL or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn qp_prepare_rz(p: f64, q: f64, y0: f64, out: *mut f64) -> QpStatus {
    guard(|| {
        let ms = MeasurementStrengths::new(p, q)?;
        let rz = qprobe::preparation::prepare_probe(ms, y0)?.rz();
        write_out(out, "out", rz)
    })
}

unsafe fn store(it: Interrogation, out: *mut *mut QpInterrogation) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    out.write(Box::into_raw(Box::new(QpInterrogation(it))));
    Ok(())
}

/// Diagonal probe with polarization `rz` sent through the channel for `t`.
///
/// # Safety
/// `out` must be NULL or valid for a write. The handle written there must be
/// released with `qp_interrogation_free`.
#[no_mangle]
pub unsafe extern "C" fn qp_interrogation_new(
    rz: f64,
    gamma: f64,
    y_eq: f64,
    omega: f64,
    t: f64,
    out: *mut *mut QpInterrogation,
) -> QpStatus {
    guard(|| {
        let gp = GadParams::new(gamma, y_eq, omega)?;
        store(Interrogation::with_polarization(rz, gp, t)?, out)
    })
}

/// Probe prepared from a thermal state at `y0` by measurement strengths
/// `(p, q)`, then sent through the channel for `t`.
///
/// # Safety
/// As for `qp_interrogation_new`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn qp_interrogation_prepared(
    p: f64,
    q: f64,
    y0: f64,
    gamma: f64,
    y_eq: f64,
    omega: f64,
    t: f64,
    out: *mut *mut QpInterrogation,
) -> QpStatus {
    guard(|| {
        let gp = GadParams::new(gamma, y_eq, omega)?;
        let ms = MeasurementStrengths::new(p, q)?;
        store(Interrogation::prepared(ms, y0, gp, t)?, out)
    })
}

/// # Safety
/// `h` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn qp_interrogation_free(h: *mut QpInterrogation) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Evolved Bloch vector `(x, y, z)` written to `out[0..3]`.
///
/// # Safety
/// `h` must be a live handle; `out` must be NULL or point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn qp_evolved_bloch(h: *const QpInterrogation, out: *mut f64) -> QpStatus {
    guard(|| {
        let r = handle(h)?.evolved().bloch();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        for (k, v) in r.iter().enumerate() {
            out.add(k).write(*v);
        }
        Ok(())
    })
}

/// Quantum Fisher information for `parameter` (a `QpParameter`) by `route`
/// (a `QpRoute`).
///
/// # Safety
/// `h` must be a live handle; `out` must be NULL or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn qp_qfi(
    h: *const QpInterrogation,
    parameter: u32,
    route: u32,
    out: *mut f64,
) -> QpStatus {
    guard(|| {
        let it = handle(h)?;
        let tag = parameter_tag(parameter)?;
        let value = match route {
            0 => metrology::qfi(it, tag, QfiRoute::ClosedForm)?.qfi,
            1 => metrology::qfi(it, tag, QfiRoute::BlochFiniteDiff)?.qfi,
            2 => metrology::qfi(it, tag, QfiRoute::SldSpectral)?.qfi,
            3 if tag == ParameterTag::Temperature => {
                metrology::qfi_temperature_closed(it, TemperatureVariant::AsPrinted)?
            }
            3 => {
                return Err(Failure::Arg(
                    "the as-printed form exists only for the temperature".into(),
                ))
            }
            _ => return Err(Failure::Arg(format!("unknown route {route}"))),
        };
        write_out(out, "out", value)
    })
}

/// Classical Fisher information of a `sigma_z` readout.
///
/// # Safety
/// As for `qp_qfi`.
#[no_mangle]
pub unsafe extern "C" fn qp_cfi_sigma_z(
    h: *const QpInterrogation,
    parameter: u32,
    out: *mut f64,
) -> QpStatus {
    guard(|| {
        let v = metrology::cfi_sigma_z(handle(h)?, parameter_tag(parameter)?)?;
        write_out(out, "out", v)
    })
}

/// Energy change of the probe over the interrogation.
///
/// # Safety
/// As for `qp_qfi`.
#[no_mangle]
pub unsafe extern "C" fn qp_energy_change(h: *const QpInterrogation, out: *mut f64) -> QpStatus {
    guard(|| write_out(out, "out", thermo::energy_change(handle(h)?)))
}

/// Derivative of the energy change with respect to `parameter`.
///
/// # Safety
/// As for `qp_qfi`.
#[no_mangle]
pub unsafe extern "C" fn qp_susceptibility(
    h: *const QpInterrogation,
    parameter: u32,
    out: *mut f64,
) -> QpStatus {
    guard(|| {
        let v = thermo::susceptibility(handle(h)?, parameter_tag(parameter)?)?;
        write_out(out, "out", v)
    })
}

/// Variance of the probe Hamiltonian in the evolved state.
///
/// # Safety
/// As for `qp_qfi`.
#[no_mangle]
pub unsafe extern "C" fn qp_hamiltonian_variance(
    h: *const QpInterrogation,
    out: *mut f64,
) -> QpStatus {
    guard(|| {
        let it = handle(h)?;
        write_out(
            out,
            "out",
            thermo::hamiltonian_variance(&it.evolved(), it.channel.omega()),
        )
    })
}
