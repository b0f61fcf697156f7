//! C ABI for the conversion engine.
//!
//! Parameters live behind an opaque [`MmocScheme`] handle. Every fallible
//! call returns an [`MmocStatus`]; on failure the message is available from
//! [`mmoc_last_error_message`] on the same thread. Panics are caught at the
//! boundary and reported as [`MmocStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mmoc_core::conversion::{assemble_m, efficiency_report, flux_bookkeeping, propagate_exact};
use mmoc_core::liouvillian::{steady_state_from, SignalPair};
use mmoc_core::params::{rb87_preset, SchemeParams};
use mmoc_core::perturbation::{closed_form_coefficients, first_order_chi};
use mmoc_core::{Error, C64};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MmocComplex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for MmocComplex {
    fn from(z: C64) -> Self {
        MmocComplex { re: z.re, im: z.im }
    }
}

impl From<MmocComplex> for C64 {
    fn from(z: MmocComplex) -> Self {
        C64::new(z.re, z.im)
    }
}

/// First-order susceptibilities in units of 1/γ.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MmocSusceptibilities {
    pub chi43_m: MmocComplex,
    pub chi43_l: MmocComplex,
    pub chi61_m: MmocComplex,
    pub chi61_l: MmocComplex,
}

/// Beam-splitter coefficients and the efficiency at complete conversion.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MmocCoefficients {
    pub alpha: MmocComplex,
    pub epsilon: f64,
    pub epsilon_gamma: f64,
    /// π/(2ε), in l_abs.
    pub d_c: f64,
    pub f: f64,
    pub f_max: f64,
    pub d_c_max: f64,
}

/// Opaque parameter set.
pub struct MmocScheme {
    params: SchemeParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> MmocStatus {
    match err {
        Error::InvalidParameter { .. } => MmocStatus::InvalidArgument,
        _ => MmocStatus::Numerical,
    }
}

/// Run `f` with panics and errors mapped to a status.
fn guard(f: impl FnOnce() -> Result<(), (MmocStatus, String)>) -> MmocStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MmocStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MmocStatus::Panic
        }
    }
}

fn core<T>(r: mmoc_core::Result<T>) -> Result<T, (MmocStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MmocStatus, String) {
    (MmocStatus::NullPointer, format!("{what} is null"))
}

unsafe fn scheme<'a>(h: *const MmocScheme) -> Result<&'a SchemeParams, (MmocStatus, String)> {
    h.as_ref().map(|s| &s.params).ok_or_else(|| null("scheme"))
}

/// Rb preset parameters. Release with [`mmoc_scheme_free`].
#[no_mangle]
pub extern "C" fn mmoc_scheme_new_rb87() -> *mut MmocScheme {
    Box::into_raw(Box::new(MmocScheme {
        params: rb87_preset().0,
    }))
}

/// # Safety
/// `h` must come from [`mmoc_scheme_new_rb87`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mmoc_scheme_free(h: *mut MmocScheme) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Set a real parameter by name: `omega_p`, `omega_r`, `omega_c`, `omega_a`
/// (real Rabi frequency), `delta_3` to `delta_6`, `gamma`, `gamma_rydberg`,
/// `b_squared`, `eta_l`, `level4_branching`. The set is validated and left
/// unchanged on error.
///
/// # Safety
/// `h` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mmoc_scheme_set(h: *mut MmocScheme, name: *const c_char, value: f64) -> MmocStatus {
    set_field(h, name, C64::new(value, 0.0), false)
}

/// Set a complex Rabi frequency (`omega_p`, `omega_r`, `omega_c`, `omega_a`).
///
/// # Safety
/// As [`mmoc_scheme_set`].
#[no_mangle]
pub unsafe extern "C" fn mmoc_scheme_set_complex(
    h: *mut MmocScheme,
    name: *const c_char,
    value: MmocComplex,
) -> MmocStatus {
    set_field(h, name, value.into(), true)
}

unsafe fn set_field(h: *mut MmocScheme, name: *const c_char, value: C64, complex: bool) -> MmocStatus {
    guard(|| {
        let s = h.as_mut().ok_or_else(|| null("scheme"))?;
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_string_lossy();
        let mut p = s.params;
        let bad = |msg: &str| (MmocStatus::InvalidArgument, format!("{name}: {msg}"));
        match name.as_ref() {
            "omega_p" => p.omega_p = value,
            "omega_r" => p.omega_r = value,
            "omega_c" => p.omega_c = value,
            "omega_a" => p.omega_a = value,
            _ if complex => return Err(bad("not a complex parameter")),
            "delta_3" => p.delta_3 = value.re,
            "delta_4" => p.delta_4 = value.re,
            "delta_5" => p.delta_5 = value.re,
            "delta_6" => p.delta_6 = value.re,
            "gamma" => p.gamma = value.re,
            "gamma_rydberg" => p.gamma_rydberg = value.re,
            "b_squared" => p.b_squared = value.re,
            "eta_l" => p.eta_l = value.re,
            "level4_branching" => p.level4_branching = value.re,
            _ => return Err(bad("unknown parameter")),
        }
        core(p.validate())?;
        s.params = p;
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmoc_susceptibilities(h: *const MmocScheme, out: *mut MmocSusceptibilities) -> MmocStatus {
    guard(|| {
        let p = scheme(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let chi = core(first_order_chi(p))?;
        *out = MmocSusceptibilities {
            chi43_m: chi.chi43_m.into(),
            chi43_l: chi.chi43_l.into(),
            chi61_m: chi.chi61_m.into(),
            chi61_l: chi.chi61_l.into(),
        };
        Ok(())
    })
}

/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmoc_coefficients(h: *const MmocScheme, out: *mut MmocCoefficients) -> MmocStatus {
    guard(|| {
        let p = scheme(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = core(closed_form_coefficients(p))?;
        let r = core(efficiency_report(&c, None))?;
        *out = MmocCoefficients {
            alpha: c.alpha.into(),
            epsilon: c.epsilon,
            epsilon_gamma: c.epsilon_gamma,
            d_c: r.d_c,
            f: r.f,
            f_max: r.f_max,
            d_c_max: r.d_c_max,
        };
        Ok(())
    })
}

/// Photon-flux efficiency of mm → optical conversion by exact propagation
/// through optical depth `d`; `d <= 0` selects complete conversion π/(2ε).
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmoc_efficiency(h: *const MmocScheme, d: f64, out: *mut f64) -> MmocStatus {
    guard(|| {
        let p = scheme(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = if d > 0.0 {
            d
        } else {
            core(closed_form_coefficients(p))?.complete_conversion_depth()
        };
        let m = assemble_m(&core(first_order_chi(p))?, p.b_squared, p.eta_l);
        let input = SignalPair::mm(C64::new(1.0, 0.0));
        let output = core(propagate_exact(&m, &input, d))?;
        *out = flux_bookkeeping(&input, &output, p.b(), 1.0, 1.0).photon_flux_efficiency;
        Ok(())
    })
}

/// Signal pair after depth `z` (l_abs) through the linear medium.
///
/// # Safety
/// `h` must be a live handle; `out_m` and `out_l` writable.
#[no_mangle]
pub unsafe extern "C" fn mmoc_propagate_exact(
    h: *const MmocScheme,
    omega_m: MmocComplex,
    omega_l: MmocComplex,
    z: f64,
    out_m: *mut MmocComplex,
    out_l: *mut MmocComplex,
) -> MmocStatus {
    guard(|| {
        let p = scheme(h)?;
        let out_m = out_m.as_mut().ok_or_else(|| null("out_m"))?;
        let out_l = out_l.as_mut().ok_or_else(|| null("out_l"))?;
        let m = assemble_m(&core(first_order_chi(p))?, p.b_squared, p.eta_l);
        let s = core(propagate_exact(&m, &SignalPair::new(omega_m.into(), omega_l.into()), z))?;
        *out_m = s.omega_m.into();
        *out_l = s.omega_l.into();
        Ok(())
    })
}

/// Stationary density matrix for the given signal pair, written row-major
/// into 36 entries (`out[6 * (k - 1) + (l - 1)]` is ρ_kl). Solved on the
/// levels reachable from the ground state.
///
/// # Safety
/// `h` must be a live handle and `out` must hold 36 entries.
#[no_mangle]
pub unsafe extern "C" fn mmoc_steady_state(
    h: *const MmocScheme,
    omega_m: MmocComplex,
    omega_l: MmocComplex,
    out: *mut MmocComplex,
) -> MmocStatus {
    guard(|| {
        let p = scheme(h)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rho = core(steady_state_from(
            p,
            &SignalPair::new(omega_m.into(), omega_l.into()),
            1,
        ))?;
        let out = std::slice::from_raw_parts_mut(out, 36);
        for k in 0..6 {
            for l in 0..6 {
                out[6 * k + l] = rho.element(k + 1, l + 1).into();
            }
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mmoc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn mmoc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
