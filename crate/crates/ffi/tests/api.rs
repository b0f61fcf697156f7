use std::ffi::CStr;

use mmoc_ffi::*;

fn z(re: f64, im: f64) -> MmocComplex {
    MmocComplex { re, im }
}

struct Handle(*mut MmocScheme);

impl Handle {
    fn rb87() -> Self {
        Handle(mmoc_scheme_new_rb87())
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { mmoc_scheme_free(self.0) }
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mmoc_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn complete_conversion_efficiency() {
    let h = Handle::rb87();
    let mut f = 0.0;
    assert_eq!(unsafe { mmoc_efficiency(h.0, 0.0, &mut f) }, MmocStatus::Ok);
    assert!((f - 0.9200506).abs() < 1e-6, "{f}");
    let mut c = MmocCoefficients::default();
    assert_eq!(unsafe { mmoc_coefficients(h.0, &mut c) }, MmocStatus::Ok);
    assert!((c.alpha.re + 0.075).abs() < 1e-12 && c.alpha.im.abs() < 1e-12);
    assert!((c.d_c - 98.73).abs() < 0.01);
    assert!(c.f_max > c.f);
}

#[test]
fn propagation_matches_efficiency() {
    let h = Handle::rb87();
    let mut c = MmocCoefficients::default();
    let mut f = 0.0;
    let (mut m, mut l) = (z(0.0, 0.0), z(0.0, 0.0));
    unsafe {
        assert_eq!(mmoc_coefficients(h.0, &mut c), MmocStatus::Ok);
        assert_eq!(mmoc_efficiency(h.0, c.d_c, &mut f), MmocStatus::Ok);
        let s = mmoc_propagate_exact(h.0, z(1.0, 0.0), z(0.0, 0.0), c.d_c, &mut m, &mut l);
        assert_eq!(s, MmocStatus::Ok);
    }
    let b2 = 0.72;
    assert!((b2 * (l.re * l.re + l.im * l.im) - f).abs() < 1e-12);
}

#[test]
fn dark_state_through_the_handle() {
    let h = Handle::rb87();
    let mut rho = [z(0.0, 0.0); 36];
    unsafe {
        for name in [
            c"omega_c",
            c"omega_a",
            c"gamma_rydberg",
            c"delta_4",
            c"delta_5",
            c"delta_6",
        ] {
            assert_eq!(
                mmoc_scheme_set(h.0, name.as_ptr(), 0.0),
                MmocStatus::Ok,
                "{}",
                last_error()
            );
        }
        let s = mmoc_steady_state(h.0, z(0.0, 0.0), z(0.0, 0.0), rho.as_mut_ptr());
        assert_eq!(s, MmocStatus::Ok, "{}", last_error());
    }
    // ρ₃₃ = |Ω_P|²/(|Ω_P|² + |Ω_R|²), ρ₃₁ = −Ω_PΩ_R/(|Ω_P|² + |Ω_R|²)
    assert!((rho[14].re - 0.09 / 4.09).abs() < 1e-10);
    assert!((rho[12].re + 0.6 / 4.09).abs() < 1e-10);
    let trace: f64 = (0..6).map(|k| rho[7 * k].re).sum();
    assert!((trace - 1.0).abs() < 1e-12);
}

#[test]
fn complex_rabi_frequency_rotates_alpha() {
    let h = Handle::rb87();
    let mut c = MmocCoefficients::default();
    let mut chi = MmocSusceptibilities::default();
    unsafe {
        assert_eq!(
            mmoc_scheme_set_complex(h.0, c"omega_c".as_ptr(), z(0.0, 2.0)),
            MmocStatus::Ok
        );
        assert_eq!(mmoc_coefficients(h.0, &mut c), MmocStatus::Ok);
        assert_eq!(mmoc_susceptibilities(h.0, &mut chi), MmocStatus::Ok);
    }
    assert!(c.alpha.re.abs() < 1e-12 && (c.alpha.im + 0.075).abs() < 1e-12);
    assert!(chi.chi43_l.im < 0.0 && chi.chi43_l.re.abs() < 0.1 * chi.chi43_l.im.abs());
}

#[test]
fn errors_carry_status_and_message() {
    let h = Handle::rb87();
    let mut f = 0.0;
    unsafe {
        assert_eq!(
            mmoc_scheme_set(h.0, c"gamma".as_ptr(), -1.0),
            MmocStatus::InvalidArgument
        );
        assert!(last_error().contains("gamma"));
        assert_eq!(mmoc_scheme_set(h.0, std::ptr::null(), 1.0), MmocStatus::NullPointer);
        assert_eq!(
            mmoc_efficiency(h.0, 50.0, std::ptr::null_mut()),
            MmocStatus::NullPointer
        );
        assert_eq!(mmoc_efficiency(h.0, 50.0, &mut f), MmocStatus::Ok);
        assert!(last_error().is_empty());
        // no drive into levels 4 and 5 and no decay out of them
        for name in [c"omega_c", c"omega_a", c"gamma_rydberg"] {
            mmoc_scheme_set(h.0, name.as_ptr(), 0.0);
        }
        let mut chi = MmocSusceptibilities::default();
        assert_eq!(mmoc_susceptibilities(h.0, &mut chi), MmocStatus::Numerical);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mmoc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
