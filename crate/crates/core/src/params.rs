//! Parameter records, unit conventions and the Rb-87 preset.
//!
//! The physics core runs in natural units: rates in units of the optical
//! decay rate γ (so `gamma == 1`) and one-dimensional lengths in units of the
//! resonant absorption length `l_abs = γ / (4 η_L)`, which fixes `η_L = 1/4`.
//! SI quantities only appear in [`PhysicalPreset`] and in the Rydberg and
//! paraxial code, where transverse lengths are carried in micrometres.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::C64;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant (J s).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Coupling constant η_L when lengths are measured in absorption lengths.
pub const ETA_L_NATURAL: f64 = 0.25;

/// Rabi frequencies, detunings, decay rates and coupling constants of the
/// six-level loop, in natural units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub omega_p: C64,
    pub omega_r: C64,
    pub omega_c: C64,
    pub omega_a: C64,
    pub delta_3: f64,
    pub delta_4: f64,
    pub delta_5: f64,
    pub delta_6: f64,
    /// Decay rate of levels 2 and 6; the rate unit.
    pub gamma: f64,
    /// Decay rate of the Rydberg levels 3, 4 and 5.
    pub gamma_rydberg: f64,
    pub b_squared: f64,
    pub eta_l: f64,
    /// Multiplier on each of the two decay channels out of level 4
    /// (4→3 and 4→5). `1.0` gives each channel the full Rydberg rate so
    /// level 4 decays at twice that rate; `0.5` splits it.
    pub level4_branching: f64,
}

impl SchemeParams {
    /// Everything off: no fields, no detunings, Γ = 0, b² = 1.
    pub fn dark() -> Self {
        SchemeParams {
            omega_p: C64::new(0.0, 0.0),
            omega_r: C64::new(0.0, 0.0),
            omega_c: C64::new(0.0, 0.0),
            omega_a: C64::new(0.0, 0.0),
            delta_3: 0.0,
            delta_4: 0.0,
            delta_5: 0.0,
            delta_6: 0.0,
            gamma: 1.0,
            gamma_rydberg: 0.0,
            b_squared: 1.0,
            eta_l: ETA_L_NATURAL,
            level4_branching: 1.0,
        }
    }

    pub fn b(&self) -> f64 {
        self.b_squared.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let complex = [
            ("omega_p", self.omega_p),
            ("omega_r", self.omega_r),
            ("omega_c", self.omega_c),
            ("omega_a", self.omega_a),
        ];
        for (name, v) in complex {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        let real = [
            ("delta_3", self.delta_3),
            ("delta_4", self.delta_4),
            ("delta_5", self.delta_5),
            ("delta_6", self.delta_6),
            ("eta_l", self.eta_l),
            ("level4_branching", self.level4_branching),
        ];
        for (name, v) in real {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if !(self.gamma_rydberg >= 0.0 && self.gamma_rydberg < self.gamma) {
            return Err(Error::invalid(
                "gamma_rydberg",
                format!("must satisfy 0 <= Γ < γ (got {})", self.gamma_rydberg),
            ));
        }
        if !(self.b_squared > 0.0 && self.b_squared.is_finite()) {
            return Err(Error::invalid("b_squared", "must be positive"));
        }
        if self.level4_branching < 0.0 {
            return Err(Error::invalid("level4_branching", "must be non-negative"));
        }
        Ok(())
    }

    /// Largest auxiliary rate scale, used for time-step resolution checks.
    pub fn max_rate(&self) -> f64 {
        [
            self.omega_p.norm(),
            self.omega_r.norm(),
            self.omega_c.norm(),
            self.omega_a.norm(),
            self.delta_3.abs(),
            self.delta_4.abs(),
            self.delta_5.abs(),
            self.delta_6.abs(),
            self.gamma,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// SI-side description of a physical realisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalPreset {
    /// γ as an angular frequency (rad/s).
    pub gamma_si: f64,
    /// Γ/γ.
    pub gamma_ratio: f64,
    /// Atomic density (1/m³).
    pub atom_density: f64,
    /// Resonant absorption length of the optical transition (m).
    pub l_abs: f64,
    /// mm-wave wavelength (m).
    pub lambda_m: f64,
    /// Optical signal wavelength (m).
    pub lambda_l: f64,
    /// |d₄₃| (C m), if known.
    pub d43_magnitude: Option<f64>,
    /// |d₆₁| (C m), if known.
    pub d61_magnitude: Option<f64>,
    /// Signed van der Waals coefficient of level 3 (J m⁶), if known.
    pub c6: Option<f64>,
}

impl PhysicalPreset {
    pub fn omega_m(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.lambda_m
    }

    pub fn omega_l(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.lambda_l
    }

    /// ω_M / ω_L.
    pub fn frequency_ratio(&self) -> f64 {
        self.lambda_l / self.lambda_m
    }

    /// η_L in SI (rad s⁻¹ m⁻¹) from `l_abs = γ/(4 η_L)`.
    pub fn eta_l_si(&self) -> f64 {
        self.gamma_si / (4.0 * self.l_abs)
    }

    /// η_L evaluated from the atom density and |d₆₁|.
    pub fn eta_l_from_dipole(&self, d61: f64) -> f64 {
        self.atom_density * d61 * d61 * self.omega_l() / (2.0 * HBAR * EPSILON_0 * SPEED_OF_LIGHT)
    }

    /// |d₆₁| consistent with `l_abs` and the atom density.
    pub fn derived_d61(&self) -> f64 {
        let eta = self.eta_l_si();
        (eta * 2.0 * HBAR * EPSILON_0 * SPEED_OF_LIGHT / (self.atom_density * self.omega_l())).sqrt()
    }

    /// b² = (|d₄₃|²/|d₆₁|²)(ω_M/ω_L), when both dipoles are set.
    pub fn b_squared_from_dipoles(&self) -> Option<f64> {
        match (self.d43_magnitude, self.d61_magnitude) {
            (Some(d43), Some(d61)) => Some(d43 * d43 / (d61 * d61) * self.frequency_ratio()),
            _ => None,
        }
    }

    pub fn units(&self) -> NaturalUnits {
        NaturalUnits {
            gamma_si: self.gamma_si,
            l_abs: self.l_abs,
        }
    }
}

/// Conversion between SI and the natural units of the physics core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalUnits {
    pub gamma_si: f64,
    pub l_abs: f64,
}

impl NaturalUnits {
    pub fn rate_to_natural(&self, angular_frequency: f64) -> f64 {
        angular_frequency / self.gamma_si
    }

    pub fn rate_to_si(&self, rate: f64) -> f64 {
        rate * self.gamma_si
    }

    pub fn length_to_natural(&self, metres: f64) -> f64 {
        metres / self.l_abs
    }

    pub fn length_to_si(&self, length: f64) -> f64 {
        length * self.l_abs
    }

    pub fn time_to_natural(&self, seconds: f64) -> f64 {
        seconds * self.gamma_si
    }

    pub fn time_to_si(&self, time: f64) -> f64 {
        time / self.gamma_si
    }
}

/// mm-wave wavelength implied by a 509 µm beam waist equal to 1.9 λ_M.
pub const RB87_LAMBDA_M: f64 = 509e-6 / 1.9;
/// Rb D2 line.
pub const RB87_LAMBDA_L: f64 = 780.241e-9;

/// The ⁸⁷Rb parameter set of the conversion scheme.
pub fn rb87_preset() -> (SchemeParams, PhysicalPreset) {
    let gamma_ratio = 1.0 / 285.0;
    let scheme = SchemeParams {
        omega_p: C64::new(0.3, 0.0),
        omega_r: C64::new(2.0, 0.0),
        omega_c: C64::new(2.0, 0.0),
        omega_a: C64::new(2.0, 0.0),
        delta_3: 0.0,
        delta_4: 2.0,
        delta_5: 2.0,
        delta_6: 2.0,
        gamma: 1.0,
        gamma_rydberg: gamma_ratio,
        b_squared: 0.72,
        eta_l: ETA_L_NATURAL,
        level4_branching: 1.0,
    };
    let physical = PhysicalPreset {
        gamma_si: 2.0 * PI * 6.1e6,
        gamma_ratio,
        atom_density: 2e17,
        l_abs: 51e-6,
        lambda_m: RB87_LAMBDA_M,
        lambda_l: RB87_LAMBDA_L,
        d43_magnitude: None,
        d61_magnitude: None,
        c6: None,
    };
    (scheme, physical)
}

/// Interaction magnitudes quoted at a reference separation, from which the
/// van der Waals coefficient and |d₄₃| are back-derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionMarkers {
    /// Signed van der Waals shift at `separation` (rad/s), Δ_vdW = −C6/(ħR⁶).
    pub delta_vdw: f64,
    /// Magnitude of the perpendicular dipole-dipole shift at `separation` (rad/s).
    pub delta_dd: f64,
    /// Reference separation (m).
    pub separation: f64,
}

impl InteractionMarkers {
    /// Shifts quoted for the 23S/24P choice at R₉₀ = 1.79 µm.
    pub fn rb87() -> Self {
        InteractionMarkers {
            delta_vdw: 2.0 * PI * 24.5e3,
            delta_dd: 2.0 * PI * 62.6e3,
            separation: 1.79e-6,
        }
    }
}

/// Back-derive C6 and |d₄₃| from shift magnitudes at a known separation.
pub fn derive_c6_and_d43(preset: &PhysicalPreset, markers: &InteractionMarkers) -> Result<PhysicalPreset> {
    if !(markers.separation > 0.0) {
        return Err(Error::invalid("separation", "must be positive"));
    }
    if !(markers.delta_vdw.abs() > 0.0) || !markers.delta_vdw.is_finite() {
        return Err(Error::invalid("delta_vdw", "must be non-zero and finite"));
    }
    if !(markers.delta_dd > 0.0) || !markers.delta_dd.is_finite() {
        return Err(Error::invalid("delta_dd", "must be positive and finite"));
    }
    let r = markers.separation;
    let c6 = -HBAR * markers.delta_vdw * r.powi(6);
    let d43 = (4.0 * PI * EPSILON_0 * HBAR * markers.delta_dd * r.powi(3)).sqrt();
    Ok(PhysicalPreset {
        c6: Some(c6),
        d43_magnitude: Some(d43),
        ..*preset
    })
}

/// Field index order used by [`LoopFields`].
pub const LOOP_FIELDS: [&str; 6] = ["P", "R", "M", "C", "A", "L"];

/// Wavevectors (1/m) and angular frequencies (rad/s) of the six fields, in
/// the order P, R, M, C, A, L.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopFields {
    pub k: [[f64; 3]; 6],
    pub omega: [f64; 6],
}

impl LoopFields {
    /// All fields along +z with |k| = ω/c.
    pub fn co_propagating(omega: [f64; 6]) -> Self {
        let mut k = [[0.0; 3]; 6];
        for (kx, w) in k.iter_mut().zip(omega) {
            kx[2] = w / SPEED_OF_LIGHT;
        }
        LoopFields { k, omega }
    }

    /// Frequencies of P, R, M, C, A closing the loop through L.
    pub fn closed(omega_p: f64, omega_r: f64, omega_m: f64, omega_c: f64, omega_a: f64) -> Self {
        let omega_l = omega_p + omega_r + omega_m - omega_c - omega_a;
        Self::co_propagating([omega_p, omega_r, omega_m, omega_c, omega_a, omega_l])
    }

    /// 1e-9 relative to the largest frequency / wavevector magnitude.
    pub fn default_tolerance(&self) -> f64 {
        let scale = self.omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        1e-9 * scale.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopReport {
    /// |ω_P + ω_R + ω_M − ω_C − ω_A − ω_L|.
    pub frequency_residual: f64,
    /// ‖k_P + k_R + k_M − k_C − k_A − k_L‖.
    pub wavevector_residual: f64,
    pub passed: bool,
}

/// Check the resonant-loop frequency condition and the phase-matching condition.
pub fn validate_loop(fields: &LoopFields, tol: f64) -> LoopReport {
    const SIGNS: [f64; 6] = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
    let frequency_residual = SIGNS.iter().zip(fields.omega).map(|(s, w)| s * w).sum::<f64>().abs();
    let mut dk = [0.0; 3];
    for (s, k) in SIGNS.iter().zip(fields.k) {
        for (d, ki) in dk.iter_mut().zip(k) {
            *d += s * ki;
        }
    }
    let wavevector_residual = dk.iter().map(|x| x * x).sum::<f64>().sqrt();
    LoopReport {
        frequency_residual,
        wavevector_residual,
        passed: frequency_residual < tol && wavevector_residual < tol,
    }
}
