//! Linear response of the loop to the two signal fields.
//!
//! ρ = ρ⁽⁰⁾ + ρ⁽¹⁾ + …, with ρ⁽⁰⁾ the stationary state of the auxiliary
//! fields alone and ρ⁽¹⁾ the adiabatic first-order correction, which solves
//! 𝓛₀ ρ⁽¹⁾ = i[H₁, ρ⁽⁰⁾] with tr ρ⁽¹⁾ = 0.

use log::warn;

use crate::error::{Error, Result};
use crate::liouvillian::{
    build_liouvillian, signal_hamiltonian, steady_state, steady_state_from, DensityMatrix, SignalPair, Superoperator,
    TraceConstrainedSystem,
};
use crate::params::SchemeParams;
use crate::C64;

/// ρ₄₃ and ρ₆₁ per unit signal Rabi frequency, in units of 1/γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibilities {
    pub chi43_m: C64,
    pub chi43_l: C64,
    pub chi61_m: C64,
    pub chi61_l: C64,
}

impl Susceptibilities {
    pub fn zero() -> Self {
        let z = C64::new(0.0, 0.0);
        Susceptibilities {
            chi43_m: z,
            chi43_l: z,
            chi61_m: z,
            chi61_l: z,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.chi43_m, self.chi43_l, self.chi61_m, self.chi61_l]
            .iter()
            .all(|z| z.is_finite())
    }

    /// Coherences (ρ₄₃, ρ₆₁) induced by the given signal pair.
    pub fn response(&self, s: &SignalPair) -> (C64, C64) {
        (
            self.chi43_m * s.omega_m + self.chi43_l * s.omega_l,
            self.chi61_m * s.omega_m + self.chi61_l * s.omega_l,
        )
    }
}

/// Coefficients of the beam-splitter limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterCoefficients {
    /// Cross susceptibility, 1/γ.
    pub alpha: C64,
    pub epsilon: f64,
    pub epsilon_gamma: f64,
}

impl BeamSplitterCoefficients {
    /// Damping rate κ = ε² + ε_Γ per l_abs.
    pub fn kappa(&self) -> f64 {
        self.epsilon * self.epsilon + self.epsilon_gamma
    }

    /// Oscillation wavenumber k = ε per l_abs.
    pub fn k(&self) -> f64 {
        self.epsilon
    }

    /// Optical depth of complete conversion, π/(2ε).
    pub fn complete_conversion_depth(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 / self.epsilon
    }
}

/// Stationary state with the auxiliary fields only.
///
/// Solved on the levels reachable from the ground state, so a bare P/R
/// ladder with Γ = 0 gives its dark state.
pub fn zeroth_order(p: &SchemeParams) -> Result<DensityMatrix> {
    steady_state_from(p, &SignalPair::zero(), 1)
}

fn first_order_state(sys: &TraceConstrainedSystem, rho0: &DensityMatrix, s: &SignalPair) -> Result<DensityMatrix> {
    let h1 = signal_hamiltonian(s);
    let comm = (h1 * rho0.0 - rho0.0 * h1) * C64::new(0.0, 1.0);
    let rhs = DensityMatrix(comm).to_vector();
    let x = sys.solve(&rhs, C64::new(0.0, 0.0), "first_order_chi")?;
    Ok(DensityMatrix::from_vector(&x))
}

/// The four first-order susceptibilities for arbitrary auxiliary parameters.
pub fn first_order_chi(p: &SchemeParams) -> Result<Susceptibilities> {
    let l0 = build_liouvillian(p, &SignalPair::zero())?;
    first_order_chi_with(&l0)
}

/// As [`first_order_chi`] for a prebuilt signal-free generator.
pub fn first_order_chi_with(l0: &Superoperator) -> Result<Susceptibilities> {
    let rho0 = steady_state(l0)?;
    chi_from(l0, &rho0)
}

/// As [`first_order_chi`] without the singular-value test for a unique
/// stationary state. Meant for sweeps over huge detunings where the relative
/// threshold of that test is meaningless; a singular system still errors.
pub fn first_order_chi_unchecked(p: &SchemeParams) -> Result<Susceptibilities> {
    let l0 = build_liouvillian(p, &SignalPair::zero())?;
    let sys = TraceConstrainedSystem::new(&l0);
    let zero = crate::liouvillian::StateVector::zeros(crate::liouvillian::DIM);
    let rho0 = DensityMatrix::from_vector(&sys.solve(&zero, C64::new(1.0, 0.0), "steady_state")?);
    chi_from(&l0, &rho0)
}

fn chi_from(l0: &Superoperator, rho0: &DensityMatrix) -> Result<Susceptibilities> {
    let rho0 = *rho0;
    let sys = TraceConstrainedSystem::new(l0);
    let one = C64::new(1.0, 0.0);
    let rm = first_order_state(&sys, &rho0, &SignalPair::mm(one))?;
    let rl = first_order_state(&sys, &rho0, &SignalPair::optical(one))?;
    let chi = Susceptibilities {
        chi43_m: rm.element(4, 3),
        chi43_l: rl.element(4, 3),
        chi61_m: rm.element(6, 1),
        chi61_l: rl.element(6, 1),
    };
    if !chi.is_finite() {
        return Err(Error::Singular {
            operation: "first_order_chi",
            value: 0.0,
        });
    }
    Ok(chi)
}

/// Index of ρ₄₃ in the vectorised state, for callers that solve directly.
pub const RHO43: usize = 3 + 6 * 2;
/// Index of ρ₆₁ in the vectorised state.
pub const RHO61: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterReport {
    /// |Ω_R| / |Ω_P|.
    pub probe_ratio: f64,
    pub probe_ok: bool,
    /// Ratio passes but sits in the marginal band.
    pub probe_marginal: bool,
    /// Δ₅ − |Ω_C|²/Δ₄.
    pub delta5_residual: f64,
    /// Δ₆ − |Ω_A|²/Δ₅.
    pub delta6_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterOptions {
    pub tolerance: f64,
    pub min_probe_ratio: f64,
    /// Upper end of the band in which a passing ratio is still flagged.
    pub marginal_ratio: f64,
}

impl Default for BeamSplitterOptions {
    fn default() -> Self {
        BeamSplitterOptions {
            tolerance: 1e-9,
            min_probe_ratio: 5.0,
            marginal_ratio: 5.0,
        }
    }
}

/// Check the detuning and weak-probe conditions of the beam-splitter limit.
///
/// Ratios in `[3, min_probe_ratio)` fail but are marked marginal; with the
/// default options a ratio of exactly 5 passes and is marked marginal too.
pub fn beam_splitter_conditions(p: &SchemeParams, opts: &BeamSplitterOptions) -> BeamSplitterReport {
    let probe_ratio = if p.omega_p.norm() == 0.0 {
        f64::INFINITY
    } else {
        p.omega_r.norm() / p.omega_p.norm()
    };
    let probe_ok = probe_ratio >= opts.min_probe_ratio;
    let probe_marginal = (3.0..=opts.marginal_ratio).contains(&probe_ratio);
    let delta5_residual = if p.delta_4 != 0.0 {
        p.delta_5 - p.omega_c.norm_sqr() / p.delta_4
    } else {
        f64::INFINITY
    };
    let delta6_residual = if p.delta_5 != 0.0 {
        p.delta_6 - p.omega_a.norm_sqr() / p.delta_5
    } else {
        f64::INFINITY
    };
    let passed = probe_ok && delta5_residual.abs() <= opts.tolerance && delta6_residual.abs() <= opts.tolerance;
    if probe_marginal {
        warn!("weak-probe ratio |Ω_R/Ω_P| = {probe_ratio:.3} is marginal");
    }
    BeamSplitterReport {
        probe_ratio,
        probe_ok,
        probe_marginal,
        delta5_residual,
        delta6_residual,
        passed,
    }
}

/// Closed-form α, ε and ε_Γ, valid to first order in Γ/γ under the
/// beam-splitter conditions.
pub fn closed_form_coefficients(p: &SchemeParams) -> Result<BeamSplitterCoefficients> {
    if p.delta_4 == 0.0 {
        return Err(Error::invalid("delta_4", "must be non-zero"));
    }
    if p.omega_a.norm() == 0.0 {
        return Err(Error::invalid("omega_a", "must be non-zero"));
    }
    if p.omega_r.norm() == 0.0 {
        return Err(Error::invalid("omega_r", "must be non-zero"));
    }
    if !beam_splitter_conditions(p, &BeamSplitterOptions::default()).passed {
        warn!("beam-splitter conditions not met; closed-form coefficients are approximate");
    }
    let g = p.gamma;
    let alpha = -p.omega_c * p.omega_p.conj() / (p.omega_a.conj() * p.omega_r * p.delta_4);
    let epsilon = p.b() / 4.0
        * (g / p.delta_4.abs())
        * (p.omega_c.norm() / p.omega_a.norm())
        * (p.omega_p.norm() / p.omega_r.norm());
    let epsilon_gamma = p.gamma_rydberg * g / (16.0 * p.omega_a.norm_sqr())
        * (1.0 + 2.0 * p.omega_c.norm_sqr() / (p.delta_4 * p.delta_4));
    Ok(BeamSplitterCoefficients {
        alpha,
        epsilon,
        epsilon_gamma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticityReport {
    pub bandwidth: f64,
    /// Smallest of |Δ₄|, |Δ₅|, |Δ₆|, |Ω_R|, |Ω_C|, |Ω_A|.
    pub min_scale: f64,
    pub margin: f64,
    pub passed: bool,
}

pub const DEFAULT_ADIABATIC_MARGIN: f64 = 0.1;

/// Whether a signal of the given bandwidth (rad per unit time, units of γ)
/// is slow compared with the auxiliary dynamics.
pub fn adiabaticity_check(p: &SchemeParams, bandwidth: f64, margin: f64) -> Result<AdiabaticityReport> {
    if !(bandwidth >= 0.0) {
        return Err(Error::invalid("bandwidth", "must be non-negative"));
    }
    let min_scale = [
        p.delta_4.abs(),
        p.delta_5.abs(),
        p.delta_6.abs(),
        p.omega_r.norm(),
        p.omega_c.norm(),
        p.omega_a.norm(),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok(AdiabaticityReport {
        bandwidth,
        min_scale,
        margin,
        passed: bandwidth < min_scale * margin || bandwidth == 0.0,
    })
}
