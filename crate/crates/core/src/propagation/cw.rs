//! Stationary fields along z.

use crate::conversion::{pauli_decompose, propagate_exact, ConversionMatrix};
use crate::error::{Error, Result};
use crate::liouvillian::{build_liouvillian, steady_state, SignalPair};
use crate::params::SchemeParams;
use crate::propagation::Grid1D;
use crate::C64;

/// Fields sampled along z, lengths in l_abs.
#[derive(Debug, Clone, PartialEq)]
pub struct CwProfile {
    pub z: Vec<f64>,
    pub fields: Vec<SignalPair>,
    /// Intensity damping envelope e^{−2κz}, when known.
    pub envelope: Option<Vec<f64>>,
}

impl CwProfile {
    pub fn intensity_m(&self) -> Vec<f64> {
        self.fields.iter().map(|s| s.omega_m.norm_sqr()).collect()
    }

    pub fn intensity_l(&self) -> Vec<f64> {
        self.fields.iter().map(|s| s.omega_l.norm_sqr()).collect()
    }

    /// Photon fluxes (|Ω_M|²/b², |Ω_L|²) relative to the total input flux.
    pub fn normalised_flux(&self, b_squared: f64) -> Vec<(f64, f64)> {
        let flux = |s: &SignalPair| (s.omega_m.norm_sqr() / b_squared, s.omega_l.norm_sqr());
        let (m0, l0) = flux(&self.fields[0]);
        let total = m0 + l0;
        self.fields
            .iter()
            .map(|s| {
                let (m, l) = flux(s);
                if total > 0.0 {
                    (m / total, l / total)
                } else {
                    (0.0, 0.0)
                }
            })
            .collect()
    }
}

/// Exact linear propagation evaluated at each grid node.
///
/// The envelope uses κ = −Im a₀, the damping of the mean of the two normal
/// modes, which reduces to ε² + ε_Γ in the beam-splitter limit.
pub fn propagate_cw_1d(m: &ConversionMatrix, omega0: &SignalPair, grid: &Grid1D) -> Result<CwProfile> {
    if grid.start() < 0.0 {
        return Err(Error::invalid("z", "grid must start at z >= 0"));
    }
    let fields = grid
        .nodes
        .iter()
        .map(|&z| propagate_exact(m, omega0, z))
        .collect::<Result<Vec<_>>>()?;
    let kappa = pauli_decompose(m).a0.im;
    Ok(CwProfile {
        z: grid.nodes.clone(),
        envelope: Some(grid.nodes.iter().map(|&z| (-2.0 * kappa * z).exp()).collect()),
        fields,
    })
}

/// Local source i η_L (b² ρ₄₃, ρ₆₁) from the full nonlinear steady state.
fn cw_source(p: &SchemeParams, s: &SignalPair) -> Result<SignalPair> {
    let rho = steady_state(&build_liouvillian(p, s)?)?;
    let i = C64::new(0.0, 1.0);
    Ok(SignalPair::new(
        i * p.eta_l * p.b_squared * rho.element(4, 3),
        i * p.eta_l * rho.element(6, 1),
    ))
}

/// Full Maxwell-Bloch solution for stationary fields: at every z the atoms
/// sit in the exact steady state for the local signal pair, and the fields
/// advance with classical RK4 using steps no larger than `max_dz`.
pub fn propagate_cw_oracle(p: &SchemeParams, omega0: &SignalPair, grid: &Grid1D, max_dz: f64) -> Result<CwProfile> {
    if !(max_dz > 0.0) {
        return Err(Error::invalid("dz", "must be positive"));
    }
    let add =
        |a: &SignalPair, b: &SignalPair, h: f64| SignalPair::new(a.omega_m + b.omega_m * h, a.omega_l + b.omega_l * h);
    let mut z = grid.start();
    let mut s = *omega0;
    let mut fields = Vec::with_capacity(grid.len());
    for &target in &grid.nodes {
        let span = target - z;
        let n = (span / max_dz).ceil() as usize;
        let h = if n > 0 { span / n as f64 } else { 0.0 };
        for _ in 0..n {
            let k1 = cw_source(p, &s)?;
            let k2 = cw_source(p, &add(&s, &k1, 0.5 * h))?;
            let k3 = cw_source(p, &add(&s, &k2, 0.5 * h))?;
            let k4 = cw_source(p, &add(&s, &k3, h))?;
            s = SignalPair::new(
                s.omega_m + (k1.omega_m + k2.omega_m * 2.0 + k3.omega_m * 2.0 + k4.omega_m) * (h / 6.0),
                s.omega_l + (k1.omega_l + k2.omega_l * 2.0 + k3.omega_l * 2.0 + k4.omega_l) * (h / 6.0),
            );
        }
        z = target;
        fields.push(s);
    }
    Ok(CwProfile {
        z: grid.nodes.clone(),
        fields,
        envelope: None,
    })
}
