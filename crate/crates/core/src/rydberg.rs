//! Rydberg-Rydberg interaction shifts and their effect on ℳ.
//!
//! A Rydberg atom in level 3 shifts a neighbour's level 3 by the van der
//! Waals interaction and its level 4 by the resonant dipole-dipole exchange.
//! The conversion matrix is averaged over the nearest-neighbour distribution
//! of a Poissonian gas.

use std::f64::consts::PI;

use log::warn;
use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::conversion::{assemble_m, ConversionMatrix};
use crate::error::{Error, Result};
use crate::params::{SchemeParams, EPSILON_0, HBAR};
use crate::perturbation::first_order_chi_unchecked;
use crate::quadrature::GaussLegendre;
use crate::C64;

/// Orientation of the 4–3 transition dipole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DipoleOrientation {
    /// Real dipole along a unit axis (π transition).
    Linear([f64; 3]),
    /// Circular dipole rotating in the plane normal to a unit axis (σ transition).
    Circular([f64; 3]),
}

impl DipoleOrientation {
    pub fn axis(&self) -> [f64; 3] {
        match *self {
            DipoleOrientation::Linear(a) | DipoleOrientation::Circular(a) => a,
        }
    }

    /// |ê·R̂|² for a separation making angle θ with the axis.
    pub fn projection(&self, cos_theta: f64) -> f64 {
        let c2 = cos_theta * cos_theta;
        match self {
            DipoleOrientation::Linear(_) => c2,
            DipoleOrientation::Circular(_) => 0.5 * (1.0 - c2),
        }
    }
}

impl Default for DipoleOrientation {
    fn default() -> Self {
        DipoleOrientation::Linear([0.0, 0.0, 1.0])
    }
}

/// How the angle between the separation and the dipole axis is treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngularMode {
    /// Isotropic average over the polar angle.
    Average,
    /// Every neighbour at this cos θ.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionParams {
    /// Signed van der Waals coefficient (J m⁶).
    pub c6: f64,
    /// |d₄₃| (C m).
    pub d43: f64,
    /// Rydberg density (1/m³).
    pub rydberg_density: f64,
    pub orientation: DipoleOrientation,
    pub angular: AngularMode,
}

impl InteractionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rydberg_density > 0.0) || !self.rydberg_density.is_finite() {
            return Err(Error::invalid("rydberg_density", "must be positive"));
        }
        if !self.c6.is_finite() {
            return Err(Error::invalid("c6", "must be finite"));
        }
        if !(self.d43 >= 0.0) || !self.d43.is_finite() {
            return Err(Error::invalid("d43", "must be non-negative"));
        }
        let a = self.orientation.axis();
        let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("orientation", "axis must be a unit vector"));
        }
        if let AngularMode::Fixed(c) = self.angular {
            if !(-1.0..=1.0).contains(&c) {
                return Err(Error::invalid("cos_theta", "must lie in [-1, 1]"));
            }
        }
        Ok(())
    }
}

/// Nearest-neighbour statistics of an ideal gas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighbourDistribution {
    pub r_ws: f64,
}

impl NeighbourDistribution {
    pub fn from_density(density: f64) -> Result<Self> {
        if !(density > 0.0) || !density.is_finite() {
            return Err(Error::invalid("rydberg_density", "must be positive"));
        }
        Ok(NeighbourDistribution {
            r_ws: wigner_seitz_radius(density),
        })
    }
}

pub fn wigner_seitz_radius(density: f64) -> f64 {
    (3.0 / (4.0 * PI * density)).cbrt()
}

/// Δ_vdW = −C6/(ħR⁶), rad/s.
pub fn vdw_shift(c6: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::invalid("separation", "must be positive"));
    }
    Ok(-c6 / (HBAR * r.powi(6)))
}

/// Δ_DD = (|d|² − 3|d·R̂|²)/(4πε₀ħR³), rad/s.
pub fn dd_shift(d43: f64, r_vec: [f64; 3], orientation: &DipoleOrientation) -> Result<f64> {
    let r = (r_vec[0] * r_vec[0] + r_vec[1] * r_vec[1] + r_vec[2] * r_vec[2]).sqrt();
    if !(r > 0.0) {
        return Err(Error::invalid("separation", "must be non-zero"));
    }
    let a = orientation.axis();
    let cos_theta = (a[0] * r_vec[0] + a[1] * r_vec[1] + a[2] * r_vec[2]) / r;
    Ok(dd_shift_polar(d43, r, cos_theta, orientation))
}

fn dd_shift_polar(d43: f64, r: f64, cos_theta: f64, orientation: &DipoleOrientation) -> f64 {
    let angular = 1.0 - 3.0 * orientation.projection(cos_theta);
    d43 * d43 * angular / (4.0 * PI * EPSILON_0 * HBAR * r.powi(3))
}

/// Nearest-neighbour density per unit separation and solid angle, so that
/// ∫ dΩ ∫ dR w = 1.
pub fn nn_pdf(r: f64, r_ws: f64) -> f64 {
    let x = r / r_ws;
    (3.0 / r_ws) * x * x * (-x * x * x).exp() / (4.0 * PI)
}

/// Separation exceeded by a fraction `beyond` of nearest neighbours.
pub fn separation_percentile(r_ws: f64, beyond: f64) -> Result<f64> {
    if !(beyond > 0.0 && beyond < 1.0) {
        return Err(Error::invalid("fraction", "must lie in (0, 1)"));
    }
    Ok(r_ws * (1.0 / beyond).ln().cbrt())
}

/// Separation exceeded by 90% of nearest neighbours.
pub fn r90(r_ws: f64) -> f64 {
    r_ws * (10.0f64 / 9.0).ln().cbrt()
}

/// R_b = (2|C6| / (ħ γ_EIT))^{1/6} with γ_EIT = |Ω_R|²/γ, rates in rad/s.
pub fn blockade_radius(c6: f64, omega_r: f64, gamma: f64) -> Result<f64> {
    if !(omega_r > 0.0) || !(gamma > 0.0) {
        return Err(Error::invalid("omega_r/gamma", "must be positive"));
    }
    let gamma_eit = omega_r * omega_r / gamma;
    Ok((2.0 * c6.abs() / (HBAR * gamma_eit)).powf(1.0 / 6.0))
}

/// N_Ry = ρ₃₃ N. Warns when the blockade radius is not small against r_ws.
pub fn rydberg_density(rho33: f64, atom_density: f64, blockade: Option<f64>) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho33) {
        return Err(Error::invalid("rho33", "must lie in [0, 1]"));
    }
    let n = rho33 * atom_density;
    if let (Some(rb), true) = (blockade, n > 0.0) {
        let r_ws = wigner_seitz_radius(n);
        if rb >= 0.5 * r_ws {
            warn!("blockade radius {rb:e} m is not below r_ws/2 = {:e} m", 0.5 * r_ws);
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub radial_nodes: usize,
    pub polar_nodes: usize,
    /// Largest allowed relative change of any entry when node counts double.
    pub tolerance: f64,
    pub check_convergence: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            radial_nodes: 128,
            polar_nodes: 24,
            tolerance: 1e-4,
            check_convergence: true,
        }
    }
}

/// Integration window in s = ln u, u = (R/r_ws)³; the weight e^{−u}u is
/// below 1e−10 outside it.
const LN_U_MIN: f64 = -25.0;
const LN_U_MAX: f64 = 3.688_879_454_113_936; // ln 40

/// One quadrature node: separation, cos θ and normalised weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub r: f64,
    pub cos_theta: f64,
    pub weight: f64,
}

/// Product rule over the nearest-neighbour distribution.
///
/// The radial integral ∫ e^{−u} f du is taken in s = ln u, which resolves
/// both the small-R region where the shifts diverge and the exponential tail.
pub fn distribution_nodes(
    dist: &NeighbourDistribution,
    angular: AngularMode,
    radial: usize,
    polar: usize,
) -> Vec<Node> {
    let rule = GaussLegendre::on_interval(radial, LN_U_MIN, LN_U_MAX);
    let radial_nodes: Vec<(f64, f64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| {
            let u = s.exp();
            (dist.r_ws * u.cbrt(), w * u * (-u).exp())
        })
        .collect();
    let total: f64 = radial_nodes.iter().map(|n| n.1).sum();
    let polar_nodes: Vec<(f64, f64)> = match angular {
        AngularMode::Fixed(c) => vec![(c, 1.0)],
        AngularMode::Average => polar_rule(polar),
    };
    let mut nodes = Vec::with_capacity(radial_nodes.len() * polar_nodes.len());
    for &(r, wr) in &radial_nodes {
        for &(c, wc) in &polar_nodes {
            nodes.push(Node {
                r,
                cos_theta: c,
                weight: wr / total * wc,
            });
        }
    }
    nodes
}

/// Rule for ½∫₋₁¹ dc over cos θ = c.
///
/// Both dipole orientations depend on c² only, and the dipole-dipole shift
/// vanishes at the magic angle c² = 1/3 for every separation, which leaves a
/// kink in the radially averaged integrand there. The rule therefore covers
/// [0, 1] in two panels split at c = 1/√3.
fn polar_rule(n: usize) -> Vec<(f64, f64)> {
    let magic = (1.0f64 / 3.0).sqrt();
    let inner = (n / 2).max(1);
    let outer = (n - inner).max(1);
    let mut out = Vec::with_capacity(inner + outer);
    for (m, a, b) in [(inner, 0.0, magic), (outer, magic, 1.0)] {
        let g = GaussLegendre::on_interval(m, a, b);
        out.extend(g.nodes.iter().zip(&g.weights).map(|(&c, &w)| (c, w)));
    }
    out
}

/// Scheme parameters with the shifts of a neighbour at (r, cos θ) applied.
/// Rates are converted to natural units with `gamma_si`.
pub fn shifted_params(
    p: &SchemeParams,
    inter: &InteractionParams,
    gamma_si: f64,
    r: f64,
    cos_theta: f64,
) -> Result<SchemeParams> {
    let vdw = vdw_shift(inter.c6, r)? / gamma_si;
    let dd = dd_shift_polar(inter.d43, r, cos_theta, &inter.orientation) / gamma_si;
    Ok(SchemeParams {
        delta_3: p.delta_3 - vdw,
        delta_4: p.delta_4 - dd,
        ..*p
    })
}

/// ℳ at each node. Independent solves run in parallel; the result order
/// matches `nodes`.
fn node_matrices(
    p: &SchemeParams,
    inter: &InteractionParams,
    gamma_si: f64,
    nodes: &[Node],
) -> Result<Vec<Matrix2<C64>>> {
    nodes
        .par_iter()
        .map(|n| {
            let q = shifted_params(p, inter, gamma_si, n.r, n.cos_theta)?;
            let chi = first_order_chi_unchecked(&q)?;
            Ok(assemble_m(&chi, q.b_squared, q.eta_l).0 * C64::from(n.weight))
        })
        .collect()
}

/// Weighted mean of ℳ over explicit nodes, summed pairwise in node order.
pub fn averaged_m_nodes(
    p: &SchemeParams,
    inter: &InteractionParams,
    gamma_si: f64,
    nodes: &[Node],
) -> Result<ConversionMatrix> {
    let terms = node_matrices(p, inter, gamma_si, nodes)?;
    let total: f64 = nodes.iter().map(|n| n.weight).sum();
    Ok(ConversionMatrix(pairwise_sum(&terms) / C64::from(total)))
}

fn pairwise_sum(terms: &[Matrix2<C64>]) -> Matrix2<C64> {
    match terms.len() {
        0 => Matrix2::zeros(),
        1 => terms[0],
        n => pairwise_sum(&terms[..n / 2]) + pairwise_sum(&terms[n / 2..]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedM {
    pub m: ConversionMatrix,
    /// Largest relative entry change on doubling the node counts; `None`
    /// when the check was skipped.
    pub change: Option<f64>,
}

/// ℳ̃ = ∫ d³R w(R) ℳ(R).
pub fn averaged_m(
    p: &SchemeParams,
    inter: &InteractionParams,
    dist: &NeighbourDistribution,
    gamma_si: f64,
    opts: &QuadratureOptions,
) -> Result<AveragedM> {
    inter.validate()?;
    if opts.radial_nodes == 0 || opts.polar_nodes == 0 {
        return Err(Error::invalid("quadrature nodes", "must be positive"));
    }
    let nodes = distribution_nodes(dist, inter.angular, opts.radial_nodes, opts.polar_nodes);
    let m = averaged_m_nodes(p, inter, gamma_si, &nodes)?;
    if !opts.check_convergence {
        return Ok(AveragedM { m, change: None });
    }
    let fine = distribution_nodes(dist, inter.angular, 2 * opts.radial_nodes, 2 * opts.polar_nodes);
    let m2 = averaged_m_nodes(p, inter, gamma_si, &fine)?;
    let change = relative_change(&m, &m2);
    if change > opts.tolerance {
        return Err(Error::QuadratureNotConverged { change });
    }
    Ok(AveragedM {
        m: m2,
        change: Some(change),
    })
}

/// Largest |Δ entry| / |entry| over the four entries, ignoring exact zeros.
pub fn relative_change(a: &ConversionMatrix, b: &ConversionMatrix) -> f64 {
    a.0.iter()
        .zip(b.0.iter())
        .filter(|(_, y)| y.norm() > 0.0)
        .map(|(x, y)| (x - y).norm() / y.norm())
        .fold(0.0, f64::max)
}
