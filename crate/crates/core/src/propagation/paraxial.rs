//! Focussed beams in a cloud with a Gaussian transverse density profile.
//!
//! Cylindrical symmetry, lengths in µm. Each port obeys
//! ∂_z Ω = (i/2k) Δ⊥ Ω + i ℳ(r) Ω, with ℳ(r) = ℳ₀ N(r)/N⁽⁰⁾ / l_abs.

use std::f64::consts::PI;

use log::warn;
use nalgebra::Matrix2;

use crate::conversion::{assemble_m, efficiency_report, transfer_matrix, ConversionMatrix, EfficiencyReport};
use crate::error::{Error, Result};
use crate::params::{PhysicalPreset, SchemeParams};
use crate::perturbation::{closed_form_coefficients, first_order_chi};
use crate::C64;

/// Largest dz as a fraction of the shortest Rayleigh length.
pub const MAX_DZ_RAYLEIGH: f64 = 1.0 / 50.0;
/// Minimum radial cells per beam or cloud width.
pub const MIN_CELLS_PER_SIGMA: f64 = 8.0;
/// Boundary-to-peak intensity above which the far boundary is reported.
pub const BOUNDARY_WARNING: f64 = 1e-6;
/// Largest tolerated growth of the total photon flux over one step.
pub const MAX_FLUX_GROWTH: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    /// mm-wave signal.
    M,
    /// Optical signal.
    L,
}

/// Gaussian input beam Ω(r) = peak·e^{−r²/σ²} at z = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    /// Waist σ (µm).
    pub sigma: f64,
    /// Peak Rabi frequency (units of γ).
    pub peak: C64,
    pub port: Port,
}

impl BeamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", "beam waist must be positive"));
        }
        if !(self.peak.re.is_finite() && self.peak.im.is_finite()) {
            return Err(Error::invalid("peak", "must be finite"));
        }
        Ok(())
    }
}

/// Atom cloud with density N⁽⁰⁾ e^{−2r²/σ_c²}, uniform over z ∈ [0, length].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudSpec {
    /// Peak density N⁽⁰⁾ (1/m³).
    pub peak_density: f64,
    /// Width σ_c (µm).
    pub sigma_c: f64,
    /// Medium length (µm); `None` selects the complete-conversion length of
    /// the on-axis parameters.
    pub length: Option<f64>,
}

impl CloudSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_density > 0.0 && self.peak_density.is_finite()) {
            return Err(Error::invalid("peak_density", "must be positive"));
        }
        if !(self.sigma_c > 0.0 && self.sigma_c.is_finite()) {
            return Err(Error::invalid("sigma_c", "must be positive"));
        }
        if let Some(l) = self.length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::invalid("length", "must be positive"));
            }
        }
        Ok(())
    }

    /// N(r)/N⁽⁰⁾.
    pub fn profile(&self, r: f64) -> f64 {
        (-2.0 * r * r / (self.sigma_c * self.sigma_c)).exp()
    }
}

/// Field samples at the cell centres r_i = (i + ½) dr.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub dr: f64,
    pub values: Vec<C64>,
    pub z: f64,
    /// Wavenumber (1/µm).
    pub k: f64,
}

impl RadialField {
    pub fn new(dr: f64, values: Vec<C64>, k: f64) -> Result<Self> {
        if !(dr > 0.0) || values.is_empty() {
            return Err(Error::invalid("dr", "needs a positive spacing and at least one cell"));
        }
        if !(k > 0.0) {
            return Err(Error::invalid("k", "wavenumber must be positive"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        Ok(RadialField { dr, values, z: 0.0, k })
    }

    /// Gaussian amplitude·e^{−r²/σ²} on `n` cells.
    pub fn gaussian(dr: f64, n: usize, sigma: f64, amplitude: C64, k: f64) -> Result<Self> {
        let values = (0..n)
            .map(|i| {
                let r = (i as f64 + 0.5) * dr;
                amplitude * (-(r * r) / (sigma * sigma)).exp()
            })
            .collect();
        Self::new(dr, values, k)
    }

    pub fn radius(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr
    }

    pub fn r_max(&self) -> f64 {
        self.values.len() as f64 * self.dr
    }

    /// ∫|Ω|² r dr; the transverse power is 2π times this.
    pub fn power(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v.norm_sqr() * self.radius(i) * self.dr)
            .sum()
    }

    /// Second-moment width sqrt(2⟨r²⟩), equal to w for |Ω|² ∝ e^{−2r²/w²}.
    pub fn width(&self) -> f64 {
        let p = self.power();
        if p == 0.0 {
            return 0.0;
        }
        let m2: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let r = self.radius(i);
                v.norm_sqr() * r * r * r * self.dr
            })
            .sum();
        (2.0 * m2 / p).sqrt()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Gaussian beam radius σ sqrt(1 + (z/z_R)²) with z_R = πσ²/λ.
pub fn gaussian_beam_width(sigma: f64, lambda: f64, z: f64) -> f64 {
    let zr = rayleigh_length(sigma, lambda);
    sigma * (1.0 + (z / zr).powi(2)).sqrt()
}

pub fn rayleigh_length(sigma: f64, lambda: f64) -> f64 {
    PI * sigma * sigma / lambda
}

/// Crank-Nicolson half step of (i/2k)Δ⊥ with the tridiagonal left-hand side
/// factored once.
#[derive(Debug, Clone)]
struct Diffraction {
    lower: Vec<C64>,
    diag: Vec<C64>,
    upper: Vec<C64>,
    // Thomas elimination of the left-hand side I − (h/2)A
    c_prime: Vec<C64>,
    denom: Vec<C64>,
    lhs_lower: Vec<C64>,
}

impl Diffraction {
    /// Operator A = (i/2k)Δ⊥ advanced by `h` with the trapezoidal rule.
    fn new(n: usize, dr: f64, k: f64, h: f64) -> Self {
        let g = C64::new(0.0, 1.0 / (2.0 * k));
        let mut lower = vec![C64::new(0.0, 0.0); n];
        let mut diag = vec![C64::new(0.0, 0.0); n];
        let mut upper = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            let r = (i as f64 + 0.5) * dr;
            let face_in = i as f64 * dr;
            let face_out = (i as f64 + 1.0) * dr;
            let lo = face_in / (r * dr * dr);
            let up = face_out / (r * dr * dr);
            // cells beyond the last are held at zero
            lower[i] = g * lo * (0.5 * h);
            upper[i] = g * up * (0.5 * h);
            diag[i] = -g * (lo + up) * (0.5 * h);
        }
        let one = C64::new(1.0, 0.0);
        let mut c_prime = vec![C64::new(0.0, 0.0); n];
        let mut denom = vec![C64::new(0.0, 0.0); n];
        let lhs_lower: Vec<C64> = lower.iter().map(|x| -x).collect();
        for i in 0..n {
            let b = one - diag[i];
            let d = if i == 0 { b } else { b - lhs_lower[i] * c_prime[i - 1] };
            denom[i] = d;
            c_prime[i] = -upper[i] / d;
        }
        Diffraction {
            lower,
            diag,
            upper,
            c_prime,
            denom,
            lhs_lower,
        }
    }

    fn apply(&self, v: &mut [C64], scratch: &mut Vec<C64>) {
        let n = v.len();
        scratch.clear();
        for i in 0..n {
            let mut x = v[i] * (C64::new(1.0, 0.0) + self.diag[i]);
            if i > 0 {
                x += self.lower[i] * v[i - 1];
            }
            if i + 1 < n {
                x += self.upper[i] * v[i + 1];
            }
            scratch.push(x);
        }
        // forward sweep
        for i in 0..n {
            let prev = if i == 0 { C64::new(0.0, 0.0) } else { scratch[i - 1] };
            scratch[i] = (scratch[i] - self.lhs_lower[i] * prev) / self.denom[i];
        }
        v[n - 1] = scratch[n - 1];
        for i in (0..n - 1).rev() {
            v[i] = scratch[i] - self.c_prime[i] * v[i + 1];
        }
    }
}

/// Precomputed split-step propagator for a fixed grid and dz.
#[derive(Debug, Clone)]
pub struct ParaxialStepper {
    pub dz: f64,
    b_squared: f64,
    diff_m: Diffraction,
    diff_l: Diffraction,
    transfer: Vec<Matrix2<C64>>,
}

impl ParaxialStepper {
    /// `m_of_r` holds ℳ in 1/µm at each cell centre.
    pub fn new(dr: f64, k_m: f64, k_l: f64, m_of_r: &[ConversionMatrix], dz: f64, b_squared: f64) -> Result<Self> {
        if !(dz > 0.0) || !(dr > 0.0) {
            return Err(Error::invalid("dz", "steps must be positive"));
        }
        let n = m_of_r.len();
        Ok(ParaxialStepper {
            dz,
            b_squared,
            diff_m: Diffraction::new(n, dr, k_m, 0.5 * dz),
            diff_l: Diffraction::new(n, dr, k_l, 0.5 * dz),
            transfer: m_of_r.iter().map(|m| transfer_matrix(m, dz)).collect(),
        })
    }

    fn flux(&self, m: &RadialField, l: &RadialField) -> f64 {
        m.power() / self.b_squared + l.power()
    }

    /// Half diffraction, full source, half diffraction.
    pub fn step(&self, m: &mut RadialField, l: &mut RadialField) -> Result<()> {
        let n = self.transfer.len();
        if m.values.len() != n || l.values.len() != n {
            return Err(Error::invalid("fields", "length must match the radial grid"));
        }
        let before = self.flux(m, l);
        let mut scratch = Vec::with_capacity(n);
        self.diff_m.apply(&mut m.values, &mut scratch);
        self.diff_l.apply(&mut l.values, &mut scratch);
        for (i, t) in self.transfer.iter().enumerate() {
            let (a, b) = (m.values[i], l.values[i]);
            m.values[i] = t[(0, 0)] * a + t[(0, 1)] * b;
            l.values[i] = t[(1, 0)] * a + t[(1, 1)] * b;
        }
        self.diff_m.apply(&mut m.values, &mut scratch);
        self.diff_l.apply(&mut l.values, &mut scratch);
        m.z += self.dz;
        l.z += self.dz;
        let after = self.flux(m, l);
        if !after.is_finite() || (before > 0.0 && after > before * (1.0 + MAX_FLUX_GROWTH)) {
            return Err(Error::Instability {
                operation: "paraxial step",
                detail: format!("photon flux grew from {before:e} to {after:e} at z = {} µm", m.z),
            });
        }
        Ok(())
    }
}

/// One split step of both fields through ℳ(r) (1/µm).
pub fn paraxial_step(
    m: &mut RadialField,
    l: &mut RadialField,
    m_of_r: &[ConversionMatrix],
    dz: f64,
    b_squared: f64,
) -> Result<()> {
    ParaxialStepper::new(m.dr, m.k, l.k, m_of_r, dz, b_squared)?.step(m, l)
}

/// Grid actually used by a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaxialGrid {
    pub dr: f64,
    pub n_r: usize,
    pub dz: f64,
    pub n_z: usize,
}

impl ParaxialGrid {
    pub fn r_max(&self) -> f64 {
        self.dr * self.n_r as f64
    }

    pub fn length(&self) -> f64 {
        self.dz * self.n_z as f64
    }
}

/// Overrides of the automatic grid; lengths in µm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParaxialOptions {
    pub dr: Option<f64>,
    pub dz: Option<f64>,
    pub r_max: Option<f64>,
    /// Multiplies the automatic dr and dz (0.5 halves both).
    pub refine: f64,
    /// Number of stored z slices besides the entrance.
    pub snapshots: usize,
}

impl Default for ParaxialOptions {
    fn default() -> Self {
        ParaxialOptions {
            dr: None,
            dz: None,
            r_max: None,
            refine: 1.0,
            snapshots: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParaxialResult {
    pub grid: ParaxialGrid,
    /// Cell centres (µm).
    pub r: Vec<f64>,
    /// Stored z positions (µm).
    pub z: Vec<f64>,
    /// |Ω_M|² and |Ω_L|² at the stored positions.
    pub intensity_m: Vec<Vec<f64>>,
    pub intensity_l: Vec<Vec<f64>>,
    pub field_m: RadialField,
    pub field_l: RadialField,
    /// Absorption length at the peak density (µm).
    pub l_abs: f64,
    /// Converted power fraction in photon-number units.
    pub efficiency: f64,
    /// One-dimensional figures of merit of the on-axis parameters.
    pub on_axis: EfficiencyReport,
    /// Largest boundary-to-peak intensity ratio seen during the run.
    pub boundary_ratio: f64,
}

/// Absorption length (µm) at `density` from the preset reference.
pub fn absorption_length_um(preset: &PhysicalPreset, density: f64) -> f64 {
    preset.l_abs * 1e6 * preset.atom_density / density
}

/// Propagate a Gaussian beam through the cloud and report the efficiency
/// F = b²P_L(L)/P_M(0) for mm input, P_M(L)/(b²P_L(0)) for optical input.
pub fn run_paraxial_scenario(
    beam: &BeamSpec,
    cloud: &CloudSpec,
    p: &SchemeParams,
    preset: &PhysicalPreset,
    opts: &ParaxialOptions,
) -> Result<ParaxialResult> {
    beam.validate()?;
    cloud.validate()?;
    p.validate()?;
    if !(opts.refine > 0.0) {
        return Err(Error::invalid("refine", "must be positive"));
    }
    let l_abs = absorption_length_um(preset, cloud.peak_density);
    let m0 = assemble_m(&first_order_chi(p)?, p.b_squared, p.eta_l);
    let coeffs = closed_form_coefficients(p)?;
    let on_axis = efficiency_report(&coeffs, None)?;
    let length = cloud.length.unwrap_or(on_axis.d_c * l_abs);

    let lambda_m = preset.lambda_m * 1e6;
    let lambda_l = preset.lambda_l * 1e6;
    let (k_m, k_l) = (2.0 * PI / lambda_m, 2.0 * PI / lambda_l);
    let narrow = beam.sigma.min(cloud.sigma_c);
    // the generated mm-wave is at most as wide as the narrower of beam and cloud
    let z_r = rayleigh_length(narrow, lambda_m);

    let dr = opts.dr.unwrap_or(narrow / 32.0 * opts.refine);
    if narrow / dr < MIN_CELLS_PER_SIGMA {
        return Err(Error::Resolution(format!(
            "dr = {dr} µm gives fewer than {MIN_CELLS_PER_SIGMA} cells per width {narrow} µm"
        )));
    }
    let dz_target = opts.dz.unwrap_or((z_r / 100.0).min(length / 200.0) * opts.refine);
    if dz_target > z_r * MAX_DZ_RAYLEIGH * (1.0 + 1e-9) {
        return Err(Error::Resolution(format!(
            "dz = {dz_target} µm exceeds z_R/50 = {} µm",
            z_r * MAX_DZ_RAYLEIGH
        )));
    }
    let n_z = (length / dz_target).ceil().max(1.0) as usize;
    let dz = length / n_z as f64;

    let spread = gaussian_beam_width(narrow, lambda_m, length).max(gaussian_beam_width(
        beam.sigma,
        if beam.port == Port::M { lambda_m } else { lambda_l },
        length,
    ));
    let r_max = opts.r_max.unwrap_or(6.0 * beam.sigma.max(cloud.sigma_c).max(spread));
    if r_max < 4.0 * beam.sigma.max(cloud.sigma_c) {
        return Err(Error::Resolution(format!("r_max = {r_max} µm is below 4 widths")));
    }
    let n_r = (r_max / dr).ceil() as usize;
    let grid = ParaxialGrid { dr, n_r, dz, n_z };

    let m_of_r: Vec<ConversionMatrix> = (0..n_r)
        .map(|i| m0.scale(cloud.profile((i as f64 + 0.5) * dr) / l_abs))
        .collect();
    let stepper = ParaxialStepper::new(dr, k_m, k_l, &m_of_r, dz, p.b_squared)?;

    let zero = C64::new(0.0, 0.0);
    let (mut fm, mut fl) = match beam.port {
        Port::M => (
            RadialField::gaussian(dr, n_r, beam.sigma, beam.peak, k_m)?,
            RadialField::new(dr, vec![zero; n_r], k_l)?,
        ),
        Port::L => (
            RadialField::new(dr, vec![zero; n_r], k_m)?,
            RadialField::gaussian(dr, n_r, beam.sigma, beam.peak, k_l)?,
        ),
    };
    let p_in = match beam.port {
        Port::M => fm.power(),
        Port::L => fl.power(),
    };
    if p_in == 0.0 {
        return Err(Error::invalid("peak", "input beam carries no power"));
    }

    let every = (n_z / opts.snapshots.max(1)).max(1);
    let mut z = vec![0.0];
    let mut intensity_m = vec![fm.intensity()];
    let mut intensity_l = vec![fl.intensity()];
    let mut boundary_ratio: f64 = 0.0;
    let edge = |f: &RadialField| {
        let peak = f.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        if peak > 0.0 {
            f.values[f.values.len() - 1].norm_sqr() / peak
        } else {
            0.0
        }
    };
    for j in 1..=n_z {
        stepper.step(&mut fm, &mut fl)?;
        boundary_ratio = boundary_ratio.max(edge(&fm)).max(edge(&fl));
        if j % every == 0 || j == n_z {
            z.push(j as f64 * dz);
            intensity_m.push(fm.intensity());
            intensity_l.push(fl.intensity());
        }
    }
    if boundary_ratio > BOUNDARY_WARNING {
        warn!("boundary intensity reached {boundary_ratio:e} of the peak; consider a larger r_max");
    }
    let efficiency = match beam.port {
        Port::M => p.b_squared * fl.power() / p_in,
        Port::L => fm.power() / (p.b_squared * p_in),
    };
    Ok(ParaxialResult {
        grid,
        r: (0..n_r).map(|i| (i as f64 + 0.5) * dr).collect(),
        z,
        intensity_m,
        intensity_l,
        field_m: fm,
        field_l: fl,
        l_abs,
        efficiency,
        on_axis,
        boundary_ratio,
    })
}
