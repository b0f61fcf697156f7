//! Pulsed signals in the co-moving frame.
//!
//! Time τ is measured in the frame moving with the signals, so the input
//! envelope at z = 0 is a function of τ alone and the field equations are
//! ∂_z Ω_M = i η_L b² ρ₄₃(z, τ), ∂_z Ω_L = i η_L ρ₆₁(z, τ).

use log::warn;
use rayon::prelude::*;

use crate::conversion::{assemble_m, transfer_matrix};
use crate::error::{Error, Result};
use crate::liouvillian::{build_liouvillian, integrate_sampled, DrivenGenerator, IntegrateOptions, SignalPair};
use crate::params::SchemeParams;
use crate::perturbation::{adiabaticity_check, first_order_chi, zeroth_order, DEFAULT_ADIABATIC_MARGIN, RHO43, RHO61};
use crate::propagation::Grid1D;
use crate::C64;

/// Largest z step in the co-integrated solution (l_abs).
pub const MAX_DZ: f64 = 0.5;
/// τ step limit as a fraction of the fastest auxiliary period 1/max_rate.
pub const TAU_STEP_FRACTION: f64 = 0.1;
/// Minimum τ nodes per 1/bandwidth.
pub const NODES_PER_BANDWIDTH: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseMode {
    /// Each τ slice propagates independently with the transfer matrix.
    #[default]
    Analytic,
    /// Atoms and fields integrated together on the (τ, z) lattice.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseOptions {
    pub mode: PulseMode,
    /// Store every `z_stride`-th z node (the last node is always stored).
    pub z_stride: usize,
    /// Relative tolerance of the atomic integration (oracle mode).
    pub tol: f64,
    /// Envelope bandwidth in units of γ, used for the resolution and
    /// adiabaticity checks when given.
    pub bandwidth: Option<f64>,
}

impl Default for PulseOptions {
    fn default() -> Self {
        PulseOptions {
            mode: PulseMode::Analytic,
            z_stride: 1,
            tol: 1e-8,
            bandwidth: None,
        }
    }
}

/// Field maps on the stored z nodes, `fields[k][i]` at z[k], τ[i].
#[derive(Debug, Clone)]
pub struct PulseResult {
    pub z: Vec<f64>,
    pub tau: Vec<f64>,
    pub fields: Vec<Vec<SignalPair>>,
    pub b_squared: f64,
}

impl PulseResult {
    pub fn input(&self) -> &[SignalPair] {
        &self.fields[0]
    }

    pub fn output(&self) -> &[SignalPair] {
        &self.fields[self.fields.len() - 1]
    }

    /// Photon numbers (mm, optical) of a slice, ∫|Ω_M|²/b² dτ and ∫|Ω_L|² dτ.
    pub fn photon_numbers(&self, k: usize) -> (f64, f64) {
        let dt = self.tau[1] - self.tau[0];
        self.fields[k].iter().fold((0.0, 0.0), |(m, l), s| {
            (
                m + s.omega_m.norm_sqr() / self.b_squared * dt,
                l + s.omega_l.norm_sqr() * dt,
            )
        })
    }

    /// Converted photon number at the last node over the total input photon
    /// number, for input in a single port.
    pub fn energy_efficiency(&self) -> f64 {
        let (m0, l0) = self.photon_numbers(0);
        let (m1, l1) = self.photon_numbers(self.fields.len() - 1);
        if m0 >= l0 {
            l1 / (m0 + l0)
        } else {
            m1 / (m0 + l0)
        }
    }
}

/// Gaussian envelope amplitude·exp(−τ²/(2T²)) with T = 1/bandwidth in a single port.
pub fn gaussian_pulse(tau: &Grid1D, amplitude: C64, bandwidth: f64, optical: bool) -> Vec<SignalPair> {
    let t = 1.0 / bandwidth;
    tau.nodes
        .iter()
        .map(|&x| {
            let a = amplitude * (-(x * x) / (2.0 * t * t)).exp();
            if optical {
                SignalPair::optical(a)
            } else {
                SignalPair::mm(a)
            }
        })
        .collect()
}

/// Normalised cross-correlation of the amplitude profiles, maximised over an
/// integer lag. Returns (correlation, lag in samples of `b` relative to `a`).
pub fn cross_correlation(a: &[f64], b: &[f64]) -> (f64, isize) {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return (0.0, 0);
    }
    let n = a.len() as isize;
    let m = b.len() as isize;
    let mut best = (f64::NEG_INFINITY, 0);
    for lag in -(n - 1)..m {
        let mut acc = 0.0;
        for (i, &x) in a.iter().enumerate() {
            let j = i as isize + lag;
            if (0..m).contains(&j) {
                acc += x * b[j as usize];
            }
        }
        if acc > best.0 {
            best = (acc, lag);
        }
    }
    (best.0 / (na * nb), best.1)
}

fn check_resolution(p: &SchemeParams, tau: &Grid1D, z: &Grid1D, opts: &PulseOptions) -> Result<()> {
    let dt = tau.step();
    let limit = TAU_STEP_FRACTION / p.max_rate();
    if dt > limit * (1.0 + 1e-9) {
        return Err(Error::Resolution(format!("tau step {dt:e} exceeds {limit:e}")));
    }
    if let Some(bw) = opts.bandwidth {
        if bw > 0.0 && dt * bw * NODES_PER_BANDWIDTH > 1.0 + 1e-9 {
            return Err(Error::Resolution(format!(
                "tau step {dt:e} gives fewer than {NODES_PER_BANDWIDTH} nodes per 1/bandwidth"
            )));
        }
    }
    if opts.mode == PulseMode::Oracle && z.step() > MAX_DZ * (1.0 + 1e-9) {
        return Err(Error::Resolution(format!("z step {:e} exceeds {MAX_DZ}", z.step())));
    }
    Ok(())
}

fn stored(n: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

/// Propagate a pulse given on the τ grid through the z grid.
pub fn propagate_pulse_1d(
    p: &SchemeParams,
    input: &[SignalPair],
    tau: &Grid1D,
    z: &Grid1D,
    opts: &PulseOptions,
) -> Result<PulseResult> {
    p.validate()?;
    if input.len() != tau.len() {
        return Err(Error::invalid("input", "envelope length must match the tau grid"));
    }
    if input.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("input", "envelope must be finite"));
    }
    if z.start() != 0.0 {
        return Err(Error::invalid("z", "grid must start at the medium entrance"));
    }
    check_resolution(p, tau, z, opts)?;
    let keep = stored(z.len(), opts.z_stride);
    let fields = match opts.mode {
        PulseMode::Analytic => {
            if let Some(bw) = opts.bandwidth {
                let report = adiabaticity_check(p, bw, DEFAULT_ADIABATIC_MARGIN)?;
                if !report.passed {
                    warn!(
                        "bandwidth {:e} is not small against the auxiliary scale {:e}; the per-slice solution is approximate",
                        bw, report.min_scale
                    );
                }
            }
            analytic(p, input, z, &keep)?
        }
        PulseMode::Oracle => oracle(p, input, tau, z, &keep, opts.tol)?,
    };
    Ok(PulseResult {
        z: keep.iter().map(|&k| z.nodes[k]).collect(),
        tau: tau.nodes.clone(),
        fields,
        b_squared: p.b_squared,
    })
}

fn analytic(p: &SchemeParams, input: &[SignalPair], z: &Grid1D, keep: &[usize]) -> Result<Vec<Vec<SignalPair>>> {
    let m = assemble_m(&first_order_chi(p)?, p.b_squared, p.eta_l);
    let transfers: Vec<_> = keep.iter().map(|&k| transfer_matrix(&m, z.nodes[k])).collect();
    Ok(transfers
        .par_iter()
        .map(|t| {
            input
                .iter()
                .map(|s| {
                    SignalPair::new(
                        t[(0, 0)] * s.omega_m + t[(0, 1)] * s.omega_l,
                        t[(1, 0)] * s.omega_m + t[(1, 1)] * s.omega_l,
                    )
                })
                .collect()
        })
        .collect())
}

/// Source i η_L (b² ρ₄₃, ρ₆₁)(τ) for a given field slice.
struct AtomCell<'a> {
    p: &'a SchemeParams,
    l0: crate::liouvillian::Superoperator,
    rho0: crate::liouvillian::DensityMatrix,
    tau: &'a Grid1D,
    tol: f64,
}

impl AtomCell<'_> {
    fn source(&self, field: &[SignalPair]) -> Result<Vec<SignalPair>> {
        let t0 = self.tau.start();
        let dt = (self.tau.end() - t0) / (self.tau.len() - 1) as f64;
        let last = field.len() - 1;
        let signal = |t: f64| {
            let x = ((t - t0) / dt).clamp(0.0, last as f64);
            let i = (x.floor() as usize).min(last.saturating_sub(1));
            let w = x - i as f64;
            let (a, b) = (field[i], field[(i + 1).min(last)]);
            SignalPair::new(
                a.omega_m * (1.0 - w) + b.omega_m * w,
                a.omega_l * (1.0 - w) + b.omega_l * w,
            )
        };
        let peak = field
            .iter()
            .map(|s| s.omega_m.norm().max(s.omega_l.norm()))
            .fold(0.0, f64::max);
        let mut opts = IntegrateOptions::with_tolerance(self.tol);
        opts.atol = self.tol * peak.max(f64::MIN_POSITIVE);
        let gen = DrivenGenerator { base: &self.l0, signal };
        let i_eta = C64::new(0.0, self.p.eta_l);
        let b2 = self.p.b_squared;
        let mut out = vec![SignalPair::zero(); field.len()];
        integrate_sampled(&self.rho0, &gen, &self.tau.nodes, &opts, |k, v| {
            out[k] = SignalPair::new(i_eta * b2 * v[RHO43], i_eta * v[RHO61]);
        })?;
        Ok(out)
    }
}

fn oracle(
    p: &SchemeParams,
    input: &[SignalPair],
    tau: &Grid1D,
    z: &Grid1D,
    keep: &[usize],
    tol: f64,
) -> Result<Vec<Vec<SignalPair>>> {
    let cell = AtomCell {
        p,
        l0: build_liouvillian(p, &SignalPair::zero())?,
        rho0: zeroth_order(p)?,
        tau,
        tol,
    };
    let axpy = |a: &[SignalPair], b: &[SignalPair], h: f64| -> Vec<SignalPair> {
        a.iter()
            .zip(b)
            .map(|(x, y)| SignalPair::new(x.omega_m + y.omega_m * h, x.omega_l + y.omega_l * h))
            .collect()
    };
    let flux = |f: &[SignalPair]| {
        f.iter()
            .map(|s| s.omega_m.norm_sqr() / p.b_squared + s.omega_l.norm_sqr())
            .sum::<f64>()
    };

    let mut out = Vec::with_capacity(keep.len());
    let mut next_keep = 0;
    let mut field = input.to_vec();
    let mut src = cell.source(&field)?;
    for j in 0..z.len() {
        if next_keep < keep.len() && keep[next_keep] == j {
            out.push(field.clone());
            next_keep += 1;
        }
        if j + 1 == z.len() {
            break;
        }
        let h = z.nodes[j + 1] - z.nodes[j];
        let predicted = axpy(&field, &src, h);
        let src_next = cell.source(&predicted)?;
        let mean: Vec<SignalPair> = src
            .iter()
            .zip(&src_next)
            .map(|(a, b)| SignalPair::new((a.omega_m + b.omega_m) * 0.5, (a.omega_l + b.omega_l) * 0.5))
            .collect();
        let updated = axpy(&field, &mean, h);
        let (before, after) = (flux(&field), flux(&updated));
        if before > 0.0 && after > before * 1.01 {
            return Err(Error::Instability {
                operation: "pulse propagation",
                detail: format!(
                    "photon flux grew by {:.3}% at z = {}",
                    100.0 * (after / before - 1.0),
                    z.nodes[j + 1]
                ),
            });
        }
        field = updated;
        src = src_next;
    }
    Ok(out)
}
