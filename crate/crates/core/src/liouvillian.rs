//! Six-level master equation in the rotating frame.
//!
//! Density matrices are vectorised by column stacking: entry `ρ[i][j]`
//! (0-based) sits at index `i + 6 j`. With that convention
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`, which fixes every superoperator below.
//! Public accessors that take level numbers use the physical labels 1..=6.

use nalgebra::{DMatrix, DVector, SMatrix};

use crate::error::{Error, Result};
use crate::params::SchemeParams;
use crate::C64;

pub const LEVELS: usize = 6;
pub const DIM: usize = LEVELS * LEVELS;

pub type Matrix6 = SMatrix<C64, LEVELS, LEVELS>;
/// Vectorised density matrix.
pub type StateVector = DVector<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Index of level pair (k, l), 1-based levels, in the vectorised state.
pub fn vec_index(k: usize, l: usize) -> usize {
    debug_assert!((1..=LEVELS).contains(&k) && (1..=LEVELS).contains(&l));
    (k - 1) + LEVELS * (l - 1)
}

/// The pair of signal Rabi frequencies (Ω_M, Ω_L).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignalPair {
    pub omega_m: C64,
    pub omega_l: C64,
}

impl SignalPair {
    pub fn new(omega_m: C64, omega_l: C64) -> Self {
        SignalPair { omega_m, omega_l }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn mm(omega_m: C64) -> Self {
        SignalPair { omega_m, omega_l: ZERO }
    }

    pub fn optical(omega_l: C64) -> Self {
        SignalPair { omega_m: ZERO, omega_l }
    }

    pub fn is_finite(&self) -> bool {
        self.omega_m.is_finite() && self.omega_l.is_finite()
    }

    pub fn scale(&self, factor: C64) -> Self {
        SignalPair {
            omega_m: self.omega_m * factor,
            omega_l: self.omega_l * factor,
        }
    }
}

/// Atomic state, a 6×6 complex matrix indexed by levels 1..=6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub Matrix6);

impl DensityMatrix {
    /// |level⟩⟨level|.
    pub fn pure(level: usize) -> Self {
        let mut m = Matrix6::zeros();
        m[(level - 1, level - 1)] = ONE;
        DensityMatrix(m)
    }

    /// ρ_kl with 1-based level labels.
    pub fn element(&self, k: usize, l: usize) -> C64 {
        self.0[(k - 1, l - 1)]
    }

    pub fn population(&self, k: usize) -> f64 {
        self.element(k, k).re
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// max |ρ − ρ†|.
    pub fn hermiticity_residual(&self) -> f64 {
        (self.0 - self.0.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn to_vector(&self) -> StateVector {
        DVector::from_iterator(DIM, self.0.iter().copied())
    }

    pub fn from_vector(v: &StateVector) -> Self {
        assert_eq!(v.len(), DIM);
        DensityMatrix(Matrix6::from_iterator(v.iter().copied()))
    }
}

/// Linear map on vectorised density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator(pub DMatrix<C64>);

impl Superoperator {
    pub fn zeros() -> Self {
        Superoperator(DMatrix::zeros(DIM, DIM))
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        &self.0 * v
    }

    pub fn apply_to(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_vector(&self.apply(&rho.to_vector()))
    }

    /// Trace row: `t · vec(ρ) = tr ρ`.
    pub fn trace_row() -> DVector<C64> {
        let mut t = DVector::zeros(DIM);
        for k in 1..=LEVELS {
            t[vec_index(k, k)] = ONE;
        }
        t
    }

    /// Largest |tr(unvec(L e_j))| over the basis vectors; zero for a
    /// trace-preserving generator.
    pub fn trace_annihilation_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..DIM {
            let s: C64 = (1..=LEVELS).map(|k| self.0[(vec_index(k, k), j)]).sum();
            worst = worst.max(s.norm());
        }
        worst
    }
}

impl std::ops::Add for Superoperator {
    type Output = Superoperator;

    fn add(self, rhs: Superoperator) -> Superoperator {
        Superoperator(self.0 + rhs.0)
    }
}

/// H/ħ in the rotating frame, in units of γ.
pub fn build_hamiltonian(p: &SchemeParams, s: &SignalPair) -> Matrix6 {
    let mut h = Matrix6::zeros();
    h[(2, 2)] = C64::from(-p.delta_3);
    h[(3, 3)] = C64::from(-p.delta_4);
    h[(4, 4)] = C64::from(-p.delta_5);
    h[(5, 5)] = C64::from(-p.delta_6);
    // −Ω A_kl for (k, l) = (2,1), (3,2), (4,3), (4,5), (5,6), (6,1), plus H.c.
    let couplings = [
        (2, 1, p.omega_p),
        (3, 2, p.omega_r),
        (4, 3, s.omega_m),
        (4, 5, p.omega_c),
        (5, 6, p.omega_a),
        (6, 1, s.omega_l),
    ];
    for (k, l, omega) in couplings {
        h[(k - 1, l - 1)] -= omega;
        h[(l - 1, k - 1)] -= omega.conj();
    }
    h
}

/// The signal part H₁ = −(Ω_M A₄₃ + Ω_L A₆₁) − H.c.
pub fn signal_hamiltonian(s: &SignalPair) -> Matrix6 {
    build_hamiltonian(
        &SchemeParams {
            gamma_rydberg: 0.0,
            ..SchemeParams::dark()
        },
        s,
    )
}

/// −i[H, ·] as a superoperator.
pub fn coherent_part(h: &Matrix6) -> Superoperator {
    let mut l = DMatrix::zeros(DIM, DIM);
    let ht = h.transpose();
    // −i (I ⊗ H − Hᵀ ⊗ I)
    for a in 0..LEVELS {
        for b in 0..LEVELS {
            for c in 0..LEVELS {
                // (I ⊗ H)[(b + 6a), (c + 6a)] = H[b, c]
                l[(b + LEVELS * a, c + LEVELS * a)] += -I * h[(b, c)];
                // (Hᵀ ⊗ I)[(c + 6a), (c + 6b)] = Hᵀ[a, b]
                l[(c + LEVELS * a, c + LEVELS * b)] -= -I * ht[(a, b)];
            }
        }
    }
    Superoperator(l)
}

/// One spontaneous-emission channel `from → to` with its rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayChannel {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

/// 2→1 and 6→1 at γ; 3→2, 4→3, 4→5 and 5→6 at Γ, with the two channels
/// out of level 4 multiplied by `level4_branching`.
pub fn decay_channels(p: &SchemeParams) -> [DecayChannel; 6] {
    let g = p.gamma;
    let r = p.gamma_rydberg;
    let b4 = p.level4_branching;
    [
        DecayChannel {
            from: 2,
            to: 1,
            rate: g,
        },
        DecayChannel {
            from: 3,
            to: 2,
            rate: r,
        },
        DecayChannel {
            from: 4,
            to: 3,
            rate: r * b4,
        },
        DecayChannel {
            from: 4,
            to: 5,
            rate: r * b4,
        },
        DecayChannel {
            from: 5,
            to: 6,
            rate: r,
        },
        DecayChannel {
            from: 6,
            to: 1,
            rate: g,
        },
    ]
}

/// Lindblad dissipator Σ r (c ρ c† − ½{c†c, ρ}) with c = |to⟩⟨from|.
pub fn build_dissipator(channels: &[DecayChannel]) -> Result<Superoperator> {
    let mut l = DMatrix::zeros(DIM, DIM);
    for ch in channels {
        if !(ch.rate >= 0.0) || !ch.rate.is_finite() {
            return Err(Error::invalid(
                format!("decay rate {}→{}", ch.from, ch.to),
                format!("must be non-negative and finite (got {})", ch.rate),
            ));
        }
        if ch.rate == 0.0 {
            continue;
        }
        let r = C64::from(ch.rate);
        let f = ch.from - 1;
        let t = ch.to - 1;
        // jump: ρ_ff feeds ρ_tt
        l[(t + LEVELS * t, f + LEVELS * f)] += r;
        // anticommutator with c†c = |f⟩⟨f|: ρ_kl loses r/2 for each index equal to f
        for a in 0..LEVELS {
            for b in 0..LEVELS {
                let hits = (a == f) as u8 + (b == f) as u8;
                if hits > 0 {
                    l[(a + LEVELS * b, a + LEVELS * b)] -= r * C64::from(0.5 * hits as f64);
                }
            }
        }
    }
    Ok(Superoperator(l))
}

/// Full generator for given auxiliary parameters and signal fields.
pub fn build_liouvillian(p: &SchemeParams, s: &SignalPair) -> Result<Superoperator> {
    p.validate()?;
    if !s.is_finite() {
        return Err(Error::invalid("signal", "must be finite"));
    }
    let h = build_hamiltonian(p, s);
    Ok(coherent_part(&h) + build_dissipator(&decay_channels(p))?)
}

/// Kernel dimension of `l` using the relative singular-value threshold.
pub fn kernel_dimension(l: &Superoperator, threshold: f64) -> usize {
    let sv = l.0.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |m, &x| m.max(x));
    if max == 0.0 {
        return sv.len();
    }
    sv.iter().filter(|&&x| x < threshold * max).count()
}

/// Relative threshold below which a singular value counts as zero.
pub const KERNEL_THRESHOLD: f64 = 1e-8;

/// `L` with its first row replaced by the trace functional, factorised once.
pub struct TraceConstrainedSystem {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: DMatrix<C64>,
}

impl TraceConstrainedSystem {
    pub fn new(l: &Superoperator) -> Self {
        let mut a = l.0.clone();
        let t = Superoperator::trace_row();
        for j in 0..DIM {
            a[(0, j)] = t[j];
        }
        TraceConstrainedSystem {
            lu: a.clone().lu(),
            matrix: a,
        }
    }

    /// Solve `L x = rhs` subject to `tr x = trace`; row 0 of `rhs` is ignored.
    pub fn solve(&self, rhs: &StateVector, trace: C64, operation: &'static str) -> Result<StateVector> {
        let mut b = rhs.clone();
        b[0] = trace;
        match self.lu.solve(&b) {
            Some(x) if x.iter().all(|z| z.is_finite()) => Ok(x),
            _ => {
                let sv = self.matrix.clone().singular_values();
                let min = sv.iter().fold(f64::INFINITY, |m, &x| m.min(x));
                Err(Error::Singular { operation, value: min })
            }
        }
    }
}

/// Unique stationary state of `l`.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let dim = kernel_dimension(l, KERNEL_THRESHOLD);
    if dim > 1 {
        return Err(Error::DegenerateKernel { dimension: dim });
    }
    let sys = TraceConstrainedSystem::new(l);
    let x = sys.solve(&DVector::zeros(DIM), ONE, "steady_state")?;
    Ok(DensityMatrix::from_vector(&x))
}

/// Levels reachable from `start` through non-zero couplings and decay
/// channels, in ascending order.
pub fn reachable_levels(p: &SchemeParams, s: &SignalPair, start: usize) -> Vec<usize> {
    let h = build_hamiltonian(p, s);
    let channels = decay_channels(p);
    let mut seen = [false; LEVELS];
    seen[start - 1] = true;
    let mut stack = vec![start - 1];
    while let Some(k) = stack.pop() {
        let coupled = (0..LEVELS).filter(|&j| j != k && h[(j, k)] != ZERO);
        let decays = channels
            .iter()
            .filter(|c| c.from - 1 == k && c.rate > 0.0)
            .map(|c| c.to - 1);
        for j in coupled.chain(decays).collect::<Vec<_>>() {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    (1..=LEVELS).filter(|&k| seen[k - 1]).collect()
}

/// Stationary state reached from the pure state |start⟩.
///
/// The generator is restricted to the levels reachable from `start`; this
/// subspace is invariant under the dynamics, so levels outside it stay empty.
/// Uniqueness is checked on the restricted generator only, which admits
/// cases such as a bare two-field ladder whose full generator also leaves
/// unreachable, undamped levels stationary.
pub fn steady_state_from(p: &SchemeParams, s: &SignalPair, start: usize) -> Result<DensityMatrix> {
    let l = build_liouvillian(p, s)?;
    let levels = reachable_levels(p, s, start);
    let n = levels.len();
    let idx: Vec<usize> = levels
        .iter()
        .flat_map(|&l2| levels.iter().map(move |&k| vec_index(k, l2)))
        .collect();
    let sub = Superoperator(DMatrix::from_fn(n * n, n * n, |i, j| l.0[(idx[i], idx[j])]));
    let dim = kernel_dimension(&sub, KERNEL_THRESHOLD);
    if dim > 1 {
        return Err(Error::DegenerateKernel { dimension: dim });
    }
    let mut a = sub.0.clone();
    for (j, &l2) in levels.iter().enumerate() {
        for (i, &k) in levels.iter().enumerate() {
            a[(0, i + n * j)] = if k == l2 { ONE } else { ZERO };
        }
    }
    let mut b = DVector::zeros(n * n);
    b[0] = ONE;
    let x = a
        .lu()
        .solve(&b)
        .filter(|x| x.iter().all(|z| z.is_finite()))
        .ok_or(Error::Singular {
            operation: "steady_state_from",
            value: 0.0,
        })?;
    let mut full = DVector::zeros(DIM);
    for (i, &g) in idx.iter().enumerate() {
        full[g] = x[i];
    }
    Ok(DensityMatrix::from_vector(&full))
}

/// Right-hand side of dρ/dt.
pub trait Generator {
    fn apply(&self, t: f64, rho: &StateVector, out: &mut StateVector);
}

impl Generator for Superoperator {
    fn apply(&self, _t: f64, rho: &StateVector, out: &mut StateVector) {
        out.gemv(ONE, &self.0, rho, ZERO);
    }
}

/// A fixed auxiliary-field generator plus time-dependent signal fields.
///
/// The signal term −i[H₁(t), ρ] is applied directly instead of rebuilding a
/// superoperator at every stage.
pub struct DrivenGenerator<'a, F> {
    pub base: &'a Superoperator,
    pub signal: F,
}

impl<F: Fn(f64) -> SignalPair> Generator for DrivenGenerator<'_, F> {
    fn apply(&self, t: f64, rho: &StateVector, out: &mut StateVector) {
        out.gemv(ONE, &self.base.0, rho, ZERO);
        let s = (self.signal)(t);
        // H₁ entries (row, col, value), 0-based
        let entries = [
            (3, 2, -s.omega_m),
            (2, 3, -s.omega_m.conj()),
            (5, 0, -s.omega_l),
            (0, 5, -s.omega_l.conj()),
        ];
        let r = |i: usize, j: usize| rho[i + LEVELS * j];
        for (a, b, h) in entries {
            if h == ZERO {
                continue;
            }
            // (H₁ρ)[a, j] += h ρ[b, j];  (ρH₁)[i, b] += ρ[i, a] h
            for j in 0..LEVELS {
                out[a + LEVELS * j] += -I * h * r(b, j);
            }
            for i in 0..LEVELS {
                out[i + LEVELS * b] -= -I * r(i, a) * h;
            }
        }
    }
}

/// Integrator tolerances and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl IntegrateOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        IntegrateOptions {
            rtol: tol,
            atol: tol,
            initial_step: 1e-2,
            max_step: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

/// Accepted steps of an integration.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl Trajectory {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Combine `y + h Σ aᵢ kᵢ` into `out`.
fn axpy_sum(out: &mut StateVector, y: &StateVector, h: f64, terms: &[(f64, &StateVector)]) {
    out.copy_from(y);
    for &(a, k) in terms {
        if a != 0.0 {
            out.axpy(C64::from(h * a), k, ONE);
        }
    }
}

/// Adaptive Dormand–Prince stepper over `[t0, t1]`.
///
/// `on_step(t_prev, y_prev, f_prev, t, y, f)` is called after every accepted
/// step with the endpoint values and derivatives, which is enough for cubic
/// Hermite interpolation inside the step.
fn dopri<G: Generator>(
    gen: &G,
    y0: StateVector,
    t0: f64,
    t1: f64,
    opts: &IntegrateOptions,
    mut on_step: impl FnMut(f64, &StateVector, &StateVector, f64, &StateVector, &StateVector),
) -> Result<StateVector> {
    let n = y0.len();
    let mut y = y0;
    let mut t = t0;
    let mut k1 = DVector::zeros(n);
    let mut k2 = DVector::zeros(n);
    let mut k3 = DVector::zeros(n);
    let mut k4 = DVector::zeros(n);
    let mut k5 = DVector::zeros(n);
    let mut k6 = DVector::zeros(n);
    let mut k7 = DVector::zeros(n);
    let mut tmp = DVector::zeros(n);
    let mut y_new = DVector::zeros(n);
    gen.apply(t, &y, &mut k1);
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(y);
    }
    let mut h = opts.initial_step.min(span).min(opts.max_step);
    let mut steps = 0usize;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::StepSizeUnderflow { t });
        }
        steps += 1;
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        axpy_sum(&mut tmp, &y, h, &[(A21, &k1)]);
        gen.apply(t + C2 * h, &tmp, &mut k2);
        axpy_sum(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        gen.apply(t + C3 * h, &tmp, &mut k3);
        axpy_sum(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        gen.apply(t + C4 * h, &tmp, &mut k4);
        axpy_sum(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        gen.apply(t + C5 * h, &tmp, &mut k5);
        axpy_sum(
            &mut tmp,
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        gen.apply(t + h, &tmp, &mut k6);
        axpy_sum(
            &mut y_new,
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        gen.apply(t + h, &y_new, &mut k7);

        let mut err = 0.0f64;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err = err.max(e.norm() / scale);
        }
        if !err.is_finite() {
            err = 1e10;
        }
        if err <= 1.0 {
            let t_new = if last { t1 } else { t + h };
            on_step(t, &y, &k1, t_new, &y_new, &k7);
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(opts.max_step);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
    }
    Ok(y)
}

/// Integrate dρ/dt = 𝓛(t)ρ from `rho0` over `t_span`, recording every accepted step.
pub fn integrate<G: Generator>(rho0: &DensityMatrix, gen: &G, t_span: (f64, f64), tol: f64) -> Result<Trajectory> {
    integrate_with(rho0, gen, t_span, &IntegrateOptions::with_tolerance(tol))
}

pub fn integrate_with<G: Generator>(
    rho0: &DensityMatrix,
    gen: &G,
    t_span: (f64, f64),
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        times: vec![t_span.0],
        states: vec![*rho0],
    };
    dopri(gen, rho0.to_vector(), t_span.0, t_span.1, opts, |_, _, _, t, y, _| {
        traj.times.push(t);
        traj.states.push(DensityMatrix::from_vector(y));
    })?;
    Ok(traj)
}

/// Integrate and report the state at each of the (ascending) `times`,
/// interpolating inside accepted steps with cubic Hermite polynomials.
///
/// `sink(index, state)` receives the vectorised state; the integration
/// starts at `times[0]` from `rho0`.
pub fn integrate_sampled<G: Generator>(
    rho0: &DensityMatrix,
    gen: &G,
    times: &[f64],
    opts: &IntegrateOptions,
    mut sink: impl FnMut(usize, &StateVector),
) -> Result<DensityMatrix> {
    if times.is_empty() {
        return Ok(*rho0);
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("times", "must be ascending"));
    }
    let y0 = rho0.to_vector();
    sink(0, &y0);
    let mut next = 1;
    let mut buf = DVector::zeros(DIM);
    let t_end = *times.last().unwrap();
    let y = dopri(gen, y0, times[0], t_end, opts, |ta, ya, fa, tb, yb, fb| {
        let h = tb - ta;
        while next < times.len() && times[next] <= tb {
            let s = (times[next] - ta) / h;
            let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
            let h10 = s * (1.0 - s) * (1.0 - s);
            let h01 = s * s * (3.0 - 2.0 * s);
            let h11 = s * s * (s - 1.0);
            for i in 0..DIM {
                buf[i] = ya[i] * h00 + fa[i] * (h10 * h) + yb[i] * h01 + fb[i] * (h11 * h);
            }
            sink(next, &buf);
            next += 1;
        }
    })?;
    Ok(DensityMatrix::from_vector(&y))
}
