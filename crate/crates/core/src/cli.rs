//! Scenario runner behind the `mmoc` binary.
//!
//! Every scenario reads its keys from a [`Config`], writes plot-ready CSV
//! into the output directory and returns a [`RunSummary`] of scalar results.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::config::{Config, ConfigError, KNOWN_KEYS};
use crate::conversion::{assemble_m, efficiency_at_depth, efficiency_report, flux_bookkeeping, propagate_exact};
use crate::liouvillian::{build_liouvillian, steady_state, SignalPair, LEVELS};
use crate::output::{RunSummary, Table};
use crate::params::{derive_c6_and_d43, InteractionMarkers, PhysicalPreset, SchemeParams};
use crate::perturbation::{
    beam_splitter_conditions, closed_form_coefficients, first_order_chi, zeroth_order, BeamSplitterOptions,
};
use crate::propagation::{
    cross_correlation, gaussian_pulse, propagate_cw_1d, propagate_cw_oracle, propagate_pulse_1d, run_paraxial_scenario,
    BeamSpec, CloudSpec, CwProfile, Grid1D, ParaxialOptions, Port, PulseMode, PulseOptions,
};
use crate::rydberg::{
    averaged_m, blockade_radius, r90, rydberg_density, AngularMode, DipoleOrientation, InteractionParams,
    NeighbourDistribution, QuadratureOptions,
};
use crate::{Error, C64};

/// Pulse bandwidth 2π×80 kHz in units of γ = 2π×6.1 MHz.
pub const DEFAULT_PULSE_BANDWIDTH: f64 = 80.0 / 6100.0;
/// Relaxation rates Γ/γ of the efficiency curves.
pub const LOSS_SWEEP_GAMMA_RATIOS: [f64; 3] = [3.9e-3, 1e-3, 3.8e-4];

#[derive(Debug, Parser)]
#[command(
    name = "mmoc",
    version,
    about = "Millimetre-wave to optical conversion in Rydberg gases"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override a key, e.g. `--set scheme.delta_4=2.5` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Use the full master-equation solution for 1D runs.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Steady state of the master equation.
    Steady,
    /// Linear susceptibilities and beam-splitter coefficients.
    Chi,
    /// Complete-conversion efficiency at an optical depth.
    Efficiency,
    /// Stationary fields along z.
    Cw1d,
    /// Pulse propagation in the co-moving frame.
    Pulse1d,
    /// Focussed beam in a cloud with a transverse density profile.
    Paraxial,
    /// Interaction-averaged conversion matrix.
    RydbergAverage,
    /// One scenario over a range of one parameter.
    Sweep,
    /// Data behind a figure.
    Figure {
        #[arg(value_enum)]
        which: Figure,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig6,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{operation}: {source}")]
    Numerical {
        operation: &'static str,
        #[source]
        source: Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for configuration and file problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => 2,
            _ => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

trait Context<T> {
    fn op(self, operation: &'static str) -> CliResult<T>;
}

impl<T> Context<T> for crate::Result<T> {
    fn op(self, operation: &'static str) -> CliResult<T> {
        self.map_err(|source| match source {
            // parameter errors trace back to configuration values
            Error::InvalidParameter { name, reason } => CliError::Config(ConfigError::Value {
                key: name,
                message: format!("{operation}: {reason}"),
            }),
            source => CliError::Numerical { operation, source },
        })
    }
}

/// Where a scenario writes its tables, if anywhere.
#[derive(Debug, Clone, Copy)]
pub struct Sink<'a> {
    pub dir: Option<&'a Path>,
}

impl Sink<'_> {
    fn write(&self, name: &str, table: &Table) -> CliResult<()> {
        if let Some(dir) = self.dir {
            let path = dir.join(name);
            table.write(&path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(())
    }
}

/// Load the configuration named on the command line and apply overrides.
pub fn load_config(cli: &Cli) -> CliResult<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.set(s)?;
    }
    Ok(cfg)
}

/// Run the command and write `summary.txt`, also when the run fails.
pub fn run(cli: &Cli) -> CliResult<RunSummary> {
    if let Some(n) = cli.threads {
        // fails only when a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    std::fs::create_dir_all(&cli.out).map_err(|source| CliError::Io {
        path: cli.out.display().to_string(),
        source,
    })?;
    let name = command_name(&cli.command);
    let result = load_config(cli).and_then(|cfg| {
        let sink = Sink { dir: Some(&cli.out) };
        run_command(&cli.command, &cfg, cli.oracle, sink)
    });
    let summary = match &result {
        Ok(s) => s.clone(),
        Err(e) => {
            let mut s = RunSummary::new(name, &Config::default());
            s.note(format!("error: {e}"));
            s.add("exit_code", e.exit_code() as f64, "1");
            s
        }
    };
    let path = cli.out.join("summary.txt");
    summary.write(&path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    result
}

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Steady => "steady",
        Command::Chi => "chi",
        Command::Efficiency => "efficiency",
        Command::Cw1d => "cw1d",
        Command::Pulse1d => "pulse1d",
        Command::Paraxial => "paraxial",
        Command::RydbergAverage => "rydberg-average",
        Command::Sweep => "sweep",
        Command::Figure { which: Figure::Fig2 } => "fig2",
        Command::Figure { which: Figure::Fig3 } => "fig3",
        Command::Figure { which: Figure::Fig4 } => "fig4",
        Command::Figure { which: Figure::Fig6 } => "fig6",
    }
}

pub fn run_command(c: &Command, cfg: &Config, oracle: bool, sink: Sink) -> CliResult<RunSummary> {
    match c {
        Command::Steady => steady(cfg, sink),
        Command::Chi => chi(cfg, sink),
        Command::Efficiency => efficiency(cfg),
        Command::Cw1d => cw1d(cfg, oracle, sink, "cw1d.csv"),
        Command::Pulse1d => pulse1d(cfg, oracle, sink, "pulse1d"),
        Command::Paraxial => paraxial(cfg, sink, "paraxial.csv"),
        Command::RydbergAverage => rydberg_average(cfg),
        Command::Sweep => sweep(cfg, oracle, sink),
        Command::Figure { which } => figure(*which, cfg, oracle, sink),
    }
}

fn levels_label(k: usize, l: usize) -> String {
    format!("rho_{k}{l}")
}

pub fn steady(cfg: &Config, sink: Sink) -> CliResult<RunSummary> {
    let (p, _) = cfg.parameters()?;
    let zero = C64::new(0.0, 0.0);
    let s = SignalPair::new(
        cfg.complex_or("steady.omega_m", zero)?,
        cfg.complex_or("steady.omega_l", zero)?,
    );
    let rho = if s == SignalPair::zero() {
        zeroth_order(&p).op("zeroth-order steady state")?
    } else {
        steady_state(&build_liouvillian(&p, &s).op("Liouvillian")?).op("steady state")?
    };
    let mut t = Table::new(&["row", "col", "re", "im"]);
    t.comment("steady-state density matrix, levels 1..6").echo_config(cfg);
    for j in 1..=LEVELS {
        for i in 1..=LEVELS {
            let v = rho.element(i, j);
            t.push(vec![i as f64, j as f64, v.re, v.im]);
        }
    }
    sink.write("steady_state.csv", &t)?;
    let mut sum = RunSummary::new("steady", cfg);
    for k in 1..=LEVELS {
        sum.add(&levels_label(k, k), rho.population(k), "1");
    }
    let c31 = rho.element(3, 1);
    sum.add("rho_31_re", c31.re, "1").add("rho_31_im", c31.im, "1");
    sum.add("trace_residual", (rho.trace() - 1.0).norm(), "1");
    sum.add("hermiticity_residual", rho.hermiticity_residual(), "1");
    sum.add("min_eigenvalue", rho.min_eigenvalue(), "1");
    Ok(sum)
}

pub fn chi(cfg: &Config, sink: Sink) -> CliResult<RunSummary> {
    let (p, _) = cfg.parameters()?;
    let chi = first_order_chi(&p).op("first-order susceptibilities")?;
    let coeffs = closed_form_coefficients(&p).op("closed-form coefficients")?;
    let bs = beam_splitter_conditions(&p, &BeamSplitterOptions::default());
    let mut t = Table::new(&["index", "re", "im"]);
    t.comment("index 0..3: chi43_m, chi43_l, chi61_m, chi61_l (1/gamma)")
        .echo_config(cfg);
    for (i, v) in [chi.chi43_m, chi.chi43_l, chi.chi61_m, chi.chi61_l].iter().enumerate() {
        t.push(vec![i as f64, v.re, v.im]);
    }
    sink.write("chi.csv", &t)?;
    let mut sum = RunSummary::new("chi", cfg);
    for (name, v) in [
        ("chi43_m", chi.chi43_m),
        ("chi43_l", chi.chi43_l),
        ("chi61_m", chi.chi61_m),
        ("chi61_l", chi.chi61_l),
        ("alpha", coeffs.alpha),
    ] {
        sum.add(&format!("{name}_re"), v.re, "1/gamma");
        sum.add(&format!("{name}_im"), v.im, "1/gamma");
    }
    sum.add("epsilon", coeffs.epsilon, "1");
    sum.add("epsilon_gamma", coeffs.epsilon_gamma, "1");
    sum.add("kappa", coeffs.kappa(), "1/l_abs");
    sum.add("k", coeffs.k(), "1/l_abs");
    sum.add("d_c", coeffs.complete_conversion_depth(), "l_abs");
    sum.add("probe_ratio", bs.probe_ratio, "1");
    sum.add("delta5_residual", bs.delta5_residual, "gamma");
    sum.add("delta6_residual", bs.delta6_residual, "gamma");
    sum.add("beam_splitter_ok", bs.passed as u8 as f64, "bool");
    Ok(sum)
}

/// Exact two-mode propagation of a unit mm-wave input to depth `d`; returns
/// the converted photon fraction.
fn exact_conversion(p: &SchemeParams, m: &crate::conversion::ConversionMatrix, d: f64) -> CliResult<f64> {
    let input = SignalPair::mm(C64::new(1.0, 0.0));
    let out = propagate_exact(m, &input, d).op("exact propagation")?;
    Ok(flux_bookkeeping(&input, &out, p.b(), 1.0, 1.0).photon_flux_efficiency)
}

pub fn efficiency(cfg: &Config) -> CliResult<RunSummary> {
    let (p, _) = cfg.parameters()?;
    let coeffs = closed_form_coefficients(&p).op("closed-form coefficients")?;
    let d_c = match cfg.f64("efficiency.d_c")? {
        Some(_) => Some(cfg.positive_or("efficiency.d_c", 1.0)?),
        None => None,
    };
    let rep = efficiency_report(&coeffs, d_c).op("efficiency report")?;
    let m = assemble_m(
        &first_order_chi(&p).op("first-order susceptibilities")?,
        p.b_squared,
        p.eta_l,
    );
    let mut sum = RunSummary::new("efficiency", cfg);
    sum.add("d_c", rep.d_c, "l_abs");
    sum.add("f", rep.f, "1");
    sum.add("f_exact", exact_conversion(&p, &m, rep.d_c)?, "1");
    sum.add("f_max", rep.f_max, "1");
    sum.add("d_c_max", rep.d_c_max, "l_abs");
    sum.add("kappa", rep.kappa, "1/l_abs");
    sum.add("k", rep.k, "1/l_abs");
    sum.add("epsilon", coeffs.epsilon, "1");
    sum.add("epsilon_gamma", coeffs.epsilon_gamma, "1");
    Ok(sum)
}

fn input_pair(cfg: &Config, section: &str, default_amp: f64) -> CliResult<(SignalPair, bool)> {
    let key = format!("{section}.input");
    let optical = cfg.word_or(&key, &["mm", "optical"], "mm")? == "optical";
    let amp = cfg.complex_or(&format!("{section}.amplitude"), C64::new(default_amp, 0.0))?;
    if amp == C64::new(0.0, 0.0) {
        return Err(ConfigError::Value {
            key: format!("{section}.amplitude"),
            message: "must be non-zero".into(),
        }
        .into());
    }
    Ok((
        if optical {
            SignalPair::optical(amp)
        } else {
            SignalPair::mm(amp)
        },
        optical,
    ))
}

fn cw_table(prof: &CwProfile, b_squared: f64, cfg: &Config, title: &str) -> Table {
    let mut t = Table::new(&[
        "z",
        "intensity_m",
        "intensity_l",
        "flux_m",
        "flux_l",
        "re_m",
        "im_m",
        "re_l",
        "im_l",
        "envelope",
    ]);
    t.comment(title)
        .comment("z in l_abs; flux columns are photon fluxes over the input flux")
        .echo_config(cfg);
    let flux = prof.normalised_flux(b_squared);
    for (i, s) in prof.fields.iter().enumerate() {
        let env = prof.envelope.as_ref().map_or(0.0, |e| e[i]);
        t.push(vec![
            prof.z[i],
            s.omega_m.norm_sqr(),
            s.omega_l.norm_sqr(),
            flux[i].0,
            flux[i].1,
            s.omega_m.re,
            s.omega_m.im,
            s.omega_l.re,
            s.omega_l.im,
            env,
        ]);
    }
    t
}

pub fn cw1d(cfg: &Config, oracle: bool, sink: Sink, file: &str) -> CliResult<RunSummary> {
    let (p, _) = cfg.parameters()?;
    let (input, optical) = input_pair(cfg, "cw1d", 1e-3)?;
    let coeffs = closed_form_coefficients(&p).op("closed-form coefficients")?;
    let l_c = coeffs.complete_conversion_depth();
    let length = cfg.positive_or("cw1d.length", 2.0 * l_c)?;
    let points = cfg.usize_or("cw1d.points", 401)?;
    let grid = Grid1D::uniform(0.0, length, points).op("z grid")?;
    let m = assemble_m(
        &first_order_chi(&p).op("first-order susceptibilities")?,
        p.b_squared,
        p.eta_l,
    );
    let exact = propagate_cw_1d(&m, &input, &grid).op("transfer-matrix propagation")?;
    let prof = if oracle {
        let dz = cfg.positive_or("cw1d.dz", 0.5)?;
        propagate_cw_oracle(&p, &input, &grid, dz).op("Maxwell-Bloch propagation")?
    } else {
        exact.clone()
    };
    let title = if oracle {
        "full master-equation solution"
    } else {
        "transfer-matrix solution"
    };
    sink.write(file, &cw_table(&prof, p.b_squared, cfg, title))?;

    let converted = |f: &(f64, f64)| if optical { f.0 } else { f.1 };
    let flux = prof.normalised_flux(p.b_squared);
    let (imax, peak) = flux
        .iter()
        .map(converted)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
    let mut sum = RunSummary::new("cw1d", cfg);
    sum.add("l_c", l_c, "l_abs");
    sum.add("peak_conversion", peak, "1");
    sum.add("z_peak", prof.z[imax], "l_abs");
    let at_lc = propagate_exact(&m, &input, l_c).op("exact propagation")?;
    sum.add(
        "f_at_l_c",
        flux_bookkeeping(&input, &at_lc, p.b(), 1.0, 1.0).photon_flux_efficiency,
        "1",
    );
    if oracle {
        let a = exact.normalised_flux(p.b_squared);
        let peak_m = a.iter().map(|x| x.0).fold(0.0, f64::max);
        let peak_l = a.iter().map(|x| x.1).fold(0.0, f64::max);
        let dev = a.iter().zip(&flux).fold(0.0f64, |d, (x, y)| {
            d.max((x.0 - y.0).abs() / peak_m).max((x.1 - y.1).abs() / peak_l)
        });
        sum.add("oracle_max_deviation", dev, "fraction of peak");
    }
    Ok(sum)
}

pub fn pulse1d(cfg: &Config, oracle: bool, sink: Sink, stem: &str) -> CliResult<RunSummary> {
    let (p, _) = cfg.parameters()?;
    let (input, optical) = input_pair(cfg, "pulse1d", 1e-3)?;
    let bw = cfg.positive_or("pulse1d.bandwidth", DEFAULT_PULSE_BANDWIDTH)?;
    let window = cfg.positive_or("pulse1d.window", 7.0)?;
    let tau_step = cfg.positive_or("pulse1d.tau_step", 0.1 / p.max_rate())?;
    let coeffs = closed_form_coefficients(&p).op("closed-form coefficients")?;
    let l_c = coeffs.complete_conversion_depth();
    let length = cfg.positive_or("pulse1d.length", l_c)?;
    let dz = cfg.positive_or("pulse1d.dz", 0.5)?;
    let t = 1.0 / bw;
    let tau = Grid1D::with_max_step(-window * t, window * t, tau_step).op("tau grid")?;
    let z = Grid1D::with_max_step(0.0, length, dz).op("z grid")?;
    let amp = if optical { input.omega_l } else { input.omega_m };
    let envelope = gaussian_pulse(&tau, amp, bw, optical);
    let opts = PulseOptions {
        mode: if oracle { PulseMode::Oracle } else { PulseMode::Analytic },
        z_stride: cfg.usize_or("pulse1d.z_stride", 20)?,
        tol: cfg.positive_or("pulse1d.tol", 1e-8)?,
        bandwidth: Some(bw),
    };
    let res = propagate_pulse_1d(&p, &envelope, &tau, &z, &opts).op("pulse propagation")?;

    let a: Vec<f64> = res
        .input()
        .iter()
        .map(|s| if optical { s.omega_l.norm() } else { s.omega_m.norm() })
        .collect();
    let b: Vec<f64> = res
        .output()
        .iter()
        .map(|s| if optical { s.omega_m.norm() } else { s.omega_l.norm() })
        .collect();
    let (corr, lag) = cross_correlation(&a, &b);

    let mut ends = Table::new(&["tau", "input_m", "input_l", "output_m", "output_l"]);
    ends.comment("intensities at the entrance and the exit; tau in 1/gamma")
        .echo_config(cfg);
    for (i, &x) in res.tau.iter().enumerate() {
        let (s0, s1) = (res.input()[i], res.output()[i]);
        ends.push(vec![
            x,
            s0.omega_m.norm_sqr(),
            s0.omega_l.norm_sqr(),
            s1.omega_m.norm_sqr(),
            s1.omega_l.norm_sqr(),
        ]);
    }
    sink.write(&format!("{stem}_ends.csv"), &ends)?;
    let mut map = Table::new(&["z", "tau", "intensity_m", "intensity_l"]);
    map.comment("space-time map, z in l_abs, tau in 1/gamma")
        .echo_config(cfg);
    let every = (res.tau.len() / 1000).max(1);
    for (k, &zk) in res.z.iter().enumerate() {
        for i in (0..res.tau.len()).step_by(every) {
            let s = res.fields[k][i];
            map.push(vec![zk, res.tau[i], s.omega_m.norm_sqr(), s.omega_l.norm_sqr()]);
        }
    }
    sink.write(&format!("{stem}_map.csv"), &map)?;

    let mut sum = RunSummary::new("pulse1d", cfg);
    sum.add("length", length, "l_abs");
    sum.add("energy_efficiency", res.energy_efficiency(), "1");
    sum.add("f_formula", efficiency_at_depth(coeffs.epsilon_gamma, l_c), "1");
    sum.add("cross_correlation", corr, "1");
    sum.add("delay", lag as f64 * tau.step(), "1/gamma");
    sum.add("tau_nodes", tau.len() as f64, "1");
    Ok(sum)
}

pub fn paraxial(cfg: &Config, sink: Sink, file: &str) -> CliResult<RunSummary> {
    let (p, phys) = cfg.parameters()?;
    let port = match cfg.word_or("paraxial.port", &["m", "l"], "m")? {
        "l" => Port::L,
        _ => Port::M,
    };
    let beam = BeamSpec {
        sigma: cfg.positive_or("paraxial.sigma", 509.0)?,
        peak: cfg.complex_or("paraxial.peak", C64::new(1e-4, 0.0))?,
        port,
    };
    let cloud = CloudSpec {
        peak_density: cfg.positive_or("paraxial.peak_density", phys.atom_density)?,
        sigma_c: cfg.positive_or("paraxial.sigma_c", 413.0)?,
        length: cfg.f64("paraxial.length")?,
    };
    let opts = ParaxialOptions {
        dr: cfg.f64("paraxial.dr")?,
        dz: cfg.f64("paraxial.dz")?,
        r_max: cfg.f64("paraxial.r_max")?,
        refine: cfg.positive_or("paraxial.refine", 1.0)?,
        snapshots: cfg.usize_or("paraxial.snapshots", 50)?,
    };
    let res = run_paraxial_scenario(&beam, &cloud, &p, &phys, &opts).op("paraxial propagation")?;
    let mut t = Table::new(&["z", "r", "intensity_m", "intensity_l"]);
    t.comment("z and r in micrometres; intensities |Omega|^2 in gamma^2")
        .echo_config(cfg);
    for (k, &z) in res.z.iter().enumerate() {
        for (i, &r) in res.r.iter().enumerate() {
            t.push(vec![z, r, res.intensity_m[k][i], res.intensity_l[k][i]]);
        }
    }
    sink.write(file, &t)?;
    let mut sum = RunSummary::new("paraxial", cfg);
    sum.add("efficiency", res.efficiency, "1");
    sum.add("on_axis_f", res.on_axis.f, "1");
    sum.add("l_abs", res.l_abs, "um");
    sum.add("length", res.grid.length(), "um");
    sum.add("dr", res.grid.dr, "um");
    sum.add("dz", res.grid.dz, "um");
    sum.add("r_max", res.grid.r_max(), "um");
    sum.add("boundary_ratio", res.boundary_ratio, "1");
    Ok(sum)
}

/// Interaction parameters from the config, with C6 and |d₄₃| back-derived
/// from the shift markers unless given directly.
pub fn interaction_params(cfg: &Config, p: &SchemeParams, phys: &PhysicalPreset) -> CliResult<InteractionParams> {
    let mut markers = InteractionMarkers::rb87();
    markers.delta_vdw = cfg.f64_or("markers.delta_vdw", markers.delta_vdw)?;
    markers.delta_dd = cfg.f64_or("markers.delta_dd", markers.delta_dd)?;
    markers.separation = cfg.f64_or("markers.separation", markers.separation)?;
    let derived = derive_c6_and_d43(phys, &markers).op("interaction back-derivation")?;
    let c6 = phys.c6.or(derived.c6).unwrap_or(0.0) * cfg.f64_or("rydberg.vdw_scale", 1.0)?;
    let dd_scale = cfg.f64_or("rydberg.dd_scale", 1.0)?;
    if dd_scale < 0.0 {
        return Err(ConfigError::Value {
            key: "rydberg.dd_scale".into(),
            message: "must be non-negative".into(),
        }
        .into());
    }
    let d43 = phys.d43_magnitude.or(derived.d43_magnitude).unwrap_or(0.0) * dd_scale.sqrt();
    let rydberg = match cfg.f64("rydberg.rydberg_density")? {
        Some(n) => n,
        None => {
            let rho33 = zeroth_order(p).op("zeroth-order steady state")?.population(3);
            let rb = blockade_radius(c6, p.omega_r.norm() * phys.gamma_si, phys.gamma_si).op("blockade radius")?;
            rydberg_density(rho33, phys.atom_density, Some(rb)).op("Rydberg density")?
        }
    };
    let axis = match cfg.word_or("rydberg.axis", &["x", "y", "z"], "z")? {
        "x" => [1.0, 0.0, 0.0],
        "y" => [0.0, 1.0, 0.0],
        _ => [0.0, 0.0, 1.0],
    };
    let orientation = match cfg.word_or("rydberg.orientation", &["linear", "circular"], "linear")? {
        "circular" => DipoleOrientation::Circular(axis),
        _ => DipoleOrientation::Linear(axis),
    };
    let angular = match cfg.word_or("rydberg.angular", &["average", "fixed"], "average")? {
        "fixed" => AngularMode::Fixed(cfg.f64_or("rydberg.cos_theta", 0.0)?),
        _ => AngularMode::Average,
    };
    Ok(InteractionParams {
        c6,
        d43,
        rydberg_density: rydberg,
        orientation,
        angular,
    })
}

pub fn rydberg_average(cfg: &Config) -> CliResult<RunSummary> {
    let (p, phys) = cfg.parameters()?;
    let inter = interaction_params(cfg, &p, &phys)?;
    let dist = NeighbourDistribution::from_density(inter.rydberg_density).op("neighbour distribution")?;
    let defaults = QuadratureOptions::default();
    let opts = QuadratureOptions {
        radial_nodes: cfg.usize_or("rydberg.radial_nodes", defaults.radial_nodes)?,
        polar_nodes: cfg.usize_or("rydberg.polar_nodes", defaults.polar_nodes)?,
        tolerance: cfg.positive_or("rydberg.tolerance", defaults.tolerance)?,
        check_convergence: true,
    };
    let avg = averaged_m(&p, &inter, &dist, phys.gamma_si, &opts).op("interaction averaging")?;
    let coeffs = closed_form_coefficients(&p).op("closed-form coefficients")?;
    let d_c = coeffs.complete_conversion_depth();
    let m0 = assemble_m(
        &first_order_chi(&p).op("first-order susceptibilities")?,
        p.b_squared,
        p.eta_l,
    );
    let f0 = exact_conversion(&p, &m0, d_c)?;
    let f = exact_conversion(&p, &avg.m, d_c)?;
    let rb = blockade_radius(inter.c6, p.omega_r.norm() * phys.gamma_si, phys.gamma_si).op("blockade radius")?;

    let mut sum = RunSummary::new("rydberg-average", cfg);
    sum.add("rydberg_density", inter.rydberg_density, "1/m^3");
    sum.add("r_ws", dist.r_ws, "m");
    sum.add("r_90", r90(dist.r_ws), "m");
    sum.add("r_b", rb, "m");
    sum.add("c6", inter.c6, "J m^6");
    sum.add("d43", inter.d43, "C m");
    sum.add("d_c", d_c, "l_abs");
    sum.add("f_unperturbed", f0, "1");
    sum.add("f_averaged", f, "1");
    sum.add("f_drop", f0 - f, "1");
    sum.add("quadrature_change", avg.change.unwrap_or(0.0), "1");
    for (name, (i, j)) in [("m11", (0, 0)), ("m12", (0, 1)), ("m21", (1, 0)), ("m22", (1, 1))] {
        sum.add(&format!("{name}_re"), avg.m.0[(i, j)].re, "1/l_abs");
        sum.add(&format!("{name}_im"), avg.m.0[(i, j)].im, "1/l_abs");
    }
    Ok(sum)
}

/// Values of the swept parameter: an explicit list, or `points` values from
/// `start` to `stop` on a linear or logarithmic scale.
pub fn sweep_values(cfg: &Config) -> CliResult<Vec<f64>> {
    if let Some(v) = cfg.list("sweep.values")? {
        return Ok(v);
    }
    let points = cfg.usize_or("sweep.points", 0)?;
    if points == 0 {
        return Ok(Vec::new());
    }
    let missing = |k: &str| {
        CliError::from(ConfigError::Value {
            key: k.into(),
            message: "required unless sweep.values is given".into(),
        })
    };
    let start = cfg.f64("sweep.start")?.ok_or_else(|| missing("sweep.start"))?;
    let stop = cfg.f64("sweep.stop")?.ok_or_else(|| missing("sweep.stop"))?;
    let log = cfg.word_or("sweep.scale", &["linear", "log"], "linear")? == "log";
    if log && !(start > 0.0 && stop > 0.0) {
        return Err(ConfigError::Value {
            key: "sweep.start".into(),
            message: "log sweeps need positive bounds".into(),
        }
        .into());
    }
    Ok((0..points)
        .map(|i| {
            let s = if points == 1 {
                0.0
            } else {
                i as f64 / (points - 1) as f64
            };
            if log {
                (start.ln() + s * (stop.ln() - start.ln())).exp()
            } else {
                start + s * (stop - start)
            }
        })
        .collect())
}

pub fn sweep(cfg: &Config, oracle: bool, sink: Sink) -> CliResult<RunSummary> {
    let param = cfg.raw("sweep.parameter").ok_or_else(|| ConfigError::Value {
        key: "sweep.parameter".into(),
        message: "required".into(),
    })?;
    if !KNOWN_KEYS.contains(&param) || param.starts_with("sweep.") {
        return Err(ConfigError::Value {
            key: "sweep.parameter".into(),
            message: format!("unknown parameter `{param}`"),
        }
        .into());
    }
    let scenario = cfg.word_or(
        "sweep.scenario",
        &[
            "efficiency",
            "steady",
            "chi",
            "cw1d",
            "pulse1d",
            "paraxial",
            "rydberg-average",
        ],
        "efficiency",
    )?;
    let command = match scenario {
        "steady" => Command::Steady,
        "chi" => Command::Chi,
        "cw1d" => Command::Cw1d,
        "pulse1d" => Command::Pulse1d,
        "paraxial" => Command::Paraxial,
        "rydberg-average" => Command::RydbergAverage,
        _ => Command::Efficiency,
    };
    let values = sweep_values(cfg)?;
    let mut rows = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for &v in &values {
        let mut c = cfg.clone();
        c.set_value(param, format!("{v:.17e}"))?;
        let s = run_command(&command, &c, oracle, Sink { dir: None })?;
        if names.is_empty() {
            names = s.scalars.iter().map(|x| x.name.clone()).collect();
        }
        rows.push(
            std::iter::once(v)
                .chain(s.scalars.iter().map(|x| x.value))
                .collect::<Vec<_>>(),
        );
    }
    let mut cols = vec![param.to_string()];
    cols.extend(names);
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&col_refs);
    t.comment(format!("sweep of {param} through the {scenario} scenario"))
        .echo_config(cfg);
    for r in rows {
        t.push(r);
    }
    sink.write("sweep.csv", &t)?;
    let mut sum = RunSummary::new("sweep", cfg);
    sum.add("points", values.len() as f64, "1");
    Ok(sum)
}

pub fn figure(which: Figure, cfg: &Config, oracle: bool, sink: Sink) -> CliResult<RunSummary> {
    match which {
        Figure::Fig2 => {
            let mut mm = cfg.clone();
            mm.set_value("cw1d.input", "mm")?;
            let a = cw1d(&mm, oracle, sink, "fig2_mm_input.csv")?;
            let mut opt = cfg.clone();
            opt.set_value("cw1d.input", "optical")?;
            let b = cw1d(&opt, oracle, sink, "fig2_optical_input.csv")?;
            let mut sum = RunSummary::new("fig2", cfg);
            sum.add("l_c", a.get("l_c").unwrap_or(0.0), "l_abs");
            sum.add("f_mm_input", a.get("f_at_l_c").unwrap_or(0.0), "1");
            sum.add("f_optical_input", b.get("f_at_l_c").unwrap_or(0.0), "1");
            Ok(sum)
        }
        Figure::Fig3 => {
            let (p, _) = cfg.parameters()?;
            let d_max = cfg.positive_or("efficiency.d_c", 400.0)?;
            let n = 400;
            let mut cols = vec!["d_c".to_string()];
            let mut eps = Vec::new();
            let mut sum = RunSummary::new("fig3", cfg);
            for (i, &g) in LOSS_SWEEP_GAMMA_RATIOS.iter().enumerate() {
                let q = SchemeParams {
                    gamma_rydberg: g * p.gamma,
                    ..p
                };
                let c = closed_form_coefficients(&q).op("closed-form coefficients")?;
                let rep = efficiency_report(&c, None).op("efficiency report")?;
                cols.push(format!("f_{i}"));
                eps.push(c.epsilon_gamma);
                sum.add(&format!("gamma_ratio_{i}"), g, "1");
                sum.add(&format!("f_max_{i}"), rep.f_max, "1");
                sum.add(&format!("d_c_max_{i}"), rep.d_c_max, "l_abs");
            }
            let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut t = Table::new(&col_refs);
            for (i, g) in LOSS_SWEEP_GAMMA_RATIOS.iter().enumerate() {
                t.comment(format!("f_{i}: Gamma/gamma = {g}"));
            }
            t.echo_config(cfg);
            for k in 1..=n {
                let d = d_max * k as f64 / n as f64;
                let mut row = vec![d];
                row.extend(eps.iter().map(|&e| efficiency_at_depth(e, d)));
                t.push(row);
            }
            sink.write("fig3.csv", &t)?;
            Ok(sum)
        }
        Figure::Fig4 => {
            let mut s = pulse1d(cfg, oracle, sink, "fig4")?;
            s.scenario = "fig4".into();
            Ok(s)
        }
        Figure::Fig6 => {
            let mut s = paraxial(cfg, sink, "fig6.csv")?;
            s.scenario = "fig6".into();
            Ok(s)
        }
    }
}
