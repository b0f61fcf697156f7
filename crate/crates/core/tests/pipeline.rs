//! Library pieces composed the way the scenarios use them.

use mmoc_core::cli::{cw1d, efficiency, pulse1d, sweep, Sink};
use mmoc_core::config::Config;
use mmoc_core::conversion::{assemble_m, efficiency_at_depth, propagate_exact};
use mmoc_core::liouvillian::SignalPair;
use mmoc_core::output::parse_table;
use mmoc_core::params::rb87_preset;
use mmoc_core::perturbation::{closed_form_coefficients, first_order_chi};
use mmoc_core::C64;

#[test]
fn config_overrides_reach_the_physics() {
    let cfg = Config::parse("[scheme]\ndelta_4 = 3\nomega_c = 1.5+0.5j\n").unwrap();
    let (p, _) = cfg.parameters().unwrap();
    let mut q = rb87_preset().0;
    q.delta_4 = 3.0;
    q.omega_c = C64::new(1.5, 0.5);
    assert_eq!(p, q);

    let sum = efficiency(&cfg).unwrap();
    let d = closed_form_coefficients(&q).unwrap().complete_conversion_depth();
    let m = assemble_m(&first_order_chi(&q).unwrap(), q.b_squared, q.eta_l);
    let out = propagate_exact(&m, &SignalPair::mm(C64::new(1.0, 0.0)), d).unwrap();
    let f = q.b_squared * out.omega_l.norm_sqr();
    assert!((sum.get("f_exact").unwrap() - f).abs() < 1e-14);
    assert_eq!(sum.get("d_c").unwrap(), d);
}

#[test]
fn swept_formula_matches_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config::parse(
        "[sweep]\nparameter = scheme.gamma_rydberg\nscale = log\nstart = 1e-4\nstop = 1e-2\npoints = 5\n",
    )
    .unwrap();
    sweep(&cfg, false, Sink { dir: Some(dir.path()) }).unwrap();
    let t = parse_table(&std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap()).unwrap();
    let col = |name: &str| t.columns.iter().position(|c| c == name).unwrap();
    assert_eq!(t.rows.len(), 5);
    for row in &t.rows {
        let mut p = rb87_preset().0;
        p.gamma_rydberg = row[0];
        let c = closed_form_coefficients(&p).unwrap();
        let f = efficiency_at_depth(c.epsilon_gamma, c.complete_conversion_depth());
        assert!((row[col("f")] - f).abs() < 1e-14 * f.max(1.0));
    }
    // more loss, less conversion
    assert!(t.rows.windows(2).all(|w| w[1][col("f_exact")] < w[0][col("f_exact")]));
}

#[test]
fn adiabatic_pulse_converts_like_the_stationary_solution() {
    let cfg = Config::default();
    let sum = pulse1d(&cfg, false, Sink { dir: None }, "pulse").unwrap();
    let e = sum.get("energy_efficiency").unwrap();
    let cw = cw1d(&cfg, false, Sink { dir: None }, "cw").unwrap();
    let f = cw.get("f_at_l_c").unwrap();
    assert!((e - f).abs() < 1e-9, "{e} vs {f}");
    assert!((e - sum.get("f_formula").unwrap()).abs() < 0.005);
    assert!(sum.get("cross_correlation").unwrap() > 0.9999);
}

#[test]
fn optical_input_pulse_mirrors_mm_input() {
    let mm = pulse1d(&Config::default(), false, Sink { dir: None }, "p").unwrap();
    let opt = pulse1d(
        &Config::parse("[pulse1d]\ninput = optical\n").unwrap(),
        false,
        Sink { dir: None },
        "p",
    )
    .unwrap();
    // the directions differ only through the unequal diagonal damping of ℳ
    let (a, b) = (
        mm.get("energy_efficiency").unwrap(),
        opt.get("energy_efficiency").unwrap(),
    );
    assert!((a - b).abs() < 1e-3, "{a} vs {b}");
}
