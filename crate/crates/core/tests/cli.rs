use std::path::Path;
use std::process::Command;

use mmoc_core::conversion::assemble_m;
use mmoc_core::output::parse_table;
use mmoc_core::params::rb87_preset;
use mmoc_core::perturbation::first_order_chi;
use mmoc_core::C64;

fn mmoc(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mmoc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn assert_tables_match(actual: &str, expected: &str) {
    let a = parse_table(actual).unwrap();
    let e = parse_table(expected).unwrap();
    assert_eq!(a.comments, e.comments);
    assert_eq!(a.columns, e.columns);
    assert_eq!(a.rows.len(), e.rows.len());
    for (ra, re) in a.rows.iter().zip(&e.rows) {
        for (x, y) in ra.iter().zip(re) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} vs {y}");
        }
    }
}

#[test]
fn fig2_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmoc(&["figure", "fig2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["fig2_mm_input.csv", "fig2_optical_input.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert_tables_match(&text, &golden(name));
    }
}

/// exp(iℳz) by eigen-decomposition of the 2×2 matrix.
fn eigen_transfer(m: [[C64; 2]; 2], z: f64) -> [[C64; 2]; 2] {
    let i = C64::new(0.0, 1.0);
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let l1 = (tr + disc) / 2.0;
    let l2 = (tr - disc) / 2.0;
    // Sylvester: f(ℳ) = [f(λ1)(ℳ − λ2) − f(λ2)(ℳ − λ1)] / (λ1 − λ2)
    let (f1, f2) = ((i * l1 * z).exp(), (i * l2 * z).exp());
    let mut t = [[C64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let id = if r == c { 1.0 } else { 0.0 };
            t[r][c] = (f1 * (m[r][c] - l2 * id) - f2 * (m[r][c] - l1 * id)) / (l1 - l2);
        }
    }
    t
}

#[test]
fn golden_rows_agree_with_eigen_decomposition() {
    let (p, _) = rb87_preset();
    let m = assemble_m(&first_order_chi(&p).unwrap(), p.b_squared, p.eta_l).0;
    let m = [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]];
    let t = parse_table(&golden("fig2_mm_input.csv")).unwrap();
    let amp = 1e-3;
    for row in t.rows.iter().step_by(40) {
        let tm = eigen_transfer(m, row[0]);
        let om = tm[0][0] * amp;
        let ol = tm[1][0] * amp;
        assert!((row[1] - om.norm_sqr()).abs() < 1e-9 * amp * amp);
        assert!((row[2] - ol.norm_sqr()).abs() < 1e-9 * amp * amp);
        assert!((row[5] - om.re).abs() < 1e-9 * amp && (row[8] - ol.im).abs() < 1e-9 * amp);
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(mmoc(&["cw1d", "--threads", "1"], a.path()).status.success());
    assert!(mmoc(&["cw1d", "--threads", "4"], b.path()).status.success());
    for f in ["cw1d.csv", "summary.txt"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn config_errors_exit_with_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmoc(&["chi", "--set", "scheme.delta_9=1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme.delta_9"));
    // the summary is written even on failure
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("exit_code = 1"));

    let cfg = dir.path().join("bad.ini");
    std::fs::write(&cfg, "[scheme]\ndelta_4 = fast\n").unwrap();
    let out = mmoc(&["chi", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme.delta_4"));

    let out = mmoc(&["efficiency", "--set", "efficiency.d_c=-1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("efficiency.d_c"));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // nothing drains levels 4 and 5: the steady state is not unique
    let out = mmoc(
        &[
            "steady",
            "--set",
            "scheme.omega_c=0",
            "--set",
            "scheme.omega_a=0",
            "--set",
            "scheme.gamma_rydberg=0",
            "--set",
            "steady.omega_m=0.1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("steady state"));
}

#[test]
fn empty_config_runs_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.ini");
    std::fs::write(&cfg, "preset = rb87\n").unwrap();
    let out = mmoc(&["efficiency", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("f_exact = 9.2005"));
    assert!(summary.contains("config.preset = rb87"));
}

#[test]
fn fig3_curves_peak_at_the_optimal_depth() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mmoc(&["figure", "fig3"], dir.path()).status.success());
    let t = parse_table(&std::fs::read_to_string(dir.path().join("fig3.csv")).unwrap()).unwrap();
    assert_eq!(t.columns, vec!["d_c", "f_0", "f_1", "f_2"]);
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    for col in 1..=3 {
        let best = t
            .rows
            .iter()
            .max_by(|a, b| a[col].partial_cmp(&b[col]).unwrap())
            .unwrap();
        let key = format!("d_c_max_{} = ", col - 1);
        let line = summary.lines().find(|l| l.starts_with(&key)).unwrap();
        let expected: f64 = line[key.len()..].split_whitespace().next().unwrap().parse().unwrap();
        // grid spacing is 1 l_abs
        assert!((best[0] - expected).abs() <= 1.0, "{} vs {expected}", best[0]);
    }
}

#[test]
fn empty_sweep_writes_a_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = mmoc(&["sweep", "--set", "sweep.parameter=efficiency.d_c"], dir.path());
    assert!(out.status.success());
    let t = parse_table(&std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(t.columns, vec!["efficiency.d_c"]);
    assert!(t.rows.is_empty());

    let out = mmoc(&["sweep", "--set", "sweep.parameter=scheme.nothing"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme.nothing"));
}
