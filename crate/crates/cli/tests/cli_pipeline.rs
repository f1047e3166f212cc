//! End-to-end checks of the `mbres` binary and the CSV contracts between
//! its commands.

use std::path::Path;
use std::process::{Command, Output};

use mbres_cli::commands::*;
use mbres_cli::table::{SCHEMA_RESPONSE, SCHEMA_S21};
use mbres_cli::{RunConfig, SweepTable};
use mbres_core::fitting::NotchResonator;
use proptest::prelude::*;

fn mbres(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbres"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn record(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn header_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| l.starts_with("# truth.")).collect()
}

#[test]
fn generation_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| ok(&mbres(&["gen", "s21", "--snr-db", "30", "--seed", seed], dir.path()));
    let (a, b, c) = (run("5"), run("5"), run("6"));
    assert_eq!(a, b);
    assert_ne!(data_lines(&a)[1..], data_lines(&c)[1..]);
    assert_eq!(header_lines(&a), header_lines(&c));
    assert!(a.contains("# rng=chacha20\n") && a.contains("# seed=5\n"));
    assert_eq!(data_lines(&a)[0], "freq_Hz,re,im");
}

#[test]
fn infinite_snr_gives_exact_model_samples() {
    let cfg = RunConfig::default();
    let t = cmd_gen_s21(&cfg, &GenS21Options::default()).unwrap();
    let m = NotchResonator::from_quality_factors(6.837e9, 980.0, 828.0, 0.0);
    for row in &t.rows {
        let z = m.s21(row[0]);
        assert_eq!((row[1], row[2]), (z.re, z.im));
    }
}

#[test]
fn parallel_simulation_matches_serial_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = |out: &'static str, par: bool| {
        let mut a = vec!["simulate", "--fro", "6.83:6.845:4", "--units", "GHz", "--snr-db", "40", "--out", out];
        if par {
            a.push("--parallel");
        }
        a
    };
    ok(&mbres(&args("serial", false), p));
    ok(&mbres(&args("par", true), p));
    for f in ["map.csv", "trajectory.csv", "trace_000.csv", "trace_003.csv"] {
        let a = std::fs::read(p.join("serial").join(f)).unwrap();
        let b = std::fs::read(p.join("par").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    let trace = SweepTable::read_path(&p.join("serial/trace_000.csv")).unwrap();
    assert_eq!(trace.columns, ["t_s", "re", "im"]);
    let map = SweepTable::read_path(&p.join("serial/map.csv")).unwrap();
    assert_eq!(map.columns, ["t_s", "fro_Hz", "re", "im"]);
    assert_eq!(map.rows.len(), 4 * trace.rows.len());
}

#[test]
fn invalid_config_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[material]\nTc_K = -1.34\n").unwrap();
    let out = mbres(&["--config", "bad.toml", "conductivity", "--T", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("T_c"));

    std::fs::write(dir.path().join("typo.toml"), "material.Tc_kelvin = 1.34\n").unwrap();
    let out = mbres(&["--config", "typo.toml", "response", "--T", "0.1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn response_feeds_teff_and_mb_fit() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&mbres(&["response", "--T", "100:900:17", "--units", "mK", "--out", "r.csv"], p));
    let resp = SweepTable::read_path(&p.join("r.csv")).unwrap();
    assert_eq!(resp.columns, SCHEMA_RESPONSE);

    let teff = ok(&mbres(&["teff", "--input", "r.csv"], p));
    let teff = SweepTable::parse(&teff).unwrap();
    assert_eq!(teff.columns, ["x", "dinvQ", "Teff_K", "dff_pred"]);
    for (r, t) in resp.rows.iter().zip(&teff.rows) {
        assert!((t[2] - r[0]).abs() < 1e-5);
        assert!((t[3] / r[1] - 1.0).abs() < 1e-9);
    }

    let fit = ok(&mbres(&["fit", "mb", "--input", "r.csv"], p));
    assert!((record(&fit, "alpha") - 0.17).abs() < 1e-6);
    assert!((record(&fit, "Tc_K") - 1.34).abs() < 1e-6);
}

#[test]
fn teff_flags_rows_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.csv"), "x,dinvQ\n1,0\n2,0.5\n3,1e-4\n").unwrap();
    let out = mbres(&["teff", "--input", "m.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let t = SweepTable::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 3);
    assert_eq!(t.rows[0][2], 0.01);
    assert!(t.rows[1][2].is_nan() && t.rows[1][3].is_nan());
    assert!(t.rows[2][2] > 0.01);
}

#[test]
fn circle_and_exp_fits_on_generated_traces() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&mbres(&["gen", "s21", "--phi", "0.1", "--delay", "40", "--units", "ns", "--out", "s.csv"], p));
    let fit = ok(&mbres(&["fit", "circle", "--input", "s.csv", "--residuals", "res.csv"], p));
    assert!((record(&fit, "fres_Hz") / 6.837e9 - 1.0).abs() < 1e-6);
    assert!((record(&fit, "Qi") / 980.0 - 1.0).abs() < 1e-6);
    assert!((record(&fit, "Qc") / 828.0 - 1.0).abs() < 1e-6);
    let res = SweepTable::read_path(&p.join("res.csv")).unwrap();
    assert_eq!(res.columns, SCHEMA_S21);
    assert!(res.rows.iter().all(|r| r[1].abs() < 1e-6 && r[2].abs() < 1e-6));

    ok(&mbres(&["gen", "timetrace", "--out", "t.csv"], p));
    let fit = ok(&mbres(&["fit", "exp", "--input", "t.csv", "--t-stop", "1.2e-6"], p));
    let truth = SweepTable::read_path(&p.join("t.csv")).unwrap().meta_f64("truth.tau_s").unwrap();
    assert!((record(&fit, "tau_s") / truth - 1.0).abs() < 0.05);

    // With φ = 0, |S21|² is a symmetric Lorentzian dip at the resonance.
    ok(&mbres(&["gen", "s21", "--out", "sym.csv"], p));
    let fit = ok(&mbres(&["fit", "lorentzian", "--input", "sym.csv"], p));
    assert!((record(&fit, "fstar_Hz") / 6.837e9 - 1.0).abs() < 1e-5);
}

#[test]
fn simulated_traces_fit_back() {
    let cfg = RunConfig::from_toml_str("simulate.gate_amplitude_V = 0.0", Path::new(".")).unwrap();
    let r = cmd_simulate(&cfg, &[6.837e9], f64::INFINITY, false).unwrap();
    let trace = SweepTable::parse(&r.traces[0].to_csv_string()).unwrap();
    let fit = cmd_fit_exp(
        &trace,
        &ExpFitWindow {
            t_start: Some(0.6e-6),
            t_stop: Some(1.2e-6),
            a: None,
        },
    )
    .unwrap();
    let tau = fit.record.iter().find(|(k, _)| k == "tau_s").unwrap().1.parse::<f64>().unwrap();
    let expected = mbres_core::resonator::ring_up_time(6.837e9, cfg.baseline.q_l0());
    assert!((tau / expected - 1.0).abs() < 0.05);
}

#[test]
fn conductivity_and_tauqp_tables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let c = SweepTable::parse(&ok(&mbres(&["conductivity", "--T", "0.05:1.0:40"], p))).unwrap();
    assert_eq!(c.columns, ["T_K", "s1", "s2"]);
    assert!(c.rows.windows(2).all(|w| w[1][1] >= w[0][1] && w[1][2] <= w[0][2]));

    let r = SweepTable::parse(&ok(&mbres(&["response", "--T", "0.01"], p))).unwrap();
    assert_eq!((r.rows[0][1], r.rows[0][2]), (0.0, 0.0));

    std::fs::write(p.join("slow.toml"), "material.tau0_ns = 60\n").unwrap();
    let a = SweepTable::parse(&ok(&mbres(&["tauqp", "--T", "0.5,1.0"], p))).unwrap();
    let b = SweepTable::parse(&ok(&mbres(&["--config", "slow.toml", "tauqp", "--T", "0.5,1.0"], p))).unwrap();
    assert_eq!(a.columns, ["T_K", "tauqp_s"]);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((y[1] / x[1] - 2.0).abs() < 1e-14);
    }
    let out = mbres(&["tauqp", "--nqp", "1,2"], p);
    assert_eq!(out.status.code(), Some(1), "density mode needs N0");
}

#[test]
fn sidebands_report_half_power_point() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&mbres(&["sidebands", "--tau-eff", "50e-9"], dir.path()));
    let t = SweepTable::parse(&text).unwrap();
    assert_eq!(t.columns, ["fg_Hz", "amp_rel_dB"]);
    let f3 = t.meta_f64("f_3dB_Hz").unwrap();
    assert!((3.0e6..=3.4e6).contains(&f3), "{f3}");
}

#[test]
fn gen_response_noise_is_seeded() {
    let mut cfg = RunConfig::default();
    let temps: Vec<f64> = (0..20).map(|i| 0.1 + 0.8 * i as f64 / 19.0).collect();
    cfg.seed = 9;
    let a = cmd_gen_response(&cfg, &temps, 0.05).unwrap();
    let b = cmd_gen_response(&cfg, &temps, 0.05).unwrap();
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    let clean = cmd_response(&cfg, &temps).unwrap();
    let ratio: Vec<f64> = a.rows.iter().zip(&clean.rows).map(|(n, c)| n[2] / c[2]).collect();
    assert!(ratio.iter().any(|r| (r - 1.0).abs() > 1e-3));
    assert!(ratio.iter().all(|r| (r - 1.0).abs() < 0.3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn emitted_tables_parse_back_identically(
        rows in proptest::collection::vec(proptest::array::uniform3(proptest::num::f64::ANY), 1..20),
        seed in any::<u64>(),
    ) {
        let mut t = SweepTable::new("s21", SCHEMA_S21).with_meta([("seed", seed.to_string())]);
        for r in &rows {
            t.push(r.to_vec());
        }
        let back = SweepTable::parse(&t.to_csv_string()).unwrap();
        prop_assert_eq!(&back.columns, &t.columns);
        prop_assert_eq!(&back.meta, &t.meta);
        for (a, b) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
}
