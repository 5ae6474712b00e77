//! End-to-end checks of the `resbasis` binary: flag validation and exit
//! codes, emitted file schemas, determinism, and the CSV round trip.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resbasis"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let mut dir = std::env::temp_dir();
    dir.push(format!("resbasis-cli-test-{}-{name}", std::process::id()));
    dir
}

fn recon_of(report: &Path, n: usize) -> PathBuf {
    let stem = report.file_stem().unwrap().to_string_lossy().into_owned();
    report.with_file_name(format!("{stem}_recon_n{n}.csv"))
}

fn read_csv_column(path: &Path, column: usize) -> Vec<f64> {
    let text = std::fs::read_to_string(path).expect("csv readable");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .nth(column)
                .expect("column")
                .parse()
                .expect("number")
        })
        .collect()
}

#[test]
fn modes_emits_records_with_frequencies_near_2npi() {
    let json_path = tmp("modes4.json");
    let out = run(&[
        "modes",
        "--p",
        "0",
        "--k",
        "0",
        "--n",
        "4",
        "--out-json",
        json_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let parsed: Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let records = parsed.as_array().expect("JSON array");
    assert_eq!(records.len(), 4);
    for (i, record) in records.iter().enumerate() {
        let n = record["n"].as_u64().unwrap() as usize;
        assert_eq!(n, i + 1);
        let omega = record["omega"].as_f64().unwrap();
        let expected = 2.0 * (i + 1) as f64 * PI;
        assert!(
            (omega / expected - 1.0).abs() < 0.05,
            "omega[{n}] = {omega}"
        );
        assert_eq!(record["norm_weight"].as_str().unwrap(), "r2");
        let lambda = record["lambda"].as_f64().unwrap();
        assert_eq!(lambda, omega * omega);
        let energy = record["energy"].as_f64().unwrap();
        assert!((2.0 * energy - lambda).abs() < 1e-6 * lambda);
        assert_eq!(record["c"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn modes_mu_column_vanishes_at_the_helmholtz_point() {
    let json_path = tmp("helmholtz.json");
    let csv_path = tmp("helmholtz.csv");
    let out = run(&[
        "modes",
        "--p",
        "0",
        "--k",
        "3",
        "--n",
        "1",
        "--out-json",
        json_path.to_str().unwrap(),
        "--out-csv",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mu = read_csv_column(&csv_path, 4);
    assert_eq!(mu.len(), 200);
    assert!(
        mu.iter().all(|v| v.abs() < 1e-10),
        "max |mu| = {:e}",
        mu.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    );
}

#[test]
fn invalid_strip_coordinates_exit_2_and_name_the_inequality() {
    let out = run(&[
        "modes",
        "--p",
        "6",
        "--k",
        "0",
        "--n",
        "1",
        "--out-json",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("p <= 5"), "stderr: {stderr}");

    let out = run(&[
        "modes",
        "--p",
        "1",
        "--k",
        "-2",
        "--n",
        "1",
        "--out-json",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k >= 0"));

    // Strict mode rejects the boundary the closed strip admits.
    let out = run(&[
        "modes",
        "--p",
        "0",
        "--k",
        "1",
        "--n",
        "1",
        "--strict-strip",
        "--out-json",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p > 0"));
}

#[test]
fn verify_passes_on_a_solved_basis_and_reports_the_gram_deviation() {
    let out = run(&["verify", "--p", "3", "--k", "0", "--n", "10"]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gram-identity"), "stdout: {stdout}");
    assert!(!stdout.contains("FAIL"));
    let gram_line = stdout
        .lines()
        .find(|l| l.starts_with("gram-identity"))
        .unwrap();
    let deviation: f64 = gram_line
        .split_whitespace()
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(deviation < 1e-8, "reported Gram deviation {deviation:e}");
}

#[test]
fn verify_with_zero_modes_is_a_usage_error() {
    let out = run(&["verify", "--p", "0", "--k", "0", "--n", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_reports_and_reconstructions_round_trip_through_csv() {
    let report_path = tmp("thermo.json");
    let out = run(&[
        "fit",
        "--field",
        "thermoelastic",
        "--p",
        "1",
        "--k",
        "2",
        "--n-max",
        "8",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["n_max"].as_u64(), Some(8));
    assert_eq!(report["coefficients"].as_array().unwrap().len(), 8);
    assert_eq!(report["e_l2"].as_array().unwrap().len(), 8);
    assert!(
        report["e_h1"].is_array(),
        "smooth target keeps the H1 curve"
    );

    // Reconstruction files exist for n = 3 and 10 is clipped away (n_max 8).
    let recon3 = recon_of(&report_path, 3);
    assert!(recon3.exists());
    assert!(!recon_of(&report_path, 10).exists());

    // Round trip: fitting the emitted reconstruction CSV (target columns)
    // reproduces the coefficients.
    let second_path = tmp("thermo-roundtrip.json");
    let out = run(&[
        "fit",
        "--field",
        "csv",
        "--input",
        recon3.to_str().unwrap(),
        "--p",
        "1",
        "--k",
        "2",
        "--n-max",
        "8",
        "--out",
        second_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let second: Value =
        serde_json::from_str(&std::fs::read_to_string(&second_path).unwrap()).unwrap();
    let b1 = report["coefficients"].as_array().unwrap();
    let b2 = second["coefficients"].as_array().unwrap();
    for (a, b) in b1.iter().zip(b2) {
        let (a, b) = (a.as_f64().unwrap(), b.as_f64().unwrap());
        assert!((a - b).abs() < 1e-6, "coefficient drift {a} vs {b}");
    }
}

#[test]
fn fit_refuses_h1_for_the_shrinkfit_target() {
    let report_path = tmp("shrink.json");
    let out = run(&[
        "fit",
        "--field",
        "shrinkfit",
        "--p",
        "0",
        "--k",
        "0",
        "--n-max",
        "6",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!(
        report["e_h1"].is_null(),
        "H1 must be omitted for a discontinuous target"
    );
    let e_l2: Vec<f64> = report["e_l2"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for w in e_l2.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn fit_self_consistency_through_sampled_mode_ingestion() {
    // Sample mode S_2 through the library, ingest the CSV, and expect the
    // coefficients (0, 1, 0, ...).
    use resbasis::basis::{basis_up_to, FunctionalParams};
    use resbasis::fields::ShellGeometry;
    use resbasis::quadrature::QuadratureSpec;

    let geometry = ShellGeometry::unit_shell();
    let params = FunctionalParams::new(0.0, 0.0).unwrap();
    let modes = basis_up_to(&params, 2, geometry, &QuadratureSpec::default()).unwrap();
    let field = modes[1].field();
    let mut csv = String::from("r,s_par,s_perp\n");
    for i in 0..=400 {
        let r = 0.5 + 0.5 * i as f64 / 400.0;
        csv.push_str(&format!(
            "{r:.15e},{:.15e},{:.15e}\n",
            field.s_par().value(r),
            field.s_perp().value(r)
        ));
    }
    let csv_path = tmp("mode2.csv");
    std::fs::write(&csv_path, csv).unwrap();

    let report_path = tmp("mode2-fit.json");
    let out = run(&[
        "fit",
        "--field",
        "csv",
        "--input",
        csv_path.to_str().unwrap(),
        "--p",
        "0",
        "--k",
        "0",
        "--n-max",
        "4",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let b: Vec<f64> = report["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (i, bi) in b.iter().enumerate() {
        let want = if i == 1 { 1.0 } else { 0.0 };
        assert!((bi - want).abs() < 1e-6, "b = {b:?}");
    }
}

#[test]
fn identical_flags_produce_byte_identical_outputs() {
    let a = tmp("det-a.json");
    let b = tmp("det-b.json");
    for path in [&a, &b] {
        let out = run(&[
            "fit",
            "--field",
            "thermoelastic",
            "--p",
            "0",
            "--k",
            "0",
            "--n-max",
            "5",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(recon_of(&a, 3)).unwrap(),
        std::fs::read(recon_of(&b, 3)).unwrap()
    );
}

#[test]
fn omega_sweep_emits_the_grid() {
    let path = tmp("omega.csv");
    let out = run(&[
        "sweep",
        "--what",
        "omega",
        "--p-min",
        "0",
        "--p-max",
        "5",
        "--p-steps",
        "6",
        "--n",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("p,n,omega\n"));
    assert_eq!(text.lines().count(), 1 + 6 * 2);
    // Mode 2 changes little across the strip.
    let omegas: Vec<f64> = read_csv_column(&path, 2);
    let mode2: Vec<f64> = omegas.iter().skip(1).step_by(2).copied().collect();
    let lo = mode2.iter().fold(f64::INFINITY, |acc, &v| acc.min(v));
    let hi = mode2.iter().fold(0.0f64, |acc, &v| acc.max(v));
    assert!(
        (hi - lo) / lo < 0.10,
        "mode-2 sweep varies {:.3}",
        (hi - lo) / lo
    );
}

#[test]
fn degenerate_single_point_sweep_is_valid() {
    let path = tmp("degenerate.csv");
    let out = run(&[
        "sweep",
        "--what",
        "omega",
        "--p-min",
        "2",
        "--p-max",
        "2",
        "--p-steps",
        "1",
        "--n",
        "1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn mu_sweep_is_dominated_by_k_f1_at_large_k() {
    // mu = k f1 + f2, so mu(k=100) - mu(k=0) = 100 f1 exactly; at k = 100 the
    // field should correlate almost perfectly with that component.
    let path0 = tmp("mu-k0.csv");
    let path100 = tmp("mu-k100.csv");
    for (k, path) in [("0", &path0), ("100", &path100)] {
        let out = run(&[
            "sweep",
            "--what",
            "mu",
            "--p-min",
            "0",
            "--p-max",
            "5",
            "--p-steps",
            "6",
            "--k",
            k,
            "--n",
            "1",
            "--r-steps",
            "41",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let mu0 = read_csv_column(&path0, 2);
    let mu100 = read_csv_column(&path100, 2);
    assert_eq!(mu0.len(), 6 * 41);
    let kf1: Vec<f64> = mu100.iter().zip(&mu0).map(|(a, b)| a - b).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&mu100), mean(&kf1));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (a, b) in mu100.iter().zip(&kf1) {
        num += (a - ma) * (b - mb);
        da += (a - ma) * (a - ma);
        db += (b - mb) * (b - mb);
    }
    let correlation = num / (da * db).sqrt();
    assert!(correlation > 0.99, "correlation {correlation}");
}

#[test]
fn invalid_sweep_ranges_exit_2() {
    let out = run(&[
        "sweep",
        "--what",
        "omega",
        "--p-min",
        "3",
        "--p-max",
        "1",
        "--p-steps",
        "5",
        "--out",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "sweep",
        "--what",
        "omega",
        "--p-min",
        "0",
        "--p-max",
        "7",
        "--p-steps",
        "5",
        "--out",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
