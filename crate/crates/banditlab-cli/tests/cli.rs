//! End-to-end tests of the `banditlab` binary: exit codes, presets, output
//! determinism, and plot emission.

use std::process::{Command, Output};

use banditlab_cli::{parse_csv_spec, parse_csv_table};

fn banditlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_banditlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_all_optimal_three_arms() {
    let out = banditlab(&[
        "solve", "--K", "3", "--T", "100", "--gamma", "2", "--sigma", "1", "--deltas", "0,0,0",
    ]);
    assert!(out.status.success());
    let table = parse_csv_table(&stdout(&out)).unwrap();
    assert_eq!(table.rows.len(), 3);
    let n_star = table.rows[0][table.col("n_star")];
    assert!((n_star - 100.0 / 3.0).abs() < 1e-9);
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = banditlab(&["solve", "--nonsense", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unparsable_number_is_usage_error() {
    let out = banditlab(&[
        "solve", "--K", "two", "--T", "10", "--sigma", "1", "--deltas", "0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_sigma_is_usage_error_with_message() {
    let out = banditlab(&["solve", "--T", "10", "--deltas", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("--sigma"), "unhelpful message: {err}");
}

#[test]
fn inconsistent_dimensions_are_usage_errors() {
    let out = banditlab(&[
        "solve", "--K", "3", "--T", "10", "--sigma", "1", "--deltas", "0,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    // Precondition violation from the library side: horizon below K.
    let out = banditlab(&["simulate", "--mu", "0,0,0", "--sigma", "1", "--T", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_noiseless_greedy_counts() {
    let out = banditlab(&[
        "simulate", "--mu", "0,-1", "--sigma", "0", "--T", "10", "--gamma", "2",
    ]);
    assert!(out.status.success());
    let table = parse_csv_table(&stdout(&out)).unwrap();
    assert_eq!(table.rows[0][table.col("pulls")], 9.0);
    assert_eq!(table.rows[1][table.col("pulls")], 1.0);
    assert_eq!(table.rows[0][table.col("pseudo_regret")], 1.0);
}

#[test]
fn sweep_preset_resolves_figure_settings() {
    // Tiny replicate count keeps the test fast; the preset still pins the
    // instance geometry, horizon, rate, and gap grid.
    let out = banditlab(&["sweep", "--preset", "fig1", "--reps", "2", "--seed", "7"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let spec = parse_csv_spec(&text).unwrap();
    assert_eq!(spec["k"], 2);
    assert_eq!(spec["sigma"], 0.1);
    assert_eq!(spec["horizon"], 3000);
    assert_eq!(spec["reps"], 2);
    let gamma = spec["gamma"].as_f64().unwrap();
    assert!((gamma - (2.0 * 3000f64.ln()).sqrt()).abs() < 1e-12);
    let deltas = spec["deltas"].as_array().unwrap();
    assert_eq!(deltas.len(), 25);
    assert!((deltas[0].as_f64().unwrap() - 0.01).abs() < 1e-12);
    assert!((deltas[24].as_f64().unwrap() - 0.25).abs() < 1e-12);

    let table = parse_csv_table(&text).unwrap();
    assert_eq!(
        table.columns,
        vec![
            "delta",
            "reg_mc_mean",
            "reg_mc_se",
            "reg_star",
            "reg_lr",
            "err_theta"
        ]
    );
    assert_eq!(table.rows.len(), 25);
}

#[test]
fn coverage_preset_resolves_figure_settings() {
    let out = banditlab(&[
        "coverage", "--preset", "fig2", "--reps", "2", "--alpha", "0.1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let spec = parse_csv_spec(&text).unwrap();
    assert_eq!(spec["horizon"], 10_000);
    let t = 10_000f64;
    let mu2 = spec["mu"][1].as_f64().unwrap();
    assert!((mu2 - (1.0 - (t.ln() / t).sqrt())).abs() < 1e-12);
    let gamma = spec["gamma"].as_f64().unwrap();
    assert!((gamma - (6.0 * t.ln()).sqrt()).abs() < 1e-12);
}

#[test]
fn coverage_literal_gamma_flag() {
    let out = banditlab(&[
        "coverage",
        "--preset",
        "fig2",
        "--gamma-literal",
        "--reps",
        "2",
        "--alpha",
        "0.1",
    ]);
    assert!(out.status.success());
    let spec = parse_csv_spec(&stdout(&out)).unwrap();
    let t = 10_000f64;
    let gamma = spec["gamma"].as_f64().unwrap();
    assert!((gamma - (6.0 * t.ln() / t).sqrt()).abs() < 1e-12);
    // Outside the preset the flag has nothing to override.
    let out = banditlab(&[
        "coverage",
        "--gamma-literal",
        "--mu",
        "0,1",
        "--sigma",
        "0.1",
        "--T",
        "50",
        "--alpha",
        "0.1",
        "--reps",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_files_are_bitwise_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let run = |out_path: &str, workers: &str| {
        let out = banditlab(&[
            "sweep",
            "--K",
            "2",
            "--sigma",
            "0.1",
            "--T",
            "300",
            "--deltas",
            "0.05,0.2",
            "--reps",
            "60",
            "--seed",
            "5",
            "--workers",
            workers,
            "--out",
            out_path,
        ]);
        assert!(out.status.success());
        std::fs::read(out_path).unwrap()
    };
    let a = run(&path("a.csv"), "1");
    let b = run(&path("b.csv"), "1");
    assert_eq!(a, b, "same request twice must be byte-identical");

    let c = run(&path("c.csv"), "4");
    let strip = |bytes: &[u8]| {
        let text = String::from_utf8(bytes.to_vec()).unwrap();
        text.lines().skip(1).collect::<Vec<_>>().join("\n")
    };
    // Only the echoed worker count may differ.
    assert_eq!(strip(&a), strip(&c), "worker count changed the estimates");
}

#[test]
fn plot_flag_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cov.csv");
    let out = banditlab(&[
        "coverage",
        "--mu",
        "0.5,0.25",
        "--sigma",
        "0.1",
        "--T",
        "100",
        "--alpha",
        "0.05,0.2",
        "--reps",
        "20",
        "--out",
        out_path.to_str().unwrap(),
        "--plot",
    ]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(dir.path().join("cov.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    // One series per arm plus the nominal reference line.
    assert!(svg.contains(">arm 1</text>"));
    assert!(svg.contains(">nominal</text>"));
}

#[test]
fn plot_without_out_is_usage_error() {
    let out = banditlab(&[
        "coverage", "--mu", "0.5,0.25", "--sigma", "0.1", "--T", "100", "--alpha", "0.05",
        "--reps", "5", "--plot",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plot_is_rejected_for_tables_without_series() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("s.csv");
    let out = banditlab(&[
        "solve",
        "--deltas",
        "0,0.1",
        "--sigma",
        "0.1",
        "--T",
        "100",
        "--out",
        out_path.to_str().unwrap(),
        "--plot",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_path_is_runtime_failure() {
    let out = banditlab(&[
        "solve",
        "--deltas",
        "0,0.1",
        "--sigma",
        "1",
        "--T",
        "10",
        "--out",
        "/nonexistent-dir/x.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn audit_rejects_zero_noise() {
    let out = banditlab(&[
        "audit", "--mu", "0,-1", "--sigma", "0", "--T", "50", "--reps", "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_small_run_is_clean() {
    let out = banditlab(&[
        "audit", "--deltas", "0,0.1", "--sigma", "0.1", "--T", "400", "--reps", "40", "--seed", "3",
    ]);
    assert!(out.status.success(), "audit exits 0 when no violations");
    let table = parse_csv_table(&stdout(&out)).unwrap();
    assert_eq!(table.rows[0][table.col("violations")], 0.0);
}

#[test]
fn crossing_requires_levels_at_least_one() {
    let out = banditlab(&["crossing", "--T", "10", "--x", "0.5", "--reps", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = banditlab(&["crossing", "--T", "10", "--x", "1.5,2.5", "--reps", "50"]);
    assert!(out.status.success());
    let table = parse_csv_table(&stdout(&out)).unwrap();
    assert_eq!(table.rows.len(), 2);
}

#[test]
fn json_format_emits_spec_and_rows() {
    let out = banditlab(&[
        "solve", "--deltas", "0,0.5", "--sigma", "1", "--T", "20", "--gamma", "3", "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["spec"]["command"], "solve");
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn workers_env_override_is_honored() {
    let out = Command::new(env!("CARGO_BIN_EXE_banditlab"))
        .args([
            "sweep", "--K", "2", "--sigma", "0.1", "--T", "200", "--deltas", "0.1", "--reps", "20",
            "--seed", "1",
        ])
        .env("BANDITLAB_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let spec = parse_csv_spec(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(spec["workers"], 2);
}

#[test]
fn sweep_plot_has_three_series() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sweep.csv");
    let out = banditlab(&[
        "sweep",
        "--K",
        "2",
        "--sigma",
        "0.1",
        "--T",
        "300",
        "--deltas",
        "0.05,0.1,0.2",
        "--reps",
        "20",
        "--out",
        out_path.to_str().unwrap(),
        "--plot",
    ]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(dir.path().join("sweep.svg")).unwrap();
    for label in ["MC regret", "theoretical", "Lai-Robbins"] {
        assert!(
            svg.contains(&format!(">{label}</text>")),
            "missing series {label}"
        );
    }
}

#[test]
fn coverage_estimated_sigma_flag_is_echoed() {
    let out = banditlab(&[
        "coverage",
        "--mu",
        "0.5,0.25",
        "--sigma",
        "0.1",
        "--T",
        "200",
        "--alpha",
        "0.1",
        "--reps",
        "10",
        "--estimate-sigma",
    ]);
    assert!(out.status.success());
    let spec = parse_csv_spec(&stdout(&out)).unwrap();
    assert_eq!(spec["estimate_sigma"], true);
}

#[test]
fn linear_command_reports_invariance() {
    let out = banditlab(&["linear", "--T", "300", "--reps", "8", "--seed", "2"]);
    assert!(out.status.success());
    let table = parse_csv_table(&stdout(&out)).unwrap();
    let dev_col = table.col("lambda_dev");
    for row in &table.rows {
        assert!(row[dev_col] <= 1e-9, "lambda deviation {}", row[dev_col]);
    }
}
