//! End-to-end checks of the binary: usage and config failures produce
//! machine-readable records with nonzero exit, and every emitted file is
//! re-parseable by the crate's own readers.

use std::path::PathBuf;
use std::process::{Command, Output};

use mixedpath_core::action::matrix_entries_from_csv;
use mixedpath_core::lattice::paths_from_csv;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mixedpath")
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mixedpath-cli-test-{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

const HARMONIC_THREE_PATH: &str = "\
hamiltonian.kind = harmonic
hamiltonian.mass = 1.0
hamiltonian.omega = 1.0
lattice.dt = 0.1
lattice.n_steps = 2
lattice.branch_offsets = 0.0, 0.3, 0.6, 1.2
lattice.q_start = 0.0
lattice.endpoint = 0.12
lattice.pin_tolerance = 0.004
numeric.probes = 500
";

#[test]
fn missing_config_flag_is_a_usage_error() {
    let out = run(&["enumerate"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "usage");
    assert_eq!(err["status"], "error");
}

#[test]
fn unknown_experiment_is_rejected() {
    let out = run(&["frobnicate", "--config", "/dev/null"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["detail"].as_str().unwrap().contains("frobnicate"));
}

#[test]
fn config_errors_name_keys_and_lines() {
    let dir = scratch("config-errors");
    let conf = dir.join("bad.conf");
    std::fs::write(&conf, "lattice.dt = -2\nnope = 1\n").unwrap();
    let out = run(&["enumerate", "--config", conf.to_str().unwrap()]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["kind"], "config");
    let detail = err["detail"].as_array().unwrap();
    assert!(detail
        .iter()
        .any(|e| e["key"] == "lattice.dt" && e["line"] == 1));
    assert!(detail.iter().any(|e| e["key"] == "nope" && e["line"] == 2));
}

#[test]
fn experiment_mismatch_with_config_is_rejected() {
    let dir = scratch("mismatch");
    let conf = dir.join("run.conf");
    std::fs::write(
        &conf,
        format!("experiment = damping\n{HARMONIC_THREE_PATH}"),
    )
    .unwrap();
    let out = run(&["enumerate", "--config", conf.to_str().unwrap()]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["detail"].as_str().unwrap().contains("damping"));
}

#[test]
fn empty_pinned_ensemble_exits_nonzero_with_record() {
    let dir = scratch("empty");
    let conf = dir.join("run.conf");
    std::fs::write(
        &conf,
        "hamiltonian.kind = free\n\
         lattice.dt = 0.1\n\
         lattice.n_steps = 2\n\
         lattice.branch_offsets = -1.0, 1.0\n\
         lattice.endpoint = 50.0\n\
         lattice.pin_tolerance = 1e-9\n",
    )
    .unwrap();
    let out = run(&["enumerate", "--config", conf.to_str().unwrap()]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["detail"].as_str().unwrap().contains("empty ensemble"));
}

#[test]
fn emitted_files_reparse_with_own_readers() {
    let dir = scratch("roundtrip");
    let conf = dir.join("run.conf");
    std::fs::write(&conf, HARMONIC_THREE_PATH).unwrap();
    let out_dir = dir.join("out");

    let out = run(&[
        "extremize",
        "--config",
        conf.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // stdout report and every JSON artifact parse as JSON
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema_version"], 1);
    for name in ["report.json", "pair.json", "extremize.json"] {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        if name != "report.json" {
            assert_eq!(value["schema_version"], 1, "{name}");
        }
    }

    // the matrix CSV reparses into the same square matrix
    let matrix_text = std::fs::read_to_string(out_dir.join("action_matrix.csv")).unwrap();
    let entries = matrix_entries_from_csv(&matrix_text).unwrap();
    assert_eq!(entries.len(), 3);

    // an ensemble CSV reparses into the same paths it came from
    let ens_out = dir.join("out-enumerate");
    let out = run(&[
        "enumerate",
        "--config",
        conf.to_str().unwrap(),
        "--output-dir",
        ens_out.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv_text = std::fs::read_to_string(ens_out.join("ensemble.csv")).unwrap();
    let paths = paths_from_csv(&csv_text, 0.1).unwrap();
    assert_eq!(paths.len(), 3);
    for p in &paths {
        assert_eq!(p.q_samples.len(), 3);
        assert_eq!(p.p_samples.len(), 2);
    }
}

#[test]
fn variational_json_parses_and_reports_both_problems() {
    let dir = scratch("variational");
    let conf = dir.join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "{HARMONIC_THREE_PATH}\
             numeric.c_bracket = 0.3, 5.0\n\
             numeric.c_bracket2 = 60.0, 200.0\n\
             numeric.scan_points = 20000\n"
        ),
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "variational",
        "--config",
        conf.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(out_dir.join("variational.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let payload = &value["payload"];
    assert!(payload["problem1"]["c_star"].as_f64().unwrap() > 0.0);
    assert!(payload["problem2"]["c_star"].as_f64().unwrap() > 60.0);
    assert!(payload["hessian1"]["normalized_d"].is_number());
    assert!(payload["v_rel_difference"].is_number());
    // the c-grid CSV is plot-ready: header plus 1001 rows
    let grid = std::fs::read_to_string(out_dir.join("profiles.csv")).unwrap();
    let rows = grid.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 1001);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = scratch("seed-override");
    let conf = dir.join("run.conf");
    std::fs::write(&conf, format!("{HARMONIC_THREE_PATH}numeric.seed = 1\n")).unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "extremize",
        "--config",
        conf.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
        "--seed",
        "77",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 77);
}

#[test]
fn every_emitted_csv_reparses_as_a_numeric_table() {
    use mixedpath_core::tabular::read_numeric_csv;

    let dir = scratch("all-artifacts");
    let run_one = |exp: &str, extra: &str| {
        let conf = dir.join(format!("{exp}.conf"));
        std::fs::write(&conf, format!("{HARMONIC_THREE_PATH}{extra}")).unwrap();
        let out_dir = dir.join(format!("out-{exp}"));
        let out = run(&[
            exp,
            "--config",
            conf.to_str().unwrap(),
            "--output-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{exp}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out_dir
    };

    let compose_extra = "\
hamiltonian.kind = free
numeric.t_total = 2.0
numeric.q_f = 0.5
";
    let micro_extra = "\
numeric.q_points = 96
numeric.t_points = 96
numeric.peak_momenta = 0.5, 1.0
";
    let dirs = vec![
        run_one("enumerate", ""),
        run_one("action-matrix", ""),
        run_one("extremize", ""),
        run_one(
            "variational",
            "numeric.c_bracket = 0.3, 5.0\nnumeric.c_bracket2 = 60.0, 200.0\n",
        ),
        run_one(
            "propagate",
            "numeric.n_slices = 2\nnumeric.window = 8.0\nnumeric.points = 192\n",
        ),
        {
            let conf = dir.join("compose.conf");
            std::fs::write(&conf, compose_extra).unwrap();
            let out_dir = dir.join("out-compose");
            let out = run(&[
                "compose",
                "--config",
                conf.to_str().unwrap(),
                "--output-dir",
                out_dir.to_str().unwrap(),
            ]);
            assert!(out.status.success());
            out_dir
        },
        {
            let conf = dir.join("micro.conf");
            std::fs::write(&conf, format!("hamiltonian.kind = free\n{micro_extra}")).unwrap();
            let out_dir = dir.join("out-micro");
            let out = run(&[
                "microcanonical",
                "--config",
                conf.to_str().unwrap(),
                "--output-dir",
                out_dir.to_str().unwrap(),
            ]);
            assert!(out.status.success());
            out_dir
        },
        run_one("damping", "numeric.n_paths = 50\nnumeric.trials = 20\n"),
    ];

    let mut csv_count = 0;
    let mut json_count = 0;
    for out_dir in dirs {
        for entry in std::fs::read_dir(&out_dir).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&path).unwrap();
            if name.ends_with(".csv") {
                // the matrix CSV is headerless by schema; it has its own reader
                if name == "action_matrix.csv" {
                    mixedpath_core::action::matrix_entries_from_csv(&text).unwrap();
                } else {
                    let table = read_numeric_csv(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
                    assert!(!table.rows.is_empty(), "{name} has no data rows");
                }
                csv_count += 1;
            } else if name.ends_with(".json") {
                let _: serde_json::Value =
                    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
                json_count += 1;
            }
        }
    }
    assert!(csv_count >= 10, "only {csv_count} CSV artifacts seen");
    assert!(json_count >= 10, "only {json_count} JSON artifacts seen");
}

#[test]
fn output_formats_filter_artifacts() {
    let dir = scratch("formats");
    let conf = dir.join("run.conf");
    std::fs::write(
        &conf,
        format!("{HARMONIC_THREE_PATH}output.formats = json\n"),
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "enumerate",
        "--config",
        conf.to_str().unwrap(),
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(!out_dir.join("ensemble.csv").exists());
    assert!(out_dir.join("ensemble.json").exists());
    // the run report is always written
    assert!(out_dir.join("report.json").exists());
}
