//! Batch front end: `mixedpath <experiment> --config FILE
//! [--output-dir DIR] [--seed N]`. One experiment per invocation; outputs
//! are byte-identical for identical (config, seed) and worker counts.

mod config;
mod experiments;

use std::process::ExitCode;

use config::{parse_config, Experiment};
use experiments::{RunError, Runner, SCHEMA_VERSION};

const USAGE: &str = "usage: mixedpath <experiment> --config FILE [--output-dir DIR] [--seed N]

experiments:
  enumerate       fan-out path ensemble export
  action-matrix   S_jk matrix over the ensemble
  extremize       equal-component pair, generalized action, saddle reports
  variational     trial-family extremization (Problems 1 and 2)
  propagate       time-sliced propagator vs the analytic kernel
  compose         Chapman-Kolmogorov composition checks
  microcanonical  Fourier transform of the free propagator to (p, E) peaks
  damping         random-phase interference statistics";

fn fail(experiment: Option<&str>, kind: &str, detail: serde_json::Value) -> ExitCode {
    let record = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "status": "error",
        "experiment": experiment,
        "kind": kind,
        "detail": detail,
    });
    eprintln!(
        "{}",
        serde_json::to_string_pretty(&record).expect("error record")
    );
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") || args.is_empty() {
        println!("{USAGE}");
        return if args.is_empty() {
            ExitCode::FAILURE
        } else {
            ExitCode::SUCCESS
        };
    }

    let experiment_name = args[0].clone();
    let experiment = match Experiment::parse(&experiment_name) {
        Some(e) => e,
        None => {
            return fail(
                Some(&experiment_name),
                "usage",
                serde_json::json!(format!("unknown experiment `{experiment_name}`")),
            )
        }
    };

    let mut config_path: Option<String> = None;
    let mut output_dir: Option<String> = None;
    let mut seed: Option<u64> = None;
    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        let take = |it: &mut std::slice::Iter<String>, flag: &str| -> Result<String, String> {
            it.next()
                .cloned()
                .ok_or_else(|| format!("{flag} requires a value"))
        };
        let result = match arg.as_str() {
            "--config" => take(&mut it, "--config").map(|v| config_path = Some(v)),
            "--output-dir" => take(&mut it, "--output-dir").map(|v| output_dir = Some(v)),
            "--seed" => take(&mut it, "--seed").and_then(|v| {
                v.parse::<u64>()
                    .map(|s| seed = Some(s))
                    .map_err(|_| format!("--seed expects an unsigned integer, got `{v}`"))
            }),
            other => Err(format!("unknown flag `{other}`")),
        };
        if let Err(msg) = result {
            return fail(Some(experiment.name()), "usage", serde_json::json!(msg));
        }
    }

    let config_path = match config_path {
        Some(p) => p,
        None => {
            return fail(
                Some(experiment.name()),
                "usage",
                serde_json::json!("--config FILE is required"),
            )
        }
    };
    let config_text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            return fail(
                Some(experiment.name()),
                "io",
                serde_json::json!(format!("cannot read {config_path}: {e}")),
            )
        }
    };

    let mut cfg = match parse_config(&config_text) {
        Ok(c) => c,
        Err(errors) => {
            let list: Vec<serde_json::Value> = errors
                .iter()
                .map(|e| {
                    serde_json::json!({
                        "line": e.line,
                        "key": e.key,
                        "message": e.message,
                    })
                })
                .collect();
            return fail(Some(experiment.name()), "config", serde_json::json!(list));
        }
    };
    if let Some(config_exp) = cfg.experiment {
        if config_exp != experiment {
            return fail(
                Some(experiment.name()),
                "config",
                serde_json::json!(format!(
                    "config names experiment `{}` but `{}` was requested",
                    config_exp.name(),
                    experiment.name()
                )),
            );
        }
    }
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }

    let run = || Runner::new(&cfg, experiment, &config_text).run();
    let outcome = match cfg.workers {
        Some(workers) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(p) => p,
                Err(e) => {
                    return fail(
                        Some(experiment.name()),
                        "runtime",
                        serde_json::json!(e.to_string()),
                    )
                }
            };
            pool.install(run)
        }
        None => run(),
    };

    match outcome {
        Ok(report) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            let kind = match &err {
                RunError::Core(_) => "core",
                RunError::Io(_) => "io",
                RunError::Usage(_) => "usage",
            };
            fail(
                Some(experiment.name()),
                kind,
                serde_json::json!(err.to_string()),
            )
        }
    }
}
