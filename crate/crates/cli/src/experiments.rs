//! Experiment pipelines: each drives the core modules from a validated
//! RunConfig and writes deterministic CSV/JSON artifacts.

use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use mixedpath_core::action::{build_action_matrix, ActionMatrix};
use mixedpath_core::amplitude::amplitudes_from_pair;
use mixedpath_core::error::Error as CoreError;
use mixedpath_core::hamiltonian::HamiltonianKind;
use mixedpath_core::lattice::enumerate_paths;
use mixedpath_core::mixedpath::{
    equal_component_pair, generalized_action, parallelism_residual, saddle_check,
    stationarity_check,
};
use mixedpath_core::reference::{
    compose_propagators, free_k_complex, free_particle_k, harmonic_oscillator_k,
    interference_damping_trial, lattice_propagator, microcanonical_transform,
    sample_free_propagator,
};
use mixedpath_core::variational::{solve_both, ContractedProfiles};

use crate::config::{config_digest, Experiment, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// What a run produced; serialized as `report.json` in the output
/// directory and echoed to stdout.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub experiment: &'static str,
    pub seed: u64,
    pub config_digest: String,
    pub outputs: Vec<String>,
    pub summary: Value,
}

pub struct Runner<'a> {
    cfg: &'a RunConfig,
    experiment: Experiment,
    digest: String,
    out_dir: PathBuf,
    outputs: Vec<String>,
}

#[derive(Debug)]
pub enum RunError {
    Core(CoreError),
    Io(String),
    Usage(String),
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
            RunError::Usage(e) => write!(f, "{e}"),
        }
    }
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a RunConfig, experiment: Experiment, config_text: &str) -> Runner<'a> {
        Runner {
            cfg,
            experiment,
            digest: config_digest(config_text),
            out_dir: PathBuf::from(&cfg.output_dir),
            outputs: Vec::new(),
        }
    }

    fn meta_header(&self) -> String {
        format!(
            "# tool = mixedpath {}\n# experiment = {}\n# seed = {}\n# config_digest = {}\n",
            env!("CARGO_PKG_VERSION"),
            self.experiment.name(),
            self.cfg.seed,
            self.digest,
        )
    }

    fn write_csv(&mut self, name: &str, payload: &str) -> Result<(), RunError> {
        if !self.cfg.formats.csv {
            return Ok(());
        }
        let content = format!("{}{}", self.meta_header(), payload);
        self.write_raw(name, &content)
    }

    fn write_json_value(&mut self, name: &str, payload: Value) -> Result<(), RunError> {
        if !self.cfg.formats.json {
            return Ok(());
        }
        let wrapped = json!({
            "schema_version": SCHEMA_VERSION,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "experiment": self.experiment.name(),
            "seed": self.cfg.seed,
            "config_digest": self.digest,
            "payload": payload,
        });
        let text =
            serde_json::to_string_pretty(&wrapped).map_err(|e| RunError::Io(e.to_string()))?;
        self.write_raw(name, &format!("{text}\n"))
    }

    fn write_raw(&mut self, name: &str, content: &str) -> Result<(), RunError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| RunError::Io(e.to_string()))?;
        let path = self.out_dir.join(name);
        fs::write(&path, content).map_err(|e| RunError::Io(e.to_string()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn run(mut self) -> Result<RunReport, RunError> {
        let summary = match self.experiment {
            Experiment::Enumerate => self.run_enumerate()?,
            Experiment::ActionMatrix => self.run_action_matrix()?,
            Experiment::Extremize => self.run_extremize()?,
            Experiment::Variational => self.run_variational()?,
            Experiment::Propagate => self.run_propagate()?,
            Experiment::Compose => self.run_compose()?,
            Experiment::Microcanonical => self.run_microcanonical()?,
            Experiment::Damping => self.run_damping()?,
        };
        let report = RunReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            experiment: self.experiment.name(),
            seed: self.cfg.seed,
            config_digest: self.digest.clone(),
            outputs: self.outputs.clone(),
            summary,
        };
        let text =
            serde_json::to_string_pretty(&report).map_err(|e| RunError::Io(e.to_string()))?;
        fs::create_dir_all(&self.out_dir).map_err(|e| RunError::Io(e.to_string()))?;
        fs::write(self.out_dir.join("report.json"), format!("{text}\n"))
            .map_err(|e| RunError::Io(e.to_string()))?;
        Ok(report)
    }

    fn build_matrix(&self) -> Result<ActionMatrix, RunError> {
        let ens = enumerate_paths(&self.cfg.hamiltonian, &self.cfg.lattice)?;
        Ok(build_action_matrix(&self.cfg.hamiltonian, &ens)?)
    }

    fn run_enumerate(&mut self) -> Result<Value, RunError> {
        let ens = enumerate_paths(&self.cfg.hamiltonian, &self.cfg.lattice)?;
        self.write_csv("ensemble.csv", &ens.to_csv())?;
        if self.cfg.formats.json {
            let payload: Value =
                serde_json::from_str(&ens.to_json()).map_err(|e| RunError::Io(e.to_string()))?;
            self.write_json_value("ensemble.json", payload)?;
        }
        Ok(json!({
            "paths": ens.len(),
            "ensemble_ref": ens.identifier(),
        }))
    }

    fn run_action_matrix(&mut self) -> Result<Value, RunError> {
        let matrix = self.build_matrix()?;
        self.write_csv("action_matrix.csv", &matrix.to_csv())?;
        if self.cfg.formats.json {
            let payload: Value =
                serde_json::from_str(&matrix.to_json()).map_err(|e| RunError::Io(e.to_string()))?;
            self.write_json_value("action_matrix.json", payload)?;
        }
        Ok(json!({
            "n": matrix.n(),
            "ensemble_ref": matrix.ensemble_ref,
            "total": matrix.total(),
        }))
    }

    fn run_extremize(&mut self) -> Result<Value, RunError> {
        let matrix = self.build_matrix()?;
        let pair = equal_component_pair(matrix.n(), self.cfg.pr)?;
        let v = generalized_action(&pair, &matrix)?;
        let parallelism = parallelism_residual(&pair, &matrix)?;
        let stationarity = stationarity_check(&pair, &matrix, self.cfg.probes, self.cfg.seed)?;
        let saddle = saddle_check(&pair, &matrix, self.cfg.probes, self.cfg.seed)?;
        let (norm_value, norm_ok) = pair.check_normalization();

        self.write_csv("action_matrix.csv", &matrix.to_csv())?;
        self.write_json_value(
            "pair.json",
            json!({
                "alpha": pair.alpha,
                "beta": pair.beta,
                "pr": pair.pr,
                "normalization": { "value": norm_value, "ok": norm_ok },
            }),
        )?;
        let amps = amplitudes_from_pair(&pair);
        self.write_csv("amplitudes.csv", &amps.to_csv())?;
        if self.cfg.formats.json {
            let payload: Value =
                serde_json::from_str(&amps.to_json()).map_err(|e| RunError::Io(e.to_string()))?;
            self.write_json_value("amplitudes.json", payload)?;
        }
        let saddle_payload = json!({
            "v": saddle.v,
            "min_over_beta": saddle.min_over_beta,
            "max_over_alpha": saddle.max_over_alpha,
            "violations": saddle.violations,
            "probes": saddle.probes,
            "seed": saddle.seed,
            "holds_minimax": saddle.holds_minimax,
            "holds_maximin": saddle.holds_maximin,
        });
        self.write_json_value(
            "extremize.json",
            json!({
                "v": v,
                "parallelism_residual": parallelism,
                "stationarity": {
                    "max_derivative": stationarity.max_derivative,
                    "probes": stationarity.probes,
                    "seed": stationarity.seed,
                },
                "saddle": saddle_payload,
            }),
        )?;
        Ok(json!({ "n": matrix.n(), "v": v }))
    }

    fn run_variational(&mut self) -> Result<Value, RunError> {
        let matrix = self.build_matrix()?;
        let pair = equal_component_pair(matrix.n(), self.cfg.pr)?;
        let profiles = ContractedProfiles::new(&matrix, &pair.alpha, &pair.beta)?;
        if profiles.g_values.is_none() {
            return Err(RunError::Core(CoreError::Problem1Unavailable));
        }

        // plot-ready c-grid over the Problem 1 bracket
        let grid_points = 1001usize;
        let (lo, hi) = self.cfg.c_bracket;
        let mut grid_csv = String::from("c,i1,j1,i2,j2\n");
        for i in 0..grid_points {
            let c = lo + (hi - lo) * i as f64 / (grid_points - 1) as f64;
            let (i1, j1) = profiles.problem1(c)?;
            let (i2, j2) = profiles.problem2(c);
            grid_csv.push_str(&format!(
                "{c:.17e},{i1:.17e},{j1:.17e},{i2:.17e},{j2:.17e}\n"
            ));
        }
        self.write_csv("profiles.csv", &grid_csv)?;

        let sum_alpha: f64 = pair.alpha.iter().sum();
        let sum_beta: f64 = pair.beta.iter().sum();
        let report = solve_both(
            &profiles,
            self.cfg.pr,
            sum_alpha,
            sum_beta,
            self.cfg.c_bracket,
            self.cfg.c_bracket2,
            self.cfg.scan_points,
        )?;
        let payload = serde_json::to_value(&report).map_err(|e| RunError::Io(e.to_string()))?;
        self.write_json_value("variational.json", payload)?;
        Ok(json!({
            "c1_star": report.problem1.c_star,
            "c2_star": report.problem2.c_star,
            "v1": report.problem1.v,
            "v2": report.problem2.v,
            "v_rel_difference": report.v_rel_difference,
        }))
    }

    fn run_propagate(&mut self) -> Result<Value, RunError> {
        let h = &self.cfg.hamiltonian;
        let hbar = self.cfg.hbar;
        let t = self.cfg.t_total;
        let mut csv = String::from("dq,lattice_re,lattice_im,analytic_re,analytic_im,rel_err\n");
        let mut worst: f64 = 0.0;
        for &dq in &self.cfg.dq_values {
            let (q_i, q_f) = (self.cfg.q_i, self.cfg.q_i + dq);
            let lattice =
                lattice_propagator(h, hbar, q_i, q_f, t, self.cfg.n_slices, &self.cfg.quad)?;
            let analytic = match h.kind {
                HamiltonianKind::Harmonic => {
                    harmonic_oscillator_k(h.mass, h.omega, hbar, q_i, q_f, t)?
                }
                _ => free_particle_k(h.mass, hbar, q_f - q_i, t)?,
            };
            let rel = (lattice - analytic).norm() / analytic.norm();
            worst = worst.max(rel);
            csv.push_str(&format!(
                "{dq:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{rel:.17e}\n",
                lattice.re, lattice.im, analytic.re, analytic.im
            ));
        }
        self.write_csv("propagate_errors.csv", &csv)?;
        self.write_json_value(
            "propagate.json",
            json!({
                "n_slices": self.cfg.n_slices,
                "t_total": t,
                "worst_rel_err": worst,
            }),
        )?;
        Ok(json!({ "worst_rel_err": worst }))
    }

    fn run_compose(&mut self) -> Result<Value, RunError> {
        let h = &self.cfg.hamiltonian;
        if h.kind != HamiltonianKind::Free {
            return Err(RunError::Usage(
                "compose supports the free-particle propagator".into(),
            ));
        }
        let (m, hbar) = (h.mass, self.cfg.hbar);
        let t = self.cfg.t_total;
        let k = |qa: f64, qb: f64, tau: mixedpath_core::Complex64| {
            free_k_complex(m, hbar, qb - qa, tau)
        };
        let analytic = free_particle_k(m, hbar, self.cfg.q_f - self.cfg.q_i, t)?;
        let mut csv = String::from("t_mid,re,im,rel_err\n");
        let mut rows = Vec::new();
        for frac in [0.35, 0.5, 0.65] {
            let tm = frac * t;
            let got =
                compose_propagators(k, 0.0, tm, t, self.cfg.q_i, self.cfg.q_f, &self.cfg.quad)?;
            let rel = (got - analytic).norm() / analytic.norm();
            csv.push_str(&format!(
                "{tm:.17e},{:.17e},{:.17e},{rel:.17e}\n",
                got.re, got.im
            ));
            rows.push(json!({ "t_mid": tm, "rel_err": rel }));
        }
        self.write_csv("compose.csv", &csv)?;
        self.write_json_value(
            "compose.json",
            json!({
                "eps_reg": self.cfg.quad.eps_reg,
                "window": self.cfg.quad.window,
                "splits": rows,
            }),
        )?;
        Ok(json!({ "splits": 3 }))
    }

    fn run_microcanonical(&mut self) -> Result<Value, RunError> {
        let sample = sample_free_propagator(
            self.cfg.micro.mass,
            self.cfg.micro.hbar,
            0.5 * self.cfg.micro.l_window,
            self.cfg.micro.q_points.min(64),
            0.0,
            self.cfg.micro.t_fixed,
            3,
        )?;
        self.write_csv("propagator_sample.csv", &sample.to_csv())?;
        let (momentum, spectral, report) =
            microcanonical_transform(&self.cfg.micro, &self.cfg.peak_momenta)?;
        self.write_csv("momentum_density.csv", &momentum.to_csv())?;
        self.write_csv("spectral.csv", &spectral.to_csv())?;
        for &p in &self.cfg.peak_momenta {
            let name = format!("slice_p{p}.csv").replace('-', "m");
            self.write_csv(&name, &spectral.magnitude_slice_csv(p))?;
        }
        let payload = serde_json::to_value(&report).map_err(|e| RunError::Io(e.to_string()))?;
        self.write_json_value("microcanonical.json", payload)?;
        Ok(json!({
            "diagonal_offset_cells": report.diagonal_offset_cells,
            "p_peak_fwhm": report.p_peak_fwhm,
        }))
    }

    fn run_damping(&mut self) -> Result<Value, RunError> {
        let report = interference_damping_trial(
            self.cfg.n_paths,
            self.cfg.phase_model,
            self.cfg.seed,
            self.cfg.trials,
        )?;
        let payload = serde_json::to_value(&report).map_err(|e| RunError::Io(e.to_string()))?;
        self.write_json_value("damping.json", payload)?;
        Ok(json!({
            "cross_mean": report.cross_mean,
            "cross_std_error": report.cross_std_error,
        }))
    }
}
