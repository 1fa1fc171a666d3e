//! Key-value run configuration: one `key = value` per line, `#` comments,
//! dotted section prefixes. Parsing collects every error (with its line)
//! instead of stopping at the first, and rejects unknown keys by name.

use std::collections::BTreeSet;
use std::fmt;

use mixedpath_core::hamiltonian::{Hamiltonian, HamiltonianKind};
use mixedpath_core::lattice::LatticeConfig;
use mixedpath_core::reference::{MicrocanonicalSpec, PhaseModel, QuadratureSpec};

/// The pipeline an invocation drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Enumerate,
    ActionMatrix,
    Extremize,
    Variational,
    Propagate,
    Compose,
    Microcanonical,
    Damping,
}

impl Experiment {
    pub fn parse(s: &str) -> Option<Experiment> {
        match s {
            "enumerate" => Some(Experiment::Enumerate),
            "action-matrix" => Some(Experiment::ActionMatrix),
            "extremize" => Some(Experiment::Extremize),
            "variational" => Some(Experiment::Variational),
            "propagate" => Some(Experiment::Propagate),
            "compose" => Some(Experiment::Compose),
            "microcanonical" => Some(Experiment::Microcanonical),
            "damping" => Some(Experiment::Damping),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Enumerate => "enumerate",
            Experiment::ActionMatrix => "action-matrix",
            Experiment::Extremize => "extremize",
            Experiment::Variational => "variational",
            Experiment::Propagate => "propagate",
            Experiment::Compose => "compose",
            Experiment::Microcanonical => "microcanonical",
            Experiment::Damping => "damping",
        }
    }
}

/// One parse or validation failure, carrying its line context.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}: {}", self.line, self.key, self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

/// Which output formats to emit.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats {
            csv: true,
            json: true,
        }
    }
}

/// Fully validated run configuration with documented defaults filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub hamiltonian: Hamiltonian,
    pub lattice: LatticeConfig,
    pub quad: QuadratureSpec,
    pub micro: MicrocanonicalSpec,
    pub seed: u64,
    pub probes: usize,
    pub pr: f64,
    pub c_bracket: (f64, f64),
    pub c_bracket2: (f64, f64),
    pub scan_points: usize,
    pub n_slices: usize,
    pub t_total: f64,
    pub q_i: f64,
    pub q_f: f64,
    pub hbar: f64,
    pub peak_momenta: Vec<f64>,
    pub n_paths: usize,
    pub trials: usize,
    pub phase_model: PhaseModel,
    pub workers: Option<usize>,
    pub output_dir: String,
    pub formats: Formats,
    /// Δq values tabulated by the propagate experiment.
    pub dq_values: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            hamiltonian: Hamiltonian::free(1.0).expect("default hamiltonian"),
            lattice: LatticeConfig::new(0.1, 2, vec![-1.0, 0.0, 1.0], 0.0),
            quad: QuadratureSpec::default(),
            micro: MicrocanonicalSpec::default(),
            seed: 0,
            probes: 10_000,
            pr: 1.0,
            c_bracket: (0.3, 5.0),
            c_bracket2: (60.0, 200.0),
            scan_points: 10_000,
            n_slices: 3,
            t_total: 1.0,
            q_i: 0.0,
            q_f: 0.0,
            hbar: 1.0,
            peak_momenta: vec![0.5, 1.0, 2.0],
            n_paths: 1000,
            trials: 1000,
            phase_model: PhaseModel::UniformRandom,
            workers: None,
            output_dir: "out".into(),
            formats: Formats::default(),
            dq_values: vec![0.0, 0.5, 1.0, 1.5, 2.0],
        }
    }
}

struct Raw {
    line: usize,
    key: String,
    value: String,
}

fn split_lines(text: &str) -> (Vec<Raw>, Vec<ConfigError>) {
    let mut raws = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let stripped = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.split_once('=') {
            Some((k, v)) => raws.push(Raw {
                line: line_no,
                key: k.trim().to_string(),
                value: v.trim().to_string(),
            }),
            None => errors.push(ConfigError {
                line: line_no,
                key: trimmed.to_string(),
                message: "expected `key = value`".into(),
            }),
        }
    }
    (raws, errors)
}

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "hamiltonian.kind",
    "hamiltonian.mass",
    "hamiltonian.omega",
    "hamiltonian.force",
    "lattice.dt",
    "lattice.n_steps",
    "lattice.branch_offsets",
    "lattice.q_start",
    "lattice.endpoint",
    "lattice.pin_tolerance",
    "lattice.unpinned",
    "lattice.path_cap",
    "numeric.seed",
    "numeric.probes",
    "numeric.pr",
    "numeric.c_bracket",
    "numeric.c_bracket2",
    "numeric.scan_points",
    "numeric.window",
    "numeric.points",
    "numeric.eps_reg",
    "numeric.n_slices",
    "numeric.t_total",
    "numeric.q_i",
    "numeric.q_f",
    "numeric.hbar",
    "numeric.l_window",
    "numeric.t_window",
    "numeric.q_points",
    "numeric.t_points",
    "numeric.t_fixed",
    "numeric.t_start",
    "numeric.peak_momenta",
    "numeric.n_paths",
    "numeric.trials",
    "numeric.phase_model",
    "numeric.workers",
    "numeric.dq_values",
    "output.dir",
    "output.formats",
];

/// Parse and validate a configuration document. Returns either the fully
/// validated config or every error found.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let (raws, mut errors) = split_lines(text);
    let mut cfg = RunConfig::default();

    let mut seen = BTreeSet::new();
    let mut ham_kind = HamiltonianKind::Free;
    let mut mass = 1.0_f64;
    let mut omega = 0.0_f64;
    let mut force = 0.0_f64;
    let mut endpoint: Option<f64> = None;
    let mut pin_tolerance: Option<f64> = None;
    let mut unpinned: Option<(bool, usize)> = None;
    let mut endpoint_line = 0usize;

    macro_rules! fail {
        ($raw:expr, $msg:expr) => {
            errors.push(ConfigError {
                line: $raw.line,
                key: $raw.key.clone(),
                message: $msg,
            })
        };
    }

    for raw in &raws {
        if !KNOWN_KEYS.contains(&raw.key.as_str()) {
            fail!(raw, "unknown key".into());
            continue;
        }
        if !seen.insert(raw.key.clone()) {
            fail!(raw, "key set more than once".into());
            continue;
        }
        let v = raw.value.as_str();
        let f64_field = |target: &mut f64, positive: bool, errors: &mut Vec<ConfigError>| match v
            .parse::<f64>()
        {
            Ok(x) if x.is_finite() => {
                if positive && x <= 0.0 {
                    errors.push(ConfigError {
                        line: raw.line,
                        key: raw.key.clone(),
                        message: format!("must be positive, got {x}"),
                    });
                } else {
                    *target = x;
                }
            }
            _ => errors.push(ConfigError {
                line: raw.line,
                key: raw.key.clone(),
                message: format!("expected a finite number, got `{v}`"),
            }),
        };
        match raw.key.as_str() {
            "experiment" => match Experiment::parse(v) {
                Some(e) => cfg.experiment = Some(e),
                None => fail!(raw, format!("unknown experiment `{v}`")),
            },
            "hamiltonian.kind" => match v {
                "free" => ham_kind = HamiltonianKind::Free,
                "harmonic" => ham_kind = HamiltonianKind::Harmonic,
                "linear-potential" => ham_kind = HamiltonianKind::LinearPotential,
                _ => fail!(raw, format!("unknown kind `{v}`")),
            },
            "hamiltonian.mass" => f64_field(&mut mass, true, &mut errors),
            "hamiltonian.omega" => match v.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => omega = x,
                _ => fail!(raw, format!("expected a nonnegative number, got `{v}`")),
            },
            "hamiltonian.force" => f64_field(&mut force, false, &mut errors),
            "lattice.dt" => f64_field(&mut cfg.lattice.dt, true, &mut errors),
            "lattice.n_steps" => match v.parse::<usize>() {
                Ok(x) if x > 0 => cfg.lattice.n_steps = x,
                _ => fail!(raw, format!("expected a positive integer, got `{v}`")),
            },
            "lattice.branch_offsets" => match parse_f64_list(v) {
                Ok(list) if !list.is_empty() => cfg.lattice.branch_offsets = list,
                _ => fail!(raw, format!("expected a list of numbers, got `{v}`")),
            },
            "lattice.q_start" => f64_field(&mut cfg.lattice.q_start, false, &mut errors),
            "lattice.endpoint" => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => {
                    endpoint = Some(x);
                    endpoint_line = raw.line;
                }
                _ => fail!(raw, format!("expected a finite number, got `{v}`")),
            },
            "lattice.pin_tolerance" => {
                let mut t = 0.0;
                f64_field(&mut t, true, &mut errors);
                if t > 0.0 {
                    pin_tolerance = Some(t);
                }
            }
            "lattice.unpinned" => match v.parse::<bool>() {
                Ok(b) => unpinned = Some((b, raw.line)),
                Err(_) => fail!(raw, format!("expected true or false, got `{v}`")),
            },
            "lattice.path_cap" => match v.parse::<usize>() {
                Ok(x) if x > 0 => cfg.lattice.path_cap = x,
                _ => fail!(raw, format!("expected a positive integer, got `{v}`")),
            },
            "numeric.seed" => match v.parse::<u64>() {
                Ok(x) => cfg.seed = x,
                Err(_) => fail!(raw, format!("expected an unsigned integer, got `{v}`")),
            },
            "numeric.probes" => match v.parse::<usize>() {
                Ok(x) if x > 0 => cfg.probes = x,
                _ => fail!(raw, format!("expected a positive integer, got `{v}`")),
            },
            "numeric.pr" => f64_field(&mut cfg.pr, true, &mut errors),
            "numeric.c_bracket" => match parse_bracket(v) {
                Ok(b) => cfg.c_bracket = b,
                Err(msg) => fail!(raw, msg),
            },
            "numeric.c_bracket2" => match parse_bracket(v) {
                Ok(b) => cfg.c_bracket2 = b,
                Err(msg) => fail!(raw, msg),
            },
            "numeric.scan_points" => match v.parse::<usize>() {
                Ok(x) if x >= 16 => cfg.scan_points = x,
                _ => fail!(raw, format!("expected an integer >= 16, got `{v}`")),
            },
            "numeric.window" => f64_field(&mut cfg.quad.window, true, &mut errors),
            "numeric.points" => match v.parse::<usize>() {
                Ok(x) if x >= 8 => cfg.quad.points = x,
                _ => fail!(raw, format!("expected an integer >= 8, got `{v}`")),
            },
            "numeric.eps_reg" => f64_field(&mut cfg.quad.eps_reg, true, &mut errors),
            "numeric.n_slices" => match v.parse::<usize>() {
                Ok(x) if x > 0 => cfg.n_slices = x,
                _ => fail!(raw, format!("expected a positive integer, got `{v}`")),
            },
            "numeric.t_total" => f64_field(&mut cfg.t_total, true, &mut errors),
            "numeric.q_i" => f64_field(&mut cfg.q_i, false, &mut errors),
            "numeric.q_f" => f64_field(&mut cfg.q_f, false, &mut errors),
            "numeric.hbar" => f64_field(&mut cfg.hbar, true, &mut errors),
            "numeric.l_window" => f64_field(&mut cfg.micro.l_window, true, &mut errors),
            "numeric.t_window" => f64_field(&mut cfg.micro.t_window, true, &mut errors),
            "numeric.q_points" => match v.parse::<usize>() {
                Ok(x) if x >= 8 => cfg.micro.q_points = x,
                _ => fail!(raw, format!("expected an integer >= 8, got `{v}`")),
            },
            "numeric.t_points" => match v.parse::<usize>() {
                Ok(x) if x >= 8 => cfg.micro.t_points = x,
                _ => fail!(raw, format!("expected an integer >= 8, got `{v}`")),
            },
            "numeric.t_fixed" => f64_field(&mut cfg.micro.t_fixed, true, &mut errors),
            "numeric.t_start" => f64_field(&mut cfg.micro.t_start, true, &mut errors),
            "numeric.peak_momenta" => match parse_f64_list(v) {
                Ok(list) if !list.is_empty() => cfg.peak_momenta = list,
                _ => fail!(raw, format!("expected a list of numbers, got `{v}`")),
            },
            "numeric.dq_values" => match parse_f64_list(v) {
                Ok(list) if !list.is_empty() => cfg.dq_values = list,
                _ => fail!(raw, format!("expected a list of numbers, got `{v}`")),
            },
            "numeric.n_paths" => match v.parse::<usize>() {
                Ok(x) if x > 0 => cfg.n_paths = x,
                _ => fail!(raw, format!("expected a positive integer, got `{v}`")),
            },
            "numeric.trials" => match v.parse::<usize>() {
                Ok(x) if x > 0 => cfg.trials = x,
                _ => fail!(raw, format!("expected a positive integer, got `{v}`")),
            },
            "numeric.phase_model" => match v {
                "uniform-random" => cfg.phase_model = PhaseModel::UniformRandom,
                "coherent" => cfg.phase_model = PhaseModel::Coherent,
                _ => fail!(raw, format!("unknown phase model `{v}`")),
            },
            "numeric.workers" => match v.parse::<usize>() {
                Ok(x) if x > 0 => cfg.workers = Some(x),
                _ => fail!(raw, format!("expected a positive integer, got `{v}`")),
            },
            "output.dir" => cfg.output_dir = v.to_string(),
            "output.formats" => {
                let mut formats = Formats {
                    csv: false,
                    json: false,
                };
                let mut ok = true;
                for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match part {
                        "csv" => formats.csv = true,
                        "json" => formats.json = true,
                        _ => {
                            fail!(raw, format!("unknown format `{part}`"));
                            ok = false;
                        }
                    }
                }
                if ok && !(formats.csv || formats.json) {
                    fail!(raw, "at least one of csv, json required".into());
                } else if ok {
                    cfg.formats = formats;
                }
            }
            _ => unreachable!("key list covers match arms"),
        }
    }

    // cross-field checks
    if let (Some((true, line)), Some(_)) = (unpinned, endpoint) {
        errors.push(ConfigError {
            line: line.max(endpoint_line),
            key: "lattice.unpinned".into(),
            message: "conflicts with lattice.endpoint: a run cannot be both pinned and unpinned"
                .into(),
        });
    }
    if endpoint.is_some() && pin_tolerance.is_none() {
        errors.push(ConfigError {
            line: endpoint_line,
            key: "lattice.pin_tolerance".into(),
            message: "required when lattice.endpoint is set".into(),
        });
    }
    match ham_kind {
        HamiltonianKind::Free => match Hamiltonian::free(mass) {
            Ok(h) => cfg.hamiltonian = h,
            Err(e) => errors.push(ConfigError {
                line: 0,
                key: "hamiltonian.mass".into(),
                message: e.to_string(),
            }),
        },
        HamiltonianKind::Harmonic => match Hamiltonian::harmonic(mass, omega) {
            Ok(h) => cfg.hamiltonian = h,
            Err(e) => errors.push(ConfigError {
                line: 0,
                key: "hamiltonian".into(),
                message: e.to_string(),
            }),
        },
        HamiltonianKind::LinearPotential => match Hamiltonian::linear(mass, force) {
            Ok(h) => cfg.hamiltonian = h,
            Err(e) => errors.push(ConfigError {
                line: 0,
                key: "hamiltonian".into(),
                message: e.to_string(),
            }),
        },
    }
    if let Some(e) = endpoint {
        cfg.lattice.endpoint = Some(e);
        cfg.lattice.pin_tolerance = pin_tolerance.unwrap_or(0.0);
    }
    cfg.micro.mass = cfg.hamiltonian.mass;
    cfg.micro.hbar = cfg.hbar;
    if let Err(e) = cfg.lattice.validate() {
        // only push if not already reported field-by-field
        errors.push(ConfigError {
            line: 0,
            key: "lattice".into(),
            message: e.to_string(),
        });
    }

    if errors.is_empty() {
        Ok(cfg)
    } else {
        errors.sort_by_key(|e| e.line);
        errors.dedup_by(|a, b| a.line == b.line && a.key == b.key && a.message == b.message);
        Err(errors)
    }
}

fn parse_f64_list(v: &str) -> Result<Vec<f64>, ()> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| ()).and_then(
                |x| {
                    if x.is_finite() {
                        Ok(x)
                    } else {
                        Err(())
                    }
                },
            )
        })
        .collect()
}

fn parse_bracket(v: &str) -> Result<(f64, f64), String> {
    let list = parse_f64_list(v).map_err(|_| format!("expected `lo, hi`, got `{v}`"))?;
    if list.len() != 2 || list[0] >= list[1] || list[0] <= 0.0 {
        return Err(format!("expected `lo, hi` with 0 < lo < hi, got `{v}`"));
    }
    Ok((list[0], list[1]))
}

/// FNV-1a digest of the raw config text, recorded in every output file.
pub fn config_digest(text: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}
