//! Discretized action functionals over staggered paths.
//!
//! S pairs half-step momenta with position increments; R is its
//! summation-by-parts partner, built so the discrete Legendre identity
//! S − R = \[pq\]_f − \[pq\]_i holds to rounding rather than to O(Δt). J\[q\]
//! and G\[p\] are the reduced functionals with one variable eliminated
//! through a Hamilton equation. All values are in units of ħ.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::lattice::{PathEnsemble, PhasePath};

/// Default cap on the action-matrix dimension.
pub const DEFAULT_MATRIX_CAP: usize = 2000;

/// S = Σ_i [ p_{i+1/2} (q_{i+1} − q_i) − H(p_{i+1/2}, q̄_i) Δt ] with the
/// midpoint convention q̄_i = (q_i + q_{i+1})/2, signed by the path's
/// orientation (a time-reversed path integrates over reversed limits).
pub fn action_s(h: &Hamiltonian, path: &PhasePath) -> f64 {
    path.orientation() * mixed_action(h, &path.p_samples, &path.q_samples, path.dt)
}

/// R = Σ_{i=1}^{n−1} [ −q_i (p_{i+1/2} − p_{i−1/2}) ] − Σ_i H Δt, the
/// summation-by-parts form whose position weights sit at the interior
/// integer points so that S − R = \[pq\]_f − \[pq\]_i is exact.
pub fn action_r(h: &Hamiltonian, path: &PhasePath) -> f64 {
    let p = &path.p_samples;
    let q = &path.q_samples;
    let dt = path.dt;
    let n = p.len();
    let mut r = 0.0;
    for i in 1..n {
        r -= q[i] * (p[i] - p[i - 1]);
    }
    for i in 0..n {
        let q_bar = 0.5 * (q[i] + q[i + 1]);
        r -= h.energy(p[i], q_bar) * dt;
    }
    path.orientation() * r
}

/// The oriented boundary term \[pq\]_f − \[pq\]_i with the convention
/// \[pq\]_f = p_{n−1/2} q_n and \[pq\]_i = p_{1/2} q_0.
pub fn boundary_term(path: &PhasePath) -> f64 {
    let p = &path.p_samples;
    let q = &path.q_samples;
    let n = p.len();
    path.orientation() * (p[n - 1] * q[n] - p[0] * q[0])
}

/// J\[q\]: the action with p eliminated through q̇ = H_p, i.e. the discrete
/// Lagrangian action Σ (½ m q̇² − V(q̄)) Δt.
pub fn reduced_j(h: &Hamiltonian, q_samples: &[f64], dt: f64) -> Result<f64> {
    if q_samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two position samples".into(),
        ));
    }
    let mut j = 0.0;
    for w in q_samples.windows(2) {
        let qdot = (w[1] - w[0]) / dt;
        let q_bar = 0.5 * (w[0] + w[1]);
        j += (0.5 * h.mass * qdot * qdot - h.potential(q_bar)) * dt;
    }
    Ok(j)
}

/// G\[p\]: the action with q eliminated through ṗ = −H_q (harmonic only).
///
/// The position record is reconstructed at integer steps from central
/// differences of the half-step momenta, with one-sided quadratic
/// estimates at the two ends, and the full S functional is evaluated on
/// the reconstructed pair.
pub fn reduced_g(h: &Hamiltonian, p_samples: &[f64], dt: f64) -> Result<f64> {
    if p_samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two momentum samples".into(),
        ));
    }
    match h.position_from_pdot(0.0) {
        Ok(_) => {}
        Err(_) => {
            return Err(Error::GUndefined {
                kind: h.kind.name(),
            })
        }
    }
    let q = crate::lattice::infer_position_path(h, p_samples, dt)?;
    Ok(mixed_action(h, p_samples, &q, dt))
}

/// The mixed entry S\[p_j, q_k\]: path j's half-step momenta paired with
/// path k's position increments and midpoints.
pub fn mixed_action(h: &Hamiltonian, p_samples: &[f64], q_samples: &[f64], dt: f64) -> f64 {
    let n = p_samples.len();
    debug_assert_eq!(q_samples.len(), n + 1);
    let mut s = 0.0;
    for i in 0..n {
        let q_bar = 0.5 * (q_samples[i] + q_samples[i + 1]);
        s += p_samples[i] * (q_samples[i + 1] - q_samples[i]) - h.energy(p_samples[i], q_bar) * dt;
    }
    s
}

/// The n×n matrix S_jk = S\[p_j, q_k\] over a path ensemble, with the
/// per-path S, R, J and (when defined) G values alongside.
#[derive(Debug, Clone, Serialize)]
pub struct ActionMatrix {
    pub entries: Vec<Vec<f64>>,
    pub s_diag: Vec<f64>,
    pub r_values: Vec<f64>,
    pub j_values: Vec<f64>,
    pub g_values: Option<Vec<f64>>,
    pub ensemble_ref: String,
}

impl ActionMatrix {
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    /// Build a matrix from raw entries (tests and synthetic experiments).
    /// The diagonal doubles as the per-path S record; R/J/G are empty.
    pub fn from_entries(entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = entries.len();
        if entries.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        let s_diag = (0..n).map(|i| entries[i][i]).collect();
        Ok(ActionMatrix {
            entries,
            s_diag,
            r_values: Vec::new(),
            j_values: Vec::new(),
            g_values: None,
            ensemble_ref: "synthetic".into(),
        })
    }

    /// Σ over all entries.
    pub fn total(&self) -> f64 {
        self.entries.iter().flatten().sum()
    }

    /// CSV: n rows of n full-precision entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.entries {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }
}

/// Assemble the action matrix of an ensemble. Rows are filled in parallel;
/// the result does not depend on the schedule.
pub fn build_action_matrix(h: &Hamiltonian, ensemble: &PathEnsemble) -> Result<ActionMatrix> {
    build_action_matrix_capped(h, ensemble, DEFAULT_MATRIX_CAP)
}

pub fn build_action_matrix_capped(
    h: &Hamiltonian,
    ensemble: &PathEnsemble,
    cap: usize,
) -> Result<ActionMatrix> {
    let n = ensemble.len();
    if n == 0 {
        return Err(Error::EmptyEnsemble { examined: 0 });
    }
    if n > cap {
        return Err(Error::MatrixCapExceeded { paths: n, cap });
    }
    let dt = ensemble.config.dt;
    let entries: Vec<Vec<f64>> = ensemble
        .paths
        .par_iter()
        .map(|pj| {
            ensemble
                .paths
                .iter()
                .map(|qk| mixed_action(h, &pj.p_samples, &qk.q_samples, dt))
                .collect()
        })
        .collect();
    let s_diag: Vec<f64> = ensemble.paths.iter().map(|p| action_s(h, p)).collect();
    let r_values: Vec<f64> = ensemble.paths.iter().map(|p| action_r(h, p)).collect();
    let j_values: Vec<f64> = ensemble
        .paths
        .iter()
        .map(|p| reduced_j(h, &p.q_samples, dt))
        .collect::<Result<_>>()?;
    // G needs an invertible H_q and at least two momentum samples per path
    let g_values = if ensemble.config.n_steps < 2 {
        None
    } else {
        match ensemble
            .paths
            .iter()
            .map(|p| reduced_g(h, &p.p_samples, dt))
            .collect::<Result<Vec<f64>>>()
        {
            Ok(g) => Some(g),
            Err(Error::GUndefined { .. }) => None,
            Err(e) => return Err(e),
        }
    };
    Ok(ActionMatrix {
        entries,
        s_diag,
        r_values,
        j_values,
        g_values,
        ensemble_ref: ensemble.identifier(),
    })
}

/// Analytic classical action of the 1-D harmonic oscillator between fixed
/// endpoints, used as a test oracle.
pub fn harmonic_classical_action(m: f64, omega: f64, q_i: f64, q_f: f64, t: f64) -> f64 {
    let s = (omega * t).sin();
    0.5 * m * omega * ((q_i * q_i + q_f * q_f) * (omega * t).cos() - 2.0 * q_i * q_f) / s
}

/// Parse matrix entries back from the n×n CSV form, skipping `#`
/// metadata lines.
pub fn matrix_entries_from_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut entries = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad number `{s}`")))
            })
            .collect::<Result<_>>()?;
        entries.push(row);
    }
    let n = entries.len();
    if entries.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("matrix CSV is not square".into()));
    }
    Ok(entries)
}
