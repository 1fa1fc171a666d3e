//! Discrete phase-space paths on a staggered lattice: positions at integer
//! steps, momenta at half steps, endpoint-pinned fan-out enumeration, the
//! p↔q path correspondence through Hamilton's equations, and time reversal.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;

/// Default cap on the number of enumerated paths.
pub const DEFAULT_PATH_CAP: usize = 100_000;

/// Relative tolerance for the q̇ = H_p consistency invariant.
pub const CONSISTENCY_REL_TOL: f64 = 1e-9;

/// Lattice geometry and fan-out rule for one enumeration run.
///
/// At every step each offset in `branch_offsets` is added to the carried
/// momentum before the step is taken, so an unpinned run produces
/// `branch_offsets.len() ^ n_steps` paths. A pinned run keeps only the
/// paths whose final position lands within `pin_tolerance` of `endpoint`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub branch_offsets: Vec<f64>,
    pub q_start: f64,
    pub endpoint: Option<f64>,
    pub pin_tolerance: f64,
    pub path_cap: usize,
}

impl LatticeConfig {
    pub fn new(dt: f64, n_steps: usize, branch_offsets: Vec<f64>, q_start: f64) -> Self {
        LatticeConfig {
            dt,
            n_steps,
            branch_offsets,
            q_start,
            endpoint: None,
            pin_tolerance: 0.0,
            path_cap: DEFAULT_PATH_CAP,
        }
    }

    pub fn pinned(mut self, endpoint: f64, pin_tolerance: f64) -> Self {
        self.endpoint = Some(endpoint);
        self.pin_tolerance = pin_tolerance;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.path_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dt.is_finite() || !self.q_start.is_finite() || !self.pin_tolerance.is_finite() {
            return Err(Error::NonFinite("lattice config"));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be positive".into()));
        }
        if self.branch_offsets.is_empty() {
            return Err(Error::InvalidArgument("branch_offsets is empty".into()));
        }
        for w in self.branch_offsets.windows(2) {
            if w[0] >= w[1] || w[0].is_nan() || w[1].is_nan() {
                return Err(Error::InvalidArgument(
                    "branch_offsets must be sorted and distinct".into(),
                ));
            }
        }
        if self.branch_offsets.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("branch_offsets"));
        }
        if let Some(e) = self.endpoint {
            if !e.is_finite() {
                return Err(Error::NonFinite("endpoint"));
            }
            if self.pin_tolerance <= 0.0 {
                return Err(Error::InvalidArgument(
                    "pin_tolerance must be positive when an endpoint is pinned".into(),
                ));
            }
        }
        Ok(())
    }

    /// Total time span T = n Δt.
    pub fn total_time(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

/// One staggered trajectory: n+1 positions at integer steps and n momenta
/// at half steps.
///
/// `reversed` marks a path produced by [`PhasePath::time_reverse`]: its
/// samples read as a valid forward path under `dt`, but oriented action
/// functionals (see the action module) carry the sign of the reversed
/// integration limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePath {
    pub q_samples: Vec<f64>,
    pub p_samples: Vec<f64>,
    pub dt: f64,
    pub reversed: bool,
}

impl PhasePath {
    pub fn new(q_samples: Vec<f64>, p_samples: Vec<f64>, dt: f64) -> Result<Self> {
        if q_samples.len() != p_samples.len() + 1 {
            return Err(Error::LengthMismatch {
                left: q_samples.len(),
                right: p_samples.len(),
            });
        }
        if q_samples
            .iter()
            .chain(p_samples.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("path samples"));
        }
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        Ok(PhasePath {
            q_samples,
            p_samples,
            dt,
            reversed: false,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.p_samples.len()
    }

    /// +1 for a forward path, −1 for a time-reversed one.
    pub fn orientation(&self) -> f64 {
        if self.reversed {
            -1.0
        } else {
            1.0
        }
    }

    /// p → −p, q → q, t → −t: positions reversed in order, momenta
    /// reversed in order and negated, orientation flipped. Applying it
    /// twice returns the original path bit-exactly.
    pub fn time_reverse(&self) -> PhasePath {
        let q_samples: Vec<f64> = self.q_samples.iter().rev().copied().collect();
        let p_samples: Vec<f64> = self.p_samples.iter().rev().map(|p| -p).collect();
        PhasePath {
            q_samples,
            p_samples,
            dt: self.dt,
            reversed: !self.reversed,
        }
    }

    /// Largest relative violation of (q_{i+1} − q_i)/Δt = H_p(p_{i+1/2})
    /// over the path, in the forward reading.
    pub fn consistency_residual(&self, h: &Hamiltonian) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n_steps() {
            let qdot = (self.q_samples[i + 1] - self.q_samples[i]) / self.dt;
            let p = if self.reversed {
                -self.p_samples[i]
            } else {
                self.p_samples[i]
            };
            let hp = h.h_p(p);
            let scale = qdot.abs().max(hp.abs()).max(1.0);
            worst = worst.max((qdot - hp).abs() / scale);
        }
        worst
    }

    pub fn validate_consistency(&self, h: &Hamiltonian) -> Result<()> {
        let r = self.consistency_residual(h);
        if r > CONSISTENCY_REL_TOL {
            return Err(Error::InvalidArgument(format!(
                "path violates q̇ = H_p with relative residual {r:.3e}"
            )));
        }
        Ok(())
    }
}

/// An ordered set of paths sharing one Hamiltonian and lattice config.
#[derive(Debug, Clone, Serialize)]
pub struct PathEnsemble {
    pub paths: Vec<PhasePath>,
    pub hamiltonian: Hamiltonian,
    pub config: LatticeConfig,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Stable identifier derived from the path data (FNV-1a over the
    /// sample bits), used to tag action matrices and reports.
    pub fn identifier(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for p in &self.paths {
            for &q in &p.q_samples {
                eat(q);
            }
            for &pp in &p.p_samples {
                eat(pp);
            }
        }
        format!("ens-{:016x}", hash)
    }

    /// CSV with header `index, q0..qn, p0..p(n-1)`, one record per path.
    pub fn to_csv(&self) -> String {
        let n = self.config.n_steps;
        let mut out = String::new();
        out.push_str("index");
        for i in 0..=n {
            out.push_str(&format!(",q{i}"));
        }
        for i in 0..n {
            out.push_str(&format!(",p{i}"));
        }
        out.push('\n');
        for (idx, path) in self.paths.iter().enumerate() {
            out.push_str(&idx.to_string());
            for &q in &path.q_samples {
                out.push_str(&format!(",{q:.17e}"));
            }
            for &p in &path.p_samples {
                out.push_str(&format!(",{p:.17e}"));
            }
            out.push('\n');
        }
        out
    }

    /// JSON array of `{index, q_samples, p_samples}` objects.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            index: usize,
            q_samples: &'a [f64],
            p_samples: &'a [f64],
        }
        let records: Vec<Record> = self
            .paths
            .iter()
            .enumerate()
            .map(|(index, p)| Record {
                index,
                q_samples: &p.q_samples,
                p_samples: &p.p_samples,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("ensemble serializes")
    }
}

/// Walk one branch choice: add the offset to the carried momentum, drift
/// the position with the half-step momentum, then kick the carried
/// momentum at the new integer position.
#[inline]
fn advance(h: &Hamiltonian, q: f64, p_carried: f64, offset: f64, dt: f64) -> (f64, f64, f64) {
    let p_half = p_carried + offset;
    let q_next = q + dt * h.h_p(p_half);
    let p_next = p_half - dt * h.h_q(q_next);
    (q_next, p_half, p_next)
}

fn enumerate_subtree(
    h: &Hamiltonian,
    cfg: &LatticeConfig,
    q0: f64,
    p0: f64,
    first_offset: f64,
    out: &mut Vec<PhasePath>,
) {
    let n = cfg.n_steps;
    let mut q_stack = Vec::with_capacity(n + 1);
    let mut p_stack = Vec::with_capacity(n);
    q_stack.push(q0);

    // Iterative DFS in lexicographic branch order.
    struct Frame {
        next_branch: usize,
        q: f64,
        p_carried: f64,
    }
    let (q1, p_half, p_next) = advance(h, q0, p0, first_offset, cfg.dt);
    q_stack.push(q1);
    p_stack.push(p_half);
    let mut stack = vec![Frame {
        next_branch: 0,
        q: q1,
        p_carried: p_next,
    }];

    while let Some(frame) = stack.last_mut() {
        if q_stack.len() == n + 1 {
            let keep = match cfg.endpoint {
                Some(e) => (q_stack[n] - e).abs() <= cfg.pin_tolerance,
                None => true,
            };
            if keep {
                out.push(PhasePath {
                    q_samples: q_stack.clone(),
                    p_samples: p_stack.clone(),
                    dt: cfg.dt,
                    reversed: false,
                });
            }
            stack.pop();
            q_stack.pop();
            p_stack.pop();
            continue;
        }
        if frame.next_branch == cfg.branch_offsets.len() {
            stack.pop();
            q_stack.pop();
            p_stack.pop();
            continue;
        }
        let offset = cfg.branch_offsets[frame.next_branch];
        frame.next_branch += 1;
        let (q_next, p_half, p_next) = advance(h, frame.q, frame.p_carried, offset, cfg.dt);
        q_stack.push(q_next);
        p_stack.push(p_half);
        stack.push(Frame {
            next_branch: 0,
            q: q_next,
            p_carried: p_next,
        });
    }
}

/// Enumerate every fan-out path of the configured lattice.
///
/// The carried momentum starts at zero, so the first half-step momenta are
/// exactly the branch offsets. Ordering is lexicographic in branch choices
/// and identical for any rayon worker count.
pub fn enumerate_paths(h: &Hamiltonian, cfg: &LatticeConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    let b = cfg.branch_offsets.len() as u128;
    let total = b
        .checked_pow(cfg.n_steps as u32)
        .ok_or(Error::CapExceeded {
            requested: u128::MAX,
            cap: cfg.path_cap,
        })?;
    if total > cfg.path_cap as u128 {
        return Err(Error::CapExceeded {
            requested: total,
            cap: cfg.path_cap,
        });
    }

    let subtrees: Vec<Vec<PhasePath>> = cfg
        .branch_offsets
        .par_iter()
        .map(|&offset| {
            let mut bucket = Vec::new();
            enumerate_subtree(h, cfg, cfg.q_start, 0.0, offset, &mut bucket);
            bucket
        })
        .collect();
    let examined = total as usize;
    let paths: Vec<PhasePath> = subtrees.into_iter().flatten().collect();

    if paths.is_empty() {
        return Err(Error::EmptyEnsemble { examined });
    }
    Ok(PathEnsemble {
        paths,
        hamiltonian: *h,
        config: cfg.clone(),
    })
}

/// Infer the half-step momentum record from positions via q̇ = H_p, i.e.
/// p_{i+1/2} = m (q_{i+1} − q_i)/Δt for the supported Hamiltonians.
pub fn infer_momentum_path(h: &Hamiltonian, q_samples: &[f64], dt: f64) -> Result<Vec<f64>> {
    if q_samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two position samples".into(),
        ));
    }
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    Ok(q_samples
        .windows(2)
        .map(|w| h.momentum_from_velocity((w[1] - w[0]) / dt))
        .collect())
}

/// Infer the integer-step position record from momenta via ṗ = −H_q.
///
/// Interior points use the central difference of the half-step momenta;
/// the two end points use one-sided quadratic (or, with only two momentum
/// samples, linear) derivative estimates. Only the harmonic Hamiltonian
/// has an invertible H_q.
pub fn infer_position_path(h: &Hamiltonian, p_samples: &[f64], dt: f64) -> Result<Vec<f64>> {
    if p_samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two momentum samples".into(),
        ));
    }
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let n = p_samples.len();
    let mut q = vec![0.0; n + 1];
    for i in 1..n {
        let pdot = (p_samples[i] - p_samples[i - 1]) / dt;
        q[i] = h.position_from_pdot(pdot)?;
    }
    let (pdot_start, pdot_end) = if n >= 3 {
        (
            (-2.0 * p_samples[0] + 3.0 * p_samples[1] - p_samples[2]) / dt,
            (2.0 * p_samples[n - 1] - 3.0 * p_samples[n - 2] + p_samples[n - 3]) / dt,
        )
    } else {
        let d = (p_samples[1] - p_samples[0]) / dt;
        (d, d)
    };
    q[0] = h.position_from_pdot(pdot_start)?;
    q[n] = h.position_from_pdot(pdot_end)?;
    Ok(q)
}

/// Parse paths back from the ensemble CSV schema (`index, q0..qn,
/// p0..p(n-1)`), skipping `#` metadata lines.
pub fn paths_from_csv(text: &str, dt: f64) -> Result<Vec<PhasePath>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty ensemble CSV".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let n_q = columns.iter().filter(|c| c.starts_with('q')).count();
    let n_p = columns.iter().filter(|c| c.starts_with('p')).count();
    if n_q != n_p + 1 || columns.first() != Some(&"index") {
        return Err(Error::InvalidArgument(format!(
            "unexpected ensemble CSV header `{header}`"
        )));
    }
    let mut paths = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 1 + n_q + n_p {
            return Err(Error::InvalidArgument(format!(
                "row has {} cells, expected {}",
                cells.len(),
                1 + n_q + n_p
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{s}`")))
        };
        let q_samples: Vec<f64> = cells[1..1 + n_q]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_>>()?;
        let p_samples: Vec<f64> = cells[1 + n_q..]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_>>()?;
        paths.push(PhasePath::new(q_samples, p_samples, dt)?);
    }
    Ok(paths)
}
