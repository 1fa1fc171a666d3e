//! Validation targets: the analytic free-particle propagator, Chapman–
//! Kolmogorov composition by regulated oscillatory quadrature, the
//! time-sliced lattice propagator, random-phase interference damping, and
//! the Fourier route from the free propagator to micro-canonical delta
//! peaks.
//!
//! Oscillatory integrals are tamed by a small imaginary-time regulator
//! ε_reg (t → t(1 − iε), extrapolated ε → 0 by two-point Richardson) with
//! a C∞ Planck taper folded into the quadrature weights. Window adequacy
//! is diagnosed by re-evaluating on a 15% narrower window.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Quadrature controls shared by the composition and lattice propagators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Half-width of the spatial window [−window, window].
    pub window: f64,
    pub points: usize,
    /// Imaginary-time regulator ε in t → t(1 − iε).
    pub eps_reg: f64,
    /// Fraction of the window taken by each taper margin.
    pub taper_frac: f64,
    /// Relative change allowed between the full and the 85% window.
    pub window_check_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            window: 40.0,
            points: 1 << 14,
            eps_reg: 1e-3,
            taper_frac: 0.15,
            window_check_tol: 0.01,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window <= 0.0
            || self.eps_reg <= 0.0
            || !self.window.is_finite()
            || !self.eps_reg.is_finite()
        {
            return Err(Error::InvalidArgument(
                "window and eps_reg must be positive".into(),
            ));
        }
        if self.points < 8 {
            return Err(Error::InvalidArgument("too few quadrature points".into()));
        }
        if self.taper_frac <= 0.0 || self.taper_frac >= 0.5 {
            return Err(Error::InvalidArgument(
                "taper_frac must lie in (0, 0.5)".into(),
            ));
        }
        Ok(())
    }
}

/// C∞ Planck taper: 0 at u ≤ 0, 1 at u ≥ 1.
fn planck_taper(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let z = 1.0 / u - 1.0 / (1.0 - u);
        1.0 / (1.0 + z.clamp(-700.0, 700.0).exp())
    }
}

fn taper_at(q: f64, half_width: f64, taper_frac: f64) -> f64 {
    let margin = taper_frac * 2.0 * half_width;
    planck_taper((q + half_width) / margin) * planck_taper((half_width - q) / margin)
}

/// K = √(m/(2πiħΔt)) · exp(i m Δq²/(2ħΔt)), principal square root.
pub fn free_particle_k(m: f64, hbar: f64, dq: f64, dt: f64) -> Result<Complex64> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if m <= 0.0 || hbar <= 0.0 || !dq.is_finite() {
        return Err(Error::InvalidArgument("bad propagator parameters".into()));
    }
    Ok(free_k_complex(m, hbar, dq, Complex64::new(dt, 0.0)))
}

/// Free propagator continued to complex duration τ (used by the
/// regulated quadratures, which set τ = Δt(1 − iε)).
pub fn free_k_complex(m: f64, hbar: f64, dq: f64, tau: Complex64) -> Complex64 {
    let pref = (Complex64::new(m, 0.0) / (2.0 * std::f64::consts::PI * hbar * I * tau)).sqrt();
    pref * (I * m * dq * dq / (2.0 * hbar * tau)).exp()
}

/// |K|² for 3N separable free degrees of freedom: (m/(hΔt))^{n_dof},
/// independent of the endpoints.
pub fn free_particle_pr(m: f64, hbar: f64, dt: f64, n_dof: i32) -> f64 {
    let h = 2.0 * std::f64::consts::PI * hbar;
    (m / (h * dt)).powi(n_dof)
}

/// Trapezoid nodes and tapered weights over [−w, w].
fn tapered_grid(quad: &QuadratureSpec, w: f64) -> (Vec<f64>, Vec<f64>) {
    let n = quad.points;
    let dq = 2.0 * w / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|i| -w + dq * i as f64).collect();
    let weights: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let trap = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            trap * dq * taper_at(q, w, quad.taper_frac)
        })
        .collect();
    (nodes, weights)
}

#[allow(clippy::too_many_arguments)]
fn compose_once<F>(
    k: &F,
    t1: f64,
    t2: f64,
    q_i: f64,
    q_f: f64,
    quad: &QuadratureSpec,
    w: f64,
    eps: f64,
) -> Complex64
where
    F: Fn(f64, f64, Complex64) -> Complex64,
{
    let tau1 = Complex64::new(t1, -t1 * eps);
    let tau2 = Complex64::new(t2, -t2 * eps);
    let (nodes, weights) = tapered_grid(quad, w);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&q, &wt)| k(q_i, q, tau1) * k(q, q_f, tau2) * wt)
        .sum()
}

/// ∫ K(q_i, t_i; q, t_m) K(q, t_m; q_f, t_f) dq by regulated, tapered
/// trapezoid quadrature, Richardson-extrapolated in the regulator.
///
/// `k` maps (q_from, q_to, complex duration) to a propagator value.
pub fn compose_propagators<F>(
    k: F,
    t_i: f64,
    t_m: f64,
    t_f: f64,
    q_i: f64,
    q_f: f64,
    quad: &QuadratureSpec,
) -> Result<Complex64>
where
    F: Fn(f64, f64, Complex64) -> Complex64,
{
    quad.validate()?;
    if t_i >= t_m || t_m >= t_f || !t_i.is_finite() || !t_f.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need t_i < t_m < t_f, got {t_i}, {t_m}, {t_f}"
        )));
    }
    let (t1, t2) = (t_m - t_i, t_f - t_m);
    let eps = quad.eps_reg;
    let richardson = |w: f64| {
        let k1 = compose_once(&k, t1, t2, q_i, q_f, quad, w, eps);
        let k2 = compose_once(&k, t1, t2, q_i, q_f, quad, w, 2.0 * eps);
        2.0 * k1 - k2
    };
    let full = richardson(quad.window);
    let shrunk = richardson(0.85 * quad.window);
    let scale = full.norm().max(1e-300);
    let drift = (full - shrunk).norm() / scale;
    if drift > quad.window_check_tol {
        return Err(Error::WindowTooNarrow {
            edge_ratio: drift,
            threshold: quad.window_check_tol,
        });
    }
    if !full.re.is_finite() || !full.im.is_finite() {
        return Err(Error::NonFinite("composition quadrature"));
    }
    Ok(full)
}

#[allow(clippy::too_many_arguments)]
fn lattice_once(
    h: &Hamiltonian,
    hbar: f64,
    q_i: f64,
    q_f: f64,
    t_total: f64,
    n_slices: usize,
    quad: &QuadratureSpec,
    w: f64,
    eps: f64,
) -> Complex64 {
    let n_seg = n_slices + 1;
    let tau = Complex64::new(1.0, -eps) * (t_total / n_seg as f64);
    let pref = (Complex64::new(h.mass, 0.0) / (2.0 * std::f64::consts::PI * hbar * I * tau)).sqrt();
    let kernel = |qa: f64, qb: f64| -> Complex64 {
        let dq = qb - qa;
        let v = h.potential(0.5 * (qa + qb));
        pref * ((I / hbar) * (h.mass * dq * dq / (2.0 * tau) - v * tau)).exp()
    };
    let (nodes, weights) = tapered_grid(quad, w);
    let mut psi: Vec<Complex64> = nodes.iter().map(|&x| kernel(q_i, x)).collect();
    for _ in 1..n_slices {
        psi = nodes
            .par_iter()
            .map(|&y| {
                nodes
                    .iter()
                    .zip(&psi)
                    .zip(&weights)
                    .map(|((&x, &p), &wt)| kernel(x, y) * p * wt)
                    .sum()
            })
            .collect();
    }
    nodes
        .iter()
        .zip(&psi)
        .zip(&weights)
        .map(|((&x, &p), &wt)| p * kernel(x, q_f) * wt)
        .sum()
}

/// Time-sliced propagator: a sum over broken-line paths through
/// `n_slices` intermediate quadrature grids, per-segment amplitude
/// √(m/(2πiħε)) and phase from the discrete Lagrangian action with the
/// midpoint potential.
pub fn lattice_propagator(
    h: &Hamiltonian,
    hbar: f64,
    q_i: f64,
    q_f: f64,
    t_total: f64,
    n_slices: usize,
    quad: &QuadratureSpec,
) -> Result<Complex64> {
    quad.validate()?;
    if n_slices == 0 {
        return Err(Error::InvalidArgument(
            "need at least one intermediate slice".into(),
        ));
    }
    if t_total <= 0.0 || !t_total.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_total must be positive, got {t_total}"
        )));
    }
    let eps = quad.eps_reg;
    let richardson = |w: f64| {
        let k1 = lattice_once(h, hbar, q_i, q_f, t_total, n_slices, quad, w, eps);
        let k2 = lattice_once(h, hbar, q_i, q_f, t_total, n_slices, quad, w, 2.0 * eps);
        2.0 * k1 - k2
    };
    let full = richardson(quad.window);
    let shrunk = richardson(0.85 * quad.window);
    let scale = full.norm().max(1e-300);
    let drift = (full - shrunk).norm() / scale;
    if drift > quad.window_check_tol {
        return Err(Error::WindowTooNarrow {
            edge_ratio: drift,
            threshold: quad.window_check_tol,
        });
    }
    if !full.re.is_finite() || !full.im.is_finite() {
        return Err(Error::NonFinite("lattice quadrature"));
    }
    Ok(full)
}

/// Mehler kernel: the analytic harmonic-oscillator propagator, used as a
/// test oracle.
pub fn harmonic_oscillator_k(
    m: f64,
    omega: f64,
    hbar: f64,
    q_i: f64,
    q_f: f64,
    t: f64,
) -> Result<Complex64> {
    if t <= 0.0 || omega <= 0.0 {
        return Err(Error::InvalidArgument("need positive t and omega".into()));
    }
    let s = (omega * t).sin();
    if s.abs() < 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "focal point: sin(omega t) = {s} at omega t = {}",
            omega * t
        )));
    }
    let c = (omega * t).cos();
    let pref =
        (Complex64::new(m * omega, 0.0) / (2.0 * std::f64::consts::PI * hbar * I * s)).sqrt();
    Ok(pref
        * (I * m * omega * ((q_i * q_i + q_f * q_f) * c - 2.0 * q_i * q_f) / (2.0 * hbar * s))
            .exp())
}

/// Phase model for the interference-damping trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseModel {
    UniformRandom,
    Coherent,
}

/// Diagonal and cross-term statistics of Pr = |a Σ e^{iθ}|² with
/// |a|² = 1/n.
#[derive(Debug, Clone, Serialize)]
pub struct DampingReport {
    pub n_paths: usize,
    pub trials: usize,
    pub seed: u64,
    pub phase_model: PhaseModel,
    /// |a|² Σ_{j=k} 1, which is exactly 1 for |a|² = 1/n.
    pub diagonal: f64,
    pub cross_mean: f64,
    pub cross_std_error: f64,
    pub pr_mean: f64,
}

/// Monte Carlo estimate of the off-diagonal interference term
/// |a|² Σ_{j≠k} e^{i(θ_k−θ_j)} over seeded trials.
pub fn interference_damping_trial(
    n_paths: usize,
    phase_model: PhaseModel,
    seed: u64,
    trials: usize,
) -> Result<DampingReport> {
    if n_paths == 0 || trials == 0 {
        return Err(Error::InvalidArgument(
            "n_paths and trials must be positive".into(),
        ));
    }
    let cross_terms: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            // cross = |a|² Σ_{j≠k} e^{i(θ_k−θ_j)} = (|Σe^{iθ}|² − Σ|e^{iθ}|²)/n,
            // so a single path gives exactly zero.
            let (sum, diag) = match phase_model {
                PhaseModel::Coherent => (Complex64::new(n_paths as f64, 0.0), n_paths as f64),
                PhaseModel::UniformRandom => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(trial as u64);
                    let mut sum = Complex64::new(0.0, 0.0);
                    let mut diag = 0.0;
                    for _ in 0..n_paths {
                        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                        let phasor = Complex64::from_polar(1.0, theta);
                        sum += phasor;
                        diag += phasor.norm_sqr();
                    }
                    (sum, diag)
                }
            };
            (sum.norm_sqr() - diag) / n_paths as f64
        })
        .collect();
    let mean = cross_terms.iter().sum::<f64>() / trials as f64;
    let variance = cross_terms
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (trials.max(2) - 1) as f64;
    let std_error = (variance / trials as f64).sqrt();
    Ok(DampingReport {
        n_paths,
        trials,
        seed,
        phase_model,
        diagonal: 1.0,
        cross_mean: mean,
        cross_std_error: std_error,
        pr_mean: 1.0 + mean,
    })
}

/// A free-particle propagator sampled on a square endpoint grid at one
/// time separation.
#[derive(Debug, Clone)]
pub struct PropagatorSample {
    pub q_grid: Vec<f64>,
    pub k_values: Vec<Vec<Complex64>>,
    pub t_i: f64,
    pub t_f: f64,
    pub mass: f64,
    pub hbar: f64,
    pub n_dof: i32,
}

impl PropagatorSample {
    /// CSV rows `q_i, q_f, re, im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q_i,q_f,re,im\n");
        for (a, row) in self.k_values.iter().enumerate() {
            for (b, k) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    self.q_grid[a], self.q_grid[b], k.re, k.im
                ));
            }
        }
        out
    }
}

/// Sample the analytic free propagator over a uniform endpoint grid.
pub fn sample_free_propagator(
    m: f64,
    hbar: f64,
    half_width: f64,
    points: usize,
    t_i: f64,
    t_f: f64,
    n_dof: i32,
) -> Result<PropagatorSample> {
    if points < 2 || t_f <= t_i {
        return Err(Error::InvalidArgument("bad propagator grid".into()));
    }
    let dq = 2.0 * half_width / points as f64;
    let q_grid: Vec<f64> = (0..points).map(|i| -half_width + dq * i as f64).collect();
    let dt = t_f - t_i;
    let k_values: Vec<Vec<Complex64>> = q_grid
        .iter()
        .map(|&qa| {
            q_grid
                .iter()
                .map(|&qb| free_k_complex(m, hbar, qb - qa, Complex64::new(dt, 0.0)))
                .collect()
        })
        .collect();
    Ok(PropagatorSample {
        q_grid,
        k_values,
        t_i,
        t_f,
        mass: m,
        hbar,
        n_dof,
    })
}

/// Inputs of the micro-canonical Fourier transform.
#[derive(Debug, Clone, Serialize)]
pub struct MicrocanonicalSpec {
    pub mass: f64,
    pub hbar: f64,
    /// Spatial window length L: endpoints span [−L/2, L/2].
    pub l_window: f64,
    /// Temporal window length T.
    pub t_window: f64,
    pub q_points: usize,
    pub t_points: usize,
    /// Fixed time separation for the endpoint transform.
    pub t_fixed: f64,
    /// Start of the time window (kept away from the t = 0 singularity).
    pub t_start: f64,
    pub taper_frac: f64,
}

impl Default for MicrocanonicalSpec {
    fn default() -> Self {
        MicrocanonicalSpec {
            mass: 1.0,
            hbar: 1.0,
            l_window: 64.0,
            t_window: 64.0,
            q_points: 256,
            t_points: 256,
            t_fixed: 1.0,
            t_start: 0.25,
            taper_frac: 0.15,
        }
    }
}

/// |density| over a (p, E) grid with its window metadata.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralGrid {
    pub p_grid: Vec<f64>,
    pub e_grid: Vec<f64>,
    /// (L, T) truncation lengths.
    pub window: (f64, f64),
    /// density\[ip\]\[ie\] = |K̂(p, E)|.
    pub density: Vec<Vec<f64>>,
}

impl SpectralGrid {
    /// CSV rows `p, e, magnitude`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,e,magnitude\n");
        for (ip, p) in self.p_grid.iter().enumerate() {
            for (ie, e) in self.e_grid.iter().enumerate() {
                out.push_str(&format!(
                    "{p:.17e},{e:.17e},{:.17e}\n",
                    self.density[ip][ie]
                ));
            }
        }
        out
    }

    /// Two-column plot file `e, magnitude` for the row nearest to `p`.
    pub fn magnitude_slice_csv(&self, p: f64) -> String {
        let ip = nearest_index(&self.p_grid, p);
        let mut out = String::from("e,magnitude\n");
        for (ie, e) in self.e_grid.iter().enumerate() {
            out.push_str(&format!("{e:.17e},{:.17e}\n", self.density[ip][ie]));
        }
        out
    }
}

/// The endpoint-momentum density |K̂(p_i, p_f)| at the fixed time
/// separation, wearing the δ(p_i − p_f) ridge.
#[derive(Debug, Clone, Serialize)]
pub struct MomentumDensity {
    pub p_grid: Vec<f64>,
    pub density: Vec<Vec<f64>>,
}

impl MomentumDensity {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p_i,p_f,magnitude\n");
        for (a, pi) in self.p_grid.iter().enumerate() {
            for (b, pf) in self.p_grid.iter().enumerate() {
                out.push_str(&format!(
                    "{pi:.17e},{pf:.17e},{:.17e}\n",
                    self.density[a][b]
                ));
            }
        }
        out
    }
}

/// Peak diagnostics of the transform.
#[derive(Debug, Clone, Serialize)]
pub struct MicrocanonicalReport {
    pub spec: MicrocanonicalSpec,
    /// argmax cell distance from the p_i = p_f diagonal, in grid cells.
    pub diagonal_offset_cells: usize,
    /// FWHM of the ridge cross-section through the argmax, in momentum units.
    pub p_peak_fwhm: f64,
    /// For each requested momentum: (p, E at the energy-marginal peak,
    /// expected p²/2m, offset in E-grid cells).
    pub energy_peaks: Vec<EnergyPeak>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyPeak {
    pub p: f64,
    pub e_peak: f64,
    pub e_expected: f64,
    pub offset_cells: usize,
}

fn nearest_index(grid: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &g) in grid.iter().enumerate() {
        let d = (g - x).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Interpolated full width at half maximum of a sampled profile.
pub fn fwhm(grid: &[f64], profile: &[f64]) -> f64 {
    debug_assert_eq!(grid.len(), profile.len());
    let (imax, &peak) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite profile"))
        .expect("nonempty profile");
    let half = 0.5 * peak;
    let mut left = grid[0];
    for i in (1..=imax).rev() {
        if profile[i - 1] <= half {
            let f = (half - profile[i - 1]) / (profile[i] - profile[i - 1]);
            left = grid[i - 1] + f * (grid[i] - grid[i - 1]);
            break;
        }
    }
    let mut right = grid[grid.len() - 1];
    for i in imax..grid.len() - 1 {
        if profile[i + 1] <= half {
            let f = (half - profile[i + 1]) / (profile[i] - profile[i + 1]);
            right = grid[i + 1] - f * (grid[i + 1] - grid[i]);
            break;
        }
    }
    right - left
}

/// Fourier-transform the free propagator over its endpoints (→ p_i, p_f)
/// and over time (→ E).
///
/// The outgoing endpoint is transformed with the forward kernel
/// exp(−ipq/ħ) and the incoming endpoint with its inverse, which puts the
/// momentum-conservation ridge on the p_i = p_f diagonal. The time
/// transform of the momentum-diagonal propagator peaks at E = p²/2m.
pub fn microcanonical_transform(
    spec: &MicrocanonicalSpec,
    peak_momenta: &[f64],
) -> Result<(MomentumDensity, SpectralGrid, MicrocanonicalReport)> {
    if spec.q_points < 8 || spec.t_points < 8 {
        return Err(Error::InvalidArgument("grids too small".into()));
    }
    let (m, hbar) = (spec.mass, spec.hbar);
    let n = spec.q_points;
    let l = spec.l_window;
    let dq = l / n as f64;
    let q_grid: Vec<f64> = (0..n).map(|i| -0.5 * l + (i as f64 + 0.5) * dq).collect();
    let p_grid: Vec<f64> = (0..n)
        .map(|k| 2.0 * std::f64::consts::PI * hbar * (k as f64 - 0.5 * n as f64) / l)
        .collect();

    // Nyquist diagnostics for the requested peak checks.
    let p_nyquist = std::f64::consts::PI * hbar / dq;
    for &p in peak_momenta {
        if p.abs() > p_nyquist {
            return Err(Error::GridTooCoarse {
                what: "momentum peak beyond the endpoint-grid Nyquist limit",
                needed: p.abs(),
                supported: p_nyquist,
            });
        }
    }
    let dt_grid = spec.t_window / spec.t_points as f64;
    let e_nyquist = std::f64::consts::PI * hbar / dt_grid;
    for &p in peak_momenta {
        let e = p * p / (2.0 * m);
        if e > e_nyquist {
            return Err(Error::GridTooCoarse {
                what: "energy peak beyond the time-grid Nyquist limit",
                needed: e,
                supported: e_nyquist,
            });
        }
    }

    let taper_q: Vec<f64> = q_grid
        .iter()
        .map(|&q| taper_at(q, 0.5 * l, spec.taper_frac))
        .collect();

    // Endpoint transform at the fixed time separation:
    // A(p_i, p_f) = Σ_{a,b} e^{+i p_i q_a/ħ} K(q_b − q_a) e^{−i p_f q_b/ħ} w_a w_b
    let k_row: Vec<Vec<Complex64>> = q_grid
        .par_iter()
        .map(|&qa| {
            q_grid
                .iter()
                .map(|&qb| free_k_complex(m, hbar, qb - qa, Complex64::new(spec.t_fixed, 0.0)))
                .collect()
        })
        .collect();
    // inner: M[a][kf] = Σ_b K[a][b] e^{−i p_f q_b/ħ} w_b dq
    let inner: Vec<Vec<Complex64>> = k_row
        .par_iter()
        .map(|row| {
            p_grid
                .iter()
                .map(|&pf| {
                    row.iter()
                        .zip(&q_grid)
                        .zip(&taper_q)
                        .map(|((k, &qb), &wb)| k * (-I * pf * qb / hbar).exp() * wb * dq)
                        .sum()
                })
                .collect()
        })
        .collect();
    let momentum_density: Vec<Vec<f64>> = p_grid
        .par_iter()
        .map(|&pi| {
            (0..n)
                .map(|kf| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..n {
                        acc += (I * pi * q_grid[a] / hbar).exp() * inner[a][kf] * taper_q[a] * dq;
                    }
                    acc.norm()
                })
                .collect()
        })
        .collect();

    // argmax and its distance from the diagonal
    let mut argmax = (0usize, 0usize);
    let mut best = -1.0;
    for (a, row) in momentum_density.iter().enumerate() {
        for (b, &value) in row.iter().enumerate() {
            if value > best {
                best = value;
                argmax = (a, b);
            }
        }
    }
    let diagonal_offset_cells = argmax.0.abs_diff(argmax.1);
    // ridge cross-section through the argmax, varying p_i at fixed p_f
    let profile: Vec<f64> = (0..n).map(|a| momentum_density[a][argmax.1]).collect();
    let p_peak_fwhm = fwhm(&p_grid, &profile);

    // Time transform on the momentum diagonal:
    // M(p, t) = Σ_Δ e^{−i p Δ/ħ} K(Δ, t) w_Δ; B(p, E) = Σ_t e^{+i E t/ħ} M(p, t) w_t
    let t_grid: Vec<f64> = (0..spec.t_points)
        .map(|i| spec.t_start + (i as f64 + 0.5) * dt_grid)
        .collect();
    let e_grid: Vec<f64> = (0..spec.t_points)
        .map(|k| {
            2.0 * std::f64::consts::PI * hbar * (k as f64 - 0.5 * spec.t_points as f64)
                / spec.t_window
        })
        .collect();
    let taper_t: Vec<f64> = (0..spec.t_points)
        .map(|i| {
            let u = (t_grid[i] - spec.t_start) / spec.t_window;
            planck_taper(u / spec.taper_frac) * planck_taper((1.0 - u) / spec.taper_frac)
        })
        .collect();
    let m_pt: Vec<Vec<Complex64>> = p_grid
        .par_iter()
        .map(|&p| {
            t_grid
                .iter()
                .map(|&t| {
                    q_grid
                        .iter()
                        .zip(&taper_q)
                        .map(|(&dqv, &wq)| {
                            free_k_complex(m, hbar, dqv, Complex64::new(t, 0.0))
                                * (-I * p * dqv / hbar).exp()
                                * wq
                                * dq
                        })
                        .sum()
                })
                .collect()
        })
        .collect();
    let density: Vec<Vec<f64>> = m_pt
        .par_iter()
        .map(|row| {
            e_grid
                .iter()
                .map(|&e| {
                    row.iter()
                        .zip(&t_grid)
                        .zip(&taper_t)
                        .map(|((mv, &t), &wt)| mv * (I * e * t / hbar).exp() * wt * dt_grid)
                        .sum::<Complex64>()
                        .norm()
                })
                .collect()
        })
        .collect();

    let de = e_grid[1] - e_grid[0];
    let energy_peaks: Vec<EnergyPeak> = peak_momenta
        .iter()
        .map(|&p| {
            let ip = nearest_index(&p_grid, p);
            let row = &density[ip];
            let ie = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite density"))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let e_expected = p_grid[ip] * p_grid[ip] / (2.0 * m);
            let offset_cells = ((e_grid[ie] - e_expected).abs() / de).round() as usize;
            EnergyPeak {
                p: p_grid[ip],
                e_peak: e_grid[ie],
                e_expected,
                offset_cells,
            }
        })
        .collect();

    let spectral = SpectralGrid {
        p_grid: p_grid.clone(),
        e_grid,
        window: (spec.l_window, spec.t_window),
        density,
    };
    let momentum = MomentumDensity {
        p_grid,
        density: momentum_density,
    };
    let report = MicrocanonicalReport {
        spec: spec.clone(),
        diagonal_offset_cells,
        p_peak_fwhm,
        energy_peaks,
    };
    Ok((momentum, spectral, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_k_magnitude_and_phase() {
        let k = free_particle_k(1.0, 1.0, 0.0, 1.0).unwrap();
        let expect_mag = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((k.norm() - expect_mag).abs() < 1e-12);
        assert!((k.arg() + std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn free_k_probability_is_dq_independent() {
        let m = 1.3;
        let hbar = 1.0;
        let dt = 0.7;
        let expect = m / (2.0 * std::f64::consts::PI * hbar * dt);
        for dq in [-3.0, -0.5, 0.0, 1.0, 10.0] {
            let k = free_particle_k(m, hbar, dq, dt).unwrap();
            assert!((k.norm_sqr() - expect).abs() < 1e-12 * expect);
        }
        assert!((free_particle_pr(m, hbar, dt, 1) - expect).abs() < 1e-15);
        let pr6 = free_particle_pr(m, hbar, dt, 6);
        assert!((pr6 - expect.powi(6)).abs() < 1e-12 * expect.powi(6));
    }

    #[test]
    fn free_k_time_reversal_conjugation() {
        // Reversing the endpoints and conjugating the phase reproduces
        // conj(K) exactly.
        let k_fwd = free_particle_k(1.0, 1.0, 1.7, 0.9).unwrap();
        let k_bwd = free_particle_k(1.0, 1.0, -1.7, 0.9).unwrap();
        assert!((k_bwd.conj() - k_fwd.conj()).norm() < 1e-12);
    }

    #[test]
    fn composition_matches_analytic() {
        let quad = QuadratureSpec::default();
        let k = |qa: f64, qb: f64, tau: Complex64| free_k_complex(1.0, 1.0, qb - qa, tau);
        let got = compose_propagators(k, 0.0, 1.0, 2.0, 0.0, 0.0, &quad).unwrap();
        let expect = free_particle_k(1.0, 1.0, 0.0, 2.0).unwrap();
        let rel = (got - expect).norm() / expect.norm();
        assert!(rel < 1e-3, "rel err {rel}");
    }

    #[test]
    fn composition_split_independence() {
        let quad = QuadratureSpec::default();
        let k = |qa: f64, qb: f64, tau: Complex64| free_k_complex(1.0, 1.0, qb - qa, tau);
        let expect = free_particle_k(1.0, 1.0, 0.5, 2.0).unwrap();
        for tm in [0.7, 1.0, 1.3] {
            let got = compose_propagators(k, 0.0, tm, 2.0, 0.0, 0.5, &quad).unwrap();
            let rel = (got - expect).norm() / expect.norm();
            assert!(rel < 1e-3, "tm={tm}: rel err {rel}");
        }
    }

    #[test]
    fn composition_degenerate_split() {
        // t_m − t_i = 1e-3: the first factor approaches a delta sequence.
        let quad = QuadratureSpec {
            window: 6.0,
            points: 1 << 15,
            eps_reg: 3e-3,
            ..QuadratureSpec::default()
        };
        let k = |qa: f64, qb: f64, tau: Complex64| free_k_complex(1.0, 1.0, qb - qa, tau);
        let got = compose_propagators(k, 0.0, 1e-3, 2.0, 0.0, 0.0, &quad).unwrap();
        let expect = free_particle_k(1.0, 1.0, 0.0, 2.0).unwrap();
        let rel = (got - expect).norm() / expect.norm();
        assert!(rel < 1e-2, "rel err {rel}");
    }

    #[test]
    fn composition_window_too_narrow_is_diagnosed() {
        let quad = QuadratureSpec {
            window: 3.0,
            points: 1 << 10,
            eps_reg: 1e-4,
            ..QuadratureSpec::default()
        };
        let k = |qa: f64, qb: f64, tau: Complex64| free_k_complex(1.0, 1.0, qb - qa, tau);
        let err = compose_propagators(k, 0.0, 1.0, 2.0, 0.0, 0.0, &quad).unwrap_err();
        assert!(matches!(err, Error::WindowTooNarrow { .. }), "{err:?}");
    }

    #[test]
    fn lattice_one_slice_reproduces_gaussian_integral() {
        let h = Hamiltonian::free(1.0).unwrap();
        let quad = QuadratureSpec {
            window: 12.0,
            points: 1536,
            eps_reg: 1e-4,
            ..QuadratureSpec::default()
        };
        let got = lattice_propagator(&h, 1.0, 0.0, 0.0, 1.0, 1, &quad).unwrap();
        let expect = free_particle_k(1.0, 1.0, 0.0, 1.0).unwrap();
        let rel = (got - expect).norm() / expect.norm();
        assert!(rel < 1e-6, "rel err {rel}");
    }

    #[test]
    fn lattice_three_slices_within_two_percent() {
        let h = Hamiltonian::free(1.0).unwrap();
        let quad = QuadratureSpec {
            window: 8.0,
            points: 256,
            eps_reg: 1e-3,
            ..QuadratureSpec::default()
        };
        for dq in [0.0, 1.0, 2.0] {
            let got = lattice_propagator(&h, 1.0, 0.0, dq, 1.0, 3, &quad).unwrap();
            let expect = free_particle_k(1.0, 1.0, dq, 1.0).unwrap();
            let rel = (got - expect).norm() / expect.norm();
            assert!(rel < 0.02, "dq={dq}: rel err {rel}");
        }
    }

    #[test]
    fn lattice_harmonic_small_angle_within_five_percent() {
        let h = Hamiltonian::harmonic(1.0, 0.2).unwrap();
        let quad = QuadratureSpec {
            window: 8.0,
            points: 512,
            eps_reg: 1e-3,
            ..QuadratureSpec::default()
        };
        let got = lattice_propagator(&h, 1.0, 0.0, 1.0, 1.0, 4, &quad).unwrap();
        let expect = harmonic_oscillator_k(1.0, 0.2, 1.0, 0.0, 1.0, 1.0).unwrap();
        let rel = (got - expect).norm() / expect.norm();
        assert!(rel < 0.05, "rel err {rel}");
    }

    #[test]
    fn lattice_slice_doubling_first_order_convergence() {
        // The sliced harmonic propagator approaches the Mehler kernel at
        // first order in the segment duration.
        let h = Hamiltonian::harmonic(1.0, 1.0).unwrap();
        let quad = QuadratureSpec {
            window: 7.0,
            points: 1024,
            eps_reg: 1e-4,
            ..QuadratureSpec::default()
        };
        let expect = harmonic_oscillator_k(1.0, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let errs: Vec<f64> = [1usize, 3, 7]
            .iter()
            .map(|&ns| {
                let got = lattice_propagator(&h, 1.0, 0.0, 1.0, 1.0, ns, &quad).unwrap();
                (got - expect).norm() / expect.norm()
            })
            .collect();
        // segment counts 2, 4, 8: each doubling should roughly halve the error
        let r1 = (errs[0] / errs[1]).log2();
        let r2 = (errs[1] / errs[2]).log2();
        assert!(
            (0.7..1.3).contains(&r1) && (0.7..1.3).contains(&r2),
            "rates {r1} {r2}, errs {errs:?}"
        );
    }

    #[test]
    fn damping_single_path_has_no_cross_term() {
        let rep = interference_damping_trial(1, PhaseModel::UniformRandom, 7, 100).unwrap();
        assert_eq!(rep.cross_mean, 0.0);
        assert_eq!(rep.pr_mean, 1.0);
    }

    #[test]
    fn damping_coherent_cross_term_is_n_minus_one() {
        let rep = interference_damping_trial(100, PhaseModel::Coherent, 7, 10).unwrap();
        assert_eq!(rep.cross_mean, 99.0);
        assert_eq!(rep.pr_mean, 100.0);
    }

    #[test]
    fn damping_random_phases_average_to_zero() {
        let rep =
            interference_damping_trial(1000, PhaseModel::UniformRandom, 20260808, 1000).unwrap();
        assert!(
            rep.cross_mean.abs() < 3.0 * rep.cross_std_error,
            "mean {} vs 3·SE {}",
            rep.cross_mean,
            3.0 * rep.cross_std_error
        );
    }

    #[test]
    fn damping_is_seed_deterministic() {
        let a = interference_damping_trial(100, PhaseModel::UniformRandom, 5, 50).unwrap();
        let b = interference_damping_trial(100, PhaseModel::UniformRandom, 5, 50).unwrap();
        assert_eq!(a.cross_mean.to_bits(), b.cross_mean.to_bits());
    }

    #[test]
    fn fwhm_of_triangle() {
        let grid: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let profile: Vec<f64> = grid.iter().map(|&x| 5.0 - (x - 5.0).abs()).collect();
        assert!((fwhm(&grid, &profile) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn microcanonical_peaks_and_width_scaling() {
        let spec = MicrocanonicalSpec::default();
        let (_, _, report) = microcanonical_transform(&spec, &[0.5, 1.0, 2.0]).unwrap();
        assert!(
            report.diagonal_offset_cells <= 1,
            "diagonal offset {} cells",
            report.diagonal_offset_cells
        );
        for peak in &report.energy_peaks {
            assert!(
                peak.offset_cells <= 1,
                "p={}: E peak {} vs {}",
                peak.p,
                peak.e_peak,
                peak.e_expected
            );
        }
        // doubling L halves the ridge width within 20%
        let doubled = MicrocanonicalSpec {
            l_window: 128.0,
            q_points: 512,
            ..MicrocanonicalSpec::default()
        };
        let (_, _, report2) = microcanonical_transform(&doubled, &[1.0]).unwrap();
        let ratio = report.p_peak_fwhm / report2.p_peak_fwhm;
        assert!(
            (1.6..=2.4).contains(&ratio),
            "width ratio {ratio}: {} vs {}",
            report.p_peak_fwhm,
            report2.p_peak_fwhm
        );
    }

    #[test]
    fn microcanonical_energy_width_halves_with_t() {
        // The 1/T width law needs (a) the stationary point of the
        // endpoint integral (at dq = p t) inside the spatial window for
        // every sampled t, i.e. t_window + t_start below L/(2p), and
        // (b) the dq grid resolving the kernel oscillation at the
        // smallest t, i.e. t_start above L^2/(2 pi N).
        let p_check = 0.5;
        let base = MicrocanonicalSpec {
            t_start: 8.0,
            t_window: 16.0,
            q_points: 128,
            t_points: 128,
            ..MicrocanonicalSpec::default()
        };
        let (_, spectral, _) = microcanonical_transform(&base, &[p_check]).unwrap();
        let doubled = MicrocanonicalSpec {
            t_start: 8.0,
            t_window: 32.0,
            t_points: 256,
            q_points: 128,
            ..MicrocanonicalSpec::default()
        };
        let (_, spectral2, _) = microcanonical_transform(&doubled, &[p_check]).unwrap();
        let width = |grid: &SpectralGrid| {
            let ip = grid
                .p_grid
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - p_check)
                        .abs()
                        .partial_cmp(&(b.1 - p_check).abs())
                        .unwrap()
                })
                .map(|(i, _)| i)
                .unwrap();
            fwhm(&grid.e_grid, &grid.density[ip])
        };
        let ratio = width(&spectral) / width(&spectral2);
        assert!(
            (1.6..=2.4).contains(&ratio),
            "energy FWHM ratio {ratio} under T doubling"
        );
    }

    #[test]
    fn harmonic_kernel_rejects_focal_points() {
        let err = harmonic_oscillator_k(1.0, 1.0, 1.0, 0.0, 1.0, std::f64::consts::PI);
        assert!(err.is_err());
    }

    #[test]
    fn microcanonical_nyquist_diagnostic() {
        let spec = MicrocanonicalSpec {
            q_points: 16,
            t_points: 16,
            ..MicrocanonicalSpec::default()
        };
        let err = microcanonical_transform(&spec, &[50.0]).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
    }
}
