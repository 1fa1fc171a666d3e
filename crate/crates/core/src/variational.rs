//! The trial-family extremization over α = a·sin(cG\[p\]), β = b·cos(cJ\[q\]):
//! contracted profiles I(c), J(c) against a fixed partner distribution,
//! bracketed solves of the first-order condition d/dc ln(I/J) = 0 with the
//! multiplier formulas a* = κ/J and λ = −I/(2Jκ), finite-difference
//! Hessian determinants at the critical point, and the optimal per-path
//! amplitudes a*·exp(ic*S_j).

use serde::Serialize;

use crate::action::ActionMatrix;
use crate::amplitude::AmplitudeSet;
use crate::error::{Error, Result};

/// Default number of scan points used to bracket a sign change.
pub const DEFAULT_SCAN_POINTS: usize = 10_000;

/// Relative tolerance on c* for the bisection.
pub const C_STAR_REL_TOL: f64 = 1e-12;

/// Step used by the finite-difference derivative of ln(I/J).
const LOG_DERIVATIVE_STEP: f64 = 1e-6;

/// Floor on |J(c*)| relative to the scan maximum below which the
/// amplitude a* = κ/J is reported singular.
const J_SINGULAR_FLOOR: f64 = 1e-8;

/// Which of the two trial-family extremization problems is being solved:
/// Problem 1 varies α over a·sin(cG\[p\]); Problem 2 varies β over
/// b·cos(cJ\[q\]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Problem {
    One,
    Two,
}

/// Path-space contractions of an action matrix against fixed partner
/// distributions: S_β\[p_j\] = Σ_k β₀ₖ S_jk and S_α\[q_k\] = Σ_j α₀ⱼ S_jk,
/// together with the per-path G and J values that drive the trial phases.
#[derive(Debug, Clone)]
pub struct ContractedProfiles {
    pub g_values: Option<Vec<f64>>,
    pub j_values: Vec<f64>,
    pub s_beta: Vec<f64>,
    pub s_alpha: Vec<f64>,
}

impl ContractedProfiles {
    pub fn new(matrix: &ActionMatrix, alpha0: &[f64], beta0: &[f64]) -> Result<Self> {
        let n = matrix.n();
        if alpha0.len() != n || beta0.len() != n {
            return Err(Error::DimensionMismatch {
                vector: alpha0.len().max(beta0.len()),
                rows: n,
                cols: n,
            });
        }
        if matrix.j_values.len() != n {
            return Err(Error::InvalidArgument(
                "action matrix carries no per-path J values".into(),
            ));
        }
        let s_beta: Vec<f64> = matrix
            .entries
            .iter()
            .map(|row| row.iter().zip(beta0).map(|(s, b)| s * b).sum())
            .collect();
        let mut s_alpha = vec![0.0; n];
        for (j, row) in matrix.entries.iter().enumerate() {
            for (k, s) in row.iter().enumerate() {
                s_alpha[k] += alpha0[j] * s;
            }
        }
        Ok(ContractedProfiles {
            g_values: matrix.g_values.clone(),
            j_values: matrix.j_values.clone(),
            s_beta,
            s_alpha,
        })
    }

    /// Problem 1 profiles: I₁(c) = Σ sin(cG_j) S_β\[p_j\], J₁(c) = Σ sin(cG_j).
    pub fn problem1(&self, c: f64) -> Result<(f64, f64)> {
        let g = self.g_values.as_ref().ok_or(Error::Problem1Unavailable)?;
        let mut i1 = 0.0;
        let mut j1 = 0.0;
        for (gj, sb) in g.iter().zip(&self.s_beta) {
            let w = (c * gj).sin();
            i1 += w * sb;
            j1 += w;
        }
        Ok((i1, j1))
    }

    /// Problem 2 profiles: I₂(c) = Σ cos(cJ_k) S_α\[q_k\], J₂(c) = Σ cos(cJ_k).
    pub fn problem2(&self, c: f64) -> (f64, f64) {
        let mut i2 = 0.0;
        let mut j2 = 0.0;
        for (jk, sa) in self.j_values.iter().zip(&self.s_alpha) {
            let w = (c * jk).cos();
            i2 += w * sa;
            j2 += w;
        }
        (i2, j2)
    }
}

/// The four discrete path-integral stand-ins at one phase scale c.
pub fn contracted_profiles(
    c: f64,
    matrix: &ActionMatrix,
    alpha0: &[f64],
    beta0: &[f64],
) -> Result<(f64, f64, f64, f64)> {
    let p = ContractedProfiles::new(matrix, alpha0, beta0)?;
    let (i1, j1) = p.problem1(c)?;
    let (i2, j2) = p.problem2(c);
    Ok((i1, j1, i2, j2))
}

/// One solved problem: the critical phase scale and the multiplier data.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemSolution {
    pub problem: Problem,
    pub c_star: f64,
    /// a* for Problem 1, b* for Problem 2 (positive root; the ± pair
    /// negates both the amplitude and λ).
    pub amplitude: f64,
    pub lambda: f64,
    pub ratio_c_star: f64,
    /// |d/dc ln(I/J)| at c*.
    pub residual: f64,
    pub kappa: f64,
    /// v = amplitude · I(c*), the extremal generalized action.
    pub v: f64,
}

fn log_ratio_derivative(provider: &impl Fn(f64) -> (f64, f64), c: f64) -> f64 {
    let h = LOG_DERIVATIVE_STEP * c.abs().max(1.0);
    let (ip, jp) = provider(c + h);
    let (im, jm) = provider(c - h);
    ((ip / jp).abs().ln() - (im / jm).abs().ln()) / (2.0 * h)
}

/// Solve one problem by bracketed bisection of the finite-difference
/// derivative of ln(I/J).
///
/// The bracket is scanned on a uniform grid; a cell is a candidate only
/// when I and J keep their signs across it (cells containing zeros of I
/// or J host spurious sign changes of the log derivative) and the
/// derivative changes sign. The first candidate cell is refined. A scan
/// with no candidate and a flat derivative is reported as a degenerate
/// bracket — the single-path case, where every c is critical.
pub fn solve_problem(
    which: Problem,
    provider: impl Fn(f64) -> (f64, f64),
    kappa: f64,
    c_bracket: (f64, f64),
    scan_points: usize,
) -> Result<ProblemSolution> {
    let (lo, hi) = c_bracket;
    if !lo.is_finite() || !hi.is_finite() || lo >= hi || lo <= 0.0 {
        return Err(Error::InvalidArgument(format!("bad bracket ({lo}, {hi})")));
    }
    if !kappa.is_finite() || kappa == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "kappa must be finite and nonzero, got {kappa}"
        )));
    }
    let points = scan_points.max(16);
    let step = (hi - lo) / (points - 1) as f64;

    let mut j_scale = 0.0_f64;
    let mut max_abs_deriv = 0.0_f64;
    let mut cell: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64, f64, f64)> = None; // c, I, J, deriv
    for i in 0..points {
        let c = lo + step * i as f64;
        let (iv, jv) = provider(c);
        if !iv.is_finite() || !jv.is_finite() {
            return Err(Error::NonFinite("profile value"));
        }
        j_scale = j_scale.max(jv.abs());
        let d = log_ratio_derivative(&provider, c);
        max_abs_deriv = max_abs_deriv.max(d.abs());
        if let Some((pc, pi, pj, pd)) = prev {
            let signs_stable = pi.signum() == iv.signum()
                && pj.signum() == jv.signum()
                && pi != 0.0
                && pj != 0.0
                && iv != 0.0
                && jv != 0.0;
            if signs_stable && pd.signum() != d.signum() && cell.is_none() {
                cell = Some((pc, c));
            }
        }
        prev = Some((c, iv, jv, d));
    }

    if max_abs_deriv <= 1e-9 {
        // constant ratio: every c is critical, no isolated c* exists
        return Err(Error::DegenerateBracket);
    }
    let (mut a, mut b) = match cell {
        Some(c) => c,
        None => return Err(Error::NoSignChange { lo, hi }),
    };

    let mut da = log_ratio_derivative(&provider, a);
    while (b - a) > C_STAR_REL_TOL * b.abs().max(1.0) {
        let mid = 0.5 * (a + b);
        let dm = log_ratio_derivative(&provider, mid);
        if dm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if dm.signum() == da.signum() {
            a = mid;
            da = dm;
        } else {
            b = mid;
        }
    }
    let c_star = 0.5 * (a + b);
    let (i_star, j_star) = provider(c_star);
    if !i_star.is_finite() || !j_star.is_finite() {
        return Err(Error::NonFinite("profile value at c*"));
    }
    if j_star.abs() <= J_SINGULAR_FLOOR * j_scale.max(1e-300) {
        return Err(Error::AmplitudeSingular { j_value: j_star });
    }
    let amplitude = kappa / j_star;
    let lambda = -i_star / (2.0 * j_star * kappa);
    Ok(ProblemSolution {
        problem: which,
        c_star,
        amplitude,
        lambda,
        ratio_c_star: i_star / j_star,
        residual: log_ratio_derivative(&provider, c_star).abs(),
        kappa,
        v: amplitude * i_star,
    })
}

/// Second-derivative data of F(a, c) = a·I(c) + λ(a²J(c)² − κ²) at a
/// critical point, by central finite differences.
#[derive(Debug, Clone, Serialize)]
pub struct HessianReport {
    pub d: f64,
    pub f_aa: f64,
    pub f_cc: f64,
    pub f_ac: f64,
    /// |D| / max(|F_aa·F_cc|, F_ac², 1)
    pub normalized_d: f64,
}

pub fn hessian_degeneracy(
    provider: impl Fn(f64) -> (f64, f64),
    amplitude: f64,
    c_star: f64,
    lambda: f64,
    kappa: f64,
) -> Result<HessianReport> {
    let f = |a: f64, c: f64| -> f64 {
        let (i, j) = provider(c);
        a * i + lambda * (a * a * j * j - kappa * kappa)
    };
    let ha = 1e-4 * amplitude.abs().max(1.0);
    let hc = 1e-4 * c_star.abs().max(1.0);
    let f0 = f(amplitude, c_star);
    let f_aa = (f(amplitude + ha, c_star) - 2.0 * f0 + f(amplitude - ha, c_star)) / (ha * ha);
    let f_cc = (f(amplitude, c_star + hc) - 2.0 * f0 + f(amplitude, c_star - hc)) / (hc * hc);
    let f_ac = (f(amplitude + ha, c_star + hc)
        - f(amplitude + ha, c_star - hc)
        - f(amplitude - ha, c_star + hc)
        + f(amplitude - ha, c_star - hc))
        / (4.0 * ha * hc);
    let d = f_aa * f_cc - f_ac * f_ac;
    if !d.is_finite() {
        return Err(Error::NonFinite("finite-difference Hessian"));
    }
    let normalized_d = d.abs() / (f_aa * f_cc).abs().max(f_ac * f_ac).max(1.0);
    Ok(HessianReport {
        d,
        f_aa,
        f_cc,
        f_ac,
        normalized_d,
    })
}

/// Per-path optimal amplitudes φ₀ = a*·exp(ic*·S_j).
pub fn optimal_amplitude_phase(a_star: f64, c_star: f64, s_values: &[f64]) -> Result<AmplitudeSet> {
    let thetas: Vec<f64> = s_values.iter().map(|s| c_star * s).collect();
    AmplitudeSet::from_phases(a_star, thetas)
}

/// Both problems solved against fixed partner distributions, with the
/// Hessian reports and the C₁/C₂ consistency data.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremumReport {
    pub problem1: ProblemSolution,
    pub problem2: ProblemSolution,
    pub hessian1: HessianReport,
    pub hessian2: HessianReport,
    /// Relative difference of the two extremal values v₁ and v₂.
    /// Reported, not asserted: the two ratio constants are weighted
    /// means of different profile sets and need not coincide.
    pub v_rel_difference: f64,
}

/// Solve Problems 1 and 2 on one ensemble with equal-component partners
/// (κ₁² = pr − (Σβ₀)², κ₂² = pr − (Σα₀)²).
///
/// The two problems live on very different phase scales — the G spread of
/// a pinned ensemble is set by the branch jumps in ṗ while the J spread
/// is set by the (similar) Lagrangian actions — so each takes its own
/// bracket.
pub fn solve_both(
    profiles: &ContractedProfiles,
    pr: f64,
    sum_alpha0: f64,
    sum_beta0: f64,
    c_bracket1: (f64, f64),
    c_bracket2: (f64, f64),
    scan_points: usize,
) -> Result<ExtremumReport> {
    let kappa1 = (pr - sum_beta0 * sum_beta0).max(0.0).sqrt();
    let kappa2 = (pr - sum_alpha0 * sum_alpha0).max(0.0).sqrt();
    let p1 = solve_problem(
        Problem::One,
        |c| {
            profiles
                .problem1(c)
                .expect("Problem 1 availability checked")
        },
        kappa1,
        c_bracket1,
        scan_points,
    )?;
    let p2 = solve_problem(
        Problem::Two,
        |c| profiles.problem2(c),
        kappa2,
        c_bracket2,
        scan_points,
    )?;
    let h1 = hessian_degeneracy(
        |c| profiles.problem1(c).expect("checked"),
        p1.amplitude,
        p1.c_star,
        p1.lambda,
        kappa1,
    )?;
    let h2 = hessian_degeneracy(
        |c| profiles.problem2(c),
        p2.amplitude,
        p2.c_star,
        p2.lambda,
        kappa2,
    )?;
    let scale = p1.v.abs().max(p2.v.abs()).max(1e-300);
    let v_rel_difference = (p1.v - p2.v).abs() / scale;
    Ok(ExtremumReport {
        problem1: p1,
        problem2: p2,
        hessian1: h1,
        hessian2: h2,
        v_rel_difference,
    })
}
