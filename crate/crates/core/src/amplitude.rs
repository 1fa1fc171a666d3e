//! Complex amplitudes from mixed-path pairs: φ_j = α_j + iβ_j, the 2-D
//! common-basis construction symmetric about the π/4 line, propagator
//! sums, and expectations with their interference decomposition.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixedpath::MixedPathPair;

/// Per-path complex amplitudes with their phase angles. `modulus` is set
/// only when all |φ_j| agree within 1e-9.
#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeSet {
    pub phis: Vec<Complex64>,
    pub thetas: Vec<f64>,
    pub modulus: Option<f64>,
}

impl AmplitudeSet {
    /// Build from a common modulus and per-path phases (the c·S_j route
    /// used for ensembles larger than the 2-D basis construction).
    pub fn from_phases(modulus: f64, thetas: Vec<f64>) -> Result<Self> {
        if !modulus.is_finite() || thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("amplitude phases"));
        }
        let phis = thetas
            .iter()
            .map(|&t| Complex64::from_polar(modulus, t))
            .collect();
        Ok(AmplitudeSet {
            phis,
            thetas,
            modulus: Some(modulus),
        })
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    /// Conjugate every amplitude: α_j fixed, β_j negated (i → −i).
    pub fn conjugate(&self) -> AmplitudeSet {
        let phis: Vec<Complex64> = self.phis.iter().map(|p| p.conj()).collect();
        let thetas = phis.iter().map(|p| phase_of(*p)).collect();
        AmplitudeSet {
            phis,
            thetas,
            modulus: self.modulus,
        }
    }

    /// CSV rows `index, re, im, theta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,re,im,theta\n");
        for (i, (p, t)) in self.phis.iter().zip(&self.thetas).enumerate() {
            out.push_str(&format!("{i},{:.17e},{:.17e},{:.17e}\n", p.re, p.im, t));
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Record {
            index: usize,
            re: f64,
            im: f64,
            theta: f64,
        }
        let records: Vec<Record> = self
            .phis
            .iter()
            .zip(&self.thetas)
            .enumerate()
            .map(|(index, (p, &theta))| Record {
                index,
                re: p.re,
                im: p.im,
                theta,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("amplitudes serialize")
    }
}

/// atan2 phase with the zero-amplitude convention θ = 0.
fn phase_of(p: Complex64) -> f64 {
    if p.re == 0.0 && p.im == 0.0 {
        0.0
    } else {
        p.im.atan2(p.re)
    }
}

/// φ_j = α_j + i β_j with θ_j = atan2(β_j, α_j).
pub fn amplitudes_from_pair(pair: &MixedPathPair) -> AmplitudeSet {
    let phis: Vec<Complex64> = pair
        .alpha
        .iter()
        .zip(&pair.beta)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    let thetas: Vec<f64> = phis.iter().map(|&p| phase_of(p)).collect();
    let modulus = uniform_modulus(&phis, 1e-9);
    AmplitudeSet {
        phis,
        thetas,
        modulus,
    }
}

fn uniform_modulus(phis: &[Complex64], tol: f64) -> Option<f64> {
    let first = phis.first()?.norm();
    if phis.iter().all(|p| (p.norm() - first).abs() <= tol) {
        Some(first)
    } else {
        None
    }
}

/// K = Σ_j φ_j.
pub fn propagator_sum(amps: &AmplitudeSet) -> Result<Complex64> {
    if amps.is_empty() {
        return Err(Error::InvalidArgument("no amplitudes to sum".into()));
    }
    Ok(amps.phis.iter().sum())
}

/// Pr = |Σφ|², identically (Σα)² + (Σβ)².
pub fn probability(pair: &MixedPathPair) -> f64 {
    let amps = amplitudes_from_pair(pair);
    amps.phis.iter().sum::<Complex64>().norm_sqr()
}

/// The 2-D basis in which α₀ and β₀ sit mirror-symmetric about the π/4
/// line, so the angle pairs from each axis satisfy θ_j + θ'_j = π/2.
#[derive(Debug, Clone, Serialize)]
pub struct CommonBasis {
    pub rotation: [[f64; 2]; 2],
    pub theta_pairs: [(f64, f64); 2],
}

/// Rotate by −(ψ_α + ψ_β − π/2)/2, where ψ are the polar angles of the
/// two vectors.
pub fn common_basis_2d(alpha0: [f64; 2], beta0: [f64; 2]) -> Result<CommonBasis> {
    let na = alpha0[0] * alpha0[0] + alpha0[1] * alpha0[1];
    let nb = beta0[0] * beta0[0] + beta0[1] * beta0[1];
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let psi_a = alpha0[1].atan2(alpha0[0]);
    let psi_b = beta0[1].atan2(beta0[0]);
    let delta = 0.5 * (psi_a + psi_b - std::f64::consts::FRAC_PI_2);
    let (s, c) = (-delta).sin_cos();
    let rotation = [[c, -s], [s, c]];
    let theta1 = psi_a - delta;
    let theta1p = psi_b - delta;
    // angles measured from the x2 axis
    let theta2 = std::f64::consts::FRAC_PI_2 - theta1;
    let theta2p = std::f64::consts::FRAC_PI_2 - theta1p;
    Ok(CommonBasis {
        rotation,
        theta_pairs: [(theta1, theta1p), (theta2, theta2p)],
    })
}

/// ⟨X⟩ = αᵀXα + βᵀXβ, with the n = 2 interference decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectationReport {
    pub value: f64,
    /// Σ_j (α_j² + β_j²) X_jj
    pub diagonal: f64,
    /// (α₁α₂ + β₂β₁)(X₂₁ + X₁₂), present for n = 2
    pub interference: Option<f64>,
    /// (X₁₂ − X₂₁)(α₁β₂ − α₂β₁), the imaginary cross term, present for n = 2
    pub imaginary_cross: Option<f64>,
}

pub fn expectation(pair: &MixedPathPair, x: &[Vec<f64>]) -> Result<ExpectationReport> {
    let n = pair.len();
    if x.len() != n || x.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch {
            vector: n,
            rows: x.len(),
            cols: x.first().map_or(0, |r| r.len()),
        });
    }
    let mut value = 0.0;
    for (j, row) in x.iter().enumerate() {
        for (k, xjk) in row.iter().enumerate() {
            value += pair.alpha[j] * xjk * pair.alpha[k] + pair.beta[j] * xjk * pair.beta[k];
        }
    }
    let diagonal: f64 = (0..n)
        .map(|j| (pair.alpha[j] * pair.alpha[j] + pair.beta[j] * pair.beta[j]) * x[j][j])
        .sum();
    let (interference, imaginary_cross) = if n == 2 {
        let inter =
            (pair.alpha[0] * pair.alpha[1] + pair.beta[1] * pair.beta[0]) * (x[1][0] + x[0][1]);
        let imag =
            (x[0][1] - x[1][0]) * (pair.alpha[0] * pair.beta[1] - pair.alpha[1] * pair.beta[0]);
        (Some(inter), Some(imag))
    } else {
        (None, None)
    };
    Ok(ExpectationReport {
        value,
        diagonal,
        interference,
        imaginary_cross,
    })
}
