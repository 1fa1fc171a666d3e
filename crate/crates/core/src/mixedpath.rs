//! Mixed paths: signed affinity vectors (α, β) over a path ensemble, the
//! normalization (Σα)² + (Σβ)² = Pr, the generalized action αᵀSβ, the
//! equal-component optimal pair, and randomized parallelism, stationarity
//! and saddle verification against an action matrix.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::ActionMatrix;
use crate::error::{Error, Result};

/// Tolerance used when certifying normalization, stationarity and saddle
/// inequalities.
pub const CERTIFICATION_TOL: f64 = 1e-9;

/// Default number of randomized probes.
pub const DEFAULT_PROBES: usize = 10_000;

/// A pair of affinity vectors with its target total probability.
/// Components may be negative; each lies in [−1, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedPathPair {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub pr: f64,
}

impl MixedPathPair {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, pr: f64) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::LengthMismatch {
                left: alpha.len(),
                right: beta.len(),
            });
        }
        if alpha.iter().chain(beta.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("affinity component"));
        }
        if alpha.iter().chain(beta.iter()).any(|x| x.abs() > 1.0) {
            return Err(Error::InvalidArgument(
                "affinity components must lie in [-1, 1]".into(),
            ));
        }
        if pr <= 0.0 || !pr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pr must be positive, got {pr}"
            )));
        }
        Ok(MixedPathPair { alpha, beta, pr })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    fn validate_lengths(&self) -> Result<()> {
        if self.alpha.len() != self.beta.len() {
            return Err(Error::LengthMismatch {
                left: self.alpha.len(),
                right: self.beta.len(),
            });
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// (Σα)² + (Σβ)² and whether it matches the target Pr within the
    /// certification tolerance.
    pub fn check_normalization(&self) -> (f64, bool) {
        let sa: f64 = self.alpha.iter().sum();
        let sb: f64 = self.beta.iter().sum();
        let value = sa * sa + sb * sb;
        (value, (value - self.pr).abs() <= CERTIFICATION_TOL)
    }
}

/// The pair with every component equal: α_j = β_j = √(pr/2)/n. The sums
/// then satisfy (Σα)² = (Σβ)² = pr/2, the equal-footing split.
pub fn equal_component_pair(n: usize, pr: f64) -> Result<MixedPathPair> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let component = (pr / 2.0).sqrt() / n as f64;
    MixedPathPair::new(vec![component; n], vec![component; n], pr)
}

/// v = αᵀ S β.
pub fn generalized_action(pair: &MixedPathPair, matrix: &ActionMatrix) -> Result<f64> {
    pair.validate_lengths()?;
    let n = matrix.n();
    if pair.len() != n {
        return Err(Error::DimensionMismatch {
            vector: pair.len(),
            rows: n,
            cols: n,
        });
    }
    let mut v = 0.0;
    for (j, row) in matrix.entries.iter().enumerate() {
        let mut row_dot = 0.0;
        for (k, s) in row.iter().enumerate() {
            row_dot += s * pair.beta[k];
        }
        v += pair.alpha[j] * row_dot;
    }
    Ok(v)
}

fn matrix_times_beta(matrix: &ActionMatrix, beta: &[f64]) -> Vec<f64> {
    matrix
        .entries
        .iter()
        .map(|row| row.iter().zip(beta).map(|(s, b)| s * b).sum())
        .collect()
}

fn alpha_times_matrix(matrix: &ActionMatrix, alpha: &[f64]) -> Vec<f64> {
    let n = matrix.n();
    let mut out = vec![0.0; n];
    for (j, row) in matrix.entries.iter().enumerate() {
        for (k, s) in row.iter().enumerate() {
            out[k] += alpha[j] * s;
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// ‖Sβ − proj_α(Sβ)‖ / ‖Sβ‖: zero iff Sβ and α are parallel or
/// anti-parallel. Returns 0 by convention when ‖Sβ‖ = 0.
pub fn parallelism_residual(pair: &MixedPathPair, matrix: &ActionMatrix) -> Result<f64> {
    pair.validate_lengths()?;
    if pair.len() != matrix.n() {
        return Err(Error::DimensionMismatch {
            vector: pair.len(),
            rows: matrix.n(),
            cols: matrix.n(),
        });
    }
    let alpha_norm2: f64 = pair.alpha.iter().map(|a| a * a).sum();
    if alpha_norm2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let s_beta = matrix_times_beta(matrix, &pair.beta);
    let sb_norm = norm(&s_beta);
    if sb_norm == 0.0 {
        return Ok(0.0);
    }
    let coef = s_beta
        .iter()
        .zip(&pair.alpha)
        .map(|(s, a)| s * a)
        .sum::<f64>()
        / alpha_norm2;
    let residual: f64 = s_beta
        .iter()
        .zip(&pair.alpha)
        .map(|(s, a)| {
            let d = s - coef * a;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(residual / sb_norm)
}

/// Outcome of a randomized stationarity probe run.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub max_derivative: f64,
    pub probes: usize,
    pub seed: u64,
}

/// Remove the mean (Σδ = 0) and the component along `dir`.
fn project_probe(raw: &mut [f64], dir: &[f64]) {
    let n = raw.len() as f64;
    let mean: f64 = raw.iter().sum::<f64>() / n;
    for x in raw.iter_mut() {
        *x -= mean;
    }
    // dir with its own mean removed, so orthogonality to both survives
    let dir_mean: f64 = dir.iter().sum::<f64>() / n;
    let dir_norm2: f64 = dir.iter().map(|d| (d - dir_mean) * (d - dir_mean)).sum();
    if dir_norm2 > 0.0 {
        let dot: f64 = raw
            .iter()
            .zip(dir)
            .map(|(x, d)| x * (d - dir_mean))
            .sum::<f64>();
        let coef = dot / dir_norm2;
        for (x, d) in raw.iter_mut().zip(dir) {
            *x -= coef * (d - dir_mean);
        }
    }
}

/// Max |δαᵀSβ + αᵀSδβ| / (‖δα‖ + ‖δβ‖) over seeded random perturbations
/// with δα ⊥ α, δβ ⊥ β and Σδα = Σδβ = 0 (the first-order normalization
/// constraint). Near zero certifies stationarity along the probed
/// directions.
pub fn stationarity_check(
    pair: &MixedPathPair,
    matrix: &ActionMatrix,
    n_probes: usize,
    seed: u64,
) -> Result<StationarityReport> {
    pair.validate_lengths()?;
    if pair.len() != matrix.n() {
        return Err(Error::DimensionMismatch {
            vector: pair.len(),
            rows: matrix.n(),
            cols: matrix.n(),
        });
    }
    let s_beta = matrix_times_beta(matrix, &pair.beta);
    let alpha_s = alpha_times_matrix(matrix, &pair.alpha);
    let n = pair.len();

    let max_derivative = (0..n_probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut da: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut db: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            project_probe(&mut da, &pair.alpha);
            project_probe(&mut db, &pair.beta);
            let denom = norm(&da) + norm(&db);
            if denom < 1e-300 {
                return 0.0;
            }
            let d1: f64 = da.iter().zip(&s_beta).map(|(x, s)| x * s).sum();
            let d2: f64 = alpha_s.iter().zip(&db).map(|(s, x)| s * x).sum();
            (d1 + d2).abs() / denom
        })
        .reduce(|| 0.0, f64::max);

    Ok(StationarityReport {
        max_derivative,
        probes: n_probes,
        seed,
    })
}

/// Saddle verification over the sign-restricted probe domain.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleReport {
    pub v: f64,
    pub min_over_beta: f64,
    pub max_over_alpha: f64,
    pub violations: usize,
    pub probes: usize,
    pub seed: u64,
    pub holds_minimax: bool,
    pub holds_maximin: bool,
    pub violations_minimax: usize,
    pub violations_maximin: usize,
}

/// Sample feasible β (respectively α) probes whose components all share
/// one sign, rescaled so the pair normalization is preserved, and report
/// min_β P(α₀, β), max_α P(α, β₀) and v. The saddle certificate is
/// reported in both orientations (mini-max and maxi-min).
pub fn saddle_check(
    pair: &MixedPathPair,
    matrix: &ActionMatrix,
    n_probes: usize,
    seed: u64,
) -> Result<SaddleReport> {
    pair.validate_lengths()?;
    if pair.len() != matrix.n() {
        return Err(Error::DimensionMismatch {
            vector: pair.len(),
            rows: matrix.n(),
            cols: matrix.n(),
        });
    }
    let n = pair.len();
    let v = generalized_action(pair, matrix)?;
    let s_beta_of = |beta: &[f64]| -> f64 {
        // P(alpha0, beta)
        matrix
            .entries
            .iter()
            .zip(&pair.alpha)
            .map(|(row, a)| a * row.iter().zip(beta).map(|(s, b)| s * b).sum::<f64>())
            .sum()
    };
    let s_alpha_of = |alpha: &[f64]| -> f64 {
        // P(alpha, beta0)
        matrix
            .entries
            .iter()
            .zip(alpha)
            .map(|(row, a)| a * row.iter().zip(&pair.beta).map(|(s, b)| s * b).sum::<f64>())
            .sum()
    };

    let sum_alpha: f64 = pair.alpha.iter().sum();
    let sum_beta: f64 = pair.beta.iter().sum();
    // feasible probe sums: (Σα0)² + (Σβ)² = pr fixes |Σβ|, and vice versa
    let kappa_beta = (pair.pr - sum_alpha * sum_alpha).max(0.0).sqrt();
    let kappa_alpha = (pair.pr - sum_beta * sum_beta).max(0.0).sqrt();
    let sign_beta = if sum_beta < 0.0 { -1.0 } else { 1.0 };
    let sign_alpha = if sum_alpha < 0.0 { -1.0 } else { 1.0 };

    let draw_probe = |rng: &mut ChaCha8Rng, target_sum: f64| -> Vec<f64> {
        let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-6..1.0)).collect();
        let total: f64 = u.iter().sum();
        let scale = target_sum / total;
        for x in u.iter_mut() {
            *x *= scale;
        }
        u
    };

    let evals: Vec<(f64, f64)> = (0..n_probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let beta_probe = draw_probe(&mut rng, sign_beta * kappa_beta);
            let alpha_probe = draw_probe(&mut rng, sign_alpha * kappa_alpha);
            (s_beta_of(&beta_probe), s_alpha_of(&alpha_probe))
        })
        .collect();

    let mut min_over_beta = f64::INFINITY;
    let mut max_over_alpha = f64::NEG_INFINITY;
    let mut violations_minimax = 0usize;
    let mut violations_maximin = 0usize;
    let tol = CERTIFICATION_TOL * v.abs().max(1.0);
    for &(pb, pa) in &evals {
        min_over_beta = min_over_beta.min(pb);
        max_over_alpha = max_over_alpha.max(pa);
        if pb < v - tol || pa > v + tol {
            violations_minimax += 1;
        }
        if pb > v + tol || pa < v - tol {
            violations_maximin += 1;
        }
    }
    let holds_minimax = violations_minimax == 0;
    let holds_maximin = violations_maximin == 0;
    Ok(SaddleReport {
        v,
        min_over_beta,
        max_over_alpha,
        violations: violations_minimax.min(violations_maximin),
        probes: n_probes,
        seed,
        holds_minimax,
        holds_maximin,
        violations_minimax,
        violations_maximin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(entries: Vec<Vec<f64>>) -> ActionMatrix {
        ActionMatrix::from_entries(entries).unwrap()
    }

    #[test]
    fn equal_component_values() {
        let p1 = equal_component_pair(1, 1.0).unwrap();
        assert!((p1.alpha[0] - 1.0 / 2.0_f64.sqrt()).abs() < 1e-15);
        let p2 = equal_component_pair(2, 1.0).unwrap();
        assert!((p2.alpha[0] - 1.0 / (2.0 * 2.0_f64.sqrt())).abs() < 1e-15);
        let p4 = equal_component_pair(4, 0.5).unwrap();
        assert!((p4.alpha[0] - 0.125).abs() < 1e-15);
        for p in [&p1, &p2, &p4] {
            let (_, ok) = p.check_normalization();
            assert!(ok);
        }
    }

    #[test]
    fn normalization_examples() {
        let pair = equal_component_pair(2, 1.0).unwrap();
        let (value, ok) = pair.check_normalization();
        assert!((value - 1.0).abs() < 1e-12 && ok);

        let zero = MixedPathPair::new(vec![0.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        let (value, ok) = zero.check_normalization();
        assert_eq!(value, 0.0);
        assert!(!ok);

        // negative component admitted: sum(alpha) = 1/sqrt(2)
        let r = 1.0 / 2.0_f64.sqrt();
        let pair = MixedPathPair::new(vec![0.9, -0.9 + r], vec![r, 0.0], 1.0).unwrap();
        let (value, ok) = pair.check_normalization();
        assert!((value - 1.0).abs() < 1e-12 && ok, "value = {value}");
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(MixedPathPair::new(vec![0.1], vec![0.1, 0.2], 1.0).is_err());
        assert!(MixedPathPair::new(vec![1.5], vec![0.0], 1.0).is_err());
        assert!(MixedPathPair::new(vec![0.1], vec![0.1], 0.0).is_err());
        assert!(MixedPathPair::new(vec![f64::NAN], vec![0.1], 1.0).is_err());
    }

    #[test]
    fn generalized_action_contraction() {
        let m = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let pair = equal_component_pair(2, 1.0).unwrap();
        let v = generalized_action(&pair, &m).unwrap();
        assert!((v - 1.25).abs() < 1e-15);

        let zero = matrix(vec![vec![0.0; 2]; 2]);
        assert_eq!(generalized_action(&pair, &zero).unwrap(), 0.0);
    }

    #[test]
    fn two_path_identity_v_over_a1b1() {
        // s = v / (alpha1 beta1) with s the sum of all entries.
        let m = matrix(vec![vec![0.3, -1.2], vec![2.0, 0.7]]);
        let pair = equal_component_pair(2, 1.0).unwrap();
        let v = generalized_action(&pair, &m).unwrap();
        let s = v / (pair.alpha[0] * pair.beta[0]);
        assert!((s - m.total()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_for_equal_pair() {
        let m = matrix(vec![
            vec![0.5, -0.3, 0.1],
            vec![0.2, 0.9, -0.4],
            vec![1.1, 0.0, 0.6],
        ]);
        for pr in [1.0, 0.5, 2.0] {
            let pair = equal_component_pair(3, pr).unwrap();
            let v = generalized_action(&pair, &m).unwrap();
            let closed = (pr / 2.0) * m.total() / 9.0;
            assert!((v - closed).abs() < 1e-14, "v={v} closed={closed}");
        }
    }

    #[test]
    fn dimension_mismatch_reported() {
        let m = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let pair = equal_component_pair(3, 1.0).unwrap();
        assert!(matches!(
            generalized_action(&pair, &m),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn parallelism_identity_and_row_sum_cases() {
        let pair = equal_component_pair(2, 1.0).unwrap();
        let id = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(parallelism_residual(&pair, &id).unwrap() < 1e-15);

        // equal row sums: S beta0 is proportional to the ones vector
        let rs = matrix(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(parallelism_residual(&pair, &rs).unwrap() < 1e-15);

        let generic = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let r = parallelism_residual(&pair, &generic).unwrap();
        assert!(r > 1e-3, "generic residual should be visible, got {r}");
    }

    #[test]
    fn zero_alpha_is_an_error() {
        let m = matrix(vec![vec![1.0]]);
        let pair = MixedPathPair::new(vec![0.0], vec![0.5], 1.0).unwrap();
        assert!(matches!(
            parallelism_residual(&pair, &m),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn stationarity_certified_for_balanced_matrices() {
        // equal row and column sums
        let m = matrix(vec![
            vec![1.0, 2.0, 3.0],
            vec![3.0, 1.0, 2.0],
            vec![2.0, 3.0, 1.0],
        ]);
        let pair = equal_component_pair(3, 1.0).unwrap();
        let rep = stationarity_check(&pair, &m, 1000, 7).unwrap();
        assert!(rep.max_derivative <= 1e-9, "max {}", rep.max_derivative);

        let id = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let pair2 = equal_component_pair(2, 1.0).unwrap();
        let rep2 = stationarity_check(&pair2, &id, 1000, 7).unwrap();
        assert!(rep2.max_derivative <= 1e-9);
    }

    #[test]
    fn stationarity_reports_nonzero_for_generic_matrix() {
        let m = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let pair = equal_component_pair(2, 1.0).unwrap();
        let rep = stationarity_check(&pair, &m, 1000, 11).unwrap();
        assert!(rep.max_derivative > 1e-3, "max {}", rep.max_derivative);
    }

    #[test]
    fn stationarity_is_seed_deterministic() {
        let m = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let pair = equal_component_pair(2, 1.0).unwrap();
        let a = stationarity_check(&pair, &m, 500, 42).unwrap();
        let b = stationarity_check(&pair, &m, 500, 42).unwrap();
        assert_eq!(a.max_derivative.to_bits(), b.max_derivative.to_bits());
    }

    #[test]
    fn saddle_holds_for_single_path() {
        let m = matrix(vec![vec![0.37]]);
        let pair = equal_component_pair(1, 1.0).unwrap();
        let rep = saddle_check(&pair, &m, 100, 3).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.holds_minimax && rep.holds_maximin);
    }

    #[test]
    fn saddle_certified_for_balanced_matrix() {
        let m = matrix(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        let pair = equal_component_pair(2, 1.0).unwrap();
        let rep = saddle_check(&pair, &m, 10_000, 5).unwrap();
        assert_eq!(rep.violations, 0, "report {rep:?}");
        assert!((rep.min_over_beta - rep.v).abs() <= 1e-9);
        assert!((rep.max_over_alpha - rep.v).abs() <= 1e-9);
    }

    #[test]
    fn saddle_reports_data_for_generic_matrix() {
        let m = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let pair = equal_component_pair(2, 1.0).unwrap();
        let rep = saddle_check(&pair, &m, 1000, 5).unwrap();
        // emitted as data, not asserted: just check the report is coherent
        assert!(rep.min_over_beta <= rep.v + 1e-12);
        assert!(rep.max_over_alpha >= rep.v - 1e-12);
        assert!(rep.probes == 1000 && rep.seed == 5);
    }

    #[test]
    fn bilinearity_and_scaling() {
        let m = matrix(vec![vec![0.4, -0.9], vec![1.3, 0.2]]);
        let a = MixedPathPair::new(vec![0.2, -0.3], vec![0.5, 0.1], 1.0).unwrap();
        let b = MixedPathPair::new(vec![-0.1, 0.4], vec![0.5, 0.1], 1.0).unwrap();
        let sum = MixedPathPair::new(vec![0.1, 0.1], vec![0.5, 0.1], 1.0).unwrap();
        let va = generalized_action(&a, &m).unwrap();
        let vb = generalized_action(&b, &m).unwrap();
        let vsum = generalized_action(&sum, &m).unwrap();
        assert!((va + vb - vsum).abs() < 1e-12);

        let half = MixedPathPair::new(vec![0.1, -0.15], vec![0.5, 0.1], 1.0).unwrap();
        let vhalf = generalized_action(&half, &m).unwrap();
        assert!((0.5 * va - vhalf).abs() < 1e-12);
    }
}
