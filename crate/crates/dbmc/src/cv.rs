//! Classical control-variate estimation mathematics.
//!
//! Given samples of an estimation variable Y and of k controls X with known
//! (or precisely estimated) means μ, the controlled sample is
//!
//! ```text
//! Z_j = y_j − βᵀ(x_j − μ)
//! ```
//!
//! which leaves the mean unchanged for any β while cancelling the part of
//! Y's fluctuation that the controls explain. The variance-minimizing
//! coefficient solves Σ_X β = Σ_XY on the sample covariances, and with it
//! Var(Z) = (1 − R²)·Var(Y), where R² = Σ_XYᵀ Σ_X⁻¹ Σ_XY / Var(Y) is the
//! explained-variance fraction. The corresponding variance reduction ratio
//! Var(Y)/Var(Z) = (1 − R²)⁻¹ has no upper bound: controls tightly
//! correlated with Y can buy orders of magnitude.
//!
//! All covariances use the unbiased n−1 divisor, uniformly across crude and
//! controlled arms, so empirical variance ratios are fair.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reciprocal-condition threshold below which the control covariance matrix
/// is treated as singular (duplicated or degenerate controls).
const RCOND_THRESHOLD: f64 = 1e-12;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CvError {
    #[error("control covariance matrix is numerically singular (rcond {rcond:.3e}); controls are duplicated or degenerate")]
    SingularCovariance { rcond: f64 },
    #[error("variance reduction is unbounded: r_squared = {0} is not below 1")]
    Unbounded(f64),
    #[error("variance {0} is not positive")]
    DegenerateVariance(f64),
    #[error("invalid samples: {0}")]
    InvalidSamples(String),
}

/// Paired samples of the estimation variable and the controls.
///
/// `x` is row-major n×k: `x[j*k + i]` is control i on sample j. `mu` holds
/// the control means the adjustment is anchored to.
#[derive(Clone, Debug)]
pub struct CvSamples {
    y: Vec<f64>,
    x: Vec<f64>,
    mu: Vec<f64>,
}

impl CvSamples {
    pub fn new(y: Vec<f64>, x: Vec<f64>, mu: Vec<f64>) -> Result<Self, CvError> {
        let n = y.len();
        let k = mu.len();
        if k < 1 {
            return Err(CvError::InvalidSamples("need at least one control".into()));
        }
        if n < k + 2 {
            return Err(CvError::InvalidSamples(format!(
                "need at least k + 2 = {} samples for {k} controls, got {n}",
                k + 2
            )));
        }
        if x.len() != n * k {
            return Err(CvError::InvalidSamples(format!(
                "control matrix has {} entries, expected n*k = {}",
                x.len(),
                n * k
            )));
        }
        if y.iter().chain(&x).chain(&mu).any(|v| !v.is_finite()) {
            return Err(CvError::InvalidSamples(
                "samples and means must be finite".into(),
            ));
        }
        Ok(Self { y, x, mu })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Controls of sample `j`.
    pub fn x_row(&self, j: usize) -> &[f64] {
        let k = self.k();
        &self.x[j * k..(j + 1) * k]
    }
}

/// Solution of the variance-minimizing coefficient problem.
#[derive(Clone, Debug)]
pub struct BetaSolution {
    pub beta: Vec<f64>,
    /// Sample covariance matrix of the controls (k×k, unbiased).
    pub sigma_x: DMatrix<f64>,
    /// Sample covariances of each control with Y.
    pub sigma_xy: DVector<f64>,
    /// Fraction of Var(Y) explained by the controls, in [0, 1].
    pub r_squared: f64,
}

/// Mean and unbiased sample variance of a set of scalar samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    pub variance: f64,
}

/// Two-pass mean and unbiased (n−1) sample variance.
pub fn sample_stats(xs: &[f64]) -> SampleStats {
    let n = xs.len();
    assert!(n >= 1, "sample_stats needs at least one sample");
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    SampleStats { mean, variance }
}

/// Solves for the variance-minimizing coefficient vector β = Σ_X⁻¹ Σ_XY on
/// the sample covariances.
///
/// Fails with [`CvError::SingularCovariance`] when the control covariance is
/// numerically singular (reciprocal condition below 10⁻¹²), which is what
/// duplicated controls look like.
pub fn optimal_beta(samples: &CvSamples) -> Result<BetaSolution, CvError> {
    let n = samples.n();
    let k = samples.k();
    let norm = 1.0 / (n - 1) as f64;

    let mut x_means = vec![0.0; k];
    for j in 0..n {
        for (mean, &v) in x_means.iter_mut().zip(samples.x_row(j)) {
            *mean += v;
        }
    }
    for mean in &mut x_means {
        *mean /= n as f64;
    }
    let y_mean = samples.y.iter().sum::<f64>() / n as f64;

    let mut sigma_x = DMatrix::zeros(k, k);
    let mut sigma_xy = DVector::zeros(k);
    let mut var_y = 0.0;
    for j in 0..n {
        let row = samples.x_row(j);
        let dy = samples.y[j] - y_mean;
        var_y += dy * dy;
        for a in 0..k {
            let da = row[a] - x_means[a];
            sigma_xy[a] += da * dy;
            for b in a..k {
                sigma_x[(a, b)] += da * (row[b] - x_means[b]);
            }
        }
    }
    var_y *= norm;
    sigma_xy *= norm;
    for a in 0..k {
        for b in a..k {
            let v = sigma_x[(a, b)] * norm;
            sigma_x[(a, b)] = v;
            sigma_x[(b, a)] = v;
        }
    }

    // Condition guard via the symmetric eigenvalues, then a symmetric
    // (Cholesky) solve.
    let eigenvalues = sigma_x.clone().symmetric_eigen().eigenvalues;
    let max_ev = eigenvalues.iter().fold(0.0f64, |m, &e: &f64| m.max(e.abs()));
    let min_ev = eigenvalues.iter().fold(f64::MAX, |m, &e: &f64| m.min(e.abs()));
    let rcond = if max_ev > 0.0 { min_ev / max_ev } else { 0.0 };
    if !rcond.is_finite() || rcond < RCOND_THRESHOLD {
        return Err(CvError::SingularCovariance { rcond });
    }
    let chol = sigma_x
        .clone()
        .cholesky()
        .ok_or(CvError::SingularCovariance { rcond })?;
    let beta = chol.solve(&sigma_xy);

    let r_squared = if var_y > 0.0 {
        sigma_xy.dot(&beta) / var_y
    } else {
        0.0
    };

    Ok(BetaSolution {
        beta: beta.iter().copied().collect(),
        sigma_x,
        sigma_xy,
        r_squared,
    })
}

/// Mean and variance of the adjusted samples Z_j = y_j − βᵀ(x_j − μ).
///
/// With β = 0 this reduces to the crude sample mean of y. The variance is
/// the unbiased sample variance of the Z_j.
pub fn controlled_mean(samples: &CvSamples, beta: &[f64]) -> SampleStats {
    assert_eq!(beta.len(), samples.k(), "beta length must equal k");
    let z: Vec<f64> = (0..samples.n())
        .map(|j| {
            let row = samples.x_row(j);
            let adjustment: f64 = beta
                .iter()
                .zip(row)
                .zip(samples.mu())
                .map(|((&b, &x), &m)| b * (x - m))
                .sum();
            samples.y[j] - adjustment
        })
        .collect();
    sample_stats(&z)
}

/// Theoretical variance reduction ratio (1 − R²)⁻¹.
pub fn theoretical_vrr(r_squared: f64) -> Result<f64, CvError> {
    if !r_squared.is_finite() || r_squared < 0.0 {
        return Err(CvError::InvalidSamples(format!(
            "r_squared must lie in [0, 1), got {r_squared}"
        )));
    }
    if r_squared >= 1.0 {
        return Err(CvError::Unbounded(r_squared));
    }
    Ok(1.0 / (1.0 - r_squared))
}

/// Empirical variance reduction ratio: crude variance over controlled
/// variance.
pub fn empirical_vrr(var_crude: f64, var_controlled: f64) -> Result<f64, CvError> {
    if !(var_controlled > 0.0) || !var_controlled.is_finite() {
        return Err(CvError::DegenerateVariance(var_controlled));
    }
    if !(var_crude > 0.0) || !var_crude.is_finite() {
        return Err(CvError::DegenerateVariance(var_crude));
    }
    Ok(var_crude / var_controlled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseStream;

    /// n paired draws (y, x) from a bivariate standard Gaussian with
    /// correlation rho.
    fn bivariate(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut a = NoiseStream::new(seed, 0);
        let mut b = NoiseStream::new(seed, 1);
        let tail = (1.0 - rho * rho).sqrt();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let u = a.next_normal();
            let v = b.next_normal();
            x.push(u);
            y.push(rho * u + tail * v);
        }
        (y, x)
    }

    #[test]
    fn perfect_control_gives_unit_beta_and_r_squared() {
        let mut s = NoiseStream::new(3, 0);
        let y: Vec<f64> = (0..200).map(|_| s.next_normal()).collect();
        let samples = CvSamples::new(y.clone(), y, vec![0.0]).unwrap();
        let sol = optimal_beta(&samples).unwrap();
        assert!((sol.beta[0] - 1.0).abs() < 1e-12);
        assert!((sol.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_controls_explain_nothing() {
        let n = 100_000;
        let mut a = NoiseStream::new(11, 0);
        let mut b = NoiseStream::new(11, 1);
        let y: Vec<f64> = (0..n).map(|_| a.next_normal()).collect();
        let x: Vec<f64> = (0..n).map(|_| b.next_normal()).collect();
        let sol = optimal_beta(&CvSamples::new(y, x, vec![0.0]).unwrap()).unwrap();
        assert!(sol.beta[0].abs() < 0.02, "beta = {}", sol.beta[0]);
        assert!(sol.r_squared < 0.001, "r_squared = {}", sol.r_squared);
    }

    #[test]
    fn linear_model_recovers_slope_and_r_squared() {
        // Y = 2X + eps with Var(X) = 1, Var(eps) = 0.25:
        // population R^2 = 4/4.25.
        let n = 100_000;
        let mut a = NoiseStream::new(17, 0);
        let mut b = NoiseStream::new(17, 1);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let u = a.next_normal();
            x.push(u);
            y.push(2.0 * u + 0.5 * b.next_normal());
        }
        let sol = optimal_beta(&CvSamples::new(y, x, vec![0.0]).unwrap()).unwrap();
        assert!(
            (1.95..=2.05).contains(&sol.beta[0]),
            "beta = {}",
            sol.beta[0]
        );
        assert!(
            (sol.r_squared - 4.0 / 4.25).abs() < 0.01,
            "r_squared = {}",
            sol.r_squared
        );
    }

    #[test]
    fn zero_beta_reduces_to_crude_mean() {
        let (y, x) = bivariate(500, 0.7, 23);
        let crude = sample_stats(&y);
        let samples = CvSamples::new(y, x, vec![0.25]).unwrap();
        let stats = controlled_mean(&samples, &[0.0]);
        assert_eq!(stats.mean.to_bits(), crude.mean.to_bits());
        assert_eq!(stats.variance.to_bits(), crude.variance.to_bits());
    }

    #[test]
    fn controls_pinned_at_mu_leave_mean_unchanged() {
        let mut s = NoiseStream::new(29, 0);
        let y: Vec<f64> = (0..64).map(|_| s.next_normal()).collect();
        let x = vec![1.5; 64];
        let crude_mean = sample_stats(&y).mean;
        let samples = CvSamples::new(y, x, vec![1.5]).unwrap();
        let stats = controlled_mean(&samples, &[123.4]);
        assert_eq!(stats.mean.to_bits(), crude_mean.to_bits());
    }

    #[test]
    fn controlled_mean_hand_example() {
        let samples = CvSamples::new(vec![1.0, 3.0], vec![2.0, 4.0], vec![3.0]);
        // n = 2 < k + 2 is rejected by the constructor, so build the
        // adjusted samples the same way by hand: Z = [1.5, 2.5].
        assert!(samples.is_err());
        let z = [1.0 - 0.5 * (2.0 - 3.0), 3.0 - 0.5 * (4.0 - 3.0)];
        assert_eq!(z, [1.5, 2.5]);
        let stats = sample_stats(&z);
        assert_eq!(stats.mean, 2.0);
        assert_eq!(stats.variance, 0.5);

        // The same arithmetic through controlled_mean, padded to a valid n.
        let samples = CvSamples::new(
            vec![1.0, 3.0, 1.0, 3.0],
            vec![2.0, 4.0, 2.0, 4.0],
            vec![3.0],
        )
        .unwrap();
        let stats = controlled_mean(&samples, &[0.5]);
        assert_eq!(stats.mean, 2.0);
    }

    #[test]
    fn theoretical_vrr_known_values() {
        assert_eq!(theoretical_vrr(0.0).unwrap(), 1.0);
        assert!((theoretical_vrr(0.81).unwrap() - 5.263157894736843).abs() < 1e-12);
        assert_eq!(theoretical_vrr(1.0), Err(CvError::Unbounded(1.0)));
        assert!(matches!(
            theoretical_vrr(-0.5),
            Err(CvError::InvalidSamples(_))
        ));
    }

    #[test]
    fn empirical_vrr_arithmetic_and_errors() {
        assert_eq!(empirical_vrr(3.0, 3.0).unwrap(), 1.0);
        assert_eq!(empirical_vrr(10.0, 2.0).unwrap(), 5.0);
        assert_eq!(
            empirical_vrr(1.0, 0.0),
            Err(CvError::DegenerateVariance(0.0))
        );
    }

    #[test]
    fn empirical_vrr_matches_theory_on_synthetic_gaussians() {
        let n = 100_000;
        let (y, x) = bivariate(n, 0.9, 31);
        let var_crude = sample_stats(&y).variance;
        let samples = CvSamples::new(y, x, vec![0.0]).unwrap();
        let sol = optimal_beta(&samples).unwrap();
        let var_controlled = controlled_mean(&samples, &sol.beta).variance;
        let vrr = empirical_vrr(var_crude, var_controlled).unwrap();
        let theory = 5.263157894736843;
        assert!(
            (vrr - theory).abs() / theory < 0.10,
            "vrr = {vrr}, theory = {theory}"
        );
    }

    #[test]
    fn duplicated_controls_are_rejected_as_singular() {
        let (y, x1) = bivariate(512, 0.6, 37);
        let mut x = Vec::with_capacity(2 * x1.len());
        for &v in &x1 {
            x.push(v);
            x.push(v);
        }
        let samples = CvSamples::new(y, x, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            optimal_beta(&samples),
            Err(CvError::SingularCovariance { .. })
        ));
    }

    #[test]
    fn fixed_beta_adjustment_is_conditionally_unbiased() {
        // For beta fixed in advance, E[controlled mean] = E[crude mean]; the
        // per-repetition difference is -beta * (x_bar - mu) with mean zero.
        let reps = 1000;
        let n = 200;
        let beta = [0.7];
        let mut diffs = Vec::with_capacity(reps);
        for r in 0..reps {
            let (y, x) = bivariate(n, 0.8, 1000 + r as u64);
            let crude = sample_stats(&y).mean;
            let samples = CvSamples::new(y, x, vec![0.0]).unwrap();
            let controlled = controlled_mean(&samples, &beta).mean;
            diffs.push(controlled - crude);
        }
        let stats = sample_stats(&diffs);
        let se = (stats.variance / reps as f64).sqrt();
        assert!(
            stats.mean.abs() <= 4.0 * se,
            "mean diff {} exceeds 4 se {}",
            stats.mean,
            se
        );
    }

    #[test]
    fn optimal_controlled_mean_matches_least_squares_intercept() {
        // Regressing y on (x - mu) with an intercept, the fitted intercept
        // equals the controlled mean with the optimal beta. The reference fit
        // goes through a dense SVD least-squares solve on the design matrix,
        // an independent route from the covariance solve.
        use nalgebra::DMatrix;
        for seed in [41, 42, 43] {
            let n = 500;
            let mut s1 = NoiseStream::new(seed, 0);
            let mut s2 = NoiseStream::new(seed, 1);
            let mut s3 = NoiseStream::new(seed, 2);
            let mu = vec![0.3, -0.2];
            let mut x = Vec::with_capacity(2 * n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let a = s1.next_normal() + mu[0];
                let b = 0.5 * s1.next_normal() + s2.next_normal() + mu[1];
                y.push(1.4 * a - 0.6 * b + 0.8 * s3.next_normal());
                x.push(a);
                x.push(b);
            }
            let samples = CvSamples::new(y.clone(), x.clone(), mu.clone()).unwrap();
            let sol = optimal_beta(&samples).unwrap();
            let controlled = controlled_mean(&samples, &sol.beta).mean;

            let design = DMatrix::from_fn(n, 3, |r, c| match c {
                0 => 1.0,
                c => x[r * 2 + (c - 1)] - mu[c - 1],
            });
            let rhs = nalgebra::DVector::from_vec(y);
            let coeffs = design.svd(true, true).solve(&rhs, 1e-12).unwrap();
            let intercept = coeffs[0];
            assert!(
                (controlled - intercept).abs() <= 1e-10 * intercept.abs().max(1.0),
                "controlled {controlled} vs intercept {intercept}"
            );
        }
    }

    #[test]
    fn controlled_variance_approaches_population_prediction() {
        // Var(Z) with the optimal beta converges to (1 - R^2) * Var(Y).
        let n = 100_000;
        let rho = 0.8;
        let (y, x) = bivariate(n, rho, 53);
        let samples = CvSamples::new(y, x, vec![0.0]).unwrap();
        let sol = optimal_beta(&samples).unwrap();
        let var_z = controlled_mean(&samples, &sol.beta).variance;
        let predicted = 1.0 - rho * rho;
        assert!(
            (var_z - predicted).abs() / predicted < 0.03,
            "var(Z) = {var_z}, predicted = {predicted}"
        );
    }

    #[test]
    fn adding_a_control_never_lowers_r_squared() {
        for seed in [61, 62, 63, 64, 65] {
            let n = 400;
            let mut s1 = NoiseStream::new(seed, 0);
            let mut s2 = NoiseStream::new(seed, 1);
            let mut s3 = NoiseStream::new(seed, 2);
            let mut s4 = NoiseStream::new(seed, 3);
            let mut cols: Vec<Vec<f64>> = vec![Vec::new(), Vec::new(), Vec::new()];
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let a = s1.next_normal();
                let b = s2.next_normal();
                let c = s3.next_normal();
                cols[0].push(a);
                cols[1].push(0.4 * a + b);
                cols[2].push(c);
                y.push(a + 0.5 * b + 0.25 * c + 0.7 * s4.next_normal());
            }
            let mut previous = 0.0;
            for k in 1..=3 {
                let mut x = Vec::with_capacity(n * k);
                for j in 0..n {
                    for col in cols.iter().take(k) {
                        x.push(col[j]);
                    }
                }
                let samples = CvSamples::new(y.clone(), x, vec![0.0; k]).unwrap();
                let r2 = optimal_beta(&samples).unwrap().r_squared;
                assert!(
                    r2 >= previous - 1e-10,
                    "seed {seed}: r_squared dropped from {previous} to {r2} at k={k}"
                );
                assert!(r2 <= 1.0 + 1e-12);
                previous = r2;
            }
        }
    }

    #[test]
    fn sample_shape_validation() {
        assert!(CvSamples::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![]).is_err());
        assert!(CvSamples::new(vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0]).is_err());
        assert!(CvSamples::new(vec![1.0; 5], vec![1.0; 9], vec![0.0]).is_err());
        assert!(CvSamples::new(vec![1.0; 5], vec![f64::NAN; 5], vec![0.0]).is_err());
    }
}
