//! Estimation stage: crude Monte Carlo and the two controlled schemes.
//!
//! Scheme I1 resamples stored inputs: it draws path indices uniformly with
//! replacement from the database, re-simulates each path at the target θ by
//! replaying its stored stream address, and reads the control values from
//! the database. Scheme I2 draws entirely fresh inputs and simulates the
//! controls alongside the target, reusing only the stored control means.
//! Both adjust each sample by β on the control's deviation from the stored
//! mean; the crude baseline skips the adjustment.
//!
//! β is estimated from the same samples used in the controlled estimator
//! (no pilot run); the `*_with_beta` variants pin it instead, which is what
//! unbiasedness checks and the β = 0 reduction identities use.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cv::{controlled_mean, optimal_beta, sample_stats, CvError, CvSamples};
use crate::database::{resample_indices, Database, DbError};
use crate::noise::NoiseStream;
use crate::tdgl::{simulate_path, ConfigError, ModelBase, Observable, SimulationError};

/// How far outside the nominal range θ may sit before estimation warns that
/// the controls are unlikely to help.
const LOCALITY_MARGIN: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Cv(#[from] CvError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("invalid estimation request: {0}")]
    Invalid(String),
}

/// Which estimation scheme produced an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Plain sample mean, no controls.
    Crude,
    /// Resampled stored inputs, stored control values.
    I1,
    /// Fresh inputs, stored control means only.
    I2,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Crude => "crude",
            Scheme::I1 => "i1",
            Scheme::I2 => "i2",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "crude" => Ok(Scheme::Crude),
            "i1" => Ok(Scheme::I1),
            "i2" => Ok(Scheme::I2),
            other => Err(format!("unknown scheme {other:?}, expected crude|i1|i2")),
        }
    }
}

/// A point estimate with its sampling diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlledEstimate {
    pub estimate: f64,
    /// Control coefficients used; empty for the crude scheme.
    pub beta: Vec<f64>,
    /// Unbiased sample variance of the (adjusted) samples.
    pub sample_variance: f64,
    /// sqrt(sample_variance / n).
    pub std_error: f64,
    pub n: usize,
    pub scheme: Scheme,
    pub theta: f64,
    /// Explained-variance fraction of the β solve; absent for the crude
    /// scheme and for externally pinned β.
    pub r_squared: Option<f64>,
}

/// True when θ lies within the nominal range widened by the locality margin.
pub fn is_within_locality(theta: f64, nominals: &[f64]) -> bool {
    match (
        nominals.iter().cloned().reduce(f64::min),
        nominals.iter().cloned().reduce(f64::max),
    ) {
        (Some(lo), Some(hi)) => (lo - LOCALITY_MARGIN..=hi + LOCALITY_MARGIN).contains(&theta),
        _ => false,
    }
}

fn warn_if_remote(theta: f64, nominals: &[f64]) {
    if !is_within_locality(theta, nominals) {
        log::warn!(
            "theta {theta} is far from the nominals {nominals:?}; controls are unlikely to \
             reduce variance"
        );
    }
}

/// Simulates `n` fresh paths at θ with streams `(seed, 0..n)` and returns the
/// observable values in path order.
fn fresh_observables(
    model: &ModelBase,
    observable: Observable,
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, EstimateError> {
    let cfg = model.at_theta(theta);
    cfg.validate()?;
    let results: Vec<Result<f64, SimulationError>> = (0..n as u64)
        .into_par_iter()
        .map(|j| {
            simulate_path(&cfg, &mut NoiseStream::new(seed, j))
                .map(|record| observable.extract(&record))
        })
        .collect();
    Ok(results.into_iter().collect::<Result<Vec<f64>, _>>()?)
}

/// Crude Monte Carlo baseline: the plain sample mean over `n` fresh paths.
pub fn estimate_crude(
    model: &ModelBase,
    observable: Observable,
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<ControlledEstimate, EstimateError> {
    if n < 2 {
        return Err(EstimateError::Invalid(format!(
            "crude estimation needs n >= 2, got {n}"
        )));
    }
    let ys = fresh_observables(model, observable, theta, n, seed)?;
    let stats = sample_stats(&ys);
    Ok(ControlledEstimate {
        estimate: stats.mean,
        beta: Vec::new(),
        sample_variance: stats.variance,
        std_error: (stats.variance / n as f64).sqrt(),
        n,
        scheme: Scheme::Crude,
        theta,
        r_squared: None,
    })
}

fn assemble(
    y: Vec<f64>,
    x: Vec<f64>,
    mu: Vec<f64>,
    pinned_beta: Option<&[f64]>,
    scheme: Scheme,
    theta: f64,
) -> Result<ControlledEstimate, EstimateError> {
    let n = y.len();
    let samples = CvSamples::new(y, x, mu)?;
    let (beta, r_squared) = match pinned_beta {
        Some(b) => {
            if b.len() != samples.k() {
                return Err(EstimateError::Invalid(format!(
                    "pinned beta has {} entries, expected {}",
                    b.len(),
                    samples.k()
                )));
            }
            (b.to_vec(), None)
        }
        None => {
            let solution = optimal_beta(&samples)?;
            let r2 = solution.r_squared;
            (solution.beta, Some(r2))
        }
    };
    let stats = controlled_mean(&samples, &beta);
    Ok(ControlledEstimate {
        estimate: stats.mean,
        beta,
        sample_variance: stats.variance,
        std_error: (stats.variance / n as f64).sqrt(),
        n,
        scheme,
        theta,
        r_squared,
    })
}

fn i1_core(
    db: &Database,
    theta: f64,
    n: usize,
    resample_seed: u64,
    pinned_beta: Option<&[f64]>,
) -> Result<ControlledEstimate, EstimateError> {
    db.validate()?;
    warn_if_remote(theta, db.nominals());
    let indices = resample_indices(db, n, resample_seed);

    let cfg = db.model().at_theta(theta);
    cfg.validate()?;
    let results: Vec<Result<f64, SimulationError>> = indices
        .par_iter()
        .map(|&idx| {
            simulate_path(&cfg, &mut NoiseStream::new(db.master_seed(), idx as u64))
                .map(|record| db.observable().extract(&record))
        })
        .collect();
    let y = results.into_iter().collect::<Result<Vec<f64>, _>>()?;

    let k = db.k();
    let mut x = Vec::with_capacity(n * k);
    for &idx in &indices {
        x.extend_from_slice(db.controls_row(idx));
    }
    assemble(y, x, db.means().to_vec(), pinned_beta, Scheme::I1, theta)
}

/// Scheme I1: resample stored inputs, reuse stored control values.
///
/// Draws `n` indices uniformly with replacement (duplicates contribute
/// repeatedly), re-simulates each selected path at θ by replaying its stream
/// address — the identical random input used at build time — and adjusts by
/// the optimal β against the stored means.
pub fn estimate_cv_i1(
    db: &Database,
    theta: f64,
    n: usize,
    resample_seed: u64,
) -> Result<ControlledEstimate, EstimateError> {
    i1_core(db, theta, n, resample_seed, None)
}

/// Scheme I1 with an externally pinned β (β = 0 recovers the crude mean of
/// the re-simulated samples).
pub fn estimate_cv_i1_with_beta(
    db: &Database,
    theta: f64,
    n: usize,
    resample_seed: u64,
    beta: &[f64],
) -> Result<ControlledEstimate, EstimateError> {
    i1_core(db, theta, n, resample_seed, Some(beta))
}

fn i2_core(
    model: &ModelBase,
    observable: Observable,
    theta: f64,
    nominals: &[f64],
    means: &[f64],
    n: usize,
    seed: u64,
    pinned_beta: Option<&[f64]>,
) -> Result<ControlledEstimate, EstimateError> {
    if nominals.is_empty() || nominals.len() != means.len() {
        return Err(EstimateError::Invalid(format!(
            "got {} nominals and {} means; need equal, nonempty lists",
            nominals.len(),
            means.len()
        )));
    }
    warn_if_remote(theta, nominals);
    let k = nominals.len();
    let mut configs = vec![model.at_theta(theta)];
    configs.extend(nominals.iter().map(|&t| model.at_theta(t)));
    for cfg in &configs {
        cfg.validate()?;
    }

    // One fresh stream address per sample; every path of the sample (the
    // target and each control) replays the same address, so all k+1 share
    // the identical random input.
    let results: Vec<Result<Vec<f64>, SimulationError>> = (0..n as u64)
        .into_par_iter()
        .map(|j| {
            configs
                .iter()
                .map(|cfg| {
                    simulate_path(cfg, &mut NoiseStream::new(seed, j))
                        .map(|record| observable.extract(&record))
                })
                .collect()
        })
        .collect();

    let mut y = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * k);
    for row in results {
        let row = row?;
        y.push(row[0]);
        x.extend_from_slice(&row[1..]);
    }
    assemble(y, x, means.to_vec(), pinned_beta, Scheme::I2, theta)
}

/// Scheme I2: fresh inputs, stored control means only.
///
/// For each of `n` fresh stream addresses, simulates the target θ and every
/// nominal on the same random input, then adjusts by the optimal β against
/// the stored means. Costs (k+1)× a crude estimate of equal n.
pub fn estimate_cv_i2(
    model: &ModelBase,
    observable: Observable,
    theta: f64,
    nominals: &[f64],
    means: &[f64],
    n: usize,
    seed: u64,
) -> Result<ControlledEstimate, EstimateError> {
    i2_core(model, observable, theta, nominals, means, n, seed, None)
}

/// Scheme I2 with an externally pinned β.
#[allow(clippy::too_many_arguments)]
pub fn estimate_cv_i2_with_beta(
    model: &ModelBase,
    observable: Observable,
    theta: f64,
    nominals: &[f64],
    means: &[f64],
    n: usize,
    seed: u64,
    beta: &[f64],
) -> Result<ControlledEstimate, EstimateError> {
    i2_core(
        model,
        observable,
        theta,
        nominals,
        means,
        n,
        seed,
        Some(beta),
    )
}

/// Scheme I2 driven by a loaded database's settings and stored means.
pub fn estimate_cv_i2_from_db(
    db: &Database,
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<ControlledEstimate, EstimateError> {
    estimate_cv_i2(
        db.model(),
        db.observable(),
        theta,
        db.nominals(),
        db.means(),
        n,
        seed,
    )
}
