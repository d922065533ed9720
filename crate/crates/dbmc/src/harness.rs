//! Variance-ratio experiments: micro-macro variance estimation, VRR sweeps
//! over a θ grid, and closed-form Gaussian validation.
//!
//! An estimator's variance is measured micro-macro style: `n_macro`
//! independent replications of the estimator, each built from `n_micro`
//! samples, yield per-replication sample variances whose average is the
//! variance estimate. A sweep runs, for every grid θ, a crude baseline arm
//! plus one arm per configured estimator at identical budgets, and reports
//! the crude/controlled variance ratio (VRR) per cell together with its
//! spread across replications.
//!
//! Reports serialize to a fixed-schema CSV and to a gnuplot-ready
//! whitespace table for log-scale VRR-vs-θ plots.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cv::{controlled_mean, optimal_beta, sample_stats, CvSamples, SampleStats};
use crate::database::{build_database, Database, DbError};
use crate::estimator::{
    estimate_crude, estimate_cv_i1, estimate_cv_i2_from_db, ControlledEstimate, EstimateError,
    Scheme,
};
use crate::noise::{derive_seed, NoiseStream};
use crate::tdgl::{Boundary, InitialCondition, ModelBase, Observable};

// Arm tags keep every seed derivation in its own namespace.
const ARM_BASELINE: u64 = 0xB0;
const ARM_ESTIMATOR: u64 = 0xE5;
const ARM_DB_REBUILD: u64 = 0xDB;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("macro replication {index} failed: {source}")]
    MacroFailed {
        index: usize,
        source: EstimateError,
    },
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("invalid sweep configuration: {0}")]
    Invalid(String),
    #[error("report parse error: {0}")]
    Parse(String),
}

/// One estimator arm of a sweep: a label and the database columns it uses as
/// controls. An empty control set is an independent crude arm.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub label: String,
    pub control_indices: Vec<usize>,
}

impl EstimatorSpec {
    pub fn crude() -> Self {
        Self {
            label: "crude".into(),
            control_indices: Vec::new(),
        }
    }
}

/// The default estimator set for a database with nominals θ₁..θ_k: a crude
/// arm, one single-control arm per nominal, and (for k ≥ 2) the all-controls
/// arm.
pub fn default_estimators(nominals: &[f64]) -> Vec<EstimatorSpec> {
    let mut specs = vec![EstimatorSpec::crude()];
    for (i, nominal) in nominals.iter().enumerate() {
        specs.push(EstimatorSpec {
            label: format!("cv{nominal}"),
            control_indices: vec![i],
        });
    }
    if nominals.len() >= 2 {
        specs.push(EstimatorSpec {
            label: format!("cv{}c", nominals.len()),
            control_indices: (0..nominals.len()).collect(),
        });
    }
    specs
}

/// Full specification of a VRR sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub theta_grid: Vec<f64>,
    pub estimators: Vec<EstimatorSpec>,
    /// Samples per estimate.
    pub n_micro: usize,
    /// Independent replications per arm.
    pub n_macro: usize,
    /// Base seed; every arm/replication seed is derived from it.
    pub seed: u64,
    /// Scheme used by control-variate arms (I1 or I2).
    pub scheme: Scheme,
    /// Rebuild an independent database (fresh master seed) for every macro
    /// replication instead of sharing the loaded one.
    pub rebuild_db_per_macro: bool,
}

impl SweepConfig {
    fn validate(&self, db: &Database) -> Result<(), HarnessError> {
        if self.theta_grid.is_empty() {
            return Err(HarnessError::Invalid("theta grid is empty".into()));
        }
        if self.estimators.is_empty() {
            return Err(HarnessError::Invalid("no estimators configured".into()));
        }
        if self.n_macro < 2 {
            return Err(HarnessError::Invalid(format!(
                "n_macro must be at least 2, got {}",
                self.n_macro
            )));
        }
        let max_k = self
            .estimators
            .iter()
            .map(|e| e.control_indices.len())
            .max()
            .unwrap_or(0);
        if self.n_micro < max_k + 2 {
            return Err(HarnessError::Invalid(format!(
                "n_micro {} too small for {max_k} controls",
                self.n_micro
            )));
        }
        if self.scheme == Scheme::Crude {
            return Err(HarnessError::Invalid(
                "sweep scheme must be i1 or i2; the crude baseline is built in".into(),
            ));
        }
        for spec in &self.estimators {
            if let Some(&max) = spec.control_indices.iter().max() {
                if max >= db.k() {
                    return Err(HarnessError::Invalid(format!(
                        "estimator {:?} references control {max}, but the database has k = {}",
                        spec.label,
                        db.k()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Micro-macro variance statistics of one estimation arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroMicroStats {
    /// Mean of the per-replication estimates.
    pub grand_mean: f64,
    /// Average of the per-replication sample variances — the arm's variance
    /// estimate.
    pub avg_variance: f64,
    /// Variance across replications of the per-replication means.
    pub var_of_means: f64,
    /// Variance across replications of the per-replication variances.
    pub var_of_variances: f64,
    /// Per-replication (mean, variance) pairs, in replication order.
    pub per_macro: Vec<SampleStats>,
}

/// Runs `n_macro` independent replications of an estimator and aggregates
/// their variances.
///
/// `run` receives the replication index and must return an estimate built
/// from exactly `n_micro` samples (enforced, so variance ratios computed
/// from these stats always compare equal budgets).
pub fn macro_micro_variance<F>(
    run: F,
    n_macro: usize,
    n_micro: usize,
) -> Result<MacroMicroStats, HarnessError>
where
    F: Fn(usize) -> Result<ControlledEstimate, EstimateError>,
{
    if n_macro < 2 {
        return Err(HarnessError::Invalid(format!(
            "n_macro must be at least 2, got {n_macro}"
        )));
    }
    let mut per_macro = Vec::with_capacity(n_macro);
    for index in 0..n_macro {
        let estimate = run(index).map_err(|source| HarnessError::MacroFailed { index, source })?;
        if estimate.n != n_micro {
            return Err(HarnessError::Invalid(format!(
                "replication {index} used {} samples, expected n_micro = {n_micro}",
                estimate.n
            )));
        }
        per_macro.push(SampleStats {
            mean: estimate.estimate,
            variance: estimate.sample_variance,
        });
    }
    let means: Vec<f64> = per_macro.iter().map(|s| s.mean).collect();
    let variances: Vec<f64> = per_macro.iter().map(|s| s.variance).collect();
    let mean_stats = sample_stats(&means);
    let var_stats = sample_stats(&variances);
    Ok(MacroMicroStats {
        grand_mean: mean_stats.mean,
        avg_variance: var_stats.mean,
        var_of_means: mean_stats.variance,
        var_of_variances: var_stats.variance,
        per_macro,
    })
}

/// One (estimator, θ) cell of a sweep report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VrrRow {
    pub estimator: String,
    pub theta: f64,
    /// Crude variance over controlled variance (averages over replications).
    pub vrr: f64,
    /// Standard error of the per-replication VRRs.
    pub vrr_stderr: f64,
    /// Grand mean of the arm's estimates.
    pub mean: f64,
    pub crude_var: f64,
    pub cv_var: f64,
    pub n_micro: usize,
    pub n_macro: usize,
    /// Failure note for cells that errored; such cells carry NaN statistics.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VrrReport {
    pub rows: Vec<VrrRow>,
}

const CSV_HEADER: &str = "estimator,theta,vrr,vrr_stderr,mean,crude_var,cv_var,n_micro,n_macro";

impl VrrReport {
    /// Writes the fixed-schema CSV (one row per cell; failed cells carry
    /// NaN statistics).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.estimator,
                row.theta,
                row.vrr,
                row.vrr_stderr,
                row.mean,
                row.crude_var,
                row.cv_var,
                row.n_micro,
                row.n_macro
            )?;
        }
        Ok(())
    }

    /// Parses a CSV produced by [`write_csv`](Self::write_csv). Error notes
    /// are not stored in the CSV, so reloaded rows carry `error: None`.
    pub fn parse_csv<R: BufRead>(input: R) -> Result<Self, HarnessError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| HarnessError::Parse("empty file".into()))??;
        if header.trim() != CSV_HEADER {
            return Err(HarnessError::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(HarnessError::Parse(format!(
                    "line {}: expected 9 fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse_f64 = |s: &str, what: &str| {
                s.parse::<f64>()
                    .map_err(|e| HarnessError::Parse(format!("line {}: {what}: {e}", lineno + 2)))
            };
            let parse_usize = |s: &str, what: &str| {
                s.parse::<usize>()
                    .map_err(|e| HarnessError::Parse(format!("line {}: {what}: {e}", lineno + 2)))
            };
            rows.push(VrrRow {
                estimator: fields[0].to_string(),
                theta: parse_f64(fields[1], "theta")?,
                vrr: parse_f64(fields[2], "vrr")?,
                vrr_stderr: parse_f64(fields[3], "vrr_stderr")?,
                mean: parse_f64(fields[4], "mean")?,
                crude_var: parse_f64(fields[5], "crude_var")?,
                cv_var: parse_f64(fields[6], "cv_var")?,
                n_micro: parse_usize(fields[7], "n_micro")?,
                n_macro: parse_usize(fields[8], "n_macro")?,
                error: None,
            });
        }
        Ok(VrrReport { rows })
    }

    /// Writes a gnuplot-ready whitespace table: one line per θ, one VRR
    /// column per estimator, suitable for log-scale VRR-vs-θ plots.
    pub fn write_plot_table<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut estimators: Vec<&str> = Vec::new();
        let mut thetas: Vec<f64> = Vec::new();
        for row in &self.rows {
            if !estimators.contains(&row.estimator.as_str()) {
                estimators.push(&row.estimator);
            }
            if !thetas.iter().any(|&t| t == row.theta) {
                thetas.push(row.theta);
            }
        }
        write!(out, "# theta")?;
        for label in &estimators {
            write!(out, " {label}")?;
        }
        writeln!(out)?;
        for &theta in &thetas {
            write!(out, "{theta}")?;
            for label in &estimators {
                let vrr = self
                    .rows
                    .iter()
                    .find(|r| r.theta == theta && r.estimator == *label)
                    .map_or(f64::NAN, |r| r.vrr);
                write!(out, " {vrr}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

impl std::fmt::Display for VrrReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<12} {:>8} {:>12} {:>12} {:>14} {:>8}",
            "estimator", "theta", "vrr", "vrr_stderr", "mean", "n"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<12} {:>8} {:>12.4} {:>12.4} {:>14.6e} {:>8}",
                row.estimator,
                row.theta,
                row.vrr,
                row.vrr_stderr,
                row.mean,
                row.n_micro * row.n_macro,
            )?;
        }
        Ok(())
    }
}

fn error_row(
    spec: &EstimatorSpec,
    theta: f64,
    cfg: &SweepConfig,
    crude_var: f64,
    message: String,
) -> VrrRow {
    VrrRow {
        estimator: spec.label.clone(),
        theta,
        vrr: f64::NAN,
        vrr_stderr: f64::NAN,
        mean: f64::NAN,
        crude_var,
        cv_var: f64::NAN,
        n_micro: cfg.n_micro,
        n_macro: cfg.n_macro,
        error: Some(message),
    }
}

/// Runs the full sweep: for every grid θ, a fresh-path crude baseline plus
/// every configured estimator arm at identical (n_micro, n_macro) budgets.
///
/// Every seed is derived from `cfg.seed`, so identical configurations yield
/// identical reports. A failing cell becomes an error row, not a crash.
pub fn vrr_sweep(cfg: &SweepConfig, db: &Database) -> Result<VrrReport, HarnessError> {
    db.validate()?;
    cfg.validate(db)?;

    // Optional per-replication databases (same parameters, derived master
    // seeds); the default shares the loaded database across replications.
    let rebuilt: Vec<Database> = if cfg.rebuild_db_per_macro {
        (0..cfg.n_macro)
            .map(|m| {
                build_database(
                    db.model(),
                    db.nominals(),
                    db.observable(),
                    db.n_paths(),
                    derive_seed(cfg.seed, &[ARM_DB_REBUILD, m as u64]),
                )
            })
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };

    let mut rows = Vec::with_capacity(cfg.theta_grid.len() * cfg.estimators.len());
    for (t_idx, &theta) in cfg.theta_grid.iter().enumerate() {
        let baseline = macro_micro_variance(
            |m| {
                estimate_crude(
                    db.model(),
                    db.observable(),
                    theta,
                    cfg.n_micro,
                    derive_seed(cfg.seed, &[ARM_BASELINE, t_idx as u64, m as u64]),
                )
            },
            cfg.n_macro,
            cfg.n_micro,
        );
        let baseline = match baseline {
            Ok(stats) => stats,
            Err(err) => {
                let message = format!("crude baseline failed: {err}");
                for spec in &cfg.estimators {
                    rows.push(error_row(spec, theta, cfg, f64::NAN, message.clone()));
                }
                continue;
            }
        };

        for (e_idx, spec) in cfg.estimators.iter().enumerate() {
            let arm = macro_micro_variance(
                |m| {
                    let arm_seed = derive_seed(
                        cfg.seed,
                        &[ARM_ESTIMATOR, e_idx as u64, t_idx as u64, m as u64],
                    );
                    if spec.control_indices.is_empty() {
                        estimate_crude(db.model(), db.observable(), theta, cfg.n_micro, arm_seed)
                    } else {
                        let source = if cfg.rebuild_db_per_macro {
                            &rebuilt[m]
                        } else {
                            db
                        };
                        let sub = source.subset(&spec.control_indices)?;
                        match cfg.scheme {
                            Scheme::I1 => estimate_cv_i1(&sub, theta, cfg.n_micro, arm_seed),
                            Scheme::I2 => {
                                estimate_cv_i2_from_db(&sub, theta, cfg.n_micro, arm_seed)
                            }
                            Scheme::Crude => unreachable!("rejected by validate"),
                        }
                    }
                },
                cfg.n_macro,
                cfg.n_micro,
            );
            match arm {
                Ok(stats) => {
                    let per_macro_vrr: Vec<f64> = baseline
                        .per_macro
                        .iter()
                        .zip(&stats.per_macro)
                        .map(|(c, a)| c.variance / a.variance)
                        .collect();
                    let vrr_spread = sample_stats(&per_macro_vrr);
                    rows.push(VrrRow {
                        estimator: spec.label.clone(),
                        theta,
                        vrr: baseline.avg_variance / stats.avg_variance,
                        vrr_stderr: (vrr_spread.variance / cfg.n_macro as f64).sqrt(),
                        mean: stats.grand_mean,
                        crude_var: baseline.avg_variance,
                        cv_var: stats.avg_variance,
                        n_micro: cfg.n_micro,
                        n_macro: cfg.n_macro,
                        error: None,
                    });
                }
                Err(err) => {
                    rows.push(error_row(
                        spec,
                        theta,
                        cfg,
                        baseline.avg_variance,
                        err.to_string(),
                    ));
                }
            }
        }
    }
    Ok(VrrReport { rows })
}

/// One validation check: a measured value against its reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    /// Maximum allowed |value − reference|.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: &str, value: f64, reference: f64, tolerance: f64) {
        self.checks.push(OracleCheck {
            name: name.to_string(),
            value,
            reference,
            tolerance,
            pass: (value - reference).abs() <= tolerance,
        });
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for check in &self.checks {
            writeln!(
                f,
                "{} {:<28} value {:>12.6} reference {:>12.6} tolerance {:>10.4}",
                if check.pass { "PASS" } else { "FAIL" },
                check.name,
                check.value,
                check.reference,
                check.tolerance
            )?;
        }
        Ok(())
    }
}

/// Empirical VRR of a synthetic (y, controls) sample set, through the full
/// control-variate pipeline.
fn synthetic_vrr(y: Vec<f64>, x: Vec<f64>, mu: Vec<f64>) -> f64 {
    let var_crude = sample_stats(&y).variance;
    let samples = CvSamples::new(y, x, mu).expect("synthetic samples are well formed");
    let beta = optimal_beta(&samples).expect("synthetic covariance is nonsingular");
    let var_controlled = controlled_mean(&samples, &beta.beta).variance;
    var_crude / var_controlled
}

/// Validates the control-variate machinery against closed-form Gaussian
/// answers and a brute-force regression oracle.
///
/// All draws derive from `seed`; the returned report lists each check with
/// its measured value, reference, and tolerance.
pub fn gaussian_oracle_suite(seed: u64) -> OracleReport {
    let mut report = OracleReport::default();

    // Uncorrelated control: VRR must sit at 1 (no spurious reduction).
    {
        let n = 100_000;
        let mut sy = NoiseStream::new(derive_seed(seed, &[1]), 0);
        let mut sx = NoiseStream::new(derive_seed(seed, &[1]), 1);
        let y: Vec<f64> = (0..n).map(|_| sy.next_normal()).collect();
        let x: Vec<f64> = (0..n).map(|_| sx.next_normal()).collect();
        report.push(
            "vrr-uncorrelated-control",
            synthetic_vrr(y, x, vec![0.0]),
            1.0,
            0.1,
        );
    }

    // Single control at correlation 0.9: VRR = (1 - 0.81)^-1.
    {
        let n = 100_000;
        let rho: f64 = 0.9;
        let reference = 1.0 / (1.0 - rho * rho);
        let mut s1 = NoiseStream::new(derive_seed(seed, &[2]), 0);
        let mut s2 = NoiseStream::new(derive_seed(seed, &[2]), 1);
        let tail = (1.0 - rho * rho).sqrt();
        let mut y = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            let u = s1.next_normal();
            x.push(u);
            y.push(rho * u + tail * s2.next_normal());
        }
        report.push(
            "vrr-single-control-rho-0.9",
            synthetic_vrr(y, x, vec![0.0]),
            reference,
            0.10 * reference,
        );
    }

    // Two controls with corr(Y,X1) = 0.8, corr(Y,X2) = 0.6,
    // corr(X1,X2) = 0.5. The closed form follows from the explicit 2x2
    // solve: R^2 = (0.8^2 + 0.6^2 - 2*0.8*0.6*0.5) / (1 - 0.5^2) = 0.52/0.75.
    {
        let n = 1_000_000;
        let closed_form = 1.0 / (1.0 - 0.52 / 0.75);
        let covariance = nalgebra::Matrix3::new(
            1.0, 0.8, 0.6, //
            0.8, 1.0, 0.5, //
            0.6, 0.5, 1.0,
        );
        let chol = nalgebra::Cholesky::new(covariance).expect("covariance is positive definite");
        let l = chol.l();
        let mut stream = NoiseStream::new(derive_seed(seed, &[3]), 0);
        let mut y = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let z = nalgebra::Vector3::new(
                stream.next_normal(),
                stream.next_normal(),
                stream.next_normal(),
            );
            let v = l * z;
            y.push(v[0]);
            x.push(v[1]);
            x.push(v[2]);
        }

        // Implementation route: covariance solve + theoretical VRR.
        let samples = CvSamples::new(y.clone(), x.clone(), vec![0.0, 0.0]).unwrap();
        let r2 = optimal_beta(&samples).unwrap().r_squared;
        let vrr_impl = 1.0 / (1.0 - r2);

        // Brute-force oracle: ordinary least squares of y on [1, x1, x2] via
        // raw-moment normal equations, R^2 from the residual sum of squares.
        let mut xtx = nalgebra::Matrix3::<f64>::zeros();
        let mut xty = nalgebra::Vector3::<f64>::zeros();
        for j in 0..n {
            let row = nalgebra::Vector3::new(1.0, x[2 * j], x[2 * j + 1]);
            xtx += row * row.transpose();
            xty += row * y[j];
        }
        let coeffs = xtx
            .lu()
            .solve(&xty)
            .expect("normal equations are nonsingular");
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let mut ss_res = 0.0;
        let mut ss_tot = 0.0;
        for j in 0..n {
            let fitted = coeffs[0] + coeffs[1] * x[2 * j] + coeffs[2] * x[2 * j + 1];
            ss_res += (y[j] - fitted) * (y[j] - fitted);
            ss_tot += (y[j] - y_mean) * (y[j] - y_mean);
        }
        let vrr_oracle = ss_tot / ss_res;

        report.push(
            "vrr-two-control-vs-regression",
            vrr_impl,
            vrr_oracle,
            0.05 * vrr_oracle,
        );
        report.push(
            "vrr-two-control-vs-closed-form",
            vrr_impl,
            closed_form,
            0.05 * closed_form,
        );
    }

    report
}

/// A ready-to-run study: model, database parameters, and sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyPreset {
    pub name: String,
    pub model: ModelBase,
    pub nominals: Vec<f64>,
    pub observable: Observable,
    pub n_paths: usize,
    pub master_seed: u64,
    pub sweep: SweepConfig,
}

/// The nine-point θ grid both presets sweep, straddling the ordering
/// transition of the model.
pub const THETA_GRID: [f64; 9] = [
    1.150, 1.175, 1.225, 1.250, 1.265, 1.300, 1.325, 1.375, 1.400,
];

const PRESET_NOMINALS: [f64; 2] = [1.2, 1.35];

fn preset_model(lattice_size: usize, n_steps: usize) -> ModelBase {
    ModelBase {
        chi: 1.0,
        diffusion: 1.0,
        dt: 0.01,
        dx: 1.0,
        lattice_size,
        n_steps,
        boundary: Boundary::Periodic,
        initial_condition: InitialCondition::Zero,
        point_site: (lattice_size / 2, lattice_size / 2),
        point_time_step: n_steps,
    }
}

/// Desk-scale preset: a 16×16 lattice, 1000 steps, N = 2¹² paths, 20×256
/// micro-macro budget. Minutes of compute; the default for development and
/// the acceptance suite.
pub fn desk_preset() -> StudyPreset {
    StudyPreset {
        name: "desk".into(),
        model: preset_model(16, 1000),
        nominals: PRESET_NOMINALS.to_vec(),
        observable: Observable::SpaceTimeMagnetization,
        n_paths: 1 << 12,
        master_seed: 271_828,
        sweep: SweepConfig {
            theta_grid: THETA_GRID.to_vec(),
            estimators: default_estimators(&PRESET_NOMINALS),
            n_micro: 256,
            n_macro: 20,
            seed: 314_159,
            scheme: Scheme::I1,
            rebuild_db_per_macro: false,
        },
    }
}

/// Full-scale preset: a 40×40 lattice, 5000 steps, N = 2¹⁴ paths, 40×256
/// micro-macro budget. Hours of compute; the long-running study mode.
pub fn full_preset() -> StudyPreset {
    StudyPreset {
        name: "full".into(),
        model: preset_model(40, 5000),
        nominals: PRESET_NOMINALS.to_vec(),
        observable: Observable::SpaceTimeMagnetization,
        n_paths: 1 << 14,
        master_seed: 1_618_033,
        sweep: SweepConfig {
            theta_grid: THETA_GRID.to_vec(),
            estimators: default_estimators(&PRESET_NOMINALS),
            n_micro: 256,
            n_macro: 40,
            seed: 2_718_281,
            scheme: Scheme::I1,
            rebuild_db_per_macro: false,
        },
    }
}
