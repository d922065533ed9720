//! Database Monte Carlo (DBMC) with control variates for ensemble
//! simulations, demonstrated on a two-dimensional stochastic
//! Ginzburg-Landau lattice model.
//!
//! The method has two stages. A one-time **setup stage** simulates a large
//! ensemble of paths at one or more nominal parameter values and stores, per
//! random input, the resulting observable values (the *controls*) together
//! with their ensemble means. The cheap **estimation stage** then estimates
//! the observable at a nearby parameter by reusing the stored inputs: each
//! re-simulated sample is adjusted by its control's deviation from the stored
//! mean, which cancels most of the noise shared between the two parameter
//! values. Variance reductions of one to three orders of magnitude are
//! typical when the parameters are close.
//!
//! Module map:
//!
//! - [`noise`] — seed-addressed, replayable standard-normal streams
//! - [`tdgl`] — the stochastic lattice dynamics and its observables
//! - [`cv`] — control-variate estimation mathematics
//! - [`database`] — setup stage: build, persist, and resample the database
//! - [`estimator`] — estimation stage: crude, resampling (I1) and
//!   fresh-input (I2) schemes
//! - [`harness`] — variance-ratio experiments and report generation

pub mod cv;
pub mod database;
pub mod estimator;
pub mod harness;
pub mod noise;
pub mod tdgl;

pub use cv::{controlled_mean, empirical_vrr, optimal_beta, theoretical_vrr};
pub use cv::{BetaSolution, CvError, CvSamples, SampleStats};
pub use database::{build_database, resample_indices, Database, DbError, DbHeader};
pub use estimator::{
    estimate_crude, estimate_cv_i1, estimate_cv_i1_with_beta, estimate_cv_i2,
    estimate_cv_i2_with_beta, ControlledEstimate, EstimateError, Scheme,
};
pub use harness::{
    desk_preset, full_preset, gaussian_oracle_suite, macro_micro_variance, vrr_sweep,
    EstimatorSpec, HarnessError, MacroMicroStats, OracleReport, StudyPreset, SweepConfig,
    VrrReport, VrrRow,
};
pub use noise::{derive_seed, normal_quantile, NoiseSource, NoiseStream, GENERATOR_ID};
pub use tdgl::{
    laplacian_5pt, potential_force, simulate_path, Boundary, ConfigError, InitialCondition,
    LatticeField, ModelBase, ModelConfig, Observable, ObservableRecord, SimulationError,
};
