//! Stochastic Ginzburg-Landau dynamics on a periodic 2-D lattice.
//!
//! The continuum model evolves a scalar order parameter φ(x, t) under a
//! double-well potential V(φ) = −(θ/2)φ² + (χ/4)φ⁴ with additive white
//! noise. We integrate the discretized form with a forward Euler-Maruyama
//! step and a 5-point Laplacian stencil:
//!
//! ```text
//! φ(x, t+δt) = φ(x, t) + D·δt·Δ_L φ(x, t)
//!            − δt·[−θ·φ(x, t) + χ·φ³(x, t)]
//!            + sqrt(2·δt/δx)·N(x, t)
//! ```
//!
//! where the N(x, t) are i.i.d. standard normals, one per space-time point.
//! θ plays the role of an inverse-temperature-like parameter: the quartic
//! well minima sit at ±sqrt(θ/χ), so larger θ means deeper wells and more
//! ordered late-time states.
//!
//! Three scalar observables are accumulated along each path: the order
//! parameter at a chosen site and time, the lattice total at a chosen time,
//! and the space-time total over the whole path. A path is a pure function
//! of its configuration and its noise stream address, which is what makes
//! stored ensembles exactly replayable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::NoiseSource;

/// Lattice boundary handling. Only periodic wrapping is supported; it keeps
/// the stencil uniform at every site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
}

/// Initial state of the order-parameter field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    /// φ(x, 0) = 0 everywhere: a disordered start, symmetric across the two
    /// potential wells.
    Zero,
    /// φ(x, 0) = c everywhere.
    Constant(f64),
}

/// Physical and numerical settings shared by every path of a study —
/// everything except the swept parameter θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBase {
    /// Quartic coefficient χ of the double-well potential.
    pub chi: f64,
    /// Diffusion coefficient D.
    pub diffusion: f64,
    /// Time step δt.
    pub dt: f64,
    /// Lattice spacing δx.
    pub dx: f64,
    /// Lattice edge length L; the lattice is L×L.
    pub lattice_size: usize,
    /// Number of Euler-Maruyama updates per path.
    pub n_steps: usize,
    pub boundary: Boundary,
    pub initial_condition: InitialCondition,
    /// Site (x, y) read by the point observable.
    pub point_site: (usize, usize),
    /// Time step at which the point and lattice-total observables are read
    /// (0 means the initial state).
    pub point_time_step: usize,
}

impl ModelBase {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("dt", self.dt),
            ("dx", self.dx),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        for (name, value) in [("chi", self.chi), ("diffusion", self.diffusion)] {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite { name, value });
            }
        }
        if self.lattice_size < 2 {
            return Err(ConfigError::LatticeTooSmall(self.lattice_size));
        }
        if self.n_steps < 1 {
            return Err(ConfigError::NoSteps);
        }
        let l = self.lattice_size;
        if self.point_site.0 >= l || self.point_site.1 >= l {
            return Err(ConfigError::SiteOutOfRange {
                site: self.point_site,
                lattice_size: l,
            });
        }
        if self.point_time_step > self.n_steps {
            return Err(ConfigError::TimeStepOutOfRange {
                step: self.point_time_step,
                n_steps: self.n_steps,
            });
        }
        if let InitialCondition::Constant(c) = self.initial_condition {
            if !c.is_finite() {
                return Err(ConfigError::NonFinite {
                    name: "initial_condition",
                    value: c,
                });
            }
        }
        Ok(())
    }

    /// Binds the shared settings to a concrete θ.
    pub fn at_theta(&self, theta: f64) -> ModelConfig {
        ModelConfig {
            theta,
            base: self.clone(),
        }
    }

    fn initial_field(&self) -> LatticeField {
        match self.initial_condition {
            InitialCondition::Zero => LatticeField::zeros(self.lattice_size),
            InitialCondition::Constant(c) => LatticeField::constant(self.lattice_size, c),
        }
    }
}

/// Full configuration of one simulation run: shared settings plus θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub theta: f64,
    pub base: ModelBase,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.theta.is_finite() {
            return Err(ConfigError::NonFinite {
                name: "theta",
                value: self.theta,
            });
        }
        self.base.validate()
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("lattice_size must be at least 2, got {0}")]
    LatticeTooSmall(usize),
    #[error("n_steps must be at least 1")]
    NoSteps,
    #[error("point_site {site:?} is outside the {lattice_size}x{lattice_size} lattice")]
    SiteOutOfRange {
        site: (usize, usize),
        lattice_size: usize,
    },
    #[error("point_time_step {step} exceeds n_steps {n_steps}")]
    TimeStepOutOfRange { step: usize, n_steps: usize },
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SimulationError {
    /// A field value became non-finite. `step` is the 1-based count of
    /// completed updates when the blow-up was detected.
    #[error("field value became non-finite at step {step}")]
    BlowUp { step: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// An L×L grid of order-parameter values at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    size: usize,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(size: usize) -> Self {
        Self::constant(size, 0.0)
    }

    pub fn constant(size: usize, value: f64) -> Self {
        Self {
            size,
            values: vec![value; size * size],
        }
    }

    /// Wraps row-major values; panics if the length is not `size²`.
    pub fn from_values(size: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), size * size, "field length must be size^2");
        Self { size, values }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Row-major site values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.size + x]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Sum of all site values, accumulated in row-major order.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// The three scalar observables accumulated along one path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    /// φ at `point_site`, read at `point_time_step`.
    pub point_mag: f64,
    /// Lattice total Σ_x φ at `point_time_step`.
    pub total_mag_at_t: f64,
    /// Space-time total Σ_t Σ_x φ, summed over the initial state and every
    /// post-update state.
    pub spacetime_mag: f64,
}

/// Selects which scalar of an [`ObservableRecord`] a study estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "point")]
    PointMagnetization,
    #[serde(rename = "total")]
    TotalMagnetization,
    #[serde(rename = "spacetime")]
    SpaceTimeMagnetization,
}

impl Observable {
    pub fn extract(&self, record: &ObservableRecord) -> f64 {
        match self {
            Observable::PointMagnetization => record.point_mag,
            Observable::TotalMagnetization => record.total_mag_at_t,
            Observable::SpaceTimeMagnetization => record.spacetime_mag,
        }
    }

    /// Stable one-byte code used in database file headers.
    pub fn code(&self) -> u8 {
        match self {
            Observable::PointMagnetization => 0,
            Observable::TotalMagnetization => 1,
            Observable::SpaceTimeMagnetization => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Observable::PointMagnetization),
            1 => Some(Observable::TotalMagnetization),
            2 => Some(Observable::SpaceTimeMagnetization),
            _ => None,
        }
    }
}

impl std::fmt::Display for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Observable::PointMagnetization => "point",
            Observable::TotalMagnetization => "total",
            Observable::SpaceTimeMagnetization => "spacetime",
        })
    }
}

impl std::str::FromStr for Observable {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "point" => Ok(Observable::PointMagnetization),
            "total" => Ok(Observable::TotalMagnetization),
            "spacetime" => Ok(Observable::SpaceTimeMagnetization),
            other => Err(format!(
                "unknown observable {other:?}, expected point|total|spacetime"
            )),
        }
    }
}

/// Derivative of the double-well potential: V'(φ) = −θφ + χφ³.
#[inline]
pub fn potential_force(phi: f64, theta: f64, chi: f64) -> f64 {
    -theta * phi + chi * phi * phi * phi
}

#[inline]
fn wrap_dec(i: usize, l: usize) -> usize {
    if i == 0 {
        l - 1
    } else {
        i - 1
    }
}

#[inline]
fn wrap_inc(i: usize, l: usize) -> usize {
    if i + 1 == l {
        0
    } else {
        i + 1
    }
}

/// 5-point Laplacian at one site of a periodic row-major field.
#[inline]
fn site_laplacian(values: &[f64], l: usize, x: usize, y: usize, inv_dx2: f64) -> f64 {
    let left = values[y * l + wrap_dec(x, l)];
    let right = values[y * l + wrap_inc(x, l)];
    let down = values[wrap_dec(y, l) * l + x];
    let up = values[wrap_inc(y, l) * l + x];
    let center = values[y * l + x];
    (left + right + down + up - 4.0 * center) * inv_dx2
}

/// 5-point stencil Laplacian of the whole field with periodic wrapping:
/// (sum of the 4 neighbors − 4·center) / δx².
pub fn laplacian_5pt(field: &LatticeField, dx: f64) -> LatticeField {
    let l = field.size();
    let inv_dx2 = 1.0 / (dx * dx);
    let src = field.values();
    let mut out = vec![0.0; l * l];
    for y in 0..l {
        for x in 0..l {
            out[y * l + x] = site_laplacian(src, l, x, y, inv_dx2);
        }
    }
    LatticeField::from_values(l, out)
}

/// One Euler-Maruyama update of every site, writing into `dst`.
fn step_into(src: &[f64], dst: &mut [f64], cfg: &ModelConfig, noise: &[f64]) {
    let l = cfg.base.lattice_size;
    let theta = cfg.theta;
    let chi = cfg.base.chi;
    let diff_dt = cfg.base.diffusion * cfg.base.dt;
    let dt = cfg.base.dt;
    let inv_dx2 = 1.0 / (cfg.base.dx * cfg.base.dx);
    let noise_amp = (2.0 * cfg.base.dt / cfg.base.dx).sqrt();
    for y in 0..l {
        for x in 0..l {
            let idx = y * l + x;
            let phi = src[idx];
            let lap = site_laplacian(src, l, x, y, inv_dx2);
            dst[idx] = phi + diff_dt * lap - dt * potential_force(phi, theta, chi)
                + noise_amp * noise[idx];
        }
    }
}

/// Applies one Euler-Maruyama update and returns the new field; the input is
/// untouched. `noise` must hold L² standard normals in row-major site order.
pub fn euler_step(
    field: &LatticeField,
    cfg: &ModelConfig,
    noise: &[f64],
) -> Result<LatticeField, SimulationError> {
    let l = cfg.base.lattice_size;
    assert_eq!(field.size(), l, "field size does not match configuration");
    assert_eq!(noise.len(), l * l, "noise field must have L^2 entries");
    let mut out = vec![0.0; l * l];
    step_into(field.values(), &mut out, cfg, noise);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(SimulationError::BlowUp { step: 1 });
    }
    Ok(LatticeField::from_values(l, out))
}

/// Simulates one complete path and returns its observables.
///
/// The field starts from `cfg.base.initial_condition` and receives
/// `cfg.base.n_steps` updates, drawing one L×L noise field per step. The
/// space-time total accumulates the initial state (step 0) plus every
/// post-update state (steps 1..=T); the point and lattice-total observables
/// are read at `point_time_step` under the same convention.
///
/// The result is a deterministic function of `cfg` and the noise source's
/// address, which is the property the whole database scheme rests on.
pub fn simulate_path<S: NoiseSource>(
    cfg: &ModelConfig,
    noise: &mut S,
) -> Result<ObservableRecord, SimulationError> {
    cfg.validate()?;
    let l = cfg.base.lattice_size;
    let site_idx = cfg.base.point_site.1 * l + cfg.base.point_site.0;
    let read_step = cfg.base.point_time_step;

    let mut field = cfg.base.initial_field().values.clone();
    let mut next = vec![0.0; l * l];
    let mut noise_buf = vec![0.0; l * l];

    let initial_total: f64 = field.iter().sum();
    if !initial_total.is_finite() {
        return Err(SimulationError::BlowUp { step: 0 });
    }
    let mut spacetime = initial_total;
    let mut point_mag = field[site_idx];
    let mut total_at_t = initial_total;

    for step in 1..=cfg.base.n_steps {
        noise.fill_standard_normals(&mut noise_buf);
        step_into(&field, &mut next, cfg, &noise_buf);
        std::mem::swap(&mut field, &mut next);

        // A non-finite site always drags the row-major total to non-finite,
        // so the running sum doubles as the blow-up detector.
        let total: f64 = field.iter().sum();
        if !total.is_finite() {
            return Err(SimulationError::BlowUp { step });
        }
        spacetime += total;
        if step == read_step {
            point_mag = field[site_idx];
            total_at_t = total;
        }
    }

    Ok(ObservableRecord {
        point_mag,
        total_mag_at_t: total_at_t,
        spacetime_mag: spacetime,
    })
}
