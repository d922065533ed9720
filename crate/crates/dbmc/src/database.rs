//! Setup stage: build, persist, and resample the control-value database.
//!
//! A database is the product of the one-time setup computation: N random
//! inputs, addressed as noise streams `(master_seed, 0..N)`, each simulated
//! at every nominal parameter θ₁..θ_k. Only the resulting observable values
//! (the N×k `controls` matrix) and their per-nominal means are stored — the
//! random inputs themselves are regenerable from their addresses, so raw
//! noise never touches disk.
//!
//! # File format
//!
//! Bit-exact binary layout, all integers and floats little-endian (floats are
//! IEEE-754 f64):
//!
//! ```text
//! header   magic "DBMC", version u16, generator_id u8, observable u8,
//!          master_seed u64, n_paths u64, k u16, L u32, n_steps u32,
//!          dt f64, dx f64, chi f64, diffusion f64, boundary u8,
//!          initial_condition u8 + f64, point_site 2xu32,
//!          point_time_step u32, nominals k x f64
//! payload  controls row-major N x k f64, then means k x f64
//! trailer  checksum u64 (FNV-1a over every preceding byte)
//! ```
//!
//! The checksum covers header and payload, so truncation and single-byte
//! corruption anywhere in the file are both detected.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::noise::{NoiseStream, GENERATOR_ID};
use crate::tdgl::{
    simulate_path, Boundary, ConfigError, InitialCondition, ModelBase, Observable,
    SimulationError,
};

const MAGIC: [u8; 4] = *b"DBMC";
const FORMAT_VERSION: u16 = 1;

/// ChaCha stream id reserved for index resampling, so a resampling generator
/// can never collide with a path stream (path indices are ordinal).
const RESAMPLE_STREAM: u64 = 0x5245_5341_4d50_4c45;

#[derive(Debug, Error)]
pub enum DbError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed database file: {0}")]
    Format(String),
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },
    #[error("invalid database parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation failed on path {path}, control {control}: {source}")]
    Simulation {
        path: usize,
        control: usize,
        source: SimulationError,
    },
}

/// Header fields of a database file, readable without loading the payload.
#[derive(Clone, Debug, PartialEq)]
pub struct DbHeader {
    pub version: u16,
    pub generator_id: u8,
    pub observable: Observable,
    pub master_seed: u64,
    pub n_paths: usize,
    pub k: usize,
    pub model: ModelBase,
    pub nominals: Vec<f64>,
}

/// The stored product of the setup stage.
#[derive(Clone, Debug, PartialEq)]
pub struct Database {
    master_seed: u64,
    generator_id: u8,
    model: ModelBase,
    nominals: Vec<f64>,
    observable: Observable,
    /// Row-major N×k: controls[j*k + i] = observable of path j at nominal i.
    controls: Vec<f64>,
    means: Vec<f64>,
}

impl Database {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn generator_id(&self) -> u8 {
        self.generator_id
    }

    pub fn model(&self) -> &ModelBase {
        &self.model
    }

    pub fn nominals(&self) -> &[f64] {
        &self.nominals
    }

    pub fn observable(&self) -> Observable {
        self.observable
    }

    pub fn n_paths(&self) -> usize {
        self.controls.len() / self.k()
    }

    pub fn k(&self) -> usize {
        self.nominals.len()
    }

    /// Stored control values of path `j`, one per nominal.
    pub fn controls_row(&self, j: usize) -> &[f64] {
        let k = self.k();
        &self.controls[j * k..(j + 1) * k]
    }

    pub fn control(&self, j: usize, i: usize) -> f64 {
        self.controls[j * self.k() + i]
    }

    /// Ensemble means J(θᵢ) over the database, one per nominal.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// A copy restricted to the given nominal indices (sorted, distinct),
    /// used to run estimators on a subset of the stored controls.
    pub fn subset(&self, indices: &[usize]) -> Result<Database, DbError> {
        if indices.is_empty() {
            return Err(DbError::Invalid("control subset must be nonempty".into()));
        }
        if !indices.windows(2).all(|w| w[0] < w[1]) {
            return Err(DbError::Invalid(
                "control subset indices must be strictly increasing".into(),
            ));
        }
        if *indices.last().unwrap() >= self.k() {
            return Err(DbError::Invalid(format!(
                "control index {} out of range for k = {}",
                indices.last().unwrap(),
                self.k()
            )));
        }
        let n = self.n_paths();
        let mut controls = Vec::with_capacity(n * indices.len());
        for j in 0..n {
            let row = self.controls_row(j);
            controls.extend(indices.iter().map(|&i| row[i]));
        }
        Ok(Database {
            master_seed: self.master_seed,
            generator_id: self.generator_id,
            model: self.model.clone(),
            nominals: indices.iter().map(|&i| self.nominals[i]).collect(),
            observable: self.observable,
            controls,
            means: indices.iter().map(|&i| self.means[i]).collect(),
        })
    }

    /// Checks the structural invariants: shapes, finiteness, strictly
    /// increasing nominals, and means equal to column averages.
    pub fn validate(&self) -> Result<(), DbError> {
        let k = self.nominals.len();
        if k == 0 {
            return Err(DbError::Invalid("database has no nominals".into()));
        }
        if self.means.len() != k {
            return Err(DbError::Invalid("means length differs from k".into()));
        }
        if self.controls.is_empty() || self.controls.len() % k != 0 {
            return Err(DbError::Invalid(
                "controls matrix is not an N x k grid".into(),
            ));
        }
        if self.n_paths() < 2 {
            return Err(DbError::Invalid("database needs at least 2 paths".into()));
        }
        if !self
            .nominals
            .windows(2)
            .all(|w| w[0] < w[1] && w[0].is_finite() && w[1].is_finite())
            || !self.nominals[0].is_finite()
        {
            return Err(DbError::Invalid(
                "nominals must be finite, strictly increasing and distinct".into(),
            ));
        }
        if self.controls.iter().any(|v| !v.is_finite()) {
            return Err(DbError::Invalid(
                "controls matrix contains non-finite values".into(),
            ));
        }
        let recomputed = column_means(&self.controls, k);
        for (i, (&stored, &fresh)) in self.means.iter().zip(&recomputed).enumerate() {
            if (stored - fresh).abs() > 1e-12 * fresh.abs().max(1.0) {
                return Err(DbError::Invalid(format!(
                    "stored mean {stored} of control {i} differs from column average {fresh}"
                )));
            }
        }
        Ok(())
    }

    pub fn header(&self) -> DbHeader {
        DbHeader {
            version: FORMAT_VERSION,
            generator_id: self.generator_id,
            observable: self.observable,
            master_seed: self.master_seed,
            n_paths: self.n_paths(),
            k: self.k(),
            model: self.model.clone(),
            nominals: self.nominals.clone(),
        }
    }

    /// Serializes to the bit-exact file format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n_paths();
        let k = self.k();
        let mut buf = Vec::with_capacity(90 + 8 * (k + n * k + k) + 8);
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.push(self.generator_id);
        buf.push(self.observable.code());
        buf.extend_from_slice(&self.master_seed.to_le_bytes());
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        buf.extend_from_slice(&(k as u16).to_le_bytes());
        buf.extend_from_slice(&(self.model.lattice_size as u32).to_le_bytes());
        buf.extend_from_slice(&(self.model.n_steps as u32).to_le_bytes());
        buf.extend_from_slice(&self.model.dt.to_le_bytes());
        buf.extend_from_slice(&self.model.dx.to_le_bytes());
        buf.extend_from_slice(&self.model.chi.to_le_bytes());
        buf.extend_from_slice(&self.model.diffusion.to_le_bytes());
        buf.push(match self.model.boundary {
            Boundary::Periodic => 0,
        });
        let (ic_code, ic_value) = match self.model.initial_condition {
            InitialCondition::Zero => (0u8, 0.0),
            InitialCondition::Constant(c) => (1u8, c),
        };
        buf.push(ic_code);
        buf.extend_from_slice(&ic_value.to_le_bytes());
        buf.extend_from_slice(&(self.model.point_site.0 as u32).to_le_bytes());
        buf.extend_from_slice(&(self.model.point_site.1 as u32).to_le_bytes());
        buf.extend_from_slice(&(self.model.point_time_step as u32).to_le_bytes());
        for nominal in &self.nominals {
            buf.extend_from_slice(&nominal.to_le_bytes());
        }
        for value in &self.controls {
            buf.extend_from_slice(&value.to_le_bytes());
        }
        for mean in &self.means {
            buf.extend_from_slice(&mean.to_le_bytes());
        }
        let checksum = fnv1a64(&buf);
        buf.extend_from_slice(&checksum.to_le_bytes());
        buf
    }

    /// Parses the bit-exact file format. Structural problems (bad magic,
    /// unsupported version, truncation) report [`DbError::Format`];
    /// corruption that survives parsing reports [`DbError::Checksum`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DbError> {
        let mut reader = ByteReader::new(bytes);
        let header = parse_header(&mut reader)?;
        let n = header.n_paths;
        let k = header.k;

        let payload_len = (n as u128 * k as u128 + k as u128) * 8;
        let expected_total = reader.position() as u128 + payload_len + 8;
        if bytes.len() as u128 != expected_total {
            return Err(DbError::Format(format!(
                "file has {} bytes, expected {expected_total}",
                bytes.len()
            )));
        }

        let mut controls = Vec::with_capacity(n * k);
        for _ in 0..n * k {
            controls.push(reader.f64()?);
        }
        let mut means = Vec::with_capacity(k);
        for _ in 0..k {
            means.push(reader.f64()?);
        }

        let body_end = reader.position();
        let stored = reader.u64()?;
        let computed = fnv1a64(&bytes[..body_end]);
        if stored != computed {
            return Err(DbError::Checksum { stored, computed });
        }

        let db = Database {
            master_seed: header.master_seed,
            generator_id: header.generator_id,
            model: header.model,
            nominals: header.nominals,
            observable: header.observable,
            controls,
            means,
        };
        db.validate()?;
        Ok(db)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DbError> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        file.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DbError> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    /// Reads and parses only the header of a database file.
    pub fn read_header(path: impl AsRef<Path>) -> Result<DbHeader, DbError> {
        let bytes = fs::read(path)?;
        parse_header(&mut ByteReader::new(&bytes))
    }
}

/// Runs the setup stage: simulates every path at every nominal and assembles
/// the control matrix and its means.
///
/// Path j at nominal θᵢ replays the noise stream `(master_seed, j)` from the
/// start, so all k controls of one row share the identical random input, and
/// any path can later be regenerated exactly from its address. Paths are
/// simulated in parallel; the result is independent of thread count.
pub fn build_database(
    model: &ModelBase,
    nominals: &[f64],
    observable: Observable,
    n_paths: usize,
    master_seed: u64,
) -> Result<Database, DbError> {
    model.validate()?;
    if nominals.is_empty() {
        return Err(DbError::Invalid("at least one nominal is required".into()));
    }
    if nominals.iter().any(|v| !v.is_finite()) {
        return Err(DbError::Invalid("nominals must be finite".into()));
    }
    if !nominals.windows(2).all(|w| w[0] < w[1]) {
        return Err(DbError::Invalid(
            "nominals must be strictly increasing and distinct".into(),
        ));
    }
    if n_paths < 2 {
        return Err(DbError::Invalid(format!(
            "n_paths must be at least 2, got {n_paths}"
        )));
    }

    let k = nominals.len();
    let configs: Vec<_> = nominals.iter().map(|&t| model.at_theta(t)).collect();

    let rows: Vec<Result<Vec<f64>, DbError>> = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let mut row = Vec::with_capacity(k);
            for (i, cfg) in configs.iter().enumerate() {
                let mut stream = NoiseStream::new(master_seed, j as u64);
                let record =
                    simulate_path(cfg, &mut stream).map_err(|source| DbError::Simulation {
                        path: j,
                        control: i,
                        source,
                    })?;
                row.push(observable.extract(&record));
            }
            Ok(row)
        })
        .collect();

    // Sequential scan keeps the reported error (if any) independent of
    // thread scheduling.
    let mut controls = Vec::with_capacity(n_paths * k);
    for row in rows {
        controls.extend(row?);
    }
    let means = column_means(&controls, k);

    let db = Database {
        master_seed,
        generator_id: GENERATOR_ID,
        model: model.clone(),
        nominals: nominals.to_vec(),
        observable,
        controls,
        means,
    };
    db.validate()?;
    Ok(db)
}

/// Draws `n` path indices uniformly with replacement from `[0, N)`,
/// deterministically in `seed`.
pub fn resample_indices(db: &Database, n: usize, seed: u64) -> Vec<usize> {
    let n_paths = db.n_paths();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RESAMPLE_STREAM);
    (0..n).map(|_| rng.random_range(0..n_paths)).collect()
}

fn column_means(controls: &[f64], k: usize) -> Vec<f64> {
    let n = controls.len() / k;
    let mut means = vec![0.0; k];
    for row in controls.chunks_exact(k) {
        for (mean, &v) in means.iter_mut().zip(row) {
            *mean += v;
        }
    }
    for mean in &mut means {
        *mean /= n as f64;
    }
    means
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn position(&self) -> usize {
        self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DbError> {
        if self.pos + n > self.buf.len() {
            return Err(DbError::Format(format!(
                "truncated file: needed {} bytes at offset {}, have {}",
                n,
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, DbError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DbError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, DbError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DbError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DbError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse_header(reader: &mut ByteReader) -> Result<DbHeader, DbError> {
    let magic = reader.take(4)?;
    if magic != MAGIC {
        return Err(DbError::Format(format!("bad magic {magic:?}")));
    }
    let version = reader.u16()?;
    if version != FORMAT_VERSION {
        return Err(DbError::Format(format!(
            "unsupported format version {version}"
        )));
    }
    let generator_id = reader.u8()?;
    if generator_id != GENERATOR_ID {
        return Err(DbError::Format(format!(
            "unsupported generator id {generator_id}; this build produces id {GENERATOR_ID}"
        )));
    }
    let observable_code = reader.u8()?;
    let observable = Observable::from_code(observable_code)
        .ok_or_else(|| DbError::Format(format!("unknown observable code {observable_code}")))?;
    let master_seed = reader.u64()?;
    let n_paths = reader.u64()?;
    let k = reader.u16()? as usize;
    let lattice_size = reader.u32()? as usize;
    let n_steps = reader.u32()? as usize;
    let dt = reader.f64()?;
    let dx = reader.f64()?;
    let chi = reader.f64()?;
    let diffusion = reader.f64()?;
    let boundary = match reader.u8()? {
        0 => Boundary::Periodic,
        code => return Err(DbError::Format(format!("unknown boundary code {code}"))),
    };
    let ic_code = reader.u8()?;
    let ic_value = reader.f64()?;
    let initial_condition = match ic_code {
        0 => InitialCondition::Zero,
        1 => InitialCondition::Constant(ic_value),
        code => {
            return Err(DbError::Format(format!(
                "unknown initial condition code {code}"
            )))
        }
    };
    let point_site = (reader.u32()? as usize, reader.u32()? as usize);
    let point_time_step = reader.u32()? as usize;
    let n_paths = usize::try_from(n_paths)
        .map_err(|_| DbError::Format(format!("n_paths {n_paths} exceeds address space")))?;
    if k == 0 {
        return Err(DbError::Format("header declares zero controls".into()));
    }
    let mut nominals = Vec::with_capacity(k);
    for _ in 0..k {
        nominals.push(reader.f64()?);
    }
    Ok(DbHeader {
        version,
        generator_id,
        observable,
        master_seed,
        n_paths,
        k,
        model: ModelBase {
            chi,
            diffusion,
            dt,
            dx,
            lattice_size,
            n_steps,
            boundary,
            initial_condition,
            point_site,
            point_time_step,
        },
        nominals,
    })
}
