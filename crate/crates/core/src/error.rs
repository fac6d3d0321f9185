use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix dimension {dim} does not match subsystem dimensions {dims:?}")]
    DimensionMismatch { dim: usize, dims: Vec<usize> },

    #[error("unsupported register {dims:?}: expected 1 to 3 qubits")]
    UnsupportedRegister { dims: Vec<usize> },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("eigenvalue {value:e} is below the positivity floor")]
    NegativeEigenvalue { value: f64 },

    #[error("value {value} lies outside [0, 1]")]
    OutOfUnitInterval { value: f64 },

    #[error("invalid subsystem index {index} for a register of {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("subsystem selection must be nonempty and free of duplicates")]
    InvalidSelection,

    #[error("basis vectors are not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("basis dimension {basis} does not match subsystem dimension {subsystem}")]
    BasisMismatch { basis: usize, subsystem: usize },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("memory subsystem {0} is assigned to more than one measurement")]
    DuplicateMemory(usize),

    #[error("state-independent bound must be positive, got {0}")]
    NonPositiveBound(f64),

    #[error("h must lie in (0, 2), got {0}")]
    InvalidH(f64),

    #[error("invalid cavity walls x1={x1}, x2={x2}: need 0 < x1 < x2")]
    InvalidWalls { x1: f64, x2: f64 },

    #[error("reflection phase s must lie in [0, 1), got {0}")]
    InvalidPhaseShift(f64),

    #[error("acceleration duration eta1 must be non-negative, got {0}")]
    InvalidDuration(f64),

    #[error("inertial cavity (h = 0) with eta1 > 0 has no finite acceleration factor")]
    InertialCavity,

    #[error("acceleration factor u must be finite and non-negative, got {0}")]
    InvalidAccelerationFactor(f64),

    #[error("perturbative expansion invalid: {0}")]
    PerturbativeValidity(String),

    #[error("channel is not completely positive (Choi min eigenvalue {0:e})")]
    NotCompletelyPositive(f64),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("spectrum for mode {found} supplied where mode {expected} is required")]
    SpectrumModeMismatch { expected: i64, found: i64 },

    #[error("no spectrum available for mode {0}")]
    MissingSpectrum(i64),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),

    #[error("number of rounds must be positive")]
    ZeroRounds,

    #[error("negative radicand {0:e} in closed-form eigenvalues")]
    NegativeRadicand(f64),
}
