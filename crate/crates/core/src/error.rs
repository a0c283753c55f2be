use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Problems with a configuration document. Each variant carries the key path
/// (dotted, e.g. `observer.site`) of the offending entry where one exists.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{path}`")]
    UnknownKey { path: String },
    #[error("invalid value for `{path}`: {message}")]
    Constraint { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("unsupported unit conversion {from} -> {to}")]
    UnsupportedUnits { from: String, to: String },

    #[error("invalid site id {id} (device has {n_sites} sites)")]
    InvalidSite { id: usize, n_sites: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what}: argument {value} outside domain ({requirement})")]
    Domain { what: &'static str, value: f64, requirement: &'static str },

    #[error("invalid device: {0}")]
    InvalidDevice(String),

    #[error("operator is not Hermitian (max |A - A^H| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("eigendecomposition failed to converge (n = {dim}, max|A| = {max_abs:e}, ||A||_F = {frobenius:e})")]
    Decomposition { dim: usize, max_abs: f64, frobenius: f64 },

    #[error(
        "steady state is not unique: kernel dimension estimate {nullspace_dim} \
         (two smallest singular values {sigma_min:e}, {sigma_next:e}; sigma_max {sigma_max:e})"
    )]
    DegenerateSteadyState { nullspace_dim: usize, sigma_min: f64, sigma_next: f64, sigma_max: f64 },

    #[error("steady-state residual {residual:e} exceeds bound {bound:e}")]
    Residual { residual: f64, bound: f64 },

    #[error("propagation unstable after {steps} steps at t = {time:e} (norm {norm:e}, trace drift {trace_drift:e})")]
    Instability { steps: u64, time: f64, norm: f64, trace_drift: f64 },

    #[error("unknown observable column `{0}`")]
    UnknownColumn(String),

    #[error("solve failed at gamma_D = {gamma_d:e}, kdT = {kdt:e}: {source}")]
    SweepPoint {
        gamma_d: f64,
        kdt: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// True when the root cause is a configuration problem rather than a
    /// numerical failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } | Error::SweepPoint { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
