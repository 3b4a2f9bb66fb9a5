use std::path::PathBuf;

use thiserror::Error;

use crate::grid::{Direction, GridDims};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimensions must be >= 1 with at most 2^27 elements, got {nx}x{ny}x{nz}")]
    InvalidDims { nx: usize, ny: usize, nz: usize },

    #[error("element ({n}, {m}, {l}) is outside grid {dims}")]
    IndexOutOfRange { n: usize, m: usize, l: usize, dims: GridDims },

    #[error("linear index {index} is outside [0, {len})")]
    LinearIndexOutOfRange { index: usize, len: usize },

    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("density {value} at element {index} is outside [rho_min, 1]")]
    DensityOutOfRange { index: usize, value: f64 },

    #[error("direction {0} is not valid for grid {1}")]
    InvalidDirection(Direction, GridDims),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid load case: {0}")]
    InvalidLoadCase(String),

    #[error("stiffness system is singular or not positive definite: {0}")]
    SingularSystem(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("overhang angle must lie in (0, 90) degrees, got {0}")]
    InvalidAngle(f64),

    #[error("kernel layer count must be >= 1")]
    InvalidLayers,

    #[error("detection threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),

    #[error("supported masks differ between batched detection and enumeration at element {0}")]
    MaskMismatch(usize),

    #[error("no candidate build directions")]
    NoCandidates,

    #[error("MMA subproblem did not converge (KKT residual {residual:.3e})")]
    SubproblemDiverged { residual: f64 },

    #[error("invalid optimizer parameter: {0}")]
    InvalidParameter(String),

    #[error("optimization did not finish within {max_iters} iterations")]
    NotConverged { max_iters: usize, history: Box<crate::optimizer::History> },

    #[error("strict removal deleted {removed} elements, above the bound of {bound}")]
    RemovalBoundExceeded { removed: usize, bound: usize, history: Box<crate::optimizer::History> },

    #[error("compliance ratio needs a reference compliance")]
    MissingReference,

    #[error("invalid problem field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("run failed (history written to {path}): {source}")]
    RunFailed { path: PathBuf, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
