//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by lattice construction, action evaluation, mixed-path
/// checks, the variational solver, and the reference propagators.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: vectors of length {vector} against a {rows}x{cols} matrix")]
    DimensionMismatch {
        vector: usize,
        rows: usize,
        cols: usize,
    },

    #[error("ensemble cap exceeded: {requested} paths requested, cap is {cap}")]
    CapExceeded { requested: u128, cap: usize },

    #[error("empty ensemble: pinned enumeration kept 0 of {examined} paths")]
    EmptyEnsemble { examined: usize },

    #[error("matrix cap exceeded: ensemble has {paths} paths, cap is {cap}")]
    MatrixCapExceeded { paths: usize, cap: usize },

    #[error("H_q not invertible in q for the {kind} Hamiltonian")]
    NotInvertibleInQ { kind: &'static str },

    #[error("G undefined for this Hamiltonian ({kind})")]
    GUndefined { kind: &'static str },

    #[error("Problem 1 unavailable: no G values for this Hamiltonian")]
    Problem1Unavailable,

    #[error("zero vector where a direction is required")]
    ZeroVector,

    #[error("degenerate bracket: the profile ratio is constant over the bracket")]
    DegenerateBracket,

    #[error("no sign change of the ratio derivative inside the bracket ({lo}, {hi})")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("amplitude singular: J(c*) = {j_value} is too close to zero")]
    AmplitudeSingular { j_value: f64 },

    #[error("window too narrow: regulated envelope at the window edge is {edge_ratio:.3e} of the peak (threshold {threshold:.3e})")]
    WindowTooNarrow { edge_ratio: f64, threshold: f64 },

    #[error("grid too coarse: {what} (needed {needed:.6e}, grid supports {supported:.6e})")]
    GridTooCoarse {
        what: &'static str,
        needed: f64,
        supported: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
