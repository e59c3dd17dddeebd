//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while generating, solving or serializing
/// QSAT instances. Degeneracy variants mark measure-zero numerical events
/// that sweep drivers should treat as "re-draw", not "abort".
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: requested {requested} edges but only {available} distinct {k}-tuples exist on {n} qubits")]
    Capacity {
        requested: u64,
        available: u64,
        n: usize,
        k: usize,
    },

    #[error("arity error: {0}")]
    Arity(String),

    #[error("rank error: rank {r} exceeds projector space dimension 2^{k} = {dim}")]
    Rank { r: usize, k: usize, dim: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation error in {context}: {message}")]
    Validation { context: String, message: String },

    #[error("parse error{}: {message}", location.as_ref().map(|(l, c)| format!(" at line {l}, column {c}")).unwrap_or_default())]
    Parse {
        message: String,
        location: Option<(usize, usize)>,
    },

    #[error("solver cap exceeded: {0}")]
    CapExceeded(String),

    #[error("degenerate loop: |λ↑ − λ↓| = {gap:.3e} below 1e-8; loop transfer eigenbasis undefined")]
    DegenerateLoop { gap: f64 },

    #[error("singular transfer on edge {edge}: margin {margin:.3e}")]
    SingularTransfer { edge: usize, margin: f64 },

    #[error("degenerate transfer at edge {edge}: contraction vanished")]
    DegenerateTransfer { edge: usize },

    #[error("hypercore is nonempty ({edges} edges remain): a satisfying core state must be supplied")]
    CoreNotEmpty { edges: usize },

    #[error("no classical UNSAT certificate exists: {0}")]
    NoCertificate(String),

    #[error("certificate construction not found: {0}")]
    CertificateNotFound(String),

    #[error("zero-norm state")]
    ZeroNorm,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for measure-zero numerical degeneracies (CLI exit code 2).
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::DegenerateLoop { .. }
                | Error::SingularTransfer { .. }
                | Error::DegenerateTransfer { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
