use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("expected 6 real roots of the period-3 factor, found {found}")]
    CyclesNotReal { found: usize },

    #[error("derivative singular: |8 e3 - 1| = {0:e}")]
    DerivativeSingular(f64),

    #[error("parameter outside admissible window: {components} trap components found")]
    OutsideAdmissibleWindow { components: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("orbit escaped the traps at index {index}")]
    Escape { index: usize },

    #[error("critical point hit at index {index}")]
    CriticalHit { index: usize },

    #[error("search exhausted: {0}")]
    NotFound(String),

    #[error("truncation unsound: tail ratio {ratio:.4} too close to 1")]
    TruncationUnsound { ratio: f64 },

    #[error("outside domain: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("undecided: {0}")]
    Undecided(String),
}

pub type Result<T> = std::result::Result<T, Error>;
