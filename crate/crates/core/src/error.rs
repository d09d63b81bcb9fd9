use thiserror::Error;

/// Errors produced by the estimators, the embedding search and the
/// preprocessing pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,

    #[error("symbol {symbol} at position {position} is outside the alphabet of size {alphabet_size}")]
    SymbolOutOfRange {
        symbol: u32,
        position: usize,
        alphabet_size: usize,
    },

    #[error("no samples to build a distribution from")]
    NoSamples,

    #[error("sample {index} has {got} coordinates, table expects {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },

    #[error("axis {axis} does not exist in a table with {n_axes} axes")]
    AxisOutOfRange { axis: usize, n_axes: usize },

    #[error("axis set is empty")]
    EmptyAxisSet,

    #[error("axis {axis} appears in more than one axis set")]
    OverlappingAxes { axis: usize },

    #[error("past state is empty; AIS is defined as 0 without a past state")]
    EmptyPastState,

    #[error("invalid lag {lag}: lags must lie in [1, {k_max}]")]
    InvalidLag { lag: usize, k_max: usize },

    #[error("sequence of length {length} is too short: need at least {required}")]
    SequenceTooShort { length: usize, required: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("group '{0}' is empty")]
    EmptyGroup(String),

    #[error("duplicate AOI id {0}")]
    DuplicateAoi(u32),

    #[error("AOI ids must be 0..{n}; id {id} is out of range")]
    AoiIdOutOfRange { id: u32, n: usize },

    #[error("AOI {id} has a degenerate rectangle (requires x_min < x_max and y_min < y_max)")]
    DegenerateAoi { id: u32 },

    #[error("AOIs {a} and {b} overlap; give them distinct priorities")]
    AmbiguousOverlap { a: u32, b: u32 },

    #[error("invalid Markov spec: {0}")]
    InvalidMarkovSpec(String),

    #[error("Markov chain is not irreducible: history {0} cannot reach every other history")]
    Reducible(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("condition '{condition}' has {got} analyzable trials, need at least {required}")]
    InsufficientTrials {
        condition: String,
        got: usize,
        required: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
