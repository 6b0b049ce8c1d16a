use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{routine} failed to converge on a {rows}x{cols} matrix")]
    NoConvergence {
        routine: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error(
        "memory cap exceeded at step {step} (t = {time}): {entries} complex entries > cap {cap}"
    )]
    MemoryCap {
        step: usize,
        time: f64,
        entries: usize,
        cap: usize,
    },

    #[error("time mismatch between interleaved circuits: left {left}, right {right}")]
    TimeMismatch { left: f64, right: f64 },

    #[error("ill-conditioned linear system (condition estimate {condition:.3e}): {hint}")]
    IllConditioned { condition: f64, hint: String },

    #[error("operator is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("building F for pair ({i}, {j}) failed: {source}")]
    Pair {
        i: String,
        j: String,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
